"""Decoy-state key rate and the phase-randomization security verdict."""
from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

VERDICT_TOLERANCE = 1e-6
FLUCTUATION_GRID = 21
E0 = 0.5


class DecoyEstimationError(ArithmeticError):
    """The decoy bounds produced a negative single-photon yield."""


@dataclass(frozen=True)
class KeyRateParams:
    signal_mu: float = 0.5
    decoy_nu: float = 0.1
    channel_transmittance: float = 10 ** (-0.2 * 50 / 10)
    detector_efficiency: float = 0.1
    dark_count_prob: float = 1e-6
    error_correction_inefficiency: float = 1.16
    misalignment_error: float = 0.01
    intensity_fluctuation: float = 0.0

    def __post_init__(self):
        if not self.signal_mu > 0:
            raise ValueError("signal_mu must be positive")
        if not 0 <= self.decoy_nu < self.signal_mu:
            raise ValueError("decoy_nu must satisfy 0 <= decoy_nu < signal_mu")
        for name in ("channel_transmittance", "detector_efficiency", "dark_count_prob", "misalignment_error"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.error_correction_inefficiency >= 1.0:
            raise ValueError("error_correction_inefficiency must be >= 1")
        if not 0.0 <= self.intensity_fluctuation < 1.0:
            raise ValueError("intensity_fluctuation must lie in [0, 1)")

    @property
    def eta(self) -> float:
        return self.channel_transmittance * self.detector_efficiency


def h2(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def gain_and_error(lam, p: KeyRateParams):
    """Overall gain Q and error-weighted gain E*Q for intensity ``lam``."""
    det = -np.expm1(-p.eta * np.asarray(lam, dtype=float))
    q = p.dark_count_prob + det
    eq = E0 * p.dark_count_prob + p.misalignment_error * det
    return q, eq


def _h2(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return np.where((x <= 0.0) | (x >= 1.0), 0.0, out)


def _rate(assumed_mu, assumed_nu, actual_mu, actual_nu, p: KeyRateParams) -> np.ndarray:
    # Alice plugs her nominal intensities into the bounds while the channel
    # sees the actual ones
    q_mu, eq_mu = gain_and_error(actual_mu, p)
    q_nu, _ = gain_and_error(actual_nu, p)
    mu, nu = np.asarray(assumed_mu, dtype=float), np.asarray(assumed_nu, dtype=float)
    y0_upper = eq_mu * np.exp(mu) / E0
    y1 = mu / (mu * nu - nu ** 2) * (q_nu * np.exp(nu) - (nu ** 2 / mu ** 2) * q_mu * np.exp(mu)
                                     - (mu ** 2 - nu ** 2) / mu ** 2 * y0_upper)
    if np.any(y1 < 0):
        raise DecoyEstimationError(f"single-photon yield lower bound is negative ({np.min(y1):.3g})")
    y0_lower = np.maximum(0.0, (nu * q_mu * np.exp(mu) - mu * q_nu * np.exp(nu)) / (nu - mu))
    q1 = y1 * mu * np.exp(-mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        e1 = np.minimum((eq_mu * np.exp(mu) - E0 * y0_lower) / (y1 * mu), 0.5)
    e_mu = eq_mu / q_mu
    r = -q_mu * p.error_correction_inefficiency * _h2(e_mu) + q1 * (1.0 - _h2(e1))
    return np.where(q1 > 0, np.maximum(r, 0.0), 0.0)


def gllp_decoy_rate(params: KeyRateParams) -> float:
    """Asymptotic one-decoy key rate per signal pulse, clamped at zero.

    With ``intensity_fluctuation = d > 0`` the rate is minimised over actual
    and assumed intensities anywhere in ``[x (1 - d), x (1 + d)]``.
    """
    p = params
    if p.eta == 0.0:
        return 0.0
    if p.decoy_nu == 0.0:
        raise ValueError("one-decoy estimate needs decoy_nu > 0")
    d = p.intensity_fluctuation
    if d == 0.0:
        return float(_rate(p.signal_mu, p.decoy_nu, p.signal_mu, p.decoy_nu, p))
    grid = np.linspace(1.0 - d, 1.0 + d, FLUCTUATION_GRID)
    am, an, bm, bn = np.meshgrid(grid, grid, grid, grid, indexing="ij", sparse=True)
    mu, nu = p.signal_mu * am, p.decoy_nu * an
    r = _rate(p.signal_mu * bm, p.decoy_nu * bn, mu, nu, p)
    valid = np.broadcast_to(nu < mu, r.shape)
    return float(r[valid].min())


def rate_table(params: KeyRateParams, deltas: Iterable[float]) -> list[tuple[float, float, float]]:
    """(delta, rate, relative_loss) rows against the delta = 0 rate."""
    base = gllp_decoy_rate(replace(params, intensity_fluctuation=0.0))
    rows = []
    for d in deltas:
        r = gllp_decoy_rate(replace(params, intensity_fluctuation=float(d)))
        rows.append((float(d), r, 1.0 - r / base if base > 0 else 0.0))
    return rows


def write_rate_csv(rows: Sequence[tuple[float, float, float]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta", "rate", "relative_loss"])
        for d, r, loss in rows:
            w.writerow([repr(d), repr(r), repr(loss)])


class SecurityVerdict(str, Enum):
    ASSURED = "assured"
    VOID = "void"


def security_verdict(randomization_quality: float, locked: bool,
                     tolerance: float = VERDICT_TOLERANCE) -> SecurityVerdict:
    if not 0.0 <= randomization_quality <= 1.0:
        raise ValueError("trace distance must lie in [0, 1]")
    if locked or randomization_quality > tolerance:
        return SecurityVerdict.VOID
    return SecurityVerdict.ASSURED


def combine_verdicts(verdicts: Iterable[SecurityVerdict]) -> SecurityVerdict:
    """Any void component voids the whole report."""
    verdicts = list(verdicts)
    if any(SecurityVerdict(v) is SecurityVerdict.VOID for v in verdicts):
        return SecurityVerdict.VOID
    return SecurityVerdict.ASSURED
