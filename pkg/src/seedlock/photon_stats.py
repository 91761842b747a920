"""Photon-number statistics of phase-averaged coherent states and the
classical intensity-distribution analytics used to read interferometer data.
"""
from __future__ import annotations

import csv
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import optimize, stats

from .interferometry import COSINE_QUADRATURE, SINE_QUADRATURE, InterferometerConfig, train_to_voltages

TAIL_TOLERANCE = 1e-12
# coherences are amplitudes, so the discarded block scales like sqrt(tail) ~ 1e-6
TRUNCATION_TOLERANCE = 1e-5
MIN_CLASSIFY_SAMPLES = 1000
KS_ALPHA = 0.01
KS_MARGIN = 1.5


class TruncationError(ValueError):
    pass


class MissingBaselineError(ValueError):
    pass


# --------------------------------------------------------------------------
# quantum side
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseModel:
    """Distribution of the global optical phase of a pulse.

    kind is one of ``uniform``, ``discrete`` (``points`` equally spaced
    values), ``gaussian`` (``mean``, ``std``) or ``fixed`` (``value``).
    """

    kind: str = "uniform"
    points: int = 1
    mean: float = 0.0
    std: float = 0.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "discrete", "gaussian", "fixed"):
            raise ValueError(f"unknown phase model {self.kind!r}")
        if self.kind == "discrete" and self.points < 1:
            raise ValueError("discrete phase model needs points >= 1")
        if self.std < 0:
            raise ValueError("std must be non-negative")

    def characteristic(self, k):
        """E[exp(i k theta)] for integer ``k`` (array)."""
        k = np.asarray(k)
        if self.kind == "uniform":
            return (k == 0).astype(complex)
        if self.kind == "discrete":
            return (k % self.points == 0).astype(complex)
        if self.kind == "gaussian":
            return np.exp(1j * k * self.mean - 0.5 * (k * self.std) ** 2)
        return np.exp(1j * k * self.value)


@dataclass(frozen=True)
class CoherentSource:
    mean_photon_number: float
    phase_model: PhaseModel = field(default_factory=PhaseModel)

    def __post_init__(self):
        if not self.mean_photon_number >= 0:
            raise ValueError("mean_photon_number must be non-negative")


class PhotonNumberDistribution(NamedTuple):
    probabilities: np.ndarray
    truncation_remainder: float
    coherence: float


class TraceDistance(NamedTuple):
    distance: float
    dimension: int
    truncation_error: float


def density_matrix(source: CoherentSource, dim: int) -> np.ndarray:
    """Phase-averaged state in the Fock basis |0>..|dim-1>."""
    mu = source.mean_photon_number
    n = np.arange(dim)
    amp = np.sqrt(stats.poisson.pmf(n, mu)) if mu > 0 else (n == 0).astype(float)
    k = n[:, None] - n[None, :]
    return np.outer(amp, amp) * source.phase_model.characteristic(k)


def photon_number_distribution(source: CoherentSource, n_max: int) -> PhotonNumberDistribution:
    """Diagonal of the phase-averaged state for n = 0..n_max.

    The diagonal is Poisson for every phase model; only the coherences
    (reported as the l1 norm of the off-diagonal part) depend on it.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    rho = density_matrix(source, n_max + 1)
    probs = rho.diagonal().real.copy()
    mu = source.mean_photon_number
    remainder = float(stats.poisson.sf(n_max, mu)) if mu > 0 else 0.0
    coherence = float(np.abs(rho[~np.eye(n_max + 1, dtype=bool)]).sum())
    return PhotonNumberDistribution(probs, remainder, coherence)


def truncation_dimension(mu: float, tol: float = TAIL_TOLERANCE) -> int:
    """Smallest D with Poisson mass beyond |D-1> below ``tol``."""
    d = max(int(mu) + 1, 1)
    while stats.poisson.sf(d - 1, mu) >= tol:
        d += 1
    return d


def _trace_distance(source: CoherentSource, dim: int) -> float:
    rho = density_matrix(source, dim)
    diff = rho - np.diag(rho.diagonal())
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def randomization_quality(source: CoherentSource, tol: float = TRUNCATION_TOLERANCE) -> TraceDistance:
    """Trace distance between the source and the ideal Poisson mixture.

    Computed at the tail-based dimension D and at 2D; their difference is
    reported as the truncation error and must stay below ``tol``.
    """
    mu = source.mean_photon_number
    if not mu > 0:
        raise ValueError("randomization_quality needs mean_photon_number > 0")
    d = truncation_dimension(mu)
    t1 = _trace_distance(source, d)
    t2 = _trace_distance(source, 2 * d)
    err = abs(t2 - t1)
    if err > tol:
        raise TruncationError(f"trace distance not converged at D={d}: |T(D)-T(2D)|={err:.3g}")
    return TraceDistance(min(t2, 1.0), 2 * d, err)


# --------------------------------------------------------------------------
# arcsine law
# --------------------------------------------------------------------------

def _check_open_unit(v):
    v = np.asarray(v, dtype=float)
    if np.any((v <= 0.0) | (v >= 1.0)):
        raise ValueError("arcsine density diverges at the endpoints; need 0 < v < 1")
    return v


def arcsine_pdf(v):
    """Density of [1 + sin(U)]/2 for uniform U: 1 / (pi sqrt(v (1 - v)))."""
    v = _check_open_unit(v)
    out = 1.0 / (np.pi * np.sqrt(v * (1.0 - v)))
    return float(out) if out.ndim == 0 else out


def arcsine_cdf(v):
    v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
    out = 2.0 / np.pi * np.arcsin(np.sqrt(v))
    return float(out) if out.ndim == 0 else out


def _scaled_arcsine_cdf(x, center: float, half_width: float):
    z = np.clip((x - center) / half_width, -1.0, 1.0)
    return 0.5 + np.arcsin(z) / np.pi


# --------------------------------------------------------------------------
# histograms
# --------------------------------------------------------------------------

class Summary(NamedTuple):
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float


@dataclass(frozen=True, eq=False)
class IntensityHistogram:
    """Binned voltages on [0, 1].  Out-of-range samples land in the end bins.

    Raw power sums are kept so that histograms merge exactly.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    power_sums: tuple[float, float, float, float]

    def __post_init__(self):
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if self.counts.size != self.bin_edges.size - 1:
            raise ValueError("need one count per bin")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_samples(cls, values, bins: int = 200) -> IntensityHistogram:
        v = np.asarray(values, dtype=float)
        edges = np.linspace(0.0, 1.0, bins + 1)
        counts, _ = np.histogram(np.clip(v, 0.0, 1.0), bins=edges)
        sums = tuple(float(np.sum(v ** p)) for p in (1, 2, 3, 4))
        return cls(edges, counts.astype(np.int64), sums)

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    @property
    def summary(self) -> Summary:
        n = self.n_samples
        s1, s2, s3, s4 = (s / n for s in self.power_sums)
        var = max(s2 - s1 ** 2, 0.0)
        m3 = s3 - 3 * s1 * s2 + 2 * s1 ** 3
        m4 = s4 - 4 * s1 * s3 + 6 * s1 ** 2 * s2 - 3 * s1 ** 4
        std = math.sqrt(var)
        if var == 0.0:
            return Summary(s1, 0.0, 0.0, 0.0)
        return Summary(s1, std, m3 / std ** 3, m4 / var ** 2 - 3.0)

    def merge(self, other: IntensityHistogram) -> IntensityHistogram:
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ValueError("cannot merge histograms with different bins")
        sums = tuple(a + b for a, b in zip(self.power_sums, other.power_sums))
        return IntensityHistogram(self.bin_edges, self.counts + other.counts, sums)

    def ecdf(self) -> np.ndarray:
        """Empirical CDF evaluated at every bin edge."""
        return np.concatenate([[0.0], np.cumsum(self.counts)]) / self.n_samples

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_left", "bin_right", "count"])
            for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------

class Verdict(str, Enum):
    U_TYPE = "u_type"
    GAUSSIAN = "gaussian"
    AMBIGUOUS = "ambiguous"


class Classification(NamedTuple):
    ks_vs_arcsine: float
    ks_vs_best_gaussian: float
    verdict: Verdict
    threshold: float


def ks_threshold(n: int) -> float:
    return KS_MARGIN * float(stats.kstwo.ppf(1.0 - KS_ALPHA, n))


def _ks_best_arcsine(hist: IntensityHistogram) -> float:
    # the arcsine CDF is singular at its support edges, so a moment fit is
    # far too coarse; minimise the binned KS distance over (center, width)
    edges, ecdf = hist.bin_edges, hist.ecdf()
    s = hist.summary

    def dist(p):
        return float(np.abs(ecdf - _scaled_arcsine_cdf(edges, p[0], abs(p[1]) + 1e-12)).max())

    r0 = math.sqrt(2.0) * s.std
    starts = [(s.mean + dm, r0 * fr) for dm in (-0.01, 0.0, 0.01) for fr in (0.97, 1.0, 1.03)]
    x0 = min(starts, key=dist)
    res = optimize.minimize(dist, x0, method="Nelder-Mead",
                            options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 2000})
    return min(float(res.fun), dist(x0))


def classify_distribution(hist: IntensityHistogram) -> Classification:
    """Decide between a U-type (arcsine) and a Gaussian intensity law.

    Both distances are Kolmogorov-Smirnov statistics on the binned CDF.  The
    arcsine is the closest member of its location-scale family; the Gaussian
    is moment matched.  A verdict needs the winning distance below 1.5x the
    KS critical value at alpha = 0.01 for the sample size.
    """
    n = hist.n_samples
    if n < MIN_CLASSIFY_SAMPLES:
        raise ValueError(f"need at least {MIN_CLASSIFY_SAMPLES} samples, got {n}")
    s = hist.summary
    ks_arc = _ks_best_arcsine(hist)
    if s.std > 0:
        ks_gauss = float(np.abs(hist.ecdf() - stats.norm.cdf(hist.bin_edges, s.mean, s.std)).max())
    else:
        ks_gauss = 1.0
    thr = ks_threshold(n)
    if ks_arc < ks_gauss and ks_arc < thr:
        verdict = Verdict.U_TYPE
    elif ks_gauss < ks_arc and ks_gauss < thr:
        verdict = Verdict.GAUSSIAN
    else:
        verdict = Verdict.AMBIGUOUS
    return Classification(ks_arc, ks_gauss, verdict, thr)


def quadrature_std_curve(phases_by_power: Mapping[float, np.ndarray],
                         config: InterferometerConfig | None = None,
                         seed: int = 0) -> dict[float, tuple[float, float]]:
    """Std of the sine- and cosine-quadrature voltages per control power,
    each normalized by its value at zero power.
    """
    config = config or InterferometerConfig(detector_noise_rms=0.0)
    if 0.0 not in phases_by_power and 0 not in phases_by_power:
        raise MissingBaselineError("phases_by_power needs a zero-power entry")
    raw = {}
    for power, phases in phases_by_power.items():
        out = []
        for theta0 in (SINE_QUADRATURE, COSINE_QUADRATURE):
            cfg = InterferometerConfig(inherent_phase=theta0, visibility=config.visibility,
                                       timing_jitter_rms=config.timing_jitter_rms,
                                       detector_noise_rms=config.detector_noise_rms,
                                       pulse_width_3db=config.pulse_width_3db)
            out.append(float(np.std(train_to_voltages(phases, cfg, seed=seed))))
        raw[float(power)] = tuple(out)
    base_s, base_c = raw[0.0]
    if base_s == 0.0 or base_c == 0.0:
        raise MissingBaselineError("zero-power baseline has zero spread")
    return {p: (s / base_s, c / base_c) for p, (s, c) in sorted(raw.items())}

