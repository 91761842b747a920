"""Circular statistics on phase samples (radians)."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats

TWO_PI = 2.0 * np.pi


def wrap(theta):
    """Map angles into [0, 2*pi)."""
    out = np.mod(theta, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


def resultant(theta, weights=None) -> complex:
    z = np.exp(1j * np.asarray(theta, dtype=float))
    if weights is None:
        return complex(z.mean())
    w = np.asarray(weights, dtype=float)
    return complex((w * z).sum() / w.sum())


def circ_mean(theta, weights=None) -> float:
    return float(wrap(np.angle(resultant(theta, weights))))


def circ_var(theta) -> float:
    """1 - R, in [0, 1]."""
    return 1.0 - abs(resultant(theta))


def circ_std(theta) -> float:
    """sqrt(-2 ln R); equals the ordinary std for narrow wrapped normals."""
    r = abs(resultant(theta))
    if r <= 0.0:
        return math.inf
    return math.sqrt(-2.0 * math.log(min(r, 1.0)))


def _kuiper_sf(v: float, n: int) -> float:
    # Stephens (1970) finite-n correction of the asymptotic Kuiper distribution
    lam = (math.sqrt(n) + 0.155 + 0.24 / math.sqrt(n)) * v
    if lam < 0.4:
        return 1.0
    total = 0.0
    for j in range(1, 101):
        a = 4.0 * j * j * lam * lam
        term = 2.0 * (a - 1.0) * math.exp(-a / 2.0)
        total += term
        if abs(term) < 1e-14:
            break
    return float(min(max(total, 0.0), 1.0))


def kuiper_test(theta) -> tuple[float, float]:
    """Kuiper test of uniformity on the circle.

    Returns ``(V, p_value)``. Unlike KS, V is invariant to the choice of origin.
    """
    x = np.sort(wrap(np.asarray(theta, dtype=float)) / TWO_PI)
    n = x.size
    if n < 2:
        raise ValueError("kuiper_test needs at least 2 samples")
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - x)
    d_minus = np.max(x - (i - 1) / n)
    v = float(d_plus + d_minus)
    return v, _kuiper_sf(v, n)


def rayleigh_test(theta) -> tuple[float, float]:
    """Rayleigh test against unimodal departures. Returns ``(z, p_value)``."""
    n = np.asarray(theta).size
    r = abs(resultant(theta))
    z = n * r * r
    # Zar's approximation
    p = math.exp(math.sqrt(1 + 4 * n + 4 * (n * n - (r * n) ** 2)) - (1 + 2 * n))
    return float(z), float(min(max(p, 0.0), 1.0))


def chi2_uniformity(theta, bins: int = 16) -> tuple[float, float]:
    counts, _ = np.histogram(wrap(np.asarray(theta, dtype=float)), bins=bins, range=(0.0, TWO_PI))
    res = stats.chisquare(counts)
    return float(res.statistic), float(res.pvalue)
