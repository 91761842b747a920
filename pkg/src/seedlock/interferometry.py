"""Unbalanced Mach-Zehnder interferometer and detection chain.

The delay line equals one repetition period, so every output sample is the
interference of pulse ``i`` with pulse ``i + 1``.  Voltages are normalized to
the fringe: a perfect, noiseless fringe spans [0, 1].

Sign convention: ``V = [1 + v cos(dphi + theta0)] / 2``.  With ``theta0 = pi/2``
this is ``[1 - v sin(dphi)] / 2``; the mirror image ``[1 + sin]/2`` corresponds
to ``theta0 = -pi/2`` and has the same distribution.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

SINE_QUADRATURE = math.pi / 2
COSINE_QUADRATURE = 0.0


@dataclass(frozen=True)
class InterferometerConfig:
    inherent_phase: float = SINE_QUADRATURE
    visibility: float = 1.0
    delay_matches_period: bool = True
    timing_jitter_rms: float = 0.0
    detector_noise_rms: float = 0.01
    pulse_width_3db: float = 30e-12

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")
        if not self.timing_jitter_rms >= 0:
            raise ValueError("timing_jitter_rms must be non-negative")
        if not self.detector_noise_rms >= 0:
            raise ValueError("detector_noise_rms must be non-negative")
        if not self.pulse_width_3db > 0:
            raise ValueError("pulse_width_3db must be positive")
        if not math.isfinite(self.inherent_phase):
            raise ValueError("inherent_phase must be finite")


class VoltageSample(NamedTuple):
    value: float
    pulse_pair_index: int


def mzi_response(delta_phi, theta0: float, visibility: float = 1.0):
    """Normalized detector voltage for phase difference ``delta_phi``."""
    out = 0.5 * (1.0 + visibility * np.cos(np.asarray(delta_phi, dtype=float) + theta0))
    return float(out) if np.ndim(out) == 0 else out


def _pair_visibility(config: InterferometerConfig, n: int, rng: np.random.Generator):
    if config.timing_jitter_rms == 0.0:
        return np.full(n, config.visibility)
    # relative delay of two independently jittered Gaussian pulses
    delay = rng.normal(0.0, math.sqrt(2.0) * config.timing_jitter_rms, n)
    sigma = config.pulse_width_3db / math.sqrt(8.0 * math.log(2.0))
    return config.visibility * np.exp(-(delay ** 2) / (8.0 * sigma ** 2))


def train_to_voltages(phases, config: InterferometerConfig, seed: int | None = 0) -> np.ndarray:
    """Voltages for every adjacent pulse pair; element ``i`` is pair (i, i+1).

    Length is ``len(phases) - 1``.  Noise is drawn from a generator seeded with
    ``seed``.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.ndim != 1 or phases.size < 2:
        raise ValueError("train_to_voltages needs at least 2 phases")
    if not config.delay_matches_period:
        raise ValueError("interferometer delay must match the repetition period")
    rng = np.random.default_rng(seed)
    n = phases.size - 1
    vis = _pair_visibility(config, n, rng)
    v = mzi_response(np.diff(phases), config.inherent_phase, vis)
    v = np.atleast_1d(v)
    if config.detector_noise_rms > 0:
        v = v + rng.normal(0.0, config.detector_noise_rms, n)
    return v


def as_samples(voltages) -> list[VoltageSample]:
    return [VoltageSample(float(v), i) for i, v in enumerate(voltages)]


def sampling_budget(record_samples: int, repetition_rate: float, sample_rate: float) -> tuple[int, int]:
    """Oscilloscope samples per laser cycle and whole pulses in a record.

    >>> sampling_budget(10_000_000, 206.34e6, 80e9)
    (388, 25773)
    """
    if not repetition_rate > 0 or not sample_rate > 0:
        raise ValueError("rates must be positive")
    if not sample_rate > repetition_rate:
        raise ValueError("sample_rate must exceed repetition_rate")
    if record_samples < 0:
        raise ValueError("record_samples must be non-negative")
    per_cycle = int(round(sample_rate / repetition_rate))
    return per_cycle, int(record_samples) // per_cycle


def write_voltage_csv(voltages, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["voltage"])
        for v in voltages:
            w.writerow([repr(float(v))])
