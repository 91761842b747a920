"""Gain-switched semiconductor laser with spontaneous-emission phase diffusion.

Single-mode complex-envelope rate equations in photon-number units::

    dN/dt = I(t)/q - N/tau_n - G(N) |E|^2
    dE/dt = 1/2 (1 + i alpha) (G(N) - 1/tau_p) E + s_inj(t) + F(t)

with modal gain ``G(N) = Gamma g (N - N_tr)``, spontaneous-emission Langevin
force ``<F F*> = beta N / tau_n`` and a coherent injection drive
``s_inj = sqrt(R_inj / tau_p) exp(i (2 pi detuning t + psi(t)))`` where
``R_inj`` is the injected photon flux and ``psi`` is a Wiener phase with the
injected field's Lorentzian linewidth.  The field is expressed in a frame
rotating at the lasing frequency of the solitary laser at threshold, so
``|E|^2`` is the intracavity photon number.

Each drive period is integrated over a window that starts ``pre_roll`` before
the drive edge.  Below threshold the field forgets its past within a few
picoseconds, so successive windows are statistically independent apart from
the injected phase, which is carried across periods explicitly.  This lets a
whole train be integrated in parallel across pulses.
"""
from __future__ import annotations

import csv
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import constants

from .circular import TWO_PI, circ_mean, wrap

log = logging.getLogger(__name__)

CHUNK_SIZE = 2048
MAX_CLAMP_FRACTION = 1e-3
TURN_ON_FRACTION = 0.1
OSCILLATION_FRACTION = 0.2
TRIM_FRACTION = 0.05


class IntegrationError(FloatingPointError):
    """Non-finite state during integration, or too many clamped steps."""


class DegeneratePulseError(ValueError):
    """Envelope carries no energy."""


@dataclass(frozen=True)
class DrivePulse:
    bias_current: float = 15e-3
    peak_current: float = 66e-3
    rise_time: float = 30e-12
    flat_top_duration: float = 170e-12
    fall_time: float = 30e-12
    repetition_rate: float = 206.34e6

    def __post_init__(self):
        for name in ("rise_time", "flat_top_duration", "fall_time"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.duration > 0:
            raise ValueError("drive pulse duration must be positive")
        if not self.repetition_rate > 0:
            raise ValueError("repetition_rate must be positive")
        if not self.bias_current >= 0:
            raise ValueError("bias_current must be non-negative")
        if not self.peak_current > self.bias_current:
            raise ValueError("peak_current must exceed bias_current")
        if not self.period > self.duration:
            raise ValueError("repetition period must exceed the drive pulse duration")

    @property
    def period(self) -> float:
        return 1.0 / self.repetition_rate

    @property
    def duration(self) -> float:
        return self.rise_time + self.flat_top_duration + self.fall_time

    def current(self, t: float) -> float:
        """Drive current at time ``t`` after the drive edge (trapezoid)."""
        r, f = self.rise_time, self.flat_top_duration
        ib, ip = self.bias_current, self.peak_current
        if t <= 0.0 or t >= self.duration:
            return ib
        if t < r:
            return ib + (ip - ib) * t / r
        if t <= r + f:
            return ip
        return ip - (ip - ib) * (t - r - f) / self.fall_time


@dataclass(frozen=True)
class LaserConfig:
    """Rate-equation coefficients and integration settings.

    Defaults are representative 1550 nm DFB values, not a calibration of
    any particular diode.
    """

    carrier_lifetime: float = 1e-9
    photon_lifetime: float = 3e-12
    gain_coefficient: float = 3e4
    transparency_carrier_number: float = 1e8
    linewidth_enhancement_factor: float = 5.0
    spontaneous_emission_fraction: float = 1e-4
    confinement_factor: float = 0.3
    drive: DrivePulse = field(default_factory=DrivePulse)
    rng_seed: int = 0
    wavelength: float = 1550e-9
    output_coupling: float = 0.5
    time_step: float = 0.5e-12
    pre_roll: float = 100e-12
    tail: float = 300e-12

    def __post_init__(self):
        for name in ("carrier_lifetime", "photon_lifetime", "gain_coefficient",
                     "transparency_carrier_number", "wavelength", "time_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("spontaneous_emission_fraction", "confinement_factor", "output_coupling"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not math.isfinite(self.linewidth_enhancement_factor):
            raise ValueError("linewidth_enhancement_factor must be finite")
        if self.pre_roll < 0 or self.tail < 0:
            raise ValueError("pre_roll and tail must be non-negative")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")
        ith = self.threshold_current
        if not self.drive.bias_current < ith:
            raise ValueError(f"drive.bias_current must be below threshold ({ith:.4g} A)")
        if not self.drive.peak_current > ith:
            raise ValueError(f"drive.peak_current must be above threshold ({ith:.4g} A)")
        if self.window > self.drive.period:
            raise ValueError("pre_roll + drive duration + tail must fit in one period")

    @property
    def modal_gain_coefficient(self) -> float:
        return self.confinement_factor * self.gain_coefficient

    @property
    def threshold_carrier_number(self) -> float:
        return self.transparency_carrier_number + 1.0 / (
            self.modal_gain_coefficient * self.photon_lifetime)

    @property
    def threshold_current(self) -> float:
        return constants.e * self.threshold_carrier_number / self.carrier_lifetime

    @property
    def photon_energy(self) -> float:
        return constants.h * constants.c / self.wavelength

    @property
    def watts_per_photon(self) -> float:
        """Output power carried by one intracavity photon."""
        return self.output_coupling * self.photon_energy / self.photon_lifetime

    @property
    def window(self) -> float:
        return self.pre_roll + self.drive.duration + self.tail

    @property
    def n_steps(self) -> int:
        return int(round(self.window / self.time_step))


@dataclass(frozen=True)
class InjectedField:
    """Eve's seeding light at the laser facet."""

    facet_power: float = 0.0
    detuning: float = 0.0
    linewidth: float = 0.0
    gate: tuple[float, float] | None = None
    enabled: bool = False

    def __post_init__(self):
        if not self.facet_power >= 0:
            raise ValueError("facet_power must be non-negative")
        if not self.linewidth >= 0:
            raise ValueError("linewidth must be non-negative")
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")
        if self.gate is not None:
            start, duration = self.gate
            if not duration > 0:
                raise ValueError("gate duration must be positive")
            object.__setattr__(self, "gate", (float(start), float(duration)))

    @property
    def effective_power(self) -> float:
        return self.facet_power if self.enabled else 0.0

    def is_open(self, t: float, period: float) -> bool:
        if self.gate is None:
            return True
        start, duration = self.gate
        if duration >= period:
            return True
        return (t - start) % period < duration


@dataclass(eq=False)
class PulseRecord:
    """One emitted pulse.

    ``envelope`` is the complex output field in sqrt(W); sample ``i`` sits at
    ``t_start + i * dt`` relative to the drive edge.
    """

    envelope: np.ndarray
    dt: float
    t_start: float = 0.0
    phase: float = float("nan")
    peak_power: float = float("nan")
    turn_on_time: float = float("nan")
    width_3db: float = float("nan")
    pulse_index: int = 0
    injected_phase: float = float("nan")

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.envelope.size)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.envelope) ** 2


class ShapeMetrics(NamedTuple):
    turn_on_time: float
    width_3db: float
    peak_power: float
    oscillation_count: int


@dataclass(eq=False)
class PulseTrain(Sequence):
    """Records of a simulated train plus integration diagnostics."""

    records: list[PulseRecord]
    clamped_steps: int = 0
    total_steps: int = 0

    def __getitem__(self, i):
        return self.records[i]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PulseRecord]:
        return iter(self.records)

    @property
    def phases(self) -> np.ndarray:
        return np.array([r.phase for r in self.records])

    @property
    def injected_phases(self) -> np.ndarray:
        return np.array([r.injected_phase for r in self.records])

    @property
    def turn_on_times(self) -> np.ndarray:
        return np.array([r.turn_on_time for r in self.records])

    @property
    def peak_powers(self) -> np.ndarray:
        return np.array([r.peak_power for r in self.records])

    @property
    def widths(self) -> np.ndarray:
        return np.array([r.width_3db for r in self.records])


# --------------------------------------------------------------------------
# pulse metrics
# --------------------------------------------------------------------------

def _checked_power(record: PulseRecord) -> np.ndarray:
    env = np.asarray(record.envelope)
    if env.size == 0:
        raise DegeneratePulseError("empty envelope")
    p = np.abs(env) ** 2
    if not np.any(p > 0):
        raise DegeneratePulseError(f"pulse {record.pulse_index} has an all-zero envelope")
    return p


def extract_phase(record: PulseRecord) -> float:
    """Energy-weighted circular mean of arg(envelope) over the 3 dB samples.

    The result is also written to ``record.phase``.
    """
    p = _checked_power(record)
    mask = p >= p.max() / 2.0
    env = np.asarray(record.envelope)[mask]
    phase = circ_mean(np.angle(env), weights=p[mask])
    record.phase = phase
    return phase


def _crossing(t0: float, p0: float, p1: float, level: float, dt: float) -> float:
    if p1 == p0:
        return t0
    return t0 + (level - p0) / (p1 - p0) * dt


def pulse_shape_metrics(record: PulseRecord) -> ShapeMetrics:
    """Turn-on time (first 10 % crossing), 3 dB width, peak and oscillations.

    Crossings are linearly interpolated between samples.  Oscillations are
    local maxima of the power above 20 % of the peak.
    """
    p = _checked_power(record)
    dt, t0 = record.dt, record.t_start
    peak = float(p.max())
    ipk = int(np.argmax(p))

    level = TURN_ON_FRACTION * peak
    i = int(np.argmax(p >= level))
    turn_on = t0 if i == 0 else _crossing(t0 + (i - 1) * dt, p[i - 1], p[i], level, dt)

    half = peak / 2.0
    below = p < half
    left = ipk
    while left > 0 and not below[left - 1]:
        left -= 1
    right = ipk
    while right < p.size - 1 and not below[right + 1]:
        right += 1
    t_left = t0 + left * dt
    if left > 0:
        t_left = _crossing(t0 + (left - 1) * dt, p[left - 1], p[left], half, dt)
    t_right = t0 + right * dt
    if right < p.size - 1:
        t_right = _crossing(t0 + right * dt, p[right], p[right + 1], half, dt)
    width = t_right - t_left

    inner = p[1:-1]
    is_max = (inner > p[:-2]) & (inner >= p[2:]) & (inner >= OSCILLATION_FRACTION * peak)
    count = int(is_max.sum())
    # a maximum sitting on the array boundary still counts
    if p.size == 1 or (p[0] > p[1] and p[0] >= OSCILLATION_FRACTION * peak):
        count += 1
    if p.size > 1 and p[-1] > p[-2] and p[-1] >= OSCILLATION_FRACTION * peak:
        count += 1
    return ShapeMetrics(turn_on, width, peak, count)


def _fill_metrics(record: PulseRecord) -> None:
    extract_phase(record)
    m = pulse_shape_metrics(record)
    record.turn_on_time = m.turn_on_time
    record.width_3db = m.width_3db
    record.peak_power = m.peak_power


def _trim(env: np.ndarray, t_start: float, dt: float) -> tuple[np.ndarray, float]:
    p = np.abs(env) ** 2
    idx = np.flatnonzero(p >= TRIM_FRACTION * p.max())
    lo = max(int(idx[0]) - 2, 0)
    hi = min(int(idx[-1]) + 3, env.size)
    return env[lo:hi].copy(), t_start + lo * dt


# --------------------------------------------------------------------------
# integration
# --------------------------------------------------------------------------

class _Model:
    """Precomputed coefficients and the exponential Heun step."""

    def __init__(self, config: LaserConfig, injection: InjectedField):
        self.cfg = config
        self.inj = injection
        self.gn = config.modal_gain_coefficient
        self.n_tr = config.transparency_carrier_number
        self.inv_tn = 1.0 / config.carrier_lifetime
        self.inv_tp = 1.0 / config.photon_lifetime
        self.alpha_c = 0.5 * (1.0 + 1j * config.linewidth_enhancement_factor)
        self.beta = config.spontaneous_emission_fraction
        self.q = constants.e
        flux = injection.effective_power / config.photon_energy
        self.s_inj = math.sqrt(flux * self.inv_tp)
        self.omega = TWO_PI * injection.detuning
        self.period = config.drive.period

    def lam(self, n):
        return self.alpha_c * (self.gn * (n - self.n_tr) - self.inv_tp)

    def drift_n(self, n, s, current):
        return current / self.q - n * self.inv_tn - self.gn * (n - self.n_tr) * s

    def injection(self, t: float, psi, h: float):
        """Injection amplitude at the step midpoint (zero when gated off)."""
        if self.s_inj == 0.0 or not self.inj.is_open(t, self.period):
            return None
        return self.s_inj * np.exp(1j * (self.omega * (t + h / 2 + self.cfg.pre_roll) + psi))

    def initial_state(self, rng: np.random.Generator, n: int):
        cfg = self.cfg
        n_b = cfg.drive.bias_current * cfg.carrier_lifetime / self.q
        lam_b = self.lam(n_b)
        g_net = self.inv_tp - self.gn * (n_b - self.n_tr)
        var = self.beta * n_b * self.inv_tn / g_net
        z = rng.standard_normal((2, n))
        e0 = math.sqrt(var / 2.0) * (z[0] + 1j * z[1])
        if self.s_inj > 0 and self.inj.is_open(-cfg.pre_roll, self.period):
            e0 = e0 + self.s_inj / (1j * self.omega - lam_b)
        return e0, np.full(n, n_b)

    def step(self, e, n, t: float, h: float, dw, jj, psi):
        """Exponential stochastic Heun step.

        The linear field part is integrated exactly for frozen carriers; the
        noise enters through its increment ``dw`` and the second Ito integral
        ``jj = int (h/2 - s) dW`` so the fast alpha-induced rotation is
        resolved inside the step.
        """
        sig = np.sqrt(self.beta * np.maximum(n, 0.0) * self.inv_tn / 2.0)
        s = e.real ** 2 + e.imag ** 2
        lam0 = self.lam(n)
        f0 = self.drift_n(n, s, self.cfg.drive.current(t))
        inj = self.injection(t, psi, h)

        def advance(lam):
            half = np.exp(lam * (h / 2))
            out = e * half * half + sig * half * (dw + lam * jj)
            if inj is not None:
                out = out + inj * half * h
            return out

        e_p = advance(lam0)
        n_p = np.maximum(n + h * f0, 0.0)
        lam1 = self.lam(n_p)
        f1 = self.drift_n(n_p, e_p.real ** 2 + e_p.imag ** 2, self.cfg.drive.current(t + h))
        e_new = advance(0.5 * (lam0 + lam1))
        n_new = n + 0.5 * h * (f0 + f1)
        clamped = int(np.count_nonzero(n_new < 0.0))
        if clamped:
            n_new = np.maximum(n_new, 0.0)
        return e_new, n_new, clamped


def _draw(rng: np.random.Generator, n: int, h: float, linewidth: float):
    z = rng.standard_normal((5, n))
    dw = math.sqrt(h) * (z[0] + 1j * z[1])
    jj = math.sqrt(h ** 3 / 12.0) * (z[2] + 1j * z[3])
    dpsi = math.sqrt(TWO_PI * linewidth * h) * z[4]
    return dw, jj, dpsi


def _run_window(model: _Model, e, n, h: float, n_steps: int, noise, record_every: int = 1):
    """Integrate one window for a batch of pulses.

    ``noise(k)`` yields ``(dw, jj, dpsi)`` for step ``k``.  Returns the sampled
    envelope (photon-amplitude units), the final injected phase walk and the
    clamp count.
    """
    t0 = -model.cfg.pre_roll
    out = np.empty((n_steps // record_every, e.size), dtype=complex)
    psi = np.zeros(e.size)
    clamped = 0
    for k in range(n_steps):
        if k % record_every == 0:
            out[k // record_every] = e
        t = t0 + k * h
        dw, jj, dpsi = noise(k)
        e, n, c = model.step(e, n, t, h, dw, jj, psi)
        psi = psi + dpsi
        clamped += c
        if k % 64 == 63 and not (np.all(np.isfinite(e)) and np.all(np.isfinite(n))):
            bad = int(np.flatnonzero(~(np.isfinite(e) & np.isfinite(n)))[0])
            raise IntegrationError(
                f"non-finite state at t={t:.4e} s (step {k}, h={h:.3e} s): "
                f"N={n[bad]!r}, E={e[bad]!r}; reduce time_step or check parameters")
    return out, psi, clamped


def _validate_n(n_pulses: int) -> int:
    if int(n_pulses) != n_pulses or n_pulses < 1:
        raise ValueError("n_pulses must be a positive integer")
    return int(n_pulses)


def simulate_pulse_train(config: LaserConfig, injection: InjectedField, n_pulses: int,
                         *, trim_envelopes: bool = False) -> PulseTrain:
    """Simulate ``n_pulses`` consecutive gain-switched pulses.

    Output is a deterministic function of ``(config, injection, n_pulses)``;
    pulses are integrated in fixed-size chunks with random streams keyed by
    ``(rng_seed, chunk)``, so a shorter train is a prefix of a longer one.
    With ``trim_envelopes`` only the samples around the pulse (above 5 % of
    peak) are kept, which bounds memory for long trains.
    """
    n_pulses = _validate_n(n_pulses)
    model = _Model(config, injection)
    h = config.time_step
    n_steps = config.n_steps
    seed = int(config.rng_seed)
    scale = math.sqrt(config.watts_per_photon)
    linewidth = injection.linewidth if model.s_inj > 0 else 0.0

    envelopes: list[np.ndarray] = []
    window_walk = np.empty(n_pulses)
    records: list[PulseRecord] = []
    clamped = 0
    for c0 in range(0, n_pulses, CHUNK_SIZE):
        m = min(CHUNK_SIZE, n_pulses - c0)
        rng = np.random.default_rng([seed, 0, c0 // CHUNK_SIZE])
        # full-size draws keep each chunk independent of n_pulses
        e, n = model.initial_state(rng, CHUNK_SIZE)
        env, psi, c = _run_window(model, e[:m], n[:m], h, n_steps,
                                  lambda k: [a[:m] for a in _draw(rng, CHUNK_SIZE, h, linewidth)])
        clamped += c
        window_walk[c0:c0 + m] = psi
        envelopes.append(env)

    total = n_pulses * n_steps
    if clamped > MAX_CLAMP_FRACTION * total:
        raise IntegrationError(f"carrier number clamped at 0 in {clamped} of {total} steps")
    if clamped:
        log.info("carrier clamp applied in %d of %d steps", clamped, total)

    # injected phase at each window start, carried across periods
    rotation = np.zeros(n_pulses)
    if model.s_inj > 0:
        period = config.drive.period
        rest = np.random.default_rng([seed, 1]).standard_normal(n_pulses)
        rest *= math.sqrt(TWO_PI * linewidth * max(period - config.window, 0.0))
        psi_k = np.concatenate([[0.0], np.cumsum(window_walk + rest)[:-1]])
        k = np.arange(n_pulses)
        rotation = psi_k + model.omega * (k * period - config.pre_roll)

    idx = 0
    for env in envelopes:
        for j in range(env.shape[1]):
            z = env[:, j] * (scale * np.exp(1j * rotation[idx]))
            t_start = -config.pre_roll
            if trim_envelopes:
                z, t_start = _trim(z, t_start, h)
            rec = PulseRecord(envelope=z, dt=h, t_start=t_start, pulse_index=idx,
                              injected_phase=float(wrap(rotation[idx])) if model.s_inj > 0 else 0.0)
            _fill_metrics(rec)
            records.append(rec)
            idx += 1
    return PulseTrain(records, clamped_steps=clamped, total_steps=total)


def step_convergence(config: LaserConfig, injection: InjectedField, n_pulses: int = 200) -> float:
    """RMS change of per-pulse phase when the time step is halved (radians).

    Both runs are driven by the same Brownian path: the coarse increments are
    assembled from the fine ones, including the second Ito integral.
    """
    n_pulses = _validate_n(n_pulses)
    model = _Model(config, injection)
    h = config.time_step
    hf = h / 2.0
    n_steps = config.n_steps
    linewidth = injection.linewidth if model.s_inj > 0 else 0.0
    rng = np.random.default_rng([int(config.rng_seed), 2])
    e0, n0 = model.initial_state(rng, n_pulses)
    fine = [[_draw(rng, n_pulses, hf, linewidth) for _ in range(2)] for _ in range(n_steps)]

    def coarse(k):
        (w1, j1, p1), (w2, j2, p2) = fine[k]
        return w1 + w2, j1 + j2 + (hf / 2.0) * (w1 - w2), p1 + p2

    env_c, _, _ = _run_window(model, e0.copy(), n0.copy(), h, n_steps, coarse)
    env_f, _, _ = _run_window(model, e0.copy(), n0.copy(), hf, 2 * n_steps,
                              lambda k: fine[k // 2][k % 2], record_every=2)

    def phases(env):
        p = np.abs(env) ** 2
        w = np.where(p >= p.max(axis=0) / 2.0, p, 0.0)
        return np.angle((w * np.exp(1j * np.angle(env))).sum(axis=0))

    d = np.angle(np.exp(1j * (phases(env_c) - phases(env_f))))
    return float(np.sqrt(np.mean(d ** 2)))


def threshold_crossing_time(config: LaserConfig) -> float:
    """Time after the drive edge when the noiseless carrier reaches threshold."""
    n = config.drive.bias_current * config.carrier_lifetime / constants.e
    n_th = config.threshold_carrier_number
    h = config.time_step
    t = 0.0
    while t < config.drive.period:
        if n >= n_th:
            return t
        n += h * (config.drive.current(t) / constants.e - n / config.carrier_lifetime)
        t += h
    raise ValueError("drive never brings the carrier number to threshold")


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

PULSE_CSV_COLUMNS = ("pulse_index", "phase", "peak_power", "turn_on_time", "width_3db")


def write_pulse_csv(records: Sequence[PulseRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PULSE_CSV_COLUMNS)
        for r in records:
            w.writerow([r.pulse_index, repr(float(r.phase)), repr(float(r.peak_power)),
                        repr(float(r.turn_on_time)), repr(float(r.width_3db))])


def write_envelope_csv(records: Sequence[PulseRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("pulse_index", "time", "re", "im"))
        for r in records:
            for t, z in zip(r.times, r.envelope):
                w.writerow([r.pulse_index, repr(float(t)), repr(float(z.real)), repr(float(z.imag))])
