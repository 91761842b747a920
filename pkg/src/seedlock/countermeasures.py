"""Alice's monitoring stack: isolators, a spectral filter, an average-power
meter and a finite-bandwidth monitoring photodiode.

Stack evaluation takes the attack waveform as it arrives at Alice's output
port (channel loss already applied).  Monitors tap that light before any
filtering or isolation; the filter then acts, then the isolators in order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Protocol

from scipy import integrate, optimize, special

C_LIGHT = 299_792_458.0
FWHM_TO_SIGMA = 1.0 / math.sqrt(8.0 * math.log(2.0))
MIN_METER_PERIODS = 100
# relative slack so a frequency exactly on the passband edge survives rounding
EDGE_RTOL = 1e-12


class ResponseModel(str, Enum):
    IDEAL_LOWPASS = "ideal_lowpass"
    SINGLE_POLE = "single_pole"


@dataclass(frozen=True)
class SpectralFilter:
    """Brick-wall passband with closed edges.  ``center_wavelength=None``
    centres it on the signal wavelength."""

    passband: float
    center_wavelength: float | None = None

    def __post_init__(self):
        if not self.passband > 0:
            raise ValueError("filter passband must be positive")
        if self.center_wavelength is not None and not self.center_wavelength > 0:
            raise ValueError("filter center_wavelength must be positive")


@dataclass(frozen=True)
class PowerMeter:
    window: float = 1e-3
    threshold: float = 1e-6

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("power meter window must be positive")
        if not self.threshold > 0:
            raise ValueError("power meter threshold must be positive")


@dataclass(frozen=True)
class MonitorDetector:
    gain: float = 1e4
    bandwidth: float = 1e9
    response_model: ResponseModel = ResponseModel.IDEAL_LOWPASS
    discrimination_voltage: float = 0.2
    damage_threshold: float = 10e-3

    def __post_init__(self):
        object.__setattr__(self, "response_model", ResponseModel(self.response_model))
        for name in ("gain", "bandwidth", "discrimination_voltage", "damage_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"monitor detector {name} must be positive")


@dataclass(frozen=True)
class CountermeasureStack:
    isolators: tuple[float, ...] = ()
    filter: SpectralFilter | None = None
    power_meter: PowerMeter | None = None
    monitor_detector: MonitorDetector | None = None

    def __post_init__(self):
        object.__setattr__(self, "isolators", tuple(float(x) for x in self.isolators))
        if any(not x >= 0 for x in self.isolators):
            raise ValueError("isolation must be >= 0 dB")

    @property
    def total_isolation_db(self) -> float:
        return float(sum(self.isolators))


class Waveform(Protocol):
    peak_power: float
    width_3db: float
    repetition_rate: float
    wavelength: float


def isolator_transmit(power_in: float, isolation_db: float) -> float:
    if not power_in >= 0:
        raise ValueError("power_in must be non-negative")
    if not isolation_db >= 0:
        raise ValueError("isolation must be >= 0 dB")
    return power_in * 10.0 ** (-isolation_db / 10.0)


def filter_transmit(power_in: float, signal_wavelength: float, eve_wavelength: float,
                    filt: SpectralFilter | None) -> float:
    if not signal_wavelength > 0 or not eve_wavelength > 0:
        raise ValueError("wavelengths must be positive")
    if filt is None:
        return power_in
    center = filt.center_wavelength or signal_wavelength
    f0, fe = C_LIGHT / center, C_LIGHT / eve_wavelength
    inside = abs(fe - f0) <= 0.5 * filt.passband + EDGE_RTOL * f0
    return power_in if inside else 0.0


def average_power_reading(peak_power: float, pulse_width_3db: float, repetition_rate: float,
                          window: float) -> float:
    """Rectangular duty-cycle estimate of what a slow power meter reads."""
    if not repetition_rate > 0 or not pulse_width_3db > 0:
        raise ValueError("width and repetition rate must be positive")
    duty = pulse_width_3db * repetition_rate
    if duty > 1.0 + 1e-12:
        raise ValueError("pulse width exceeds the repetition period")
    if window * repetition_rate < MIN_METER_PERIODS:
        raise ValueError(f"power meter window must cover >= {MIN_METER_PERIODS} periods")
    return peak_power * min(duty, 1.0)


def _single_pole_output(t: float, sigma: float, wc: float) -> float:
    # Gaussian through h(s) = wc exp(-wc s), s >= 0
    def f(s):
        return wc * math.exp(-wc * s - (t - s) ** 2 / (2.0 * sigma ** 2))
    tau = 1.0 / wc
    lo, hi = max(0.0, t - 10 * sigma), max(0.0, t + 10 * sigma)
    pts = [p for p in (t,) if lo < p < hi]
    val, _ = integrate.quad(f, lo, hi, points=pts or None, limit=200, epsabs=1e-13, epsrel=1e-11)
    if hi < 60 * tau:
        # exponential tail beyond the Gaussian support is negligible otherwise
        tail, _ = integrate.quad(f, hi, hi + 60 * tau, limit=200, epsabs=1e-14)
        val += tail
    return val


def lowpass_peak_amplitude(width_3db: float, bandwidth: float,
                           response_model: ResponseModel | str = ResponseModel.IDEAL_LOWPASS) -> float:
    """Peak of a unit-peak Gaussian pulse after a low-pass filter.

    ``ideal_lowpass`` is a brick wall at angular cutoff ``2 pi bandwidth``,
    whose output peak is ``erf(w0 sigma / sqrt 2)``.  ``single_pole`` has a
    3 dB bandwidth of ``bandwidth`` and is evaluated by numerical convolution.
    """
    if not width_3db > 0 or not bandwidth > 0:
        raise ValueError("width and bandwidth must be positive")
    model = ResponseModel(response_model)
    if math.isinf(bandwidth):
        return 1.0
    sigma = width_3db * FWHM_TO_SIGMA
    w0 = 2.0 * math.pi * bandwidth
    if model is ResponseModel.IDEAL_LOWPASS:
        return float(special.erf(w0 * sigma / math.sqrt(2.0)))
    tau = 1.0 / w0
    res = optimize.minimize_scalar(lambda t: -_single_pole_output(t, sigma, w0),
                                   bounds=(0.0, 3.0 * sigma + 5.0 * tau), method="bounded",
                                   options={"xatol": 1e-6 * min(sigma, tau)})
    return float(min(-res.fun, 1.0))


class MonitorReading(NamedTuple):
    voltage: float
    alarm: bool
    damaged: bool


def monitor_response(peak_power: float, width_3db: float, detector: MonitorDetector) -> MonitorReading:
    if not peak_power >= 0:
        raise ValueError("peak_power must be non-negative")
    amp = lowpass_peak_amplitude(width_3db, detector.bandwidth, detector.response_model)
    voltage = detector.gain * peak_power * amp
    return MonitorReading(voltage, voltage >= detector.discrimination_voltage,
                          peak_power >= detector.damage_threshold)


class StackRow(NamedTuple):
    component: str
    power_in: float
    power_out: float
    alarm: bool
    damaged: bool


@dataclass(frozen=True)
class StackReport:
    power_at_laser: float
    alarms: frozenset[str]
    damaged: frozenset[str]
    rows: tuple[StackRow, ...] = field(default=())

    @property
    def clean(self) -> bool:
        return not self.alarms and not self.damaged

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(StackRow._fields)
            for r in self.rows:
                w.writerow([r.component, repr(r.power_in), repr(r.power_out),
                            str(r.alarm).lower(), str(r.damaged).lower()])

    def report(self) -> str:
        lines = [f"power_at_laser: {self.power_at_laser!r}",
                 f"alarms: {','.join(sorted(self.alarms)) or 'none'}",
                 f"damaged: {','.join(sorted(self.damaged)) or 'none'}"]
        return "\n".join(lines) + "\n"


def stack_evaluate(waveform: Waveform, stack: CountermeasureStack, signal_wavelength: float) -> StackReport:
    """Peak power reaching the laser facet plus every monitor verdict.

    ``waveform.peak_power`` is the peak arriving at Alice's output port.
    """
    peak = waveform.peak_power
    rows: list[StackRow] = []
    alarms: set[str] = set()
    damaged: set[str] = set()

    if stack.power_meter is not None:
        pm = stack.power_meter
        reading = average_power_reading(peak, waveform.width_3db, waveform.repetition_rate, pm.window)
        alarm = reading >= pm.threshold
        rows.append(StackRow("power_meter", peak, reading, alarm, False))
        if alarm:
            alarms.add("power_meter")
    if stack.monitor_detector is not None:
        det = stack.monitor_detector
        m = monitor_response(peak, waveform.width_3db, det)
        rows.append(StackRow("monitor_detector", peak, m.voltage / det.gain, m.alarm, m.damaged))
        if m.alarm:
            alarms.add("monitor_detector")
        if m.damaged:
            damaged.add("monitor_detector")

    power = peak
    if stack.filter is not None:
        out = filter_transmit(power, signal_wavelength, waveform.wavelength, stack.filter)
        rows.append(StackRow("filter", power, out, False, False))
        power = out
    for i, iso in enumerate(stack.isolators):
        out = isolator_transmit(power, iso)
        rows.append(StackRow(f"isolator_{i}", power, out, False, False))
        power = out
    return StackReport(power, frozenset(alarms), frozenset(damaged), tuple(rows))
