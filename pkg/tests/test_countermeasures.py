import math
from dataclasses import dataclass

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize, special, stats

from seedlock.countermeasures import (C_LIGHT, CountermeasureStack, MonitorDetector, PowerMeter, ResponseModel,
                                      SpectralFilter, average_power_reading, filter_transmit, isolator_transmit,
                                      lowpass_peak_amplitude, monitor_response, stack_evaluate)

WL = 1550e-9


@dataclass
class Wave:
    peak_power: float
    width_3db: float
    repetition_rate: float
    wavelength: float = WL


def brickwall_by_quadrature(width, bandwidth):
    """Inverse transform of the band-limited Gaussian spectrum at t = 0."""
    sigma = width / math.sqrt(8 * math.log(2))
    w0 = 2 * math.pi * bandwidth
    val, _ = integrate.quad(lambda w: sigma * math.sqrt(2 * math.pi) * math.exp(-(sigma * w) ** 2 / 2),
                            -w0, w0, epsabs=1e-15, epsrel=1e-13, limit=200)
    return val / (2 * math.pi)


def single_pole_oracle(width, bandwidth):
    # Gaussian convolved with a one-sided exponential is an exGaussian density
    sigma = width / math.sqrt(8 * math.log(2))
    wc = 2 * math.pi * bandwidth
    k = 1.0 / (sigma * wc)
    f = lambda t: -stats.exponnorm.pdf(t, k, scale=sigma) * sigma * math.sqrt(2 * math.pi)
    res = optimize.minimize_scalar(f, bounds=(-3 * sigma, 5 * sigma + 10 / wc), method="bounded",
                                   options={"xatol": 1e-18})
    return -res.fun


# ---- isolator / filter ---------------------------------------------------------

def test_isolator_values():
    assert isolator_transmit(0.6e-3, 0.0) == 0.6e-3
    assert isolator_transmit(0.6e-3, 25.0) == pytest.approx(1.897e-6, rel=1e-3)
    assert isolator_transmit(0.6e-3, 25.0) == pytest.approx(0.6e-3 / 10 ** 2.5, rel=1e-12)


@given(st.floats(0, 1), st.floats(0, 80), st.floats(0, 80))
def test_isolators_compose(p, a, b):
    assert isolator_transmit(isolator_transmit(p, a), b) == pytest.approx(isolator_transmit(p, a + b),
                                                                        rel=1e-12, abs=1e-300)


def test_isolator_rejects_bad_input():
    with pytest.raises(ValueError):
        isolator_transmit(-1.0, 10)
    with pytest.raises(ValueError):
        isolator_transmit(1.0, -1)


def test_filter_cases():
    f = SpectralFilter(passband=100e9)
    assert filter_transmit(1e-3, WL, WL, f) == 1e-3
    assert filter_transmit(1e-3, WL, 1551e-9, f) == 0.0
    # Eve exactly on the passband edge
    edge = C_LIGHT / (C_LIGHT / WL + 50e9)
    assert filter_transmit(1e-3, WL, edge, f) == 1e-3
    assert filter_transmit(1e-3, WL, C_LIGHT / (C_LIGHT / WL + 50.001e9), f) == 0.0
    assert filter_transmit(1e-3, WL, 1551e-9, None) == 1e-3
    centred = SpectralFilter(passband=100e9, center_wavelength=1551e-9)
    assert filter_transmit(1e-3, WL, 1551e-9, centred) == 1e-3


def test_filter_validation():
    with pytest.raises(ValueError):
        SpectralFilter(passband=0)
    with pytest.raises(ValueError):
        filter_transmit(1.0, 0.0, WL, SpectralFilter(1e9))


# ---- power meter -----------------------------------------------------------------

def test_average_power_examples():
    assert average_power_reading(0.6e-3, 100e-12, 10e6, 1e-3) == pytest.approx(0.6e-6, rel=1e-12)
    assert average_power_reading(1e-3, 50e-12, 10e6, 1e-3) == pytest.approx(0.5e-6, rel=1e-12)
    assert average_power_reading(2e-3, 1 / 10e6, 10e6, 1e-3) == 2e-3


def test_average_power_window_too_short():
    with pytest.raises(ValueError):
        average_power_reading(1e-3, 100e-12, 10e6, 5e-6)


@given(st.floats(0, 1), st.floats(1e-12, 1e-9), st.floats(1.5, 4))
def test_average_power_linear(p, w, k):
    r = average_power_reading(p, w, 10e6, 1e-3)
    assert average_power_reading(k * p, w, 10e6, 1e-3) == pytest.approx(k * r, rel=1e-12, abs=1e-300)
    assert average_power_reading(p, w * 2, 10e6, 1e-3) == pytest.approx(2 * r, rel=1e-12, abs=1e-300)


# ---- low-pass model -------------------------------------------------------------------

@pytest.mark.parametrize("width", [50e-12, 100e-12, 200e-12])
@pytest.mark.parametrize("bw", [0.5e9, 1e9, 5e9, 10e9, 40e9])
def test_ideal_lowpass_matches_quadrature(width, bw):
    amp = lowpass_peak_amplitude(width, bw)
    sigma = width / math.sqrt(8 * math.log(2))
    assert amp == pytest.approx(special.erf(2 * math.pi * bw * sigma / math.sqrt(2)), abs=1e-12)
    assert amp == pytest.approx(brickwall_by_quadrature(width, bw), abs=1e-6)


def test_ideal_lowpass_points():
    assert lowpass_peak_amplitude(100e-12, 1e9) == pytest.approx(0.210, abs=1e-3)
    assert lowpass_peak_amplitude(100e-12, 40e9) >= 0.999
    assert lowpass_peak_amplitude(100e-12, math.inf) == 1.0
    assert lowpass_peak_amplitude(100e-12, math.inf, "single_pole") == 1.0


@pytest.mark.parametrize("width, bw", [(50e-12, 1e9), (100e-12, 1e9), (200e-12, 5e9), (100e-12, 40e9)])
def test_single_pole_matches_exgaussian(width, bw):
    assert lowpass_peak_amplitude(width, bw, ResponseModel.SINGLE_POLE) == pytest.approx(
        single_pole_oracle(width, bw), abs=1e-6)


@given(st.floats(10e-12, 500e-12), st.floats(0.1e9, 50e9), st.floats(1.1, 3.0))
def test_lowpass_monotone(width, bw, k):
    for model in ResponseModel:
        a = lowpass_peak_amplitude(width, bw, model)
        assert 0.0 <= a <= 1.0
        assert lowpass_peak_amplitude(width, bw * k, model) >= a - 1e-9
        assert lowpass_peak_amplitude(width * k, bw, model) >= a - 1e-9


def test_lowpass_rejects_bad_input():
    with pytest.raises(ValueError):
        lowpass_peak_amplitude(0, 1e9)
    with pytest.raises(ValueError):
        lowpass_peak_amplitude(1e-10, 1e9, "brickwall")


# ---- monitor detector ------------------------------------------------------------------

def test_monitor_ideal_detector_one_volt():
    det = MonitorDetector(gain=1e4, bandwidth=math.inf, discrimination_voltage=0.2)
    m = monitor_response(100e-6, 100e-12, det)
    assert m.voltage == pytest.approx(1.0, rel=1e-12)
    assert m.alarm and not m.damaged


def test_monitor_one_ghz_both_models():
    ideal = monitor_response(100e-6, 100e-12, MonitorDetector(bandwidth=1e9))
    pole = monitor_response(100e-6, 100e-12, MonitorDetector(bandwidth=1e9, response_model="single_pole"))
    assert ideal.voltage == pytest.approx(0.210, abs=1e-3)
    # the one-pole filter lets more of a short pulse through than the brick wall
    assert pole.voltage > ideal.voltage


def test_monitor_damage_regardless_of_voltage():
    det = MonitorDetector(gain=1e-3, damage_threshold=1e-3)
    m = monitor_response(2e-3, 100e-12, det)
    assert m.damaged and not m.alarm


@given(st.floats(0, 1e-3), st.floats(0, 1e-3))
def test_alarm_monotone_in_power(a, b):
    det = MonitorDetector()
    lo, hi = sorted((a, b))
    assert monitor_response(lo, 100e-12, det).alarm <= monitor_response(hi, 100e-12, det).alarm


@pytest.mark.parametrize("kw", [{"gain": 0}, {"bandwidth": -1}, {"discrimination_voltage": 0},
                                {"damage_threshold": 0}, {"response_model": "rc"}])
def test_detector_validation(kw):
    with pytest.raises(ValueError):
        MonitorDetector(**kw)


# ---- stack -------------------------------------------------------------------------------

def test_empty_stack():
    r = stack_evaluate(Wave(1e-3, 100e-12, 10e6), CountermeasureStack(), WL)
    assert r.power_at_laser == 1e-3 and not r.alarms and not r.damaged and r.clean


def test_isolator_scenario():
    r = stack_evaluate(Wave(0.6e-3, 1 / 206.34e6, 206.34e6), CountermeasureStack(isolators=(25,)), WL)
    assert r.power_at_laser == pytest.approx(1.897e-6, rel=1e-3)
    assert r.clean


def test_detuned_eve_blocked():
    st_ = CountermeasureStack(filter=SpectralFilter(50e9))
    assert stack_evaluate(Wave(1e-3, 100e-12, 10e6, 1540e-9), st_, WL).power_at_laser == 0.0


def test_monitors_tap_before_isolators():
    st_ = CountermeasureStack(isolators=(60,), power_meter=PowerMeter(1e-3, 1e-6),
                              monitor_detector=MonitorDetector(bandwidth=math.inf))
    r = stack_evaluate(Wave(1e-3, 100e-12, 10e6), st_, WL)
    assert r.alarms == {"power_meter", "monitor_detector"}
    assert r.power_at_laser == pytest.approx(1e-9, rel=1e-12)


def test_stack_report_outputs(tmp_path):
    st_ = CountermeasureStack(isolators=(10, 5), filter=SpectralFilter(50e9), power_meter=PowerMeter(),
                              monitor_detector=MonitorDetector(damage_threshold=1e-4))
    r = stack_evaluate(Wave(2e-4, 100e-12, 10e6), st_, WL)
    assert r.damaged == {"monitor_detector"}
    r.write_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "component,power_in,power_out,alarm,damaged"
    assert [x.split(",")[0] for x in rows[1:]] == ["power_meter", "monitor_detector", "filter",
                                                  "isolator_0", "isolator_1"]
    assert "damaged: monitor_detector" in r.report()


def test_stack_validation():
    with pytest.raises(ValueError):
        CountermeasureStack(isolators=(-1,))
    with pytest.raises(ValueError):
        PowerMeter(threshold=0)
