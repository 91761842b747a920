import math

import numpy as np
import pytest
from scipy import constants

from seedlock.circular import TWO_PI, circ_mean, circ_std, kuiper_test
from seedlock.laser import (DegeneratePulseError, DrivePulse, IntegrationError, InjectedField, LaserConfig,
                            PulseRecord, extract_phase, pulse_shape_metrics, simulate_pulse_train,
                            step_convergence, threshold_crossing_time, write_envelope_csv, write_pulse_csv)

CFG = LaserConfig()
LOCK = InjectedField(facet_power=1e-3, enabled=True)


@pytest.fixture(scope="module")
def free_train():
    return simulate_pulse_train(CFG, InjectedField(), 400)


@pytest.fixture(scope="module")
def locked_train():
    return simulate_pulse_train(CFG, LOCK, 400)


# ---- configuration -----------------------------------------------------------

def test_threshold_current_closed_form():
    n_th = CFG.transparency_carrier_number + 1 / (CFG.confinement_factor * CFG.gain_coefficient * CFG.photon_lifetime)
    assert CFG.threshold_current == pytest.approx(constants.e * n_th / CFG.carrier_lifetime, rel=1e-12)
    assert CFG.drive.bias_current < CFG.threshold_current < CFG.drive.peak_current


@pytest.mark.parametrize("kw", [
    {"carrier_lifetime": 0}, {"photon_lifetime": -1e-12}, {"gain_coefficient": 0},
    {"spontaneous_emission_fraction": 0}, {"spontaneous_emission_fraction": 1.5},
    {"confinement_factor": 0}, {"rng_seed": -1}, {"rng_seed": 2**64},
    {"drive": DrivePulse(bias_current=30e-3)}, {"drive": DrivePulse(peak_current=20e-3, bias_current=5e-3)},
])
def test_invalid_config_rejected(kw):
    with pytest.raises(ValueError):
        LaserConfig(**kw)


def test_drive_period_must_exceed_duration():
    with pytest.raises(ValueError):
        DrivePulse(repetition_rate=5e9)


def test_drive_trapezoid():
    d = DrivePulse()
    assert d.current(-1e-12) == d.bias_current
    assert d.current(15e-12) == pytest.approx(0.5 * (d.bias_current + d.peak_current))
    assert d.current(100e-12) == d.peak_current
    assert d.current(d.duration + 1e-12) == d.bias_current


def test_injection_validation_and_disabled_equivalence():
    with pytest.raises(ValueError):
        InjectedField(facet_power=-1.0)
    with pytest.raises(ValueError):
        InjectedField(linewidth=-1.0)
    a = simulate_pulse_train(CFG, InjectedField(facet_power=1e-3, enabled=False), 20)
    b = simulate_pulse_train(CFG, InjectedField(), 20)
    assert np.array_equal(a.phases, b.phases)
    assert all(np.array_equal(x.envelope, y.envelope) for x, y in zip(a, b))


# ---- phase extraction and shape metrics ---------------------------------------

def test_extract_phase_constant_envelope():
    c = 0.3 * np.exp(-2.0j)
    rec = PulseRecord(np.full(8, c), dt=1e-12)
    assert extract_phase(rec) == pytest.approx((-2.0) % TWO_PI, abs=1e-12)
    assert rec.phase == pytest.approx((-2.0) % TWO_PI, abs=1e-12)


@pytest.mark.parametrize("psi", [0.3, 2.5, 5.9])
def test_extract_phase_equivariance(psi):
    t = np.linspace(-1, 1, 101)
    env = np.exp(-t ** 2 / 0.1) * np.exp(1j * 0.4 * t)
    p0 = extract_phase(PulseRecord(env, dt=1e-12))
    p1 = extract_phase(PulseRecord(env * np.exp(1j * psi), dt=1e-12))
    assert math.cos(p1 - p0 - psi) == pytest.approx(1.0, abs=1e-12)


def test_extract_phase_two_samples():
    rec = PulseRecord(np.array([1.0, 1.0j]), dt=1e-12)
    assert extract_phase(rec) == pytest.approx(math.pi / 4, abs=1e-12)


def test_degenerate_pulse():
    with pytest.raises(DegeneratePulseError):
        extract_phase(PulseRecord(np.zeros(5, complex), dt=1e-12))
    with pytest.raises(DegeneratePulseError):
        pulse_shape_metrics(PulseRecord(np.zeros(5, complex), dt=1e-12))


def test_gaussian_width_and_single_peak():
    dt = 0.5e-12
    t = np.arange(-400, 401) * dt
    fwhm = 100e-12
    env = np.sqrt(np.exp(-4 * math.log(2) * t ** 2 / fwhm ** 2))
    m = pulse_shape_metrics(PulseRecord(env.astype(complex), dt=dt, t_start=t[0]))
    assert abs(m.width_3db - fwhm) <= dt
    assert m.oscillation_count == 1
    assert m.peak_power == pytest.approx(1.0)
    # 10 % crossing of a Gaussian sits at -fwhm*sqrt(ln10/ln16)
    assert m.turn_on_time == pytest.approx(-fwhm * math.sqrt(math.log(10) / (4 * math.log(2))), abs=dt)


def test_two_peaks_counted():
    t = np.linspace(0, 1, 1000)
    p = np.exp(-((t - 0.3) / 0.03) ** 2) + 0.5 * np.exp(-((t - 0.7) / 0.03) ** 2)
    m = pulse_shape_metrics(PulseRecord(np.sqrt(p).astype(complex), dt=1e-12))
    assert m.oscillation_count == 2


# ---- simulation ------------------------------------------------------------------

def test_record_count_and_invariants(free_train):
    assert len(free_train) == 400
    for r in free_train[:20]:
        assert r.peak_power == pytest.approx(float(np.max(r.power)))
        assert 0.0 <= r.phase < TWO_PI
        m = pulse_shape_metrics(r)
        assert m.width_3db == r.width_3db
    assert free_train.clamped_steps <= 1e-3 * free_train.total_steps


def test_reproducible_and_prefix_stable():
    a = simulate_pulse_train(CFG, LOCK, 30)
    b = simulate_pulse_train(CFG, LOCK, 30)
    c = simulate_pulse_train(CFG, LOCK, 10)
    assert all(np.array_equal(x.envelope, y.envelope) for x, y in zip(a, b))
    assert np.array_equal(a.phases[:10], c.phases)


def test_seed_changes_output():
    from dataclasses import replace
    a = simulate_pulse_train(CFG, InjectedField(), 10)
    b = simulate_pulse_train(replace(CFG, rng_seed=1), InjectedField(), 10)
    assert not np.array_equal(a.phases, b.phases)


def test_invalid_n_pulses():
    for n in (0, -3, 2.5):
        with pytest.raises(ValueError):
            simulate_pulse_train(CFG, InjectedField(), n)


def test_unseeded_phase_uniform(free_train):
    assert kuiper_test(free_train.phases)[1] > 0.01


def test_locked_phase_tracks_injection(locked_train):
    d = locked_train.phases - locked_train.injected_phases
    assert circ_std(d) < 0.2


def test_locked_phase_offset_constant_with_detuning_and_linewidth():
    inj = InjectedField(facet_power=1e-3, detuning=50e6, linewidth=1e6, enabled=True)
    tr = simulate_pulse_train(CFG, inj, 300)
    # the emitted phase follows a wandering injected phase with a fixed offset
    assert circ_std(tr.injected_phases) > 1.0
    assert circ_std(tr.phases - tr.injected_phases) < 0.2


def test_turn_on_earlier_when_seeded(free_train, locked_train):
    assert np.mean(locked_train.turn_on_times) < np.mean(free_train.turn_on_times)


def test_oscillation_count_ab_runs(free_train, locked_train):
    # direction is model dependent; both runs must produce well-formed counts
    from seedlock.laser import pulse_shape_metrics as psm
    f = np.mean([psm(r).oscillation_count for r in free_train[:50]])
    s = np.mean([psm(r).oscillation_count for r in locked_train[:50]])
    assert f >= 1 and s >= 1


def test_threshold_crossing_before_turn_on(free_train):
    t = threshold_crossing_time(CFG)
    assert 0 < t < np.median(free_train.turn_on_times)


def test_step_convergence_gate():
    assert step_convergence(CFG, InjectedField(), 100) < 0.05
    assert step_convergence(CFG, LOCK, 100) < 0.05


def test_non_finite_state_signalled():
    bad = LaserConfig(time_step=40e-12, pre_roll=0.0, tail=200e-12)
    with pytest.raises(IntegrationError):
        simulate_pulse_train(bad, InjectedField(), 4)


def test_csv_exports(tmp_path, free_train):
    write_pulse_csv(free_train[:3], tmp_path / "p.csv")
    write_envelope_csv(free_train[:2], tmp_path / "e.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "pulse_index,phase,peak_power,turn_on_time,width_3db"
    assert len(lines) == 4
    e = (tmp_path / "e.csv").read_text().splitlines()
    assert e[0] == "pulse_index,time,re,im"
    assert len(e) == 1 + free_train[0].envelope.size + free_train[1].envelope.size
