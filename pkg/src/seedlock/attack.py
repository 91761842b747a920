"""Eve's side: locking-power search, monitor-evading waveform planning, the
end-to-end seeding scenario, and the multi-laser time-shift fingerprint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .circular import circ_std
from .countermeasures import CountermeasureStack, StackReport, stack_evaluate
from .interferometry import InterferometerConfig, train_to_voltages
from .laser import InjectedField, LaserConfig, simulate_pulse_train, threshold_crossing_time
from .photon_stats import Classification, IntensityHistogram, Verdict, classify_distribution

# widest first: a wider pulse needs no more peak power and is easier to make
CANDIDATE_WIDTHS = (500e-12, 200e-12, 100e-12, 50e-12)
SEARCH_PULSES = 200
SEARCH_POWER_RANGE = (1e-9, 1e-2)
SEARCH_RATIO = 1.02


class InfeasiblePlanError(RuntimeError):
    """The countermeasure stack leaves Eve no admissible waveform."""


class UnreachableTargetError(RuntimeError):
    """No facet power inside the search budget meets the lock target."""


@dataclass(frozen=True)
class AttackWaveform:
    """Eve's pulse train.  ``peak_power`` is at the channel input;
    ``gate_offset`` is the pulse start measured from Alice's drive edge."""

    peak_power: float
    width_3db: float
    repetition_rate: float
    wavelength: float = 1550e-9
    linewidth: float = 0.0
    gate_offset: float = 0.0

    def __post_init__(self):
        for name in ("peak_power", "width_3db", "repetition_rate", "wavelength"):
            if not getattr(self, name) > 0:
                raise ValueError(f"waveform {name} must be positive")
        if self.linewidth < 0:
            raise ValueError("waveform linewidth must be non-negative")
        if self.width_3db * self.repetition_rate > 1.0 + 1e-12:
            raise ValueError("waveform width exceeds its period")

    @property
    def is_cw(self) -> bool:
        return self.width_3db * self.repetition_rate >= 1.0 - 1e-12

    def at_port(self, channel_loss_db: float) -> AttackWaveform:
        """Same waveform after the channel, as it reaches Alice."""
        return replace(self, peak_power=self.peak_power * 10.0 ** (-channel_loss_db / 10.0))


class PowerSearch(NamedTuple):
    power: float
    sweep: tuple[tuple[float, float], ...]


def lock_spread(config: LaserConfig, facet_power: float, n_pulses: int = SEARCH_PULSES,
                gate: tuple[float, float] | None = None) -> float:
    """Circular std of emitted minus injected phase at a given facet power."""
    inj = InjectedField(facet_power=facet_power, gate=gate, enabled=facet_power > 0)
    train = simulate_pulse_train(config, inj, n_pulses, trim_envelopes=True)
    return circ_std(train.phases - train.injected_phases)


def required_facet_power(config: LaserConfig, lock_spread_target: float, *,
                         n_pulses: int = SEARCH_PULSES,
                         power_range: tuple[float, float] = SEARCH_POWER_RANGE,
                         gate: tuple[float, float] | None = None) -> PowerSearch:
    """Smallest facet power whose lock spread meets the target.

    Log-bisection with common random numbers: every probe reuses
    ``config.rng_seed``, so the answer is reproducible.
    """
    if not 0 < lock_spread_target <= math.pi:
        raise ValueError("lock_spread_target must lie in (0, pi]")
    lo, hi = power_range
    sweep = []

    def probe(p):
        s = lock_spread(config, p, n_pulses, gate)
        sweep.append((p, s))
        return s

    if probe(lo) <= lock_spread_target:
        return PowerSearch(lo, tuple(sweep))
    if probe(hi) > lock_spread_target:
        raise UnreachableTargetError(
            f"lock spread {sweep[-1][1]:.3g} rad at {hi:g} W still above target {lock_spread_target:g}")
    while hi / lo > SEARCH_RATIO:
        mid = math.sqrt(lo * hi)
        if probe(mid) <= lock_spread_target:
            hi = mid
        else:
            lo = mid
    return PowerSearch(hi, tuple(sorted(sweep)))


@dataclass(frozen=True)
class AttackPlan:
    feasible: bool
    waveform: AttackWaveform | None
    required_facet_power: float
    channel_loss_db: float
    stack_report: StackReport | None = None
    reasons: tuple[str, ...] = ()

    def injected_field(self, stack: CountermeasureStack, signal_wavelength: float,
                       detuning: float = 0.0) -> InjectedField:
        if not self.feasible or self.waveform is None:
            raise InfeasiblePlanError("; ".join(self.reasons) or "plan is infeasible")
        w = self.waveform
        rep = stack_evaluate(w.at_port(self.channel_loss_db), stack, signal_wavelength)
        gate = None if w.is_cw else (w.gate_offset, w.width_3db)
        return InjectedField(facet_power=rep.power_at_laser, detuning=detuning,
                             linewidth=w.linewidth, gate=gate, enabled=True)

    def report(self) -> str:
        lines = [f"feasible: {str(self.feasible).lower()}",
                 f"required_facet_power: {self.required_facet_power!r}",
                 f"channel_loss_db: {self.channel_loss_db!r}"]
        if self.waveform is not None:
            w = self.waveform
            lines += [f"peak_power: {w.peak_power!r}", f"width_3db: {w.width_3db!r}",
                      f"repetition_rate: {w.repetition_rate!r}", f"wavelength: {w.wavelength!r}",
                      f"gate_offset: {w.gate_offset!r}", f"cw: {str(w.is_cw).lower()}"]
        lines += [f"reason: {r}" for r in self.reasons]
        return "\n".join(lines) + "\n"


def plan_attack(stack: CountermeasureStack, config: LaserConfig, channel_loss_db: float,
                lock_spread_target: float, *, repetition_rate: float | None = None,
                wavelength: float | None = None, linewidth: float = 0.0,
                required_power: float | None = None) -> AttackPlan:
    """Cheapest waveform that locks the laser without tripping the stack.

    The peak needed at the channel input follows from the required facet
    power and the (linear) stack and channel transmission.  Widths are then
    tried from cw down to 50 ps and the first one that fires no alarm and
    damages nothing is kept.  Infeasibility is a returned plan, not an error.
    """
    if channel_loss_db < 0:
        raise ValueError("channel_loss_db must be non-negative")
    rate = repetition_rate or config.drive.repetition_rate
    wl = wavelength or config.wavelength
    p_req = required_power if required_power is not None else \
        required_facet_power(config, lock_spread_target).power
    if not p_req > 0:
        raise ValueError("required power must be positive")

    period = 1.0 / rate
    probe = AttackWaveform(1.0, period, rate, wl, linewidth)
    transmission = stack_evaluate(probe, stack, config.wavelength).power_at_laser
    if transmission == 0.0:
        return AttackPlan(False, None, p_req, channel_loss_db,
                          reasons=("stack transmits nothing at Eve's wavelength",))
    peak = p_req / transmission * 10.0 ** (channel_loss_db / 10.0)

    center = threshold_crossing_time(config)
    reasons = []
    for width in (period,) + tuple(w for w in CANDIDATE_WIDTHS if w < period):
        offset = 0.0 if width == period else max(center - width / 2.0, 0.0)
        wf = AttackWaveform(peak, width, rate, wl, linewidth, offset)
        rep = stack_evaluate(wf.at_port(channel_loss_db), stack, config.wavelength)
        if rep.clean:
            return AttackPlan(True, wf, p_req, channel_loss_db, rep)
        what = sorted(rep.alarms) + [f"{d} damaged" for d in sorted(rep.damaged)]
        reasons.append(f"width {width:.3g} s: {', '.join(what)}")
    return AttackPlan(False, None, p_req, channel_loss_db, reasons=tuple(reasons))


@dataclass(frozen=True)
class AttackOutcome:
    locked: bool
    alarms_triggered: frozenset[str] = frozenset()
    classification_accuracy: float | None = None
    added_qber: float | None = None
    verdict: Verdict | None = None
    lock_spread: float | None = None

    def __post_init__(self):
        for name in ("classification_accuracy", "added_qber"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def report(self) -> str:
        def fmt(v):
            if v is None:
                return "n/a"
            if isinstance(v, Verdict):
                return v.value
            return repr(v)
        lines = [f"locked: {str(self.locked).lower()}",
                 f"alarms: {','.join(sorted(self.alarms_triggered)) or 'none'}",
                 f"verdict: {fmt(self.verdict)}",
                 f"lock_spread: {fmt(self.lock_spread)}",
                 f"classification_accuracy: {fmt(self.classification_accuracy)}",
                 f"added_qber: {fmt(self.added_qber)}"]
        return "\n".join(lines) + "\n"


class ScenarioResult(NamedTuple):
    outcome: AttackOutcome
    histogram: IntensityHistogram
    classification: Classification
    voltages: np.ndarray


def run_attack_scenario(config: LaserConfig, plan: AttackPlan | None, stack: CountermeasureStack,
                        n_pulses: int, *, interferometer: InterferometerConfig | None = None,
                        detuning: float = 0.0, bins: int = 200) -> ScenarioResult:
    """Plan, stack, laser, interferometer, classifier; in that order.

    ``plan=None`` runs Alice's laser with no injection.  Detector noise is
    seeded from ``config.rng_seed``.
    """
    interferometer = interferometer or InterferometerConfig()
    if plan is None:
        injection = InjectedField()
        alarms: frozenset[str] = frozenset()
    else:
        if not plan.feasible:
            raise InfeasiblePlanError("; ".join(plan.reasons) or "plan is infeasible")
        injection = plan.injected_field(stack, config.wavelength, detuning)
        rep = stack_evaluate(plan.waveform.at_port(plan.channel_loss_db), stack, config.wavelength)
        alarms = rep.alarms | rep.damaged
    try:
        train = simulate_pulse_train(config, injection, n_pulses, trim_envelopes=True)
    except (ArithmeticError, ValueError) as exc:
        raise RuntimeError(f"scenario laser simulation failed "
                           f"(facet power {injection.effective_power:g} W): {exc}") from exc
    volts = train_to_voltages(train.phases, interferometer, seed=int(config.rng_seed))
    hist = IntensityHistogram.from_samples(volts, bins=bins)
    cls = classify_distribution(hist)
    spread = circ_std(train.phases - train.injected_phases)
    outcome = AttackOutcome(locked=cls.verdict is not Verdict.U_TYPE, alarms_triggered=alarms,
                            verdict=cls.verdict, lock_spread=spread)
    return ScenarioResult(outcome, hist, cls, volts)


# --------------------------------------------------------------------------
# multi-laser time-shift fingerprint
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LaserDiode:
    state_label: str
    time_shift: float
    jitter_rms: float

    def __post_init__(self):
        if not self.jitter_rms >= 0:
            raise ValueError("jitter_rms must be non-negative")


@dataclass(frozen=True)
class MultiLaserSource:
    lasers: tuple[LaserDiode, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "lasers", tuple(self.lasers))
        if len(self.lasers) < 2:
            raise ValueError("a multi-laser source needs at least 2 lasers")
        labels = [d.state_label for d in self.lasers]
        if len(set(labels)) != len(labels):
            raise ValueError("laser state labels must be distinct")

    @property
    def n_lasers(self) -> int:
        return len(self.lasers)

    @classmethod
    def from_shifts(cls, shifts, jitter_rms: float, labels=None) -> MultiLaserSource:
        labels = labels or [f"s{i}" for i in range(len(shifts))]
        return cls(tuple(LaserDiode(lab, float(s), jitter_rms) for lab, s in zip(labels, shifts)))


class FingerprintResult(NamedTuple):
    classification_accuracy: float
    added_qber: float


MISCLASSIFIED_QBER = 0.5


def timeshift_fingerprint(source: MultiLaserSource, n_trials: int, seed: int = 0) -> FingerprintResult:
    """Monte Carlo of Eve reading Alice's state from the pulse arrival time.

    Each trial picks a laser uniformly, adds Gaussian timing jitter, and
    assigns the laser with the nearest mean shift.  A wrong guess makes
    Eve resend the wrong state, counted as QBER 0.5 for that pulse.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng(seed)
    shifts = np.array([d.time_shift for d in source.lasers])
    jitter = np.array([d.jitter_rms for d in source.lasers])
    true = rng.integers(0, source.n_lasers, n_trials)
    observed = shifts[true] + jitter[true] * rng.standard_normal(n_trials)
    guess = np.argmin(np.abs(observed[:, None] - shifts[None, :]), axis=1)
    wrong = np.count_nonzero(guess != true)
    return FingerprintResult(1.0 - wrong / n_trials, MISCLASSIFIED_QBER * wrong / n_trials)
