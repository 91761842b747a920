"""Figure-style scenario runs and their CSV artifacts."""
from __future__ import annotations

import csv
import math
from dataclasses import replace
from pathlib import Path

from .attack import AttackPlan, plan_attack, run_attack_scenario
from .circular import circ_std, kuiper_test
from .config import ScenarioConfig
from .countermeasures import CountermeasureStack, ResponseModel, lowpass_peak_amplitude, stack_evaluate
from .interferometry import train_to_voltages, write_voltage_csv
from .laser import InjectedField, simulate_pulse_train, write_envelope_csv, write_pulse_csv
from .photon_stats import IntensityHistogram, classify_distribution, quadrature_std_curve
from .security import rate_table, security_verdict, write_rate_csv


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _write_report(path: Path, items) -> None:
    path.write_text("".join(f"{k}: {v}\n" for k, v in items))


def _injection_at(cfg: ScenarioConfig, facet_power: float) -> InjectedField:
    return replace(cfg.injection, facet_power=facet_power, enabled=facet_power > 0)


def build_plan(cfg: ScenarioConfig, stack: CountermeasureStack | None = None) -> AttackPlan:
    stack = stack if stack is not None else cfg.stack
    req = cfg.attack
    if req.mode == "waveform":
        rep = stack_evaluate(req.waveform.at_port(req.channel_loss_db), stack, cfg.laser.wavelength)
        reasons = tuple(sorted(rep.alarms)) + tuple(f"{d} damaged" for d in sorted(rep.damaged))
        return AttackPlan(rep.clean, req.waveform if rep.clean else None, rep.power_at_laser,
                          req.channel_loss_db, rep, reasons)
    return plan_attack(stack, cfg.laser, req.channel_loss_db, req.lock_spread_target,
                       repetition_rate=req.repetition_rate, required_power=req.required_power)


def run_simulate(cfg: ScenarioConfig, out: Path, envelopes: int = 0) -> list[Path]:
    train = simulate_pulse_train(cfg.laser, cfg.injection, cfg.n_pulses, trim_envelopes=True)
    volts = train_to_voltages(train.phases, cfg.interferometer, seed=cfg.seed)
    paths = [out / "pulses.csv", out / "voltages.csv"]
    write_pulse_csv(train, paths[0])
    write_voltage_csv(volts, paths[1])
    items = [("n_pulses", cfg.n_pulses), ("phase_circ_std", repr(circ_std(train.phases))),
             ("kuiper_p", repr(kuiper_test(train.phases)[1]))]
    if cfg.injection.enabled:
        items.append(("lock_spread", repr(circ_std(train.phases - train.injected_phases))))
    hist = IntensityHistogram.from_samples(volts)
    paths.append(out / "histogram.csv")
    hist.write_csv(paths[-1])
    if hist.n_samples >= 1000:
        c = classify_distribution(hist)
        items += [("ks_vs_arcsine", repr(c.ks_vs_arcsine)),
                  ("ks_vs_best_gaussian", repr(c.ks_vs_best_gaussian)),
                  ("verdict", c.verdict.value)]
    else:
        items.append(("verdict", "n/a (fewer than 1000 samples)"))
    if envelopes:
        paths.append(out / "envelopes.csv")
        write_envelope_csv(train.records[:envelopes], paths[-1])
    paths.append(out / "simulate_report.txt")
    _write_report(paths[-1], items)
    return paths


def run_plan(cfg: ScenarioConfig, out: Path) -> tuple[AttackPlan, list[Path]]:
    plan = build_plan(cfg)
    paths = [out / "plan.txt"]
    paths[0].write_text(plan.report())
    if plan.feasible:
        rep = stack_evaluate(plan.waveform.at_port(plan.channel_loss_db), cfg.stack, cfg.laser.wavelength)
        paths.append(out / "stack.csv")
        rep.write_csv(paths[-1])
    return plan, paths


def run_keyrate(cfg: ScenarioConfig, out: Path, deltas) -> list[Path]:
    rows = rate_table(cfg.keyrate, deltas)
    paths = [out / "keyrate.csv", out / "keyrate_report.txt"]
    write_rate_csv(rows, paths[0])
    # a seeded laser is locked by construction; uniform phase otherwise
    verdict = security_verdict(0.0, locked=cfg.injection.enabled)
    _write_report(paths[1], [("verdict", verdict.value),
                             ("secure_rate_at_delta0", repr(rows[0][1]) if verdict.value == "assured" else "n/a")])
    return paths


def reproduce_fig2(cfg: ScenarioConfig, out: Path) -> list[Path]:
    paths, rows = [], []
    for i, p in enumerate(cfg.reproduce.fig2_facet_powers):
        train = simulate_pulse_train(cfg.laser, _injection_at(cfg, p), cfg.n_pulses, trim_envelopes=True)
        volts = train_to_voltages(train.phases, cfg.interferometer, seed=cfg.seed)
        hist = IntensityHistogram.from_samples(volts)
        c = classify_distribution(hist)
        paths.append(out / f"fig2_hist_{i}.csv")
        hist.write_csv(paths[-1])
        spread = circ_std(train.phases - train.injected_phases) if p > 0 else math.nan
        rows.append((p, spread, c.ks_vs_arcsine, c.ks_vs_best_gaussian, c.verdict.value))
    paths.append(out / "fig2_summary.csv")
    _write_rows(paths[-1], ["facet_power", "lock_spread", "ks_vs_arcsine", "ks_vs_best_gaussian", "verdict"], rows)
    return paths


def reproduce_fig4(cfg: ScenarioConfig, out: Path) -> list[Path]:
    iso = cfg.reproduce.fig4_isolation_db
    stack = replace(cfg.stack, isolators=(iso,))
    plan = build_plan(cfg, stack)
    res = run_attack_scenario(cfg.laser, plan, stack, cfg.n_pulses, interferometer=cfg.interferometer,
                              detuning=cfg.injection.detuning)
    paths = [out / "fig4_hist.csv", out / "fig4_report.txt"]
    res.histogram.write_csv(paths[0])
    paths[1].write_text(plan.report() + res.outcome.report())

    phases = {}
    for p in cfg.reproduce.fig4_facet_powers:
        phases[p] = simulate_pulse_train(cfg.laser, _injection_at(cfg, p), cfg.n_pulses,
                                         trim_envelopes=True).phases
    curve = quadrature_std_curve(phases, cfg.interferometer, seed=cfg.seed)
    gain = 10.0 ** (iso / 10.0)
    paths.append(out / "fig4_quadrature.csv")
    _write_rows(paths[-1], ["facet_power", "channel_power", "std_sine", "std_cosine"],
                [(p, p * gain, s, c) for p, (s, c) in curve.items()])
    return paths


def reproduce_fig6(cfg: ScenarioConfig, out: Path) -> list[Path]:
    rows = []
    for w in cfg.reproduce.fig6_widths:
        for b in cfg.reproduce.fig6_bandwidths:
            rows.append((w, b, lowpass_peak_amplitude(w, b, ResponseModel.IDEAL_LOWPASS),
                         lowpass_peak_amplitude(w, b, ResponseModel.SINGLE_POLE)))
    path = out / "fig6_amplitude.csv"
    _write_rows(path, ["width_3db", "bandwidth", "ideal_lowpass", "single_pole"], rows)
    return [path]


REPRODUCERS = {"fig2": reproduce_fig2, "fig4": reproduce_fig4, "fig6": reproduce_fig6}
