"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 infeasible plan.
"""
from __future__ import annotations

import argparse
import hashlib
import math
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, scenarios
from .attack import InfeasiblePlanError
from .config import DEFAULT_SCENARIO, ConfigError, ScenarioConfig, load_config

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_INFEASIBLE = 0, 1, 2, 3

SIMULATE_HELP = """\
artifacts:
  pulses.csv           pulse_index, phase, peak_power, turn_on_time, width_3db
  voltages.csv         voltage (one row per adjacent pulse pair)
  histogram.csv        bin_left, bin_right, count
  envelopes.csv        pulse_index, time, re, im   (with --envelopes N)
  simulate_report.txt  key: value summary
"""
PLAN_HELP = """\
artifacts:
  plan.txt   key: value plan (feasible, peak_power, width_3db, ...)
  stack.csv  component, power_in, power_out, alarm, damaged   (feasible plans)
exit code 3 when no admissible waveform exists.
"""
KEYRATE_HELP = """\
artifacts:
  keyrate.csv         delta, rate, relative_loss
  keyrate_report.txt  security verdict and the reportable rate
"""
REPRODUCE_HELP = """\
artifacts:
  fig2  fig2_hist_<i>.csv (bin_left, bin_right, count) per control power;
        fig2_summary.csv (facet_power, lock_spread, ks_vs_arcsine, ks_vs_best_gaussian, verdict)
  fig4  fig4_hist.csv; fig4_report.txt;
        fig4_quadrature.csv (facet_power, channel_power, std_sine, std_cosine)
  fig6  fig6_amplitude.csv (width_3db, bandwidth, ideal_lowpass, single_pole)
"""


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="scenario YAML (default: bundled scenario)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: config output_dir)")
    p.add_argument("--n-pulses", type=int, default=None, help="override the config n_pulses")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seedlock", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"seedlock {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    raw = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("simulate", help="simulate a pulse train and its interferometer output",
                       epilog=SIMULATE_HELP, formatter_class=raw)
    _common(p)
    p.add_argument("--envelopes", type=int, default=0, metavar="N", help="also export N field envelopes")

    p = sub.add_parser("plan", help="plan a monitor-evading seeding waveform",
                       epilog=PLAN_HELP, formatter_class=raw)
    _common(p)

    p = sub.add_parser("keyrate", help="decoy-state key rate versus intensity fluctuation",
                       epilog=KEYRATE_HELP, formatter_class=raw)
    _common(p)
    p.add_argument("--deltas", default="0,0.01,0.02,0.03", help="comma-separated fluctuation grid")

    p = sub.add_parser("reproduce", help="regenerate a figure-style data set",
                       epilog=REPRODUCE_HELP, formatter_class=raw)
    p.add_argument("figure", choices=sorted(scenarios.REPRODUCERS))
    _common(p)

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config or DEFAULT_SCENARIO)
    if args.seed is not None:
        try:
            cfg = cfg.with_seed(args.seed)
        except ValueError as exc:
            raise ConfigError(f"--seed: {exc}") from None
    if args.n_pulses is not None:
        try:
            cfg = ScenarioConfig(**{**cfg.__dict__, "n_pulses": args.n_pulses})
        except ValueError as exc:
            raise ConfigError(f"--n-pulses: {exc}") from None
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, cfg: ScenarioConfig, artifacts) -> Path:
    lines = [f"command: {command}", f"seed: {cfg.seed}", f"config_digest: {cfg.digest()}",
             f"seedlock_version: {__version__}", f"numpy_version: {np.__version__}",
             f"scipy_version: {scipy.__version__}"]
    lines += [f"artifact {p.name}: {_sha256(p)}" for p in artifacts]
    path = out / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_deltas(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--deltas: not a comma-separated list of numbers: {text!r}") from None
    if not vals or any(not 0 <= v < 1 for v in vals):
        raise ConfigError("--deltas: values must lie in [0, 1)")
    return vals


def selftest() -> list[tuple[str, bool, str]]:
    """Quick analytic checks; each entry is (name, passed, detail)."""
    from scipy import integrate, special, stats

    from .attack import MultiLaserSource, timeshift_fingerprint
    from .countermeasures import average_power_reading, isolator_transmit, lowpass_peak_amplitude
    from .interferometry import sampling_budget
    from .photon_stats import CoherentSource, photon_number_distribution
    from .security import KeyRateParams, rate_table

    checks = []

    def add(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    add("sampling_budget", sampling_budget(10_000_000, 206.34e6, 80e9) == (388, 10_000_000 // 388))
    probs = photon_number_distribution(CoherentSource(1.0), 5).probabilities
    add("poisson_mixture", np.allclose(probs, stats.poisson.pmf(np.arange(6), 1.0), atol=1e-12, rtol=0))
    sigma = 100e-12 / math.sqrt(8 * math.log(2))
    w0 = 2 * math.pi * 1e9
    quad, _ = integrate.quad(lambda w: sigma * math.sqrt(2 * math.pi) * math.exp(-(sigma * w) ** 2 / 2),
                             -w0, w0, epsabs=1e-14)
    amp = lowpass_peak_amplitude(100e-12, 1e9)
    add("lowpass_erf", abs(amp - quad / (2 * math.pi)) < 1e-6 and abs(amp - special.erf(w0 * sigma / math.sqrt(2))) < 1e-12,
        f"{amp:.6f}")
    add("average_power", math.isclose(average_power_reading(0.6e-3, 100e-12, 10e6, 1e-3), 0.6e-6, rel_tol=1e-12))
    add("isolator_25db", math.isclose(isolator_transmit(0.6e-3, 25.0), 1.897e-6, rel_tol=1e-3))
    acc, qber = timeshift_fingerprint(MultiLaserSource.from_shifts([0, 100e-12, 200e-12, 300e-12], 10e-12), 10_000)
    add("fingerprint", acc > 0.999 and qber < 0.001, f"accuracy={acc:.4f}")
    rates = [r for _, r, _ in rate_table(KeyRateParams(), [0, 0.01, 0.02, 0.03])]
    add("keyrate_monotone", all(a >= b for a, b in zip(rates, rates[1:])) and rates[-1] > 0)
    return checks


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        results = selftest()
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
        return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME
    try:
        cfg = _load(args)
        deltas = _parse_deltas(args.deltas) if args.command == "keyrate" else None
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    out = args.out or Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        code = EXIT_OK
        if args.command == "simulate":
            artifacts = scenarios.run_simulate(cfg, out, args.envelopes)
        elif args.command == "plan":
            plan, artifacts = scenarios.run_plan(cfg, out)
            if not plan.feasible:
                print("infeasible: " + "; ".join(plan.reasons), file=sys.stderr)
                code = EXIT_INFEASIBLE
        elif args.command == "keyrate":
            artifacts = scenarios.run_keyrate(cfg, out, deltas)
        else:
            artifacts = scenarios.REPRODUCERS[args.figure](cfg, out)
        name = args.command if args.command != "reproduce" else f"reproduce {args.figure}"
        write_manifest(out, name, cfg, artifacts)
    except InfeasiblePlanError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to one exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return code


if __name__ == "__main__":
    sys.exit(main())
