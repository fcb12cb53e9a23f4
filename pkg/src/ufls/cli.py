"""Command-line entry point.

    ufls simulate  --scenario scenario1 --scheme rocof_a --out runs/s1a
    ufls compare   --scenario scenario1 --schemes rocof_a,rocof_b,f_ls --out runs/s1
    ufls pmu-test ramp --out runs/ramp
    ufls calibrate --scenario my.json --target-rocof 0.44

``--scenario`` takes a JSON path or the name of a bundled scenario.
Exit status: 0 success, 2 invalid scenario, 3 frequency collapse (reports are
still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import compare_schemes, run_scenario, summary_table, write_comparison, write_report
from .pmu import EstimatorConfig, run_pmu, score_frames, write_frames_csv
from .relay import SCHEMES
from .scenario import ScenarioError, apply_calibration, bundled, load_scenario, predicted_rocof
from .signal import ramp_test_signal

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_COLLAPSE = 3

log = logging.getLogger("ufls")


def _load(spec: str, calibrate: bool = True):
    if Path(spec).exists():
        return load_scenario(spec, calibrate)
    try:
        return bundled(spec, calibrate)
    except FileNotFoundError:
        raise ScenarioError(f"no scenario file or bundled scenario named {spec!r}") from None


def _schemes(text: str) -> list[str]:
    out = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in out if s not in SCHEMES]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"schemes must be drawn from {', '.join(SCHEMES)}")
    return out


def cmd_simulate(args) -> int:
    s = _load(args.scenario).with_scheme(args.scheme)
    report = run_scenario(s)
    write_report(report, args.out)
    print(summary_table([report]), end="")
    return EXIT_COLLAPSE if report.collapse else EXIT_OK


def cmd_compare(args) -> int:
    s = _load(args.scenario)
    reports = compare_schemes(s, args.schemes)
    write_comparison(reports, args.out)
    print(summary_table(reports), end="")
    return EXIT_COLLAPSE if any(r.collapse for r in reports) else EXIT_OK


def cmd_pmu_test(args) -> int:
    cfg = EstimatorConfig()
    stream, traj = ramp_test_signal(cfg.sample_rate)
    frames = run_pmu(stream, cfg)
    guard = 2 * cfg.window_len / cfg.sample_rate
    rep = score_frames(frames, traj, t_lo=traj.times[0] + guard, t_hi=traj.times[-1] - guard)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_frames_csv(frames, out / "frames_ramp.csv")
    metrics = {
        "test": "ramp",
        "max_fe_hz": rep.max_fe,
        "max_rfe_hzps": rep.max_rfe,
        "rocof_std_hzps": rep.rocof_std,
        "rocof_mean_hzps": rep.rocof_mean,
        "max_tve": rep.max_tve,
        "n_frames": rep.n_frames,
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    print(f"ROCOF std {rep.rocof_std * 1e3:.3f} mHz/s, max RFE {rep.max_rfe:.4f} Hz/s, "
          f"max FE {rep.max_fe * 1e3:.3f} mHz, max TVE {rep.max_tve * 100:.4f} %")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    s = _load(args.scenario, calibrate=False)
    trip = (s.calibration or {}).get("trip") or [e.target for e in s.events
                                                 if e.kind == "generator_trip"]
    if not trip:
        raise ScenarioError("scenario has no generator trip to calibrate against")
    before = predicted_rocof(s, trip)
    scale = apply_calibration(s, args.target_rocof, trip)
    after = predicted_rocof(s, trip)
    print(json.dumps({
        "trip": trip,
        "target_rocof_hzps": args.target_rocof,
        "rocof_before_hzps": before,
        "inertia_scale": scale,
        "rocof_after_hzps": after,
        "inertia_H": {g.id: g.inertia_H for g in s.fleet if g.synchronous},
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ufls", description="PMU-based UFLS closed-loop simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="Log progress to stderr.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Run one scenario under one relay scheme.")
    sim.add_argument("--scenario", required=True, help="Scenario JSON path or bundled name.")
    sim.add_argument("--scheme", required=True, choices=SCHEMES)
    sim.add_argument("--out", required=True, help="Output directory.")
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="Run several schemes on the same scenario.")
    cmp_.add_argument("--scenario", required=True, help="Scenario JSON path or bundled name.")
    cmp_.add_argument("--schemes", type=_schemes, default=["rocof_a", "rocof_b", "f_ls"],
                      help="Comma-separated scheme ids.")
    cmp_.add_argument("--out", required=True, help="Output directory.")
    cmp_.set_defaults(func=cmd_compare)

    pmu = sub.add_parser("pmu-test", help="Estimator compliance tests.")
    pmu.add_argument("test", choices=["ramp"])
    pmu.add_argument("--out", required=True, help="Output directory.")
    pmu.set_defaults(func=cmd_pmu_test)

    cal = sub.add_parser("calibrate", help="Report the inertia scale for a target fall rate.")
    cal.add_argument("--scenario", required=True, help="Scenario JSON path or bundled name.")
    cal.add_argument("--target-rocof", type=float, required=True, help="Target |df/dt| [Hz/s].")
    cal.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
