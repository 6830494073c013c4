"""Command-line entry point.

Subcommands::

    deadzone-platoon preset fig2 -o fig2.yaml
    deadzone-platoon run fig2.yaml --output out/        # or: run preset:fig2
    deadzone-platoon certify out/trajectory.csv fig2.yaml
    deadzone-platoon explore --family psd-zero-free-kernel --trials 100 --seed 1 --output out/

Exit status: ``run`` returns 0 whatever the verdict, 2 on scenario errors and
1 if the integration diverges. ``certify`` returns 0 iff every applicable check
passes, 1 otherwise and 2 on input errors. ``explore`` returns 3 when an
observation contradicts the convergence theorems (most likely a bug), else 0.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import scenario_file
from .certify import certify_run
from .explore import FAMILIES, SearchConfig, replay, search_counterexample
from .simulate import DivergedError, ScenarioError, Trajectory, detect, run

log = logging.getLogger("deadzone_platoon")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_CONTRADICTION = 3


def _load_scenario(ref: str, args) -> scenario_file.Scenario:
    if ref.startswith("preset:"):
        try:
            s = scenario_file.preset(ref.split(":", 1)[1])
        except KeyError as exc:
            raise ScenarioError("preset", exc.args[0]) from None
    else:
        path = Path(ref)
        if not path.is_file():
            raise ScenarioError(ref, "no such scenario file")
        s = scenario_file.load(path)
    if getattr(args, "seed", None) is not None and s.seed != args.seed:
        # re-derive per-edge seeds of unseeded random disturbances
        doc = scenario_file.scenario_to_dict(s) if ref.startswith("preset:") else yaml.safe_load(Path(ref).read_text())
        doc["seed"] = args.seed
        s = scenario_file.scenario_from_dict(doc)
    dt = getattr(args, "dt", None)
    horizon = getattr(args, "horizon", None)
    if dt is not None or horizon is not None:
        s = s.with_overrides(dt=dt, horizon=horizon)
    return s


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n")


def cmd_preset(args) -> int:
    try:
        text = scenario_file.dumps(scenario_file.preset(args.name))
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_INPUT
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        s = _load_scenario(args.scenario, args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        result = run(s)
    except DivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    result.trajectory.to_csv(out / "trajectory.csv")
    lines = result.summary_lines(scenario_file.input_hash(s))
    _write_lines(out / "summary.txt", lines)
    print(f"verdict={result.verdict.status} certification={'pass' if result.report.passed else 'fail'}")
    print(f"wrote {out / 'trajectory.csv'} and {out / 'summary.txt'}")
    return EXIT_OK


def cmd_certify(args) -> int:
    try:
        s = _load_scenario(args.scenario, args)
        traj = Trajectory.from_csv(args.trajectory)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if traj.n != s.graph.n:
        print(f"error: trajectory has {traj.n} agents, scenario has {s.graph.n}", file=sys.stderr)
        return EXIT_INPUT
    if traj.duration < s.detection.window:
        print(f"error: trajectory shorter than the detection window ({s.detection.window} s)", file=sys.stderr)
        return EXIT_INPUT
    if len(traj.times) > 1:
        dts = traj.times[1:] - traj.times[:-1]
        # certification tolerances scale with the recorded step
        s = s.with_overrides(dt=float(dts.mean()), horizon=max(traj.duration, s.detection.window))
    verdict = detect(traj, s.detection.window, s.detection.tol)
    report = certify_run(s, traj, verdict)
    lines = [f"input_hash={scenario_file.input_hash(s)}", f"trajectory={args.trajectory}",
             f"mode={'recorded-controls' if traj.controls is not None else 'finite-difference'}",
             f"verdict={verdict.status}"]
    lines += report.summary_lines()
    out = Path(args.output) if args.output else Path(args.trajectory).parent
    out.mkdir(parents=True, exist_ok=True)
    _write_lines(out / "certification.txt", lines)
    for c in report.checks:
        flag = "PASS" if c.passed else "FAIL"
        extra = "" if c.applicable else " (informational)"
        print(f"{flag} {c.name}: worst margin {c.worst_margin:.3g} (tol {c.tolerance:.3g}){extra}")
    for name, why in report.skipped.items():
        print(f"SKIP {name}: {why}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_explore(args) -> int:
    cfg = SearchConfig(
        family=args.family, trials=args.trials, seed=args.seed if args.seed is not None else 0,
        dt=args.dt if args.dt is not None else SearchConfig.dt,
        horizon=args.horizon if args.horizon is not None else SearchConfig.horizon,
        workers=args.workers,
    )
    report = search_counterexample(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_lines(out / "report.txt", report.summary_lines())
    for t in report.interesting():
        stem = out / f"trial_{t.index:04d}"
        stem.with_suffix(".yaml").write_text(yaml.safe_dump(t.to_dict(), sort_keys=False))
        replay(cfg, t).to_csv(stem.with_suffix(".csv"))
    for k, v in report.tallies.items():
        print(f"{k}: {v}")
    if report.contradictions:
        for t in report.contradictions:
            print(f"CONTRADICTION trial {t.index}: {t.contradiction}", file=sys.stderr)
        return EXIT_CONTRADICTION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deadzone-platoon", description="Simulate and certify deadzone-controlled platoons.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="print a built-in scenario file")
    p.add_argument("name", choices=sorted(scenario_file.PRESETS))
    p.add_argument("-o", "--output", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_preset)

    def overrides(p):
        p.add_argument("--seed", type=int, help="top-level seed for unseeded random disturbances")
        p.add_argument("--dt", type=float, help="override the integration step (s)")
        p.add_argument("--horizon", type=float, help="override the horizon (s)")

    p = sub.add_parser("run", help="simulate a scenario and certify the result")
    p.add_argument("scenario", help="scenario file, or preset:<name>")
    p.add_argument("-o", "--output", default=".", help="output directory")
    overrides(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("certify", help="certify a recorded trajectory CSV against a scenario")
    p.add_argument("trajectory")
    p.add_argument("scenario", help="scenario file, or preset:<name>")
    p.add_argument("-o", "--output", help="report directory (default: next to the CSV)")
    p.set_defaults(func=cmd_certify, seed=None, dt=None, horizon=None)

    p = sub.add_parser("explore", help="search for trajectories that defy convergence")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", default=".", help="output directory")
    p.set_defaults(func=cmd_explore)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "explore" and args.trials < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
