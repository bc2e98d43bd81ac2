"""Command-line entry point.

Subcommands: validate, simulate, experiment run, report, serve. Exit codes
are part of the contract so CI can gate on them: 0 success, 1 validation or
input failure, 2 a finished experiment judged not resilient, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .orchestrator import SpecParseError, load_experiment_spec
from .runtime import ExperimentValidationError, Platform, render_report_json
from .topology import TopologyError, load_scenario

EX_OK = 0
EX_INVALID = 1
EX_NOT_RESILIENT = 2
EX_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the contract here is 64 + usage text."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EX_USAGE)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EX_INVALID


def _load_scenario(ref: str):
    try:
        return load_scenario(ref)
    except TopologyError as exc:
        raise SystemExit(_fail(f"invalid topology: [{exc.code}] {exc}"))
    except FileNotFoundError:
        raise SystemExit(_fail(f"scenario not found: {ref}"))


# -- subcommand bodies ------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        topo = load_scenario(args.topology)
    except TopologyError as exc:
        return _fail(f"invalid topology: [{exc.code}] {exc}")
    except FileNotFoundError:
        return _fail(f"topology not found: {args.topology}")
    plan = topo.traffic
    print(f"ok: {topo.name}: {len(topo.services)} services, entry {topo.entry!r}, "
          f"traffic {plan.rate_per_s:g}/s for {plan.duration_s:g}s (seed {plan.seed})")
    return EX_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    topo = _load_scenario(args.scenario)
    plan = topo.traffic
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    if args.duration is not None:
        plan = replace(plan, duration_s=args.duration)

    platform = Platform(topo)
    summary = platform.run_simulation(plan)

    doc = {
        "schema_version": 1,
        "report_kind": "simulation",
        "scenario": topo.name,
        "clock_mode": "simulated",
        "seed": plan.seed,
        "traffic": {
            "rate_per_s": plan.rate_per_s,
            "duration_s": plan.duration_s,
            "user_population": plan.user_population,
        },
        "requests_total": summary.requests_total,
        "request_counts": {
            f"{group}/{outcome}": n
            for (group, outcome), n in sorted(summary.request_counts.items())
        },
        "stream_starts": dict(sorted(summary.stream_starts.items())),
        "deployments": [
            {
                "name": name,
                "arrivals": platform.mesh.deployment(name).arrivals,
                "overloads": platform.mesh.deployment(name).overloads,
                "peak_in_flight": platform.mesh.deployment(name).peak_in_flight,
            }
            for name in platform.mesh.deployment_names()
        ],
        "telemetry": platform.telemetry.snapshot(),
    }
    out = Path(args.out or f"{topo.name}-telemetry.json")
    out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")

    print(f"scenario {topo.name}: {summary.requests_total} requests over "
          f"{plan.duration_s:g}s (seed {plan.seed})")
    for (group, outcome), n in sorted(summary.request_counts.items()):
        print(f"  {group}: {outcome} {n}")
    for group, starts in sorted(summary.stream_starts.items()):
        total = summary.group_requests(group)
        norm = starts / total if total else 0.0
        print(f"  stream starts {group}: {starts} (normalized {norm:.3f})")
    print(f"wrote telemetry snapshot to {out}")
    return EX_OK


def cmd_experiment_run(args: argparse.Namespace) -> int:
    try:
        spec = load_experiment_spec(args.spec)
    except SpecParseError as exc:
        for issue in exc.issues:
            print(f"spec error: [{issue.code}] {issue.message}", file=sys.stderr)
        return EX_INVALID
    except FileNotFoundError:
        return _fail(f"experiment spec not found: {args.spec}")

    topo = _load_scenario(args.scenario)
    platform = Platform(topo, seed=args.seed)
    try:
        exp, report, _ = platform.run_experiment(spec)
    except ExperimentValidationError as exc:
        for issue in exc.issues:
            print(f"validation error: [{issue.code}] {issue.message}", file=sys.stderr)
        return EX_INVALID

    out = Path(args.out or f"{spec.id}-report.json")
    out.write_text(render_report_json(report))

    state = report["state"]
    print(f"experiment {spec.id} on {topo.name}: {state['phase']} "
          f"at {state['ended_at_ms']:.0f} ms")
    if state["abort_reason"]:
        print(f"  abort reason: {state['abort_reason']}")
    final = report["verdict"]
    print(f"verdict: {final['result']}")
    for reason in final["reasons"]:
        print(f"  [{reason['code']}] {reason['message']}")
    print(f"wrote report to {out}")
    return EX_NOT_RESILIENT if final["result"] == "not_resilient" else EX_OK


def render_report_text(report: dict) -> str:
    """Human-readable rendering of an experiment report document."""
    exp = report["experiment"]
    state = report["state"]
    comp = report["comparison"]
    lines = []
    add = lines.append

    add(f"experiment {exp['id']}  [{state['phase']}]")
    add(f"scenario {report['scenario']} ({report['clock_mode']} clock)")
    treatment = exp["treatment"]
    t_extra = (f" +{treatment['added_latency_ms']:g} ms"
               if "added_latency_ms" in treatment else "")
    points = ", ".join(f"{p['caller']}:{p['command']}->{p['target']}"
                       for p in exp["injection_points"])
    add(f"treatment {treatment['kind']}{t_extra} at {points}")
    add(f"diverted fraction {exp['diverted_fraction']:g} of cluster "
        f"{exp['target_cluster']} for {exp['duration_minutes']:g} min")
    if state["abort_reason"]:
        add(f"aborted: {state['abort_reason']}")
    add("")

    final = report["verdict"]
    add(f"verdict: {final['result']}")
    for reason in final["reasons"]:
        add(f"  [{reason['code']}] {reason['message']}")
    add("")

    groups = comp["groups"]
    req = comp["requests"]
    sps = comp["normalized_sps"]
    add(f"{'':20s}  {'control':>14s}  {'experiment':>14s}")
    add(f"{'group':20s}  {groups['control']:>14s}  {groups['experiment']:>14s}")
    add(f"{'requests':20s}  {req['control']:>14d}  {req['experiment']:>14d}")

    def fmt(x: Optional[float]) -> str:
        return "n/a" if x is None else f"{x:.4f}"

    add(f"{'normalized sps':20s}  {fmt(sps['control']):>14s}  {fmt(sps['experiment']):>14s}")
    add(f"{'sps ratio':20s}  {fmt(sps['ratio']):>30s}")
    add("")

    for triple in comp["commands"]:
        add(f"command {triple['command']}" +
            ("  (missing: never observed)" if triple["missing"] else ""))
        for outcome in ("success", "fallback_success", "fallback_failure"):
            c, e = triple["control"][outcome], triple["experiment"][outcome]
            cf = triple["control_fractions"][outcome]
            ef = triple["experiment_fractions"][outcome]
            add(f"  {outcome:18s}  {c:>7d} ({cf:7.2%})  {e:>7d} ({ef:7.2%})")
        add("")

    add("timeline:")
    for step in report["timeline"]:
        add(f"  {step['from']} -> {step['to']} at {step['at_ms']:.0f} ms")
    teardown = report["teardown"]
    add(f"teardown: {'complete' if teardown['complete'] else 'INCOMPLETE'}")
    for issue in teardown["issues"]:
        add(f"  issue: {issue}")
    return "\n".join(lines) + "\n"


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.report_file)
    try:
        report = json.loads(path.read_text())
    except FileNotFoundError:
        return _fail(f"report not found: {path}")
    except json.JSONDecodeError as exc:
        return _fail(f"report is not valid JSON: {exc}")
    if report.get("report_kind") != "experiment":
        return _fail("not an experiment report document")
    print(render_report_text(report))
    print(render_report_json(report), end="")
    return EX_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from . import api

    topo = _load_scenario(args.scenario)
    mode = {"sim": "simulated", "real": "real-time"}[args.clock]
    platform = Platform(topo, mode=mode, seed=args.seed)
    print(f"serving {topo.name} on http://{args.host}:{args.port} "
          f"({mode} clock)")
    try:
        api.serve(platform, port=args.port, host=args.host,
                  timescale=args.timescale)
    except OSError as exc:
        return _fail(f"cannot bind {args.host}:{args.port}: {exc}")
    return EX_OK


# -- argument wiring ----------------------------------------------------------------


def _env_int(name: str) -> Optional[int]:
    raw = os.environ.get(name)
    return int(raw) if raw not in (None, "") else None


def build_parser() -> _Parser:
    parser = _Parser(prog="chaoslab",
                     description="chaos experiments on a simulated service mesh")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("validate", help="parse and check a topology or scenario")
    p.add_argument("topology", help="scenario name or topology file")
    p.set_defaults(run=cmd_validate)

    p = sub.add_parser("simulate", help="headless traffic run, no experiment")
    p.add_argument("scenario", help="scenario name or topology file")
    p.add_argument("--seed", type=int, default=None, help="override traffic seed")
    p.add_argument("--duration", type=float, default=None,
                   help="override traffic duration (seconds)")
    p.add_argument("--out", default=None,
                   help="telemetry snapshot path (default <scenario>-telemetry.json)")
    p.set_defaults(run=cmd_simulate)

    p = sub.add_parser("experiment", help="experiment operations")
    esub = p.add_subparsers(dest="experiment_command", metavar="ACTION")
    pr = esub.add_parser("run", help="full experiment lifecycle, headless")
    pr.add_argument("spec", help="experiment spec name or file")
    pr.add_argument("--scenario", required=True, help="scenario name or topology file")
    pr.add_argument("--seed", type=int, default=None, help="override traffic seed")
    pr.add_argument("--out", default=None,
                    help="report path (default <experiment-id>-report.json)")
    pr.set_defaults(run=cmd_experiment_run)

    p = sub.add_parser("report", help="render an experiment report")
    p.add_argument("report_file", help="report JSON written by 'experiment run'")
    p.set_defaults(run=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP control plane and dashboard")
    p.add_argument("--port", type=int,
                   default=_env_int("CHAOSLAB_PORT") or 8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--scenario",
                   default=os.environ.get("CHAOSLAB_SCENARIO") or "gallery")
    p.add_argument("--clock", choices=("sim", "real"),
                   default=os.environ.get("CHAOSLAB_CLOCK") or "real")
    p.add_argument("--seed", type=int, default=_env_int("CHAOSLAB_SEED"))
    p.add_argument("--timescale", type=float, default=1.0,
                   help="real-time speedup factor (simulated ms per wall ms)")
    p.set_defaults(run=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # bad flags (64) or --help (0)
        return exc.code if isinstance(exc.code, int) else EX_USAGE
    if not hasattr(args, "run"):
        parser.print_usage(sys.stderr)
        return EX_USAGE
    try:
        return args.run(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EX_INVALID
    except KeyboardInterrupt:
        return 130
    except BrokenPipeError:
        # stdout consumer (e.g. head) went away; not our error
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EX_OK


if __name__ == "__main__":
    sys.exit(main())
