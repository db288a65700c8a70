"""Command-line entry point: run scenarios and sweeps, play demos, check
history files, and drive the universal constructions directly.

Exit codes: 0 all checks passed, 1 a property or linearizability violation,
2 undecided or a run that did not quiesce (budget/blocked), 3 usage or
scenario errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, replace

from .demos import ENV_DEMO_DIR, load_demo_scenario, run_demo
from .kernel import QUIESCENT, EventLog
from .lincheck import check, extract_history, load_history
from .objects import SPECS, UnknownOperation, make_spec
from .properties import run_checks
from .protocols import protocol_info, run_scenario
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_UNDECIDED = 2
EXIT_USAGE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunReport:
    log: EventLog
    problems: dict[str, list[str]] = field(default_factory=dict)
    verdicts: dict[str, object] = field(default_factory=dict)

    @property
    def violated(self) -> bool:
        return any(self.problems.values()) or any(
            v.accepted is False for v in self.verdicts.values()
        )

    @property
    def undecided(self) -> bool:
        return self.log.outcome != QUIESCENT or any(
            v.accepted is None for v in self.verdicts.values()
        )

    def exit_code(self) -> int:
        if self.violated:
            return EXIT_VIOLATION
        if self.undecided:
            return EXIT_UNDECIDED
        return EXIT_OK


def execute(scenario: Scenario) -> RunReport:
    """Run one scenario and evaluate everything that applies to it."""
    info = protocol_info(scenario.protocol)
    log = run_scenario(scenario)
    report = RunReport(log)
    report.problems = {
        name: msgs for name, msgs in run_checks(log, info.checks).items() if msgs
    }
    for obj, spec in info.objects(scenario):
        report.verdicts[obj] = check(extract_history(log, obj), spec)
    return report


def _print_report(scenario: Scenario, report: RunReport) -> None:
    log = report.log
    print(
        f"run {scenario.name or scenario.protocol} seed={scenario.seed}: "
        f"outcome={log.outcome} events={len(log.events)} digest={log.digest()[:16]}"
    )
    for name, msgs in report.problems.items():
        print(f"  property {name}: VIOLATED")
        for msg in msgs[:5]:
            print(f"    {msg}")
    if not report.problems:
        print("  properties: ok")
    for obj, verdict in report.verdicts.items():
        if verdict.accepted is True:
            print(f"  linearizable: yes ({obj})")
        elif verdict.accepted is False:
            print(f"  linearizable: NO ({obj})")
            core = ", ".join(
                f"p{r.pid}.{r.op[0]}{'' if r.pending else '->' + repr(r.result)}"
                for r in verdict.violation_core
            )
            print(f"    violation core: {core}")
        else:
            print(f"  linearizable: {verdict.reason} ({obj})")


def _write_records(log: EventLog, path: str, fmt: str) -> None:
    with open(path, "w") as fh:
        if fmt == "records":
            for line in log.lines():
                fh.write(line + "\n")
        else:
            for ev in log.events:
                detail = " ".join(f"{k}={v!r}" for k, v in ev.detail.items())
                fh.write(f"{ev.t:6d} p{ev.pid} {ev.kind:8s} {detail}\n")


def _resolve_scenario(spec: str) -> Scenario:
    if os.path.exists(spec):
        return load_scenario(spec)
    name = spec[:-4] if spec.endswith(".scn") else spec
    try:
        return load_demo_scenario(name)
    except FileNotFoundError:
        raise ScenarioError(
            f"scenario: no file {spec!r} and no canned scenario of that name "
            f"(set {ENV_DEMO_DIR} to point at your scenario directory)"
        ) from None


def _parse_sweep(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ScenarioError(f"--sweep: expected A..B, got {text!r}")
    try:
        return int(lo), int(hi)
    except ValueError:
        raise ScenarioError(f"--sweep: expected integers, got {text!r}") from None


def _figure_path(out: str | None, scenario_name: str, suffix: str) -> str:
    base = os.path.splitext(out)[0] if out else scenario_name or "seqthink"
    return f"{base}{suffix}.png"


def cmd_run(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    if args.budget is not None:
        scenario = replace(scenario, step_budget=args.budget)
    if args.sweep is None:
        if args.seed is not None:
            scenario = scenario.with_seed(args.seed)
        report = execute(scenario)
        _print_report(scenario, report)
        if args.out:
            _write_records(report.log, args.out, args.format)
        if args.plot:
            from .report import render_timeline

            path = _figure_path(args.out, scenario.name, "-timeline")
            render_timeline(report.log, path)
            print(f"  figure: {path}")
        return report.exit_code()

    lo, hi = _parse_sweep(args.sweep)
    counts = {"accepted": 0, "rejected": 0, "undecided": 0, "budget-exhausted": 0}
    prop_violations = 0
    bad_seeds: list[int] = []
    out_fh = open(args.out, "w") if args.out else None
    mutex_like = "mutual-exclusion" in protocol_info(scenario.protocol).checks
    try:
        for seed in range(lo, hi + 1):
            run_scn = scenario.with_seed(seed)
            report = execute(run_scn)
            if any(report.problems.values()):
                prop_violations += 1
            if report.log.outcome != QUIESCENT:
                counts["budget-exhausted"] += 1
            rejected = any(v.accepted is False for v in report.verdicts.values())
            undecided = any(v.accepted is None for v in report.verdicts.values())
            if rejected:
                counts["rejected"] += 1
            elif undecided:
                counts["undecided"] += 1
            elif report.log.outcome == QUIESCENT and not report.problems:
                counts["accepted"] += 1
            if report.exit_code() != EXIT_OK:
                bad_seeds.append(seed)
            if out_fh:
                out_fh.write(
                    f'{{"seed":{seed},"outcome":"{report.log.outcome}",'
                    f'"violations":{sum(len(m) for m in report.problems.values())},'
                    f'"digest":"{report.log.digest()}"}}\n'
                )
    finally:
        if out_fh:
            out_fh.close()
    total = hi - lo + 1
    print(f"sweep {scenario.name or scenario.protocol} seeds {lo}..{hi}: {total} runs")
    if mutex_like:
        print(f"  mutual exclusion violations: {prop_violations}/{total}")
    else:
        print(f"  property violations: {prop_violations}/{total}")
    print(
        "  "
        + " ".join(f"{k}={v}" for k, v in counts.items())
    )
    if bad_seeds:
        shown = ", ".join(str(s) for s in bad_seeds[:10])
        print(f"  failing seeds: {shown}{' ...' if len(bad_seeds) > 10 else ''}")
    if args.plot:
        from .report import render_sweep

        path = _figure_path(args.out, scenario.name, "-sweep")
        render_sweep(counts, path, title=f"{scenario.protocol} seeds {lo}..{hi}")
        print(f"  figure: {path}")
    if bad_seeds:
        any_violation = prop_violations > 0 or counts["rejected"] > 0
        return EXIT_VIOLATION if any_violation else EXIT_UNDECIDED
    return EXIT_OK


def cmd_demo(args) -> int:
    code, text, logs = run_demo(args.name)
    print(text)
    if logs and args.out:
        _write_records(logs[-1], args.out, "records")
        print(f"log: {args.out}")
    if logs and args.plot:
        from .report import render_timeline

        path = _figure_path(args.out, args.name, "-timeline")
        render_timeline(logs[-1], path)
        print(f"figure: {path}")
    return code


def cmd_check(args) -> int:
    try:
        spec = make_spec(args.spec)
    except UnknownOperation as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    history = load_history(args.history, obj=args.object)
    verdict = check(history, spec, max_complete=args.bound)
    if verdict.accepted is True:
        print("linearizable: yes")
        order = " -> ".join(
            f"p{r.pid}.{r.op[0]}{'' if r.pending else '=' + repr(r.result)}"
            for r in verdict.witness
        )
        print(f"witness: {order}")
        return EXIT_OK
    if verdict.accepted is False:
        print("linearizable: NO")
        for r in verdict.violation_core:
            shown = "pending" if r.pending else repr(r.result)
            print(f"  p{r.pid} {r.op[0]}{r.op[1:]} -> {shown} [{r.t_inv}..{r.t_res or 'open'}]")
        return EXIT_VIOLATION
    print(verdict.reason)
    return EXIT_UNDECIDED


def cmd_universal(args) -> int:
    protocol = "universal-to" if args.alg == "to" else "universal-llsc"
    params = {"object": args.object, "ops_per_process": str(args.ops)}
    if args.crashes:
        params["auto_crashes"] = str(args.crashes)
    scenario = Scenario(
        n=args.n,
        protocol=protocol,
        seed=args.seed,
        params=params,
        name=f"universal-{args.alg}-{args.object}",
    )
    report = execute(scenario)
    history = extract_history(report.log, args.object)
    for ev in history.events:
        mark = "+" if ev.kind == "invoke" else "-"
        shown = ev.args if ev.kind == "invoke" else ev.result
        print(f"  {ev.t:5d} {mark} p{ev.pid} {ev.op} {shown!r}")
    _print_report(scenario, report)
    if args.out:
        _write_records(report.log, args.out, "records")
    if args.plot:
        from .report import render_timeline

        path = _figure_path(args.out, scenario.name, "-timeline")
        render_timeline(report.log, path)
        print(f"  figure: {path}")
    return report.exit_code()


def build_parser() -> _Parser:
    parser = _Parser(prog="seqthink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file or canned scenario")
    p_run.add_argument("scenario", help="scenario file path or canned scenario name")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--sweep", metavar="A..B", help="run seeds A through B inclusive")
    p_run.add_argument("--budget", type=int, default=None, metavar="N")
    p_run.add_argument("--out", metavar="FILE", help="write event records here")
    p_run.add_argument("--format", choices=("text", "records"), default="records")
    p_run.add_argument("--plot", action="store_true", help="render figures next to --out")
    p_run.set_defaults(fn=cmd_run)

    p_demo = sub.add_parser("demo", help="run an annotated demonstration")
    p_demo.add_argument("name")
    p_demo.add_argument("--out", metavar="FILE")
    p_demo.add_argument("--plot", action="store_true")
    p_demo.set_defaults(fn=cmd_demo)

    p_check = sub.add_parser("check", help="check a history file for linearizability")
    p_check.add_argument("history", help="line-delimited invoke/respond records")
    p_check.add_argument("--spec", required=True, choices=sorted(SPECS))
    p_check.add_argument("--object", default=None, help="object id filter")
    p_check.add_argument("--bound", type=int, default=20)
    p_check.set_defaults(fn=cmd_check)

    p_uni = sub.add_parser("universal", help="run a universal construction")
    p_uni.add_argument("--alg", choices=("to", "llsc"), required=True)
    p_uni.add_argument(
        "--object", choices=("stack", "counter", "register", "ledger"), required=True
    )
    p_uni.add_argument("--n", type=int, default=4)
    p_uni.add_argument("--seed", type=int, default=0)
    p_uni.add_argument("--ops", type=int, default=2, help="operations per process")
    p_uni.add_argument("--crashes", type=int, default=0, help="max seeded crashes")
    p_uni.add_argument("--out", metavar="FILE")
    p_uni.add_argument("--plot", action="store_true")
    p_uni.set_defaults(fn=cmd_universal)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"seqthink: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"seqthink: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
