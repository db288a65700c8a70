"""Canned demonstration scenarios with annotated narratives.

Scenario files resolve against `SEQTHINK_DEMO_DIR` first (so users can
tweak a copy), falling back to the files shipped with the package.
"""

from __future__ import annotations

import os
from dataclasses import replace
from importlib import resources

from ..agreement import TO_OBJ
from ..kernel import BUDGET_EXHAUSTED, INTERNAL
from ..lincheck import check, extract_history
from ..mutex import cs_intervals
from ..objects import (
    LedgerBlock,
    LedgerSpec,
    block_digest,
    dump_chain_text,
    make_spec,
    op_to_payload,
    verify_chain,
)
from ..protocols import run_scenario
from ..scenario import Scenario, parse_scenario

ENV_DEMO_DIR = "SEQTHINK_DEMO_DIR"


def load_demo_scenario(name: str) -> Scenario:
    fname = name if name.endswith(".scn") else name + ".scn"
    demo_dir = os.environ.get(ENV_DEMO_DIR)
    if demo_dir:
        path = os.path.join(demo_dir, fname)
        if os.path.exists(path):
            with open(path) as fh:
                return parse_scenario(fh.read(), name=name)
    ref = resources.files(__package__).joinpath(fname)
    if not ref.is_file():
        raise FileNotFoundError(f"no canned scenario {fname!r}")
    return parse_scenario(ref.read_text(), name=name)


def demo_abd_inversion(out: list[str]) -> tuple[int, list]:
    base = load_demo_scenario("abd-inversion")
    spec = make_spec("register")
    logs = []
    verdicts = {}
    for skip in (True, False):
        scn = replace(base, params={**base.params, "skip_read_phase2": str(skip).lower()})
        log = run_scenario(scn)
        logs.append(log)
        history = extract_history(log, "REG")
        verdict = check(history, spec)
        verdicts[skip] = verdict
        variant = "write-back disabled" if skip else "write-back enabled"
        out.append(f"--- read {variant} ---")
        for rec in history.records():
            span = f"[{rec.t_inv}..{rec.t_res if rec.t_res else 'open'}]"
            shown = "pending" if rec.pending else repr(rec.result)
            out.append(f"  p{rec.pid} {rec.op[0]}{rec.op[1:]} -> {shown}  {span}")
        out.append(f"  linearizable: {'yes' if verdict.accepted else 'NO'}")
        if verdict.accepted is False:
            core = ", ".join(f"p{r.pid}.{r.op[0]}" for r in verdict.violation_core)
            out.append(f"  violation core: {core}")
    out.append("")
    out.append(
        "the early read returned the new value from one majority, the later"
        " read an old value from another; the read's write-back phase is what"
        " forbids this"
    )
    ok = verdicts[True].accepted is False and verdicts[False].accepted is True
    return (0 if ok else 1), logs


def demo_ledger_tamper(out: list[str]) -> tuple[int, list]:
    spec = LedgerSpec()
    state = spec.initial
    for pid in range(1, 6):
        state, _ = spec.delta(state, ("append", op_to_payload(("inc",)), pid))
    out.append("built a 5-block chain:")
    out.extend("  " + line for line in dump_chain_text(state).splitlines())
    assert verify_chain(state) is None
    blocks, head = state
    victim = blocks[1]
    flipped = bytes([victim.payload[0] ^ 0x01]) + victim.payload[1:]
    tampered_blocks = (
        blocks[:1] + (LedgerBlock(flipped, victim.prev_hash, victim.appender),) + blocks[2:]
    )
    violation = verify_chain((tampered_blocks, head))
    out.append("")
    out.append("flipped one bit in the payload of block 1")
    out.append(f"verify_chain -> violation at block {violation}")
    out.append("(block 2's stored predecessor digest no longer matches block 1)")
    return (0 if violation == 2 else 1), []


def demo_llsc_help(out: list[str]) -> tuple[int, list]:
    scn = load_demo_scenario("llsc-help")
    log = run_scenario(scn)
    history = extract_history(log, "counter")
    results = {rec.pid: rec.result for rec in history.records()}
    winner_sc = None
    p1_sc_ok = False
    for ev in log.events:
        if ev.kind == INTERNAL and ev.detail.get("op") == "sc" and ev.detail.get("ok"):
            if ev.pid == 2 and winner_sc is None:
                winner_sc = ev
            if ev.pid == 1:
                p1_sc_ok = True
    out.append("p1 announced inc and stalled before its conditional store;")
    out.append("p2 announced inc, read the board, and committed both at once:")
    if winner_sc:
        out.append(f"  t={winner_sc.t}: p2 store succeeded, applied {winner_sc.detail['applied']}")
    out.append(f"p1's own store never succeeded: {not p1_sc_ok}")
    out.append(f"results: p1 -> {results.get(1)}, p2 -> {results.get(2)}")
    out.append("the loser returned a result computed by the winner on its behalf")
    verdict = check(history, make_spec("counter"))
    out.append(f"history linearizable: {'yes' if verdict.accepted else 'NO'}")
    ok = (
        winner_sc is not None
        and winner_sc.detail["applied"] == [[1, 1], [2, 1]]
        and not p1_sc_ok
        and results.get(1) == 1
        and results.get(2) == 2
        and verdict.accepted is True
    )
    return (0 if ok else 1), [log]


def demo_to_prefix(out: list[str]) -> tuple[int, list]:
    scn = load_demo_scenario("to-prefix")
    log = run_scenario(scn)
    seqs: dict[int, list[tuple]] = {}
    for ev in log.events:
        if ev.kind == INTERNAL and ev.detail.get("tag") == "to_deliver":
            seqs.setdefault(ev.pid, []).append(tuple(ev.detail["msg"]))
    out.append(f"outcome: {log.outcome}")
    for pid in sorted(seqs):
        shown = " ".join(f"m{s}.{c}" for s, c in seqs[pid])
        out.append(f"  p{pid} delivered: {shown}")
    pids = sorted(seqs)
    ok = bool(pids)
    for i in range(len(pids)):
        for j in range(i + 1, len(pids)):
            a, b = seqs[pids[i]], seqs[pids[j]]
            k = min(len(a), len(b))
            if a[:k] != b[:k]:
                ok = False
    out.append("every pair of delivery sequences is prefix-related: " + ("yes" if ok else "NO"))
    return (0 if ok else 1), [log]


def demo_mutex(out: list[str]) -> tuple[int, list]:
    scn = load_demo_scenario("mutex")
    log = run_scenario(scn)
    spans = cs_intervals(log)
    out.append(f"outcome: {log.outcome}")
    out.append("critical-section intervals (step spans):")
    flat = []
    for pid in sorted(spans):
        for start, end in spans[pid]:
            flat.append((start, end, pid))
            out.append(f"  p{pid}: [{start}, {end}]")
    flat.sort()
    disjoint = all(flat[i][1] <= flat[i + 1][0] for i in range(len(flat) - 1))
    out.append(f"intervals pairwise disjoint: {'yes' if disjoint else 'NO'}")
    return (0 if disjoint and flat else 1), [log]


def demo_mutex_crash(out: list[str]) -> tuple[int, list]:
    scn = load_demo_scenario("mutex-crash")
    log = run_scenario(scn)
    spans = cs_intervals(log)
    crashed = log.crashed_pids()
    out.append(f"p1 crashed at t={crashed.get(1)} while in its critical section")
    out.append(f"p1 critical section: {spans.get(1)}")
    p2_entered = bool(spans.get(2))
    out.append(f"p2 ever entered: {'yes' if p2_entered else 'no'}")
    out.append(f"outcome: {log.outcome} (p2 spins forever against a raised flag)")
    ok = log.outcome == BUDGET_EXHAUSTED and not p2_entered and 1 in crashed
    return (0 if ok else 1), [log]


DEMOS = {
    "abd-inversion": demo_abd_inversion,
    "ledger-tamper": demo_ledger_tamper,
    "llsc-help": demo_llsc_help,
    "to-prefix": demo_to_prefix,
    "mutex": demo_mutex,
    "mutex-crash": demo_mutex_crash,
}


def run_demo(name: str) -> tuple[int, str, list]:
    """Returns (exit code, narrative text, logs produced)."""
    fn = DEMOS.get(name)
    if fn is None:
        available = ", ".join(sorted(DEMOS))
        return 3, f"unknown demo {name!r}; available demos: {available}", []
    out: list[str] = [f"demo: {name}"]
    code, logs = fn(out)
    return code, "\n".join(out), logs
