"""Linearizability checking of operation histories against sequential specs.

A history is the projection of an event log onto one object: invoke and
respond events, with invocations left open when the caller crashed.  The
checker searches for a total order of the operations that (a) respects the
real-time order of non-overlapping operations, (b) replays through the
spec's delta reproducing every recorded result, and (c) either includes or
drops each open invocation (an operation whose caller crashed may or may
not have taken effect).

The search is depth-first over linearization points with memoization on
(spec state, set of linearized ops), which prunes the exponential blowup
in practice.  Histories above the size bound come back `undecided` rather
than silently passing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, NamedTuple

from .kernel import INVOKE, RESPOND, EventLog

DEFAULT_MAX_COMPLETE = 20

UNDECIDED = "undecided: too large"


class MalformedLogError(Exception):
    pass


class HistEvent(NamedTuple):
    t: int
    pid: int
    kind: str  # invoke | respond
    op: str
    args: tuple
    result: Any


class OpRecord(NamedTuple):
    pid: int
    op: tuple  # (name, *args)
    result: Any  # meaningless when pending
    t_inv: int
    t_res: int | None  # None = pending (open invocation)

    @property
    def pending(self) -> bool:
        return self.t_res is None


@dataclass
class History:
    obj: str
    events: list[HistEvent]

    def records(self) -> list[OpRecord]:
        open_inv: dict[int, HistEvent] = {}
        recs: list[OpRecord] = []
        for ev in self.events:
            if ev.kind == INVOKE:
                if ev.pid in open_inv:
                    raise MalformedLogError(
                        f"p{ev.pid} invoked {ev.op} while {open_inv[ev.pid].op} is open"
                    )
                open_inv[ev.pid] = ev
            elif ev.kind == RESPOND:
                inv = open_inv.pop(ev.pid, None)
                if inv is None or inv.op != ev.op:
                    raise MalformedLogError(
                        f"respond {ev.op} by p{ev.pid} at t={ev.t} matches no invocation"
                    )
                recs.append(
                    OpRecord(ev.pid, (inv.op, *inv.args), ev.result, inv.t, ev.t)
                )
        for inv in open_inv.values():
            recs.append(OpRecord(inv.pid, (inv.op, *inv.args), None, inv.t, None))
        recs.sort(key=lambda r: r.t_inv)
        return recs

    def completed_count(self) -> int:
        return sum(1 for r in self.records() if not r.pending)


@dataclass
class Verdict:
    accepted: bool | None  # None = undecided
    witness: list[OpRecord] | None = None
    violation_core: list[OpRecord] | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.accepted is True


def extract_history(log: EventLog, obj: str) -> History:
    events = []
    for ev in log.events:
        if ev.kind in (INVOKE, RESPOND) and ev.detail.get("obj") == obj:
            events.append(
                HistEvent(
                    ev.t,
                    ev.pid,
                    ev.kind,
                    ev.detail["op"],
                    tuple(ev.detail.get("args", ())),
                    ev.detail.get("result"),
                )
            )
    return History(obj, events)


def canonical(value):
    """Normal form for result comparison: sequences become tuples, so values
    survive a JSON round trip (history files) unchanged."""
    if isinstance(value, (list, tuple)):
        return tuple(canonical(v) for v in value)
    if hasattr(value, "__dataclass_fields__"):
        return tuple(
            canonical(getattr(value, f)) for f in value.__dataclass_fields__
        )
    return value


def _search(recs: list[OpRecord], spec) -> list[int] | None:
    """Return indices of a legal witness order, or None."""
    m = len(recs)
    pred = [0] * m
    for i, ri in enumerate(recs):
        for j, rj in enumerate(recs):
            if rj.t_res is not None and rj.t_res < ri.t_inv:
                pred[i] |= 1 << j
    target = 0
    expected = []
    for i, r in enumerate(recs):
        if not r.pending:
            target |= 1 << i
        expected.append(canonical(r.result))
    seen: set[tuple] = set()
    path: list[int] = []

    def dfs(state, done: int) -> bool:
        if done & target == target:
            return True
        key = (state, done)
        if key in seen:
            return False
        seen.add(key)
        for i in range(m):
            bit = 1 << i
            if done & bit or pred[i] & ~done:
                continue
            rec = recs[i]
            state2, res = spec.delta(state, rec.op)
            if rec.t_res is not None and canonical(res) != expected[i]:
                continue
            path.append(i)
            if dfs(state2, done | bit):
                return True
            path.pop()
        return False

    return list(path) if dfs(spec.initial, 0) else None


def check(
    history: History,
    spec,
    *,
    max_complete: int = DEFAULT_MAX_COMPLETE,
    explain: bool = True,
) -> Verdict:
    """Decide linearizability; `explain=False` skips computing the minimal
    violation core (the verdict itself is unaffected)."""
    recs = history.records()
    n_complete = sum(1 for r in recs if not r.pending)
    if n_complete > max_complete:
        return Verdict(None, reason=UNDECIDED)
    order = _search(recs, spec)
    if order is not None:
        return Verdict(True, witness=[recs[i] for i in order])
    return Verdict(False, violation_core=_shrink(recs, spec) if explain else recs)


def _shrink(recs: list[OpRecord], spec) -> list[OpRecord]:
    """1-minimal rejected sub-history: no single operation can be dropped
    while keeping the rejection."""
    core = list(recs)
    changed = True
    while changed:
        changed = False
        for i in range(len(core)):
            trial = core[:i] + core[i + 1 :]
            if trial and _search(trial, spec) is None:
                core = trial
                changed = True
                break
    return core


# ---------------------------------------------------------------------------
# History files: the same line-delimited records as event-log projections


def dump_history(history: History, path) -> None:
    import json

    with open(path, "w") as fh:
        for ev in history.events:
            rec = {"t": ev.t, "pid": ev.pid, "kind": ev.kind, "detail": {"obj": history.obj, "op": ev.op}}
            if ev.kind == INVOKE:
                rec["detail"]["args"] = list(ev.args)
            else:
                rec["detail"]["result"] = ev.result
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_history(path, obj: str | None = None) -> History:
    import json

    events = []
    objs = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLogError(f"line {lineno}: {exc}") from None
            detail = rec.get("detail", rec)
            if rec.get("kind") not in (INVOKE, RESPOND):
                continue
            if obj is not None and detail.get("obj") not in (None, obj):
                continue
            objs.add(detail.get("obj", ""))
            events.append(
                HistEvent(
                    rec["t"],
                    rec["pid"],
                    rec["kind"],
                    detail["op"],
                    tuple(detail.get("args", ())),
                    detail.get("result"),
                )
            )
    name = obj if obj is not None else (objs.pop() if len(objs) == 1 else "")
    return History(name, events)
