"""Agreement layer: wait-free consensus from LL/SC cells, and total-order
broadcast driven by a sequence of consensus instances.

A consensus instance is one LL/SC cell initialized to an unset marker.  A
proposer loads it, tries to conditionally store its value, and on failure
loads the winner's value: at most two loads and one store, regardless of
what other processes do.

Total-order broadcast diffuses each message by re-broadcast on first
receipt, then runs a background task that proposes its pending batch to
the next consensus instance and appends whatever that instance decided.
All processes execute instances in strict order 1, 2, ..., so their
delivery queues agree prefix-wise at every moment.
"""

from __future__ import annotations

import random
from typing import Any, Callable

from .kernel import (
    Broadcast,
    Invoke,
    LoadLinked,
    Note,
    Protocol,
    ProtocolError,
    Respond,
    Send,
    StoreCond,
    ThreadSpec,
    Wait,
)
from .registers import LLSCRegister

UNSET = None  # cell marker; never a proposable value

TO_OBJ = "to"


def propose(cell: LLSCRegister, value):
    """Decide `value` or an earlier proposal; at most 2 loads + 1 store."""
    if value is UNSET:
        raise ProtocolError("the unset marker cannot be proposed")
    seen = yield LoadLinked(cell)
    if seen is not UNSET:
        return seen
    ok = yield StoreCond(cell, value)
    if ok:
        return value
    return (yield LoadLinked(cell))


class ConsensusCells:
    """Lazily created, shared table of numbered consensus instances."""

    def __init__(self, name: str = "CS"):
        self._name = name
        self._cells: dict[int, LLSCRegister] = {}

    def get(self, k: int) -> LLSCRegister:
        cell = self._cells.get(k)
        if cell is None:
            cell = self._cells[k] = LLSCRegister(f"{self._name}[{k}]", UNSET)
        return cell


class ToProcess:
    """Per-process total-order broadcast state.

    Messages are `(sender, counter, payload)`; the (sender, counter) pair
    is the global identity.
    """

    def __init__(self, pid: int, n: int):
        self.pid = pid
        self.n = n
        self.seen: set[tuple] = set()
        self.delivered: set[tuple] = set()
        self.to_deliverable: list[tuple] = []
        self.deliverable_set: set[tuple] = set()
        self.next_idx = 0
        self.sn = 0
        self._counter = 0
        self.submitted: set[tuple] = set()
        self.on_deliver: Callable[[tuple], dict] | None = None

    def stamp(self, payload) -> tuple:
        self._counter += 1
        return (self.pid, self._counter, payload)

    def has_backlog(self) -> bool:
        return len(self.delivered) > len(self.delivered & self.deliverable_set)

    def has_deliverable(self) -> bool:
        return self.next_idx < len(self.to_deliverable)


def make_to_handler(proc: ToProcess):
    def handler(ctx, msg):
        if msg.mkind != "TO_MSG":
            raise ProtocolError(f"to handler got unknown message kind {msg.mkind!r}")
        m = tuple(msg.payload)
        if m in proc.seen:
            return
        proc.seen.add(m)
        ctx.broadcast("TO_MSG", m)
        proc.delivered.add(m)

    return handler


def to_broadcast(proc: ToProcess, m: tuple):
    """Hand a stamped message to the diffusion stage (a send to self).

    Message identities must be globally unique; resubmitting one is a
    wiring error."""
    if m[:2] in proc.submitted:
        raise ProtocolError(f"message identity {m[:2]} already broadcast")
    proc.submitted.add(m[:2])
    yield Send(proc.pid, "TO_MSG", m)


def to_task(proc: ToProcess, cells: ConsensusCells):
    """Background task: one consensus instance per pending batch."""
    while True:
        yield Wait(proc.has_backlog, "to.pending")
        batch = sorted(proc.delivered - proc.deliverable_set, key=lambda m: m[:2])
        proc.sn += 1
        decided = yield from propose(cells.get(proc.sn), tuple(batch))
        fresh = [m for m in decided if m not in proc.deliverable_set]
        proc.to_deliverable.extend(fresh)
        proc.deliverable_set.update(fresh)
        yield Note(
            "to_decided",
            {
                "instance": proc.sn,
                "decided": [list(m[:2]) for m in decided],
                "appended": [list(m[:2]) for m in fresh],
            },
        )


def to_delivery(proc: ToProcess):
    """Hands queued messages to the process in queue order, exactly once."""
    while True:
        yield Wait(proc.has_deliverable, "to.ready")
        m = proc.to_deliverable[proc.next_idx]
        proc.next_idx += 1
        extra = proc.on_deliver(m) if proc.on_deliver is not None else {}
        detail = {"msg": [m[0], m[1]], "payload": m[2]}
        detail.update(extra)
        yield Note("to_deliver", detail)


def to_client(proc: ToProcess, count: int):
    used: set[tuple] = set()
    for i in range(count):
        m = proc.stamp(f"m{proc.pid}.{i}")
        if m[:2] in used:
            raise ProtocolError(f"duplicate message identity {m[:2]}")
        used.add(m[:2])
        yield Invoke(TO_OBJ, "to_broadcast", (list(m),))
        yield from to_broadcast(proc, m)
        yield Respond(TO_OBJ, "to_broadcast", "ok")


def build_to_stack(scenario) -> tuple[Protocol, dict[int, ToProcess], ConsensusCells]:
    """The shared plumbing for plain TO runs and the replicated-object
    construction layered on top of it."""
    cells = ConsensusCells()
    procs = {pid: ToProcess(pid, scenario.n) for pid in range(1, scenario.n + 1)}
    threads = []
    for pid in range(1, scenario.n + 1):
        threads.append(ThreadSpec(pid, "task", to_task(procs[pid], cells), daemon=True))
        threads.append(ThreadSpec(pid, "delivery", to_delivery(procs[pid]), daemon=True))
    handlers = {pid: make_to_handler(procs[pid]) for pid in range(1, scenario.n + 1)}
    return Protocol(threads=threads, handlers=handlers), procs, cells


def build_to(scenario) -> Protocol:
    count = scenario.param_int("msgs_per_process", 2)
    proto, procs, _cells = build_to_stack(scenario)
    for pid in range(1, scenario.n + 1):
        proto.threads.append(ThreadSpec(pid, "main", to_client(procs[pid], count)))
    return proto


# ---------------------------------------------------------------------------
# Standalone consensus protocol


def consensus_client(pid: int, cell: LLSCRegister, value):
    yield Invoke("consensus", "propose", (value,))
    decided = yield from propose(cell, value)
    yield Respond("consensus", "propose", decided)


def build_consensus(scenario) -> Protocol:
    raw = scenario.params.get("values")
    if raw:
        values = [_parse_value(v) for v in raw.split(",")]
        if len(values) != scenario.n:
            from .scenario import ScenarioError

            raise ScenarioError(
                f"params.values: {len(values)} values for {scenario.n} processes"
            )
    else:
        rng = random.Random(f"{scenario.seed}|workload")
        values = [pid * 10 + rng.randrange(10) for pid in range(1, scenario.n + 1)]
    cell = LLSCRegister("M", UNSET)
    threads = [
        ThreadSpec(pid, "main", consensus_client(pid, cell, values[pid - 1]))
        for pid in range(1, scenario.n + 1)
    ]
    return Protocol(threads=threads)


def _parse_value(token: str) -> Any:
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return token
