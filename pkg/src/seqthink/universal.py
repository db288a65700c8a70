"""Two universal constructions: any sequential spec becomes a crash-tolerant
concurrent object.

The broadcast-based construction keeps one replica per process and applies
the total-order delivery stream to it; the invoker picks its result out of
its own replica when its message comes up.

The direct construction runs over shared memory alone: an announce board
of single-writer registers plus one LL/SC cell holding the whole object
state, per-process applied counts, and last results.  Every invoker
speculatively folds in all announced-but-unapplied operations before its
conditional store, which is what makes crashed or slow announcers get
helped; there is no waiting anywhere, so it is wait-free.
"""

from __future__ import annotations

import random

from .agreement import ToProcess, build_to_stack, to_broadcast
from .kernel import (
    Invoke,
    LoadLinked,
    Protocol,
    ReadReg,
    Respond,
    StoreCond,
    ThreadSpec,
    Wait,
    WriteReg,
)
from .objects import make_spec, op_to_payload
from .registers import AtomicRegister, LLSCRegister
from .scenario import ScenarioError

_PENDING = object()


# ---------------------------------------------------------------------------
# Broadcast-based construction


class Alg4Replica:
    def __init__(self, pid: int, spec):
        self.pid = pid
        self.spec = spec
        self.state = spec.initial
        self.result = _PENDING

    def on_deliver(self, m: tuple) -> dict:
        sender, _counter, op = m[0], m[1], tuple(m[2])
        self.state, res = self.spec.delta(self.state, op)
        if sender == self.pid:
            self.result = res
        return {"applied": [m[0], m[1]], "result": res, "state_sig": repr(self.state)}


def to_universal_client(replica: Alg4Replica, to_proc: ToProcess, ops, obj: str):
    for op in ops:
        replica.result = _PENDING
        m = to_proc.stamp(tuple(op))
        yield Invoke(obj, op[0], tuple(op[1:]))
        yield from to_broadcast(to_proc, m)
        yield Wait(lambda: replica.result is not _PENDING, "result")
        yield Respond(obj, op[0], replica.result)


def build_to_universal(scenario) -> Protocol:
    spec = make_spec(_object_param(scenario))
    workload = generate_object_workload(scenario, spec.name)
    proto, to_procs, _cells = build_to_stack(scenario)
    for pid in range(1, scenario.n + 1):
        replica = Alg4Replica(pid, spec)
        to_procs[pid].on_deliver = replica.on_deliver
        proto.threads.append(
            ThreadSpec(
                pid,
                "main",
                to_universal_client(replica, to_procs[pid], workload[pid], spec.name),
            )
        )
    return proto


# ---------------------------------------------------------------------------
# Direct LL/SC construction


class Alg7Shared:
    """Announce board plus the single state cell.

    The cell holds `(value, applied, results)` where `applied[l-1]` counts
    p_l operations folded into `value` and `results[l-1]` is the result of
    the latest one."""

    def __init__(self, n: int, spec, name: str = "obj"):
        self.n = n
        self.spec = spec
        self.board = {
            pid: AtomicRegister(f"{name}.board{pid}", None, writers={pid})
            for pid in range(1, n + 1)
        }
        self.state = LLSCRegister(
            f"{name}.state", (spec.initial, (0,) * n, (None,) * n)
        )


class Alg7Process:
    def __init__(self, pid: int, shared: Alg7Shared):
        self.pid = pid
        self.shared = shared
        self.sn = 0
        self.current_op: tuple | None = None


def _fold(spec, value, applied, results, idx, op):
    value, res = spec.delta(value, op)
    results[idx] = res
    applied[idx] += 1
    return value


def _speculative_pass(proc: Alg7Process, snapshot):
    """Fold every announcement that is next in line for its owner, then try
    to commit; the conditional store's link is `snapshot`'s load."""
    sh = proc.shared
    spec = sh.spec
    board = []
    for owner in range(1, sh.n + 1):
        entry = yield ReadReg(sh.board[owner])
        board.append(entry)
    value, applied, results = snapshot
    applied = list(applied)
    results = list(results)
    folded = []
    for owner in range(1, sh.n + 1):
        entry = board[owner - 1]
        if entry is not None and entry[1] == applied[owner - 1] + 1:
            value = _fold(spec, value, applied, results, owner - 1, entry[0])
            folded.append([owner, entry[1]])
    ok = yield StoreCond(
        sh.state, (value, tuple(applied), tuple(results)), note={"applied": folded}
    )
    return ok


def llsc_apply(proc: Alg7Process):
    """Speculatively fold every ready announcement and try to commit; on a
    failed commit, if this process's operation is still unapplied, run one
    more full pass.

    The second pass must re-read the board, not just fold its own
    operation: any store that succeeds after this process's first failed
    one holds a link loaded after that failure, hence after this process's
    announcement, so a full-pass winner is guaranteed to have folded this
    operation in.  Two passes therefore always suffice, which is what
    keeps the construction wait-free with a fixed step bound."""
    sh = proc.shared
    snapshot = yield LoadLinked(sh.state)
    ok = yield from _speculative_pass(proc, snapshot)
    if ok:
        return
    snapshot = yield LoadLinked(sh.state)
    if proc.sn == snapshot[1][proc.pid - 1] + 1:
        yield from _speculative_pass(proc, snapshot)


def llsc_universal_client(proc: Alg7Process, ops, obj: str):
    sh = proc.shared
    for op in ops:
        op = tuple(op)
        proc.sn += 1
        proc.current_op = op
        yield Invoke(obj, op[0], tuple(op[1:]))
        yield WriteReg(sh.board[proc.pid], (op, proc.sn))
        yield from llsc_apply(proc)
        snapshot = yield LoadLinked(sh.state)
        yield Respond(obj, op[0], snapshot[2][proc.pid - 1])


# Effect steps an invocation may take: announce, first load, two passes of
# (n board reads + store), the recheck load, and the final load.
def llsc_step_bound(n: int) -> int:
    return 2 * n + 6


def build_llsc_universal(scenario) -> Protocol:
    spec = make_spec(_object_param(scenario))
    workload = generate_object_workload(scenario, spec.name)
    shared = Alg7Shared(scenario.n, spec)
    threads = []
    for pid in range(1, scenario.n + 1):
        proc = Alg7Process(pid, shared)
        threads.append(
            ThreadSpec(pid, "main", llsc_universal_client(proc, workload[pid], spec.name))
        )
    return Protocol(threads=threads)


# ---------------------------------------------------------------------------
# Workloads


def _object_param(scenario) -> str:
    obj = scenario.params.get("object", "stack").strip()
    if obj not in ("stack", "counter", "register", "ledger"):
        raise ScenarioError(f"params.object: unknown object {obj!r}")
    return obj


def _parse_op(token: str, obj: str, pid: int) -> tuple:
    token = token.strip()
    if token in ("read", "pop", "inc"):
        return (token,)
    if token == "append":
        return ("append", op_to_payload(("inc",)), pid)
    name, sep, arg = token.partition(":")
    if sep and name in ("push", "write"):
        return (name, int(arg))
    raise ScenarioError(f"params.ops: cannot parse {token!r} for object {obj!r}")


def generate_object_workload(scenario, obj: str) -> dict[int, list[tuple]]:
    raw = scenario.params.get("ops")
    if raw:
        per_proc = [chunk.strip() for chunk in raw.split(";")]
        if len(per_proc) != scenario.n:
            raise ScenarioError(
                f"params.ops: {len(per_proc)} workloads for {scenario.n} processes"
            )
        return {
            pid: [_parse_op(tok, obj, pid) for tok in chunk.split(",") if tok.strip()]
            for pid, chunk in enumerate(per_proc, start=1)
        }
    k = scenario.param_int("ops_per_process", 2)
    rng = random.Random(f"{scenario.seed}|workload")
    out: dict[int, list[tuple]] = {}
    for pid in range(1, scenario.n + 1):
        ops: list[tuple] = []
        for i in range(k):
            roll = rng.getrandbits(1)
            if obj == "stack":
                ops.append(("push", pid * 100 + i) if roll else ("pop",))
            elif obj == "counter":
                ops.append(("inc",) if roll else ("read",))
            elif obj == "register":
                ops.append(("write", pid * 100 + i) if roll else ("read",))
            else:
                payload = op_to_payload(("inc",))
                ops.append(("append", payload, pid) if roll else ("read",))
        out[pid] = ops
    return out
