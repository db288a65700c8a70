"""Multi-writer multi-reader atomic register over crash-prone message
passing, tolerating a minority of crashes.

Every process is both client and server.  Each value carries a timestamp
`(sn, pid)` under lexicographic order; both client operations run two
query/response phases against majority quorums, and any two majorities
intersect, which is what carries the newest value between operations.

Message kinds and payloads (all fields JSON-friendly):

    WRITE_REQ      {"tag": [pid, c]}
    ACK_WRITE_REQ  {"tag": [pid, c], "sn": int}
    WRITE          {"tag": [pid, c], "value": v, "ts": [sn, pid]}
    ACK_WRITE      {"tag": [pid, c]}
    READ_REQ       {"tag": [pid, c]}
    ACK_READ       {"tag": [pid, c], "value": v, "ts": [sn, pid]}

Acks carrying a tag with no live tracker are stale and dropped silently.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .kernel import Broadcast, Invoke, Note, Protocol, ProtocolError, Respond, ThreadSpec, Wait
from .objects import RegisterSpec
from .scenario import ScenarioError

REG_OBJ = "REG"

INITIAL_VALUE = 0
INITIAL_TS = (0, 0)  # pid 0 orders below every real writer


@dataclass(frozen=True, order=True)
class Timestamp:
    """Identity of a written value; ordered by (sn, pid) lexicographically."""

    sn: int
    pid: int

    def pair(self) -> tuple[int, int]:
        return (self.sn, self.pid)


class AbdProcess:
    """Replica state plus in-flight phase trackers for one process."""

    def __init__(self, pid: int, n: int):
        self.pid = pid
        self.n = n
        self.majority = n // 2 + 1
        self.value = INITIAL_VALUE
        self.ts: tuple[int, int] = INITIAL_TS
        self._tag_counter = 0
        self.query: dict[tuple, dict] = {}  # tag -> {"acks": set, "sns"/"vals": list}
        self.updates: dict[tuple, set] = {}  # tag -> ack'ing pids

    def new_tag(self) -> tuple[int, int]:
        self._tag_counter += 1
        return (self.pid, self._tag_counter)


def make_server(proc: AbdProcess):
    def handler(ctx, msg):
        kind, pl = msg.mkind, msg.payload
        if kind == "WRITE_REQ":
            ctx.send(msg.src, "ACK_WRITE_REQ", {"tag": pl["tag"], "sn": proc.ts[0]})
        elif kind == "WRITE":
            ts = tuple(pl["ts"])
            if proc.ts < ts:
                proc.ts = ts
                proc.value = pl["value"]
            ctx.send(msg.src, "ACK_WRITE", {"tag": pl["tag"]})
        elif kind == "READ_REQ":
            ctx.send(
                msg.src,
                "ACK_READ",
                {"tag": pl["tag"], "value": proc.value, "ts": list(proc.ts)},
            )
        elif kind == "ACK_WRITE_REQ":
            tr = proc.query.get(tuple(pl["tag"]))
            if tr is not None and msg.src not in tr["acks"]:
                tr["acks"].add(msg.src)
                tr["sns"].append(pl["sn"])
        elif kind == "ACK_READ":
            tr = proc.query.get(tuple(pl["tag"]))
            if tr is not None and msg.src not in tr["acks"]:
                tr["acks"].add(msg.src)
                tr["vals"].append((tuple(pl["ts"]), pl["value"]))
        elif kind == "ACK_WRITE":
            acks = proc.updates.get(tuple(pl["tag"]))
            if acks is not None:
                acks.add(msg.src)
        else:
            raise ProtocolError(f"abd server got unknown message kind {kind!r}")

    return handler


def write_op(proc: AbdProcess, value):
    tag = proc.new_tag()
    tr = {"acks": set(), "sns": []}
    proc.query[tag] = tr
    yield Broadcast("WRITE_REQ", {"tag": tag})
    yield Wait(lambda: len(tr["acks"]) >= proc.majority, "write.query")
    msn = max(tr["sns"])
    ts = (msn + 1, proc.pid)
    del proc.query[tag]
    acks = set()
    proc.updates[tag] = acks
    yield Note(
        "phase",
        {"phase_op": "write", "phase": 1, "op_tag": list(tag),
         "acks": sorted(tr["acks"]), "ts": list(ts)},
    )
    yield Broadcast("WRITE", {"tag": tag, "value": value, "ts": ts})
    yield Wait(lambda: len(acks) >= proc.majority, "write.update")
    del proc.updates[tag]
    yield Note("phase", {"phase_op": "write", "phase": 2, "op_tag": list(tag),
                         "acks": sorted(acks)})


def read_op(proc: AbdProcess, skip_phase2: bool = False):
    tag = proc.new_tag()
    tr = {"acks": set(), "vals": []}
    proc.query[tag] = tr
    yield Broadcast("READ_REQ", {"tag": tag})
    yield Wait(lambda: len(tr["acks"]) >= proc.majority, "read.query")
    ts, value = max(tr["vals"], key=lambda pair: pair[0])
    del proc.query[tag]
    yield Note(
        "phase",
        {"phase_op": "read", "phase": 1, "op_tag": list(tag),
         "acks": sorted(tr["acks"]), "ts": list(ts)},
    )
    if skip_phase2:
        return value
    acks = set()
    proc.updates[tag] = acks
    yield Broadcast("WRITE", {"tag": tag, "value": value, "ts": ts})
    yield Wait(lambda: len(acks) >= proc.majority, "read.update")
    del proc.updates[tag]
    yield Note("phase", {"phase_op": "read", "phase": 2, "op_tag": list(tag),
                         "acks": sorted(acks)})
    return value


def abd_client(proc: AbdProcess, ops, skip_phase2: bool = False):
    for op in ops:
        if op[0] == "write":
            yield Invoke(REG_OBJ, "write", (op[1],))
            yield from write_op(proc, op[1])
            yield Respond(REG_OBJ, "write", "ok")
        elif op[0] == "read":
            yield Invoke(REG_OBJ, "read")
            value = yield from read_op(proc, skip_phase2)
            yield Respond(REG_OBJ, "read", value)
        else:
            raise ProtocolError(f"abd workload has no op {op[0]!r}")


def generate_workload(scenario) -> dict[int, list[tuple]]:
    """Seed-derived per-process operation lists.

    `params.ops = w:7,r` pins process workloads explicitly (per process,
    separated by `;`); otherwise each process performs
    `params.ops_per_process` random reads/writes with distinct values.
    """
    raw = scenario.params.get("ops")
    if raw:
        per_proc = [chunk.strip() for chunk in raw.split(";")]
        if len(per_proc) != scenario.n:
            raise ScenarioError(
                f"params.ops: {len(per_proc)} workloads for {scenario.n} processes"
            )
        out = {}
        for pid, chunk in enumerate(per_proc, start=1):
            ops = []
            for tok in chunk.split(","):
                tok = tok.strip()
                if not tok:
                    continue
                if tok == "r":
                    ops.append(("read",))
                elif tok.startswith("w:"):
                    ops.append(("write", int(tok[2:])))
                else:
                    raise ScenarioError(f"params.ops: cannot parse {tok!r}")
            out[pid] = ops
        return out
    k = scenario.param_int("ops_per_process", 2)
    rng = random.Random(f"{scenario.seed}|workload")
    out = {}
    for pid in range(1, scenario.n + 1):
        ops = []
        for i in range(k):
            if rng.getrandbits(1):
                ops.append(("write", pid * 100 + i))
            else:
                ops.append(("read",))
        out[pid] = ops
    return out


def build_abd(scenario) -> Protocol:
    skip = scenario.param_bool("skip_read_phase2", False)
    if skip and not scenario.demo:
        raise ScenarioError(
            "params.skip_read_phase2: debug toggle allowed only with demo = true"
        )
    workload = generate_workload(scenario)
    procs = {pid: AbdProcess(pid, scenario.n) for pid in range(1, scenario.n + 1)}
    threads = [
        ThreadSpec(pid, "main", abd_client(procs[pid], workload[pid], skip))
        for pid in range(1, scenario.n + 1)
    ]
    handlers = {pid: make_server(procs[pid]) for pid in range(1, scenario.n + 1)}
    return Protocol(threads=threads, handlers=handlers)


def abd_objects():
    return [(REG_OBJ, RegisterSpec(initial=INITIAL_VALUE))]
