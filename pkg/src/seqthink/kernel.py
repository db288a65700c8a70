"""Deterministic step-interleaving kernel for crash-prone protocol automata.

Processes are generator coroutines that yield effect requests: register
accesses, message sends, invoke/respond markers, or predicate waits.  The
kernel runs exactly one atomic effect per step, chosen by an adversary from
the set of currently enabled steps, and appends exactly one event to the
log per step.  All randomness (adversary choice, crash delivery subsets)
derives from the scenario seed, so re-running the same scenario reproduces
the event log byte for byte.

A step is identified by a key tuple:

    (pid, 0, thread_index)   resume a process thread
    (pid, 1, message_id)     deliver a pending message to pid

Crash injection occupies the step index named in the crash plan, so a
process crashed at step k has no event with index > k.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, NamedTuple

INVOKE = "invoke"
RESPOND = "respond"
SEND = "send"
DELIVER = "deliver"
CRASH = "crash"
INTERNAL = "internal"

QUIESCENT = "quiescent"
BLOCKED = "blocked"
BUDGET_EXHAUSTED = "budget-exhausted"

FAIRNESS_WINDOW_PER_PROCESS = 16


class ProtocolError(Exception):
    """Wiring or contract violation inside a protocol automaton."""


# ---------------------------------------------------------------------------
# Effects yielded by protocol threads


class Invoke(NamedTuple):
    obj: str
    op: str
    args: tuple = ()


class Respond(NamedTuple):
    obj: str
    op: str
    result: Any = None


class Note(NamedTuple):
    """Internal bookkeeping step; `info` lands in the event detail."""

    tag: str
    info: dict = {}


class Send(NamedTuple):
    to: int
    mkind: str
    payload: Any


class Broadcast(NamedTuple):
    """Enqueue one message per process (including the sender) in one step."""

    mkind: str
    payload: Any


class ReadReg(NamedTuple):
    reg: Any


class WriteReg(NamedTuple):
    reg: Any
    value: Any


class LoadLinked(NamedTuple):
    reg: Any


class StoreCond(NamedTuple):
    reg: Any
    value: Any
    note: dict = {}


class Wait(NamedTuple):
    """Block the thread until `pred()` holds; consumes no step while false."""

    pred: Callable[[], bool]
    tag: str = ""


class Event(NamedTuple):
    t: int
    pid: int
    kind: str
    detail: dict


class Message(NamedTuple):
    mid: int
    src: int
    dst: int
    mkind: str
    payload: Any
    sent_at: int


@dataclass
class ThreadSpec:
    """One schedulable coroutine of a process.

    Daemon threads (server loops, background tasks) are allowed to stay
    blocked at quiescence; non-daemon threads must run to completion.
    """

    pid: int
    name: str
    gen: Iterator
    daemon: bool = False


@dataclass
class Protocol:
    """What the kernel needs from a protocol stack: threads plus handlers."""

    threads: list[ThreadSpec] = field(default_factory=list)
    handlers: dict[int, Callable] = field(default_factory=dict)


def _json_default(value):
    if isinstance(value, bytes):
        return "hex:" + value.hex()
    if hasattr(value, "_asdict"):
        return value._asdict()
    if hasattr(value, "__dict__"):
        return vars(value)
    return repr(value)


class EventLog:
    """Ordered event records of one run, plus the run outcome."""

    __slots__ = ("events", "outcome", "seed", "protocol", "n", "max_enabled_age")

    def __init__(self, seed: int = 0, protocol: str = "", n: int = 0):
        self.events: list[Event] = []
        self.outcome: str = QUIESCENT
        self.seed = seed
        self.protocol = protocol
        self.n = n
        self.max_enabled_age: int | None = None

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def append(self, pid: int, kind: str, detail: dict) -> Event:
        ev = Event(len(self.events) + 1, pid, kind, detail)
        self.events.append(ev)
        return ev

    def by_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def by_pid(self, pid: int) -> list[Event]:
        return [e for e in self.events if e.pid == pid]

    def crashed_pids(self) -> dict[int, int]:
        """pid -> step index of its crash event."""
        return {e.pid: e.t for e in self.events if e.kind == CRASH}

    def lines(self) -> Iterator[str]:
        for t, pid, kind, detail in self.events:
            rec = {"t": t, "pid": pid, "kind": kind, "detail": detail}
            yield json.dumps(rec, separators=(",", ":"), default=_json_default)

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        h.update(self.outcome.encode())
        return h.hexdigest()

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.lines():
                fh.write(line + "\n")


# ---------------------------------------------------------------------------
# Adversaries


class RoundRobinAdversary:
    """Cycles process ids; within a process runs threads before deliveries."""

    def __init__(self, n: int):
        self.n = n
        self._next_pid = 1

    def next(self, enabled: list[tuple], kernel=None) -> tuple:
        by_pid: dict[int, tuple] = {}
        for key in enabled:  # sorted, so first key per pid is its preferred
            by_pid.setdefault(key[0], key)
        for off in range(self.n):
            pid = (self._next_pid - 1 + off) % self.n + 1
            if pid in by_pid:
                self._next_pid = pid % self.n + 1
                return by_pid[pid]
        return enabled[0]


class SeededRandomAdversary:
    def __init__(self, seed: int):
        self._rng = random.Random(f"{seed}|adversary")

    def next(self, enabled: list[tuple], kernel=None) -> tuple:
        return enabled[self._rng.randrange(len(enabled))]


class ScriptedAdversary:
    """Follows a list of step selectors, then falls back to round-robin.

    A selector that matches nothing in the current enabled set is skipped;
    this lets one script drive protocol variants that differ in which
    messages ever exist.
    """

    def __init__(self, selectors: list[tuple], n: int):
        self._sel = list(selectors)
        self._pos = 0
        self._fallback = RoundRobinAdversary(n)

    def next(self, enabled: list[tuple], kernel=None) -> tuple:
        while self._pos < len(self._sel):
            sel = self._sel[self._pos]
            self._pos += 1
            key = self._match(sel, enabled, kernel)
            if key is not None:
                return key
        return self._fallback.next(enabled, kernel)

    @staticmethod
    def _match(sel, enabled, kernel):
        skind = sel[0]
        if skind == "pid":
            for key in enabled:
                if key[0] == sel[1]:
                    return key
        elif skind == "thread":
            want = kernel.thread_index(sel[1], sel[2]) if kernel else None
            for key in enabled:
                if key[0] == sel[1] and key[1] == 0 and key[2] == want:
                    return key
        elif skind == "deliver":
            _, dst, src, mkind = sel
            for key in enabled:
                if key[1] != 1 or key[0] != dst:
                    continue
                msg = kernel.message(key[2]) if kernel else None
                if msg is None:
                    continue
                if src is not None and msg.src != src:
                    continue
                if mkind is not None and msg.mkind != mkind:
                    continue
                return key
        return None


def make_adversary(scenario) -> object:
    kind = scenario.adversary
    if kind == "round-robin":
        return RoundRobinAdversary(scenario.n)
    if kind == "seeded-random":
        return SeededRandomAdversary(scenario.seed)
    if kind == "scripted":
        return ScriptedAdversary(scenario.script, scenario.n)
    raise ProtocolError(f"unknown adversary {kind!r}")


# ---------------------------------------------------------------------------
# The kernel


class _Thread:
    __slots__ = ("pid", "name", "idx", "gen", "pending", "done", "daemon", "key")

    def __init__(self, spec: ThreadSpec, idx: int):
        self.pid = spec.pid
        self.name = spec.name
        self.idx = idx
        self.gen = spec.gen
        self.daemon = spec.daemon
        self.pending = None
        self.done = False
        self.key = (spec.pid, 0, idx)


class _HandlerCtx:
    """Send interface exposed to message handlers; buffers into the step."""

    __slots__ = ("kernel", "pid", "sent")

    def __init__(self, kernel, pid):
        self.kernel = kernel
        self.pid = pid
        self.sent = []

    def send(self, to: int, mkind: str, payload) -> None:
        mid = self.kernel._enqueue(self.pid, to, mkind, payload)
        self.sent.append([mid, to, mkind])

    def broadcast(self, mkind: str, payload) -> None:
        for dst in range(1, self.kernel.n + 1):
            self.send(dst, mkind, payload)


class Kernel:
    def __init__(self, scenario, protocol: Protocol, adversary=None):
        self.scenario = scenario
        self.n = scenario.n
        self.log = EventLog(seed=scenario.seed, protocol=scenario.protocol, n=scenario.n)
        self._rng_crash = random.Random(f"{scenario.seed}|crash")
        self._adversary = adversary if adversary is not None else make_adversary(scenario)
        self._fair = scenario.fairness == "fair"
        self._window = self.n * FAIRNESS_WINDOW_PER_PROCESS
        self._threads: list[_Thread] = []
        self._by_name: dict[tuple[int, str], int] = {}
        for i, spec in enumerate(protocol.threads):
            th = _Thread(spec, i)
            self._threads.append(th)
            self._by_name[(spec.pid, spec.name)] = i
        self._handlers = dict(protocol.handlers)
        self._alive = set(range(1, self.n + 1))
        self._crash_at = {step: pid for pid, step in scenario.crash_plan.items()}
        self._messages: dict[int, Message] = {}
        self._next_mid = 1
        self._ages: dict[tuple, int] = {}
        self._max_age = 0
        for th in self._threads:
            self._advance(th, None)

    # -- introspection used by scripted adversaries and tests

    def thread_index(self, pid: int, name: str) -> int | None:
        return self._by_name.get((pid, name))

    def message(self, mid: int) -> Message | None:
        return self._messages.get(mid)

    def alive(self, pid: int) -> bool:
        return pid in self._alive

    # -- run loop

    def run(self) -> EventLog:
        budget = self.scenario.step_budget
        log = self.log
        while len(log.events) < budget:
            t_next = len(log.events) + 1
            pid = self._crash_at.get(t_next)
            if pid is not None and pid in self._alive:
                self._do_crash(pid)
                continue
            enabled = self._enabled()
            if not enabled:
                log.outcome = BLOCKED if self._anything_blocked() else QUIESCENT
                break
            if self._fair:
                forced = self._fairness_pick(enabled, t_next)
                key = forced if forced is not None else self._adversary.next(enabled, self)
                self._ages.pop(key, None)
            else:
                key = self._adversary.next(enabled, self)
            if key[1] == 0:
                self._run_thread(self._threads[key[2]])
            else:
                self._deliver(key[2])
        else:
            log.outcome = BUDGET_EXHAUSTED
        log.max_enabled_age = self._max_age if self._fair else None
        return log

    def _enabled(self) -> list[tuple]:
        out = []
        alive = self._alive
        for th in self._threads:
            if th.done or th.pid not in alive:
                continue
            p = th.pending
            if p.__class__ is Wait and not p.pred():
                continue
            out.append(th.key)
        for mid, msg in self._messages.items():
            if msg.dst in alive:
                out.append((msg.dst, 1, mid))
        out.sort()
        return out

    def _anything_blocked(self) -> bool:
        return any(
            not th.done and not th.daemon and th.pid in self._alive
            for th in self._threads
        )

    def _fairness_pick(self, enabled: list[tuple], rnd: int) -> tuple | None:
        ages = self._ages
        cur = set(enabled)
        for key in [k for k in ages if k not in cur]:
            del ages[key]
        oldest_key, oldest_rnd = None, rnd
        for key in enabled:
            born = ages.setdefault(key, rnd)
            if born < oldest_rnd or (born == oldest_rnd and oldest_key is None):
                oldest_key, oldest_rnd = key, born
        age = rnd - oldest_rnd
        if age > self._max_age:
            self._max_age = age
        if age >= self._window:
            return oldest_key
        return None

    # -- step execution

    def _advance(self, th: _Thread, value) -> None:
        try:
            th.pending = th.gen.send(value)
        except StopIteration:
            th.done = True
            th.pending = None

    def _run_thread(self, th: _Thread) -> None:
        req = th.pending
        while req.__class__ is Wait:
            if not req.pred():
                self.log.append(th.pid, INTERNAL, {"action": "wake", "tag": req.tag})
                return
            self._advance(th, None)
            req = th.pending
            if th.done:
                self.log.append(th.pid, INTERNAL, {"action": "exit", "thread": th.name})
                return
        value, kind, detail = self._perform(th.pid, req)
        self.log.append(th.pid, kind, detail)
        self._advance(th, value)

    def _perform(self, pid: int, eff) -> tuple[Any, str, dict]:
        cls = eff.__class__
        if cls is ReadReg:
            v = eff.reg.read(pid)
            return v, INTERNAL, {"op": "read", "reg": eff.reg.name, "value": v}
        if cls is WriteReg:
            eff.reg.write(pid, eff.value)
            return None, INTERNAL, {"op": "write", "reg": eff.reg.name, "value": eff.value}
        if cls is LoadLinked:
            v = eff.reg.ll(pid)
            return v, INTERNAL, {"op": "ll", "reg": eff.reg.name, "value": v}
        if cls is StoreCond:
            ok = eff.reg.sc(pid, eff.value)
            detail = {"op": "sc", "reg": eff.reg.name, "ok": ok}
            if eff.note:
                detail.update(eff.note)
            return ok, INTERNAL, detail
        if cls is Invoke:
            return None, INVOKE, {"obj": eff.obj, "op": eff.op, "args": list(eff.args)}
        if cls is Respond:
            return None, RESPOND, {"obj": eff.obj, "op": eff.op, "result": eff.result}
        if cls is Note:
            if "tag" in eff.info:
                raise ProtocolError("note info must not shadow the 'tag' field")
            detail = {"tag": eff.tag}
            detail.update(eff.info)
            return None, INTERNAL, detail
        if cls is Send:
            mid = self._enqueue(pid, eff.to, eff.mkind, eff.payload)
            detail = {"mkind": eff.mkind, "payload": eff.payload, "to": [eff.to]}
            detail["mids"] = [mid] if mid is not None else []
            return None, SEND, detail
        if cls is Broadcast:
            mids, dropped = [], []
            for dst in range(1, self.n + 1):
                mid = self._enqueue(pid, dst, eff.mkind, eff.payload)
                if mid is None:
                    dropped.append(dst)
                else:
                    mids.append(mid)
            detail = {
                "mkind": eff.mkind,
                "payload": eff.payload,
                "to": [m for m in range(1, self.n + 1) if m not in dropped],
                "mids": mids,
            }
            if dropped:
                detail["dropped"] = dropped
            return None, SEND, detail
        raise ProtocolError(f"unknown effect {eff!r}")

    def _enqueue(self, src: int, dst: int, mkind: str, payload) -> int | None:
        if dst not in self._alive:
            return None
        mid = self._next_mid
        self._next_mid += 1
        self._messages[mid] = Message(mid, src, dst, mkind, payload, len(self.log.events) + 1)
        return mid

    def _deliver(self, mid: int) -> None:
        msg = self._messages.pop(mid)
        handler = self._handlers.get(msg.dst)
        if handler is None:
            raise ProtocolError(f"no handler for process {msg.dst}")
        ctx = _HandlerCtx(self, msg.dst)
        handler(ctx, msg)
        detail = {
            "mid": msg.mid,
            "mkind": msg.mkind,
            "src": msg.src,
            "payload": msg.payload,
        }
        if ctx.sent:
            detail["sends"] = ctx.sent
        self.log.append(msg.dst, DELIVER, detail)

    def _do_crash(self, pid: int) -> None:
        self._alive.discard(pid)
        kept, dropped, inbound = [], [], []
        for mid in sorted(self._messages):
            msg = self._messages[mid]
            if msg.dst == pid:
                inbound.append(mid)
                del self._messages[mid]
            elif msg.src == pid:
                if self._rng_crash.getrandbits(1):
                    kept.append(mid)
                else:
                    dropped.append(mid)
                    del self._messages[mid]
        for th in self._threads:
            if th.pid == pid:
                th.done = True
        self._handlers.pop(pid, None)
        self.log.append(
            pid,
            CRASH,
            {"kept": kept, "dropped": dropped, "dropped_inbound": inbound},
        )


def step_repr(key: tuple) -> str:
    pid, rank, sub = key
    return f"p{pid}.thread[{sub}]" if rank == 0 else f"deliver#{sub}->p{pid}"
