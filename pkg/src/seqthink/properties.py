"""Safety and liveness predicates evaluated over event logs.

Each check takes a log and returns a list of problem strings (empty means
the property holds).  Checks are registered by name; protocol definitions
declare which apply to their runs.
"""

from __future__ import annotations

from .kernel import (
    BUDGET_EXHAUSTED,
    CRASH,
    DELIVER,
    FAIRNESS_WINDOW_PER_PROCESS,
    INTERNAL,
    INVOKE,
    QUIESCENT,
    RESPOND,
    SEND,
    EventLog,
)


def crash_finality(log: EventLog) -> list[str]:
    problems = []
    crashed: dict[int, int] = {}
    for ev in log.events:
        if ev.pid in crashed and ev.t > crashed[ev.pid]:
            problems.append(f"p{ev.pid} has event at t={ev.t} after crash at t={crashed[ev.pid]}")
        if ev.kind == CRASH:
            crashed[ev.pid] = ev.t
    return problems


def _sent_messages(log: EventLog):
    """All enqueued messages as (mid, src, dst, kind), from send events and
    handler replies folded into deliver events."""
    for ev in log.events:
        if ev.kind == SEND:
            for mid, dst in zip(ev.detail.get("mids", ()), ev.detail.get("to", ())):
                yield mid, ev.pid, dst, ev.detail["mkind"]
        elif ev.kind == DELIVER:
            for mid, dst, mkind in ev.detail.get("sends", ()):
                if mid is not None:
                    yield mid, ev.pid, dst, mkind


def reliable_broadcast(log: EventLog) -> list[str]:
    """A message whose sender never crashed while it was in flight must be
    delivered to every destination that never crashed, by quiescence."""
    if log.outcome != QUIESCENT:
        return []
    delivered = {ev.detail["mid"] for ev in log.events if ev.kind == DELIVER}
    crashed = log.crashed_pids()
    lost_ok: set[int] = set()
    for ev in log.events:
        if ev.kind == CRASH:
            lost_ok.update(ev.detail.get("dropped", ()))
            lost_ok.update(ev.detail.get("dropped_inbound", ()))
    problems = []
    for mid, src, dst, kind in _sent_messages(log):
        if mid in delivered or dst in crashed or mid in lost_ok:
            continue
        problems.append(f"message {mid} ({kind} p{src}->p{dst}) never delivered")
    return problems


def fairness_window(log: EventLog) -> list[str]:
    if log.max_enabled_age is None:
        return []
    window = log.n * FAIRNESS_WINDOW_PER_PROCESS
    if log.max_enabled_age > window:
        return [f"a step stayed enabled for {log.max_enabled_age} > window {window}"]
    return []


# ---------------------------------------------------------------------------
# Shared-memory replay checks


def register_replay(log: EventLog) -> list[str]:
    """Replaying each register's logged operation sequence must reproduce
    every returned value; that sequence is the register's linearization."""
    problems = []
    values: dict[str, object] = {}
    links: dict[str, set[int]] = {}
    for ev in log.events:
        if ev.kind != INTERNAL:
            continue
        d = ev.detail
        op = d.get("op")
        if op == "write":
            values[d["reg"]] = d["value"]
        elif op == "read":
            reg = d["reg"]
            if reg in values and values[reg] != d["value"]:
                problems.append(
                    f"t={ev.t}: read of {reg} returned {d['value']!r}, expected {values[reg]!r}"
                )
            values.setdefault(reg, d["value"])
        elif op == "ll":
            reg = d["reg"]
            if reg in values and values[reg] != d["value"]:
                problems.append(
                    f"t={ev.t}: ll of {reg} returned {d['value']!r}, expected {values[reg]!r}"
                )
            values.setdefault(reg, d["value"])
            links.setdefault(reg, set()).add(ev.pid)
        elif op == "sc":
            reg = d["reg"]
            linked = links.setdefault(reg, set())
            if d["ok"]:
                if ev.pid not in linked:
                    problems.append(
                        f"t={ev.t}: sc on {reg} by p{ev.pid} succeeded despite an"
                        " intervening successful sc"
                    )
                linked.clear()
                if "value" in d:
                    values[reg] = d["value"]
                else:
                    values.pop(reg, None)
            elif ev.pid in linked:
                problems.append(f"t={ev.t}: sc on {reg} by p{ev.pid} failed spuriously")
    return problems


# ---------------------------------------------------------------------------
# Mutual exclusion


def mutual_exclusion(log: EventLog) -> list[str]:
    problems = []
    inside: set[int] = set()
    for ev in log.events:
        d = ev.detail
        if d.get("obj") != "mutex":
            continue
        if ev.kind == RESPOND and d.get("op") == "acquire":
            if inside:
                problems.append(
                    f"t={ev.t}: p{ev.pid} entered the critical section while "
                    f"{sorted(inside)} inside"
                )
            inside.add(ev.pid)
        elif ev.kind == INVOKE and d.get("op") == "release":
            inside.discard(ev.pid)
    return problems


def mutex_liveness(log: EventLog) -> list[str]:
    """Under a fair schedule with no crashed competitor, every acquire must
    complete and the run must wind down."""
    problems = []
    crashed = log.crashed_pids()
    pending: dict[int, int] = {}
    for ev in log.events:
        d = ev.detail
        if d.get("obj") != "mutex" or d.get("op") != "acquire":
            continue
        if ev.kind == INVOKE:
            pending[ev.pid] = ev.t
        elif ev.kind == RESPOND:
            pending.pop(ev.pid, None)
    for pid, t in sorted(pending.items()):
        if pid not in crashed:
            problems.append(f"p{pid} acquire at t={t} never completed")
    if log.outcome != QUIESCENT and not crashed:
        problems.append(f"run ended {log.outcome}, not quiescent")
    return problems


# ---------------------------------------------------------------------------
# ABD


def abd_quorums(log: EventLog) -> list[str]:
    """Ack sets of completed phases are majorities, hence pairwise
    intersecting."""
    problems = []
    majority = log.n // 2 + 1
    phases = []
    for ev in log.events:
        if ev.kind == INTERNAL and ev.detail.get("tag") == "phase":
            phases.append((ev.t, set(ev.detail["acks"])))
    for t, acks in phases:
        if len(acks) < majority:
            problems.append(f"t={t}: phase completed with {len(acks)} < majority {majority}")
    for i in range(len(phases)):
        for j in range(i + 1, len(phases)):
            if not phases[i][1] & phases[j][1]:
                problems.append(
                    f"phases at t={phases[i][0]} and t={phases[j][0]} have disjoint quorums"
                )
    return problems


# ---------------------------------------------------------------------------
# Total-order broadcast


def _prefix_related(a: list, b: list) -> bool:
    k = min(len(a), len(b))
    return a[:k] == b[:k]


def to_properties(log: EventLog) -> list[str]:
    """The five broadcast properties as log predicates.

    A submission is a client SEND of a TO_MSG (the send-to-self that opens
    the diffusion stage); re-broadcasts live inside deliver events and do
    not count as submissions."""
    problems = []
    crashed = log.crashed_pids()
    submitted: dict[tuple, int] = {}
    seqs: dict[int, list[tuple]] = {}
    for ev in log.events:
        d = ev.detail
        if ev.kind == SEND and d.get("mkind") == "TO_MSG":
            m = d["payload"]
            submitted[(m[0], m[1])] = ev.pid
        elif ev.kind == INTERNAL and d.get("tag") == "to_deliver":
            seqs.setdefault(ev.pid, []).append(tuple(d["msg"]))

    for pid, seq in seqs.items():
        for mid in seq:
            if mid not in submitted:
                problems.append(f"validity: p{pid} delivered {mid} that nobody broadcast")
        if len(set(seq)) != len(seq):
            problems.append(f"integrity: p{pid} delivered a message twice")
    pids = sorted(seqs)
    for i in range(len(pids)):
        for j in range(i + 1, len(pids)):
            if not _prefix_related(seqs[pids[i]], seqs[pids[j]]):
                problems.append(
                    f"order: p{pids[i]} and p{pids[j]} delivery sequences diverge"
                )
    if log.outcome == QUIESCENT:
        for mid, pid in submitted.items():
            if pid not in crashed and mid not in set(seqs.get(pid, ())):
                problems.append(f"termination-1: p{pid} never delivered its own {mid}")
        delivered_any = set().union(*seqs.values()) if seqs else set()
        for pid in range(1, log.n + 1):
            if pid in crashed:
                continue
            got = set(seqs.get(pid, ()))
            for mid in delivered_any:
                if mid not in got:
                    problems.append(
                        f"termination-2: {mid} delivered somewhere but not by p{pid}"
                    )
    elif log.outcome == BUDGET_EXHAUSTED:
        problems.append("run exhausted its step budget before quiescence")
    return problems


# ---------------------------------------------------------------------------
# Universal constructions


def alg4_convergence(log: EventLog) -> list[str]:
    """All replicas apply the same (message, state) sequence; crashed ones
    stop at a prefix."""
    problems = []
    seqs: dict[int, list[tuple]] = {}
    for ev in log.events:
        if ev.kind == INTERNAL and ev.detail.get("tag") == "to_deliver":
            d = ev.detail
            if "state_sig" in d:
                seqs.setdefault(ev.pid, []).append((tuple(d["applied"]), d["state_sig"]))
    pids = sorted(seqs)
    for i in range(len(pids)):
        for j in range(i + 1, len(pids)):
            if not _prefix_related(seqs[pids[i]], seqs[pids[j]]):
                problems.append(
                    f"replicas p{pids[i]} and p{pids[j]} applied diverging sequences"
                )
    return problems


def llsc_exactly_once(log: EventLog) -> list[str]:
    """Every announced operation commits at most once across successful
    conditional stores, and per process in sequence order."""
    problems = []
    counts: dict[tuple, int] = {}
    for ev in log.events:
        if ev.kind == INTERNAL and ev.detail.get("op") == "sc" and ev.detail.get("ok"):
            for owner, sn in ev.detail.get("applied", ()):
                key = (owner, sn)
                counts[key] = counts.get(key, 0) + 1
    for (owner, sn), c in sorted(counts.items()):
        if c > 1:
            problems.append(f"operation {sn} of p{owner} applied {c} times")
    by_owner: dict[int, list[int]] = {}
    for owner, sn in counts:
        by_owner.setdefault(owner, []).append(sn)
    for owner, sns in sorted(by_owner.items()):
        sns.sort()
        if sns != list(range(1, len(sns) + 1)):
            problems.append(f"p{owner} applied sequence has gaps: {sns}")
    return problems


CHECKS = {
    "crash-finality": crash_finality,
    "reliable-broadcast": reliable_broadcast,
    "fairness-window": fairness_window,
    "register-replay": register_replay,
    "mutual-exclusion": mutual_exclusion,
    "mutex-liveness": mutex_liveness,
    "abd-quorums": abd_quorums,
    "to-properties": to_properties,
    "alg4-convergence": alg4_convergence,
    "llsc-exactly-once": llsc_exactly_once,
}


def run_checks(log: EventLog, names) -> dict[str, list[str]]:
    return {name: CHECKS[name](log) for name in names}
