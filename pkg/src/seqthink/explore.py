"""Exhaustive schedule enumeration for small protocol instances.

Walks every adversary choice sequence of a (small!) protocol by replaying
runs under a probe adversary that follows a fixed choice prefix and then
reports the branching factor.  Generators are single-use, so the caller
supplies a factory that builds a fresh scenario/protocol pair per replay.

Use unfair scenarios here: fairness forcing would override the probe's
choices and the walk would miss schedules.
"""

from __future__ import annotations

from typing import Callable

from .kernel import EventLog, Kernel


class _StopExploration(Exception):
    def __init__(self, branching: int):
        self.branching = branching


class _Probe:
    def __init__(self, prefix: list[int]):
        self._prefix = prefix
        self._pos = 0

    def next(self, enabled, kernel=None):
        if self._pos >= len(self._prefix):
            raise _StopExploration(len(enabled))
        choice = self._prefix[self._pos]
        self._pos += 1
        return enabled[choice]


def explore_all_runs(
    factory: Callable[[], tuple],
    visit: Callable[[EventLog, object], None],
    max_leaves: int = 1_000_000,
) -> int:
    """Run `visit(log, aux)` on every complete schedule; returns the count.

    `factory()` must return `(scenario, protocol, aux)` built fresh each
    call; `aux` is whatever per-run state the caller wants to inspect
    (decision maps, protocol objects).
    """
    leaves = 0
    stack: list[list[int]] = [[]]
    while stack:
        prefix = stack.pop()
        scenario, protocol, aux = factory()
        kernel = Kernel(scenario, protocol, adversary=_Probe(prefix))
        try:
            log = kernel.run()
        except _StopExploration as stop:
            # deeper choices first, lowest index explored first
            stack.extend(prefix + [i] for i in reversed(range(stop.branching)))
            continue
        leaves += 1
        if leaves > max_leaves:
            raise RuntimeError(f"exploration exceeded {max_leaves} schedules")
        visit(log, aux)
    return leaves
