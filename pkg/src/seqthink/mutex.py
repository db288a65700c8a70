"""Two-process mutual exclusion over atomic registers, generalized to n
processes by a tournament of two-competitor instances.

Each acquire is a multi-step automaton: raise the flag, yield the tie
breaker, then busy-poll the competitor's flag and the tie breaker until
one disjunct admits entry.  The busy poll is a genuine retry step, so the
waiting process keeps taking (and logging) steps while excluded.
"""

from __future__ import annotations

from .kernel import Invoke, Note, Protocol, ProtocolError, ReadReg, Respond, ThreadSpec, WriteReg
from .registers import AtomicRegister

UP = "up"
DOWN = "down"

MUTEX_OBJ = "mutex"


class PetersonPair:
    """One two-competitor instance: FLAG[1], FLAG[2], and a LAST tie breaker.

    Sides are 1 and 2; `owners[side]` is the set of processes allowed to
    play that side (one at a time).
    """

    def __init__(self, name: str, owners: tuple[set, set]):
        everyone = owners[0] | owners[1] or None
        self.flag = {
            1: AtomicRegister(f"{name}.flag1", DOWN, writers=owners[0] or None),
            2: AtomicRegister(f"{name}.flag2", DOWN, writers=owners[1] or None),
        }
        self.last = AtomicRegister(f"{name}.last", 1, writers=everyone)

    def acquire(self, side: int):
        yield WriteReg(self.flag[side], UP)
        yield WriteReg(self.last, side)
        other = 3 - side
        while True:
            f = yield ReadReg(self.flag[other])
            if f == DOWN:
                return
            last = yield ReadReg(self.last)
            if last != side:
                return

    def release(self, side: int):
        yield WriteReg(self.flag[side], DOWN)


class TournamentTree:
    """Complete binary tree of PetersonPair nodes; leaves are processes.

    The leaf count is padded to a power of two; phantom leaves never raise
    their flag, so a real process walks past them for free.  A process is
    in the critical section iff it has won every node on its root path.
    Release lowers the owned flags root to leaf.
    """

    def __init__(self, n: int, name: str = "mutex"):
        self.n = n
        leaves = 1
        while leaves < n:
            leaves *= 2
        self.leaves = leaves
        self.nodes: dict[int, PetersonPair] = {}
        for node in range(1, leaves):
            owners = (self._subtree_pids(2 * node), self._subtree_pids(2 * node + 1))
            self.nodes[node] = PetersonPair(f"{name}.n{node}", owners)
        self._holding: dict[int, list[tuple[int, int]]] = {}
        self._competing: set[int] = set()

    def _subtree_pids(self, node: int) -> set[int]:
        lo, hi = node, node
        while lo < self.leaves:
            lo, hi = 2 * lo, 2 * hi + 1
        return {leaf - self.leaves + 1 for leaf in range(lo, hi + 1) if leaf - self.leaves + 1 <= self.n}

    def path(self, pid: int) -> list[tuple[int, int]]:
        """(node, side) pairs from leaf level up to the root."""
        node = self.leaves + pid - 1
        out = []
        while node > 1:
            out.append((node // 2, 1 if node % 2 == 0 else 2))
            node //= 2
        return out

    def acquire(self, pid: int):
        if pid in self._competing or pid in self._holding:
            raise ProtocolError(f"p{pid} acquire while already competing or holding")
        self._competing.add(pid)
        path = self.path(pid)
        for node, side in path:
            yield from self.nodes[node].acquire(side)
        self._competing.discard(pid)
        self._holding[pid] = path

    def release(self, pid: int):
        path = self._holding.pop(pid, None)
        if path is None:
            raise ProtocolError(f"p{pid} release without holding the critical section")
        for node, side in reversed(path):
            yield from self.nodes[node].release(side)


def mutex_client(tree: TournamentTree, pid: int, rounds: int):
    for rnd in range(rounds):
        yield Invoke(MUTEX_OBJ, "acquire")
        yield from tree.acquire(pid)
        yield Respond(MUTEX_OBJ, "acquire")
        yield Note("cs", {"round": rnd})
        yield Invoke(MUTEX_OBJ, "release")
        yield from tree.release(pid)
        yield Respond(MUTEX_OBJ, "release")


def build_mutex(scenario) -> Protocol:
    rounds = scenario.param_int("rounds", 1)
    if scenario.protocol == "peterson2" and scenario.n != 2:
        from .scenario import ScenarioError

        raise ScenarioError(f"n: peterson2 needs exactly 2 processes, got {scenario.n}")
    tree = TournamentTree(scenario.n)
    threads = [
        ThreadSpec(pid, "main", mutex_client(tree, pid, rounds))
        for pid in range(1, scenario.n + 1)
    ]
    return Protocol(threads=threads)


def cs_intervals(log) -> dict[int, list[tuple[int, int]]]:
    """Per process: [start, end] step spans of its critical sections.

    A section opens at the acquire response and closes at the release
    invocation (or stays open if the process crashed inside)."""
    spans: dict[int, list[tuple[int, int]]] = {}
    open_at: dict[int, int] = {}
    for ev in log.events:
        d = ev.detail
        if ev.kind == "respond" and d.get("obj") == MUTEX_OBJ and d.get("op") == "acquire":
            open_at[ev.pid] = ev.t
        elif ev.kind == "invoke" and d.get("obj") == MUTEX_OBJ and d.get("op") == "release":
            start = open_at.pop(ev.pid, None)
            if start is not None:
                spans.setdefault(ev.pid, []).append((start, ev.t))
    for pid, start in open_at.items():
        spans.setdefault(pid, []).append((start, len(log.events)))
    return spans
