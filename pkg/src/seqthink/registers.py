"""Shared-memory primitives living inside the kernel.

Every access is one atomic kernel step, which is exactly what makes these
registers atomic: the per-register operation sequence in the event log is
the linearization.
"""

from __future__ import annotations

from .kernel import ProtocolError


class AtomicRegister:
    """Read/write register with optional reader/writer access lists."""

    __slots__ = ("name", "value", "readers", "writers")

    def __init__(self, name: str, initial=None, *, readers=None, writers=None):
        self.name = name
        self.value = initial
        self.readers = frozenset(readers) if readers is not None else None
        self.writers = frozenset(writers) if writers is not None else None

    def read(self, pid: int):
        if self.readers is not None and pid not in self.readers:
            raise ProtocolError(f"p{pid} is not wired as a reader of {self.name}")
        return self.value

    def write(self, pid: int, value) -> None:
        if self.writers is not None and pid not in self.writers:
            raise ProtocolError(f"p{pid} is not wired as a writer of {self.name}")
        self.value = value


class LLSCRegister:
    """Load-linked / store-conditional cell with per-process link flags.

    A store-conditional by p succeeds iff no successful store-conditional
    happened since p's last load-linked; any success clears every link
    flag.  No spurious failures.
    """

    __slots__ = ("name", "value", "_links", "_ever_linked")

    def __init__(self, name: str, initial=None):
        self.name = name
        self.value = initial
        self._links: set[int] = set()
        self._ever_linked: set[int] = set()

    def ll(self, pid: int):
        self._links.add(pid)
        self._ever_linked.add(pid)
        return self.value

    def sc(self, pid: int, value) -> bool:
        if pid not in self._ever_linked:
            raise ProtocolError(
                f"p{pid} issued store-conditional on {self.name} without a prior ll"
            )
        if pid not in self._links:
            return False
        self.value = value
        self._links.clear()
        return True
