"""Sequential object specifications shared by the constructions and checker.

Each spec is an automaton: an immutable `initial` state and a pure
`delta(state, op) -> (state', result)` transition.  Ops are tuples of
`(name, *args)`.  States are hashable values so the checker can memoize
on them.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

FULL = "full"
EMPTY = "empty"
OK = "ok"

GENESIS = b"\x00" * 32


class UnknownOperation(Exception):
    """Op outside the spec's alphabet."""


class LedgerReplayError(Exception):
    """Replay hit an undecodable or unknown command."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"block {index}: {reason}")
        self.index = index


class StackSpec:
    """Bounded LIFO stack: push returns `full` at capacity, pop `empty`."""

    name = "stack"

    def __init__(self, capacity: int = 16):
        self.capacity = capacity
        self.initial = ()

    def delta(self, state, op):
        kind = op[0]
        if kind == "push":
            if len(state) >= self.capacity:
                return state, FULL
            return state + (op[1],), OK
        if kind == "pop":
            if not state:
                return state, EMPTY
            return state[:-1], state[-1]
        raise UnknownOperation(f"stack has no op {kind!r}")


class CounterSpec:
    name = "counter"
    initial = 0

    def delta(self, state, op):
        kind = op[0]
        if kind == "inc":
            return state + 1, state + 1
        if kind == "read":
            return state, state
        raise UnknownOperation(f"counter has no op {kind!r}")


class RegisterSpec:
    name = "register"

    def __init__(self, initial=0):
        self.initial = initial

    def delta(self, state, op):
        kind = op[0]
        if kind == "write":
            return op[1], OK
        if kind == "read":
            return state, state
        raise UnknownOperation(f"register has no op {kind!r}")


class ConsensusSpec:
    """Single-shot agreement: the first proposal in the order wins."""

    name = "consensus"
    initial = None

    def delta(self, state, op):
        if op[0] != "propose":
            raise UnknownOperation(f"consensus has no op {op[0]!r}")
        if state is None:
            return op[1], op[1]
        return state, state


# ---------------------------------------------------------------------------
# Ledger


@dataclass(frozen=True)
class LedgerBlock:
    payload: bytes
    prev_hash: bytes
    appender: int


def block_digest(block: LedgerBlock) -> bytes:
    """SHA-256 over the length-prefixed block encoding."""
    h = hashlib.sha256()
    h.update(struct.pack("<I", len(block.payload)))
    h.update(block.payload)
    h.update(block.prev_hash)
    h.update(struct.pack("<I", block.appender))
    return h.digest()


class LedgerSpec:
    """Append-only block list; read returns the whole list.

    State is `(blocks, head)` where `head` anchors the digest of the last
    block (the published tip); it is what makes mutations of the final
    block detectable, not just interior ones.
    """

    name = "ledger"
    initial = ((), GENESIS)

    def delta(self, state, op):
        blocks, head = state
        kind = op[0]
        if kind == "append":
            payload, appender = op[1], op[2]
            if not isinstance(payload, bytes):
                raise UnknownOperation("ledger append payload must be bytes")
            block = LedgerBlock(payload, head, appender)
            return (blocks + (block,), block_digest(block)), OK
        if kind == "read":
            return state, blocks
        raise UnknownOperation(f"ledger has no op {kind!r}")


def verify_chain(state) -> int | None:
    """Return None if every hash link (and the tip anchor) holds, else the
    0-indexed position of the first block whose check fails."""
    blocks, head = state
    expect = GENESIS
    for k, block in enumerate(blocks):
        if block.prev_hash != expect:
            return k
        expect = block_digest(block)
    if expect != head:
        return max(len(blocks) - 1, 0)
    return None


def op_to_payload(op: tuple) -> bytes:
    """Encode a spec op as canonical bytes for storage in a ledger block."""
    return json.dumps(list(op), separators=(",", ":")).encode()


def payload_to_op(payload: bytes) -> tuple:
    decoded = json.loads(payload.decode())
    if not isinstance(decoded, list) or not decoded or not isinstance(decoded[0], str):
        raise ValueError("payload is not an encoded operation")
    return tuple(decoded)


def replay_ledger(state, spec):
    """Run the chain's payloads through `spec` as commands.

    Returns `(object_state, last_result)`; raises LedgerReplayError naming
    the first block whose payload is not a valid command.
    """
    blocks, _head = state
    obj_state = spec.initial
    result = None
    for k, block in enumerate(blocks):
        try:
            op = payload_to_op(block.payload)
            obj_state, result = spec.delta(obj_state, op)
        except (ValueError, UnknownOperation, UnicodeDecodeError) as exc:
            raise LedgerReplayError(k, str(exc)) from None
    return obj_state, result


# ---------------------------------------------------------------------------
# Ledger serialization: length-prefixed binary blocks, hex digests in text


def encode_blocks(blocks) -> bytes:
    out = bytearray()
    for block in blocks:
        body = (
            struct.pack("<I", len(block.payload))
            + block.payload
            + block.prev_hash
            + struct.pack("<I", block.appender)
        )
        out += struct.pack("<I", len(body)) + body
    return bytes(out)


def decode_blocks(data: bytes) -> tuple[LedgerBlock, ...]:
    blocks = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError(f"truncated block length at byte {pos}")
        (size,) = struct.unpack_from("<I", data, pos)
        pos += 4
        body = data[pos : pos + size]
        if len(body) != size:
            raise ValueError(f"truncated block body at byte {pos}")
        pos += size
        (plen,) = struct.unpack_from("<I", body, 0)
        payload = body[4 : 4 + plen]
        prev = body[4 + plen : 36 + plen]
        (appender,) = struct.unpack_from("<I", body, 36 + plen)
        blocks.append(LedgerBlock(payload, prev, appender))
    return tuple(blocks)


def dump_chain_text(state) -> str:
    blocks, head = state
    lines = []
    for k, block in enumerate(blocks):
        lines.append(
            f"block {k} appender=p{block.appender} "
            f"prev={block.prev_hash.hex()} digest={block_digest(block).hex()} "
            f"payload={block.payload.hex()}"
        )
    lines.append(f"head {head.hex()}")
    return "\n".join(lines)


SPECS = {
    "stack": StackSpec,
    "counter": CounterSpec,
    "register": RegisterSpec,
    "consensus": ConsensusSpec,
    "ledger": LedgerSpec,
}


def make_spec(name: str, **kwargs):
    try:
        factory = SPECS[name]
    except KeyError:
        raise UnknownOperation(
            f"no object spec named {name!r}; available: {', '.join(sorted(SPECS))}"
        ) from None
    return factory(**kwargs)
