"""Brute-force linearizability oracle, independent of the package's checker.

Enumerates every subset of pending operations and every permutation of the
chosen operations, filters by real-time order, and replays the spec.  Kept
deliberately naive; only usable for tiny histories.
"""

from __future__ import annotations

from itertools import combinations, permutations


def _canon(value):
    if isinstance(value, (list, tuple)):
        return tuple(_canon(v) for v in value)
    if hasattr(value, "__dataclass_fields__"):
        return tuple(_canon(getattr(value, f)) for f in value.__dataclass_fields__)
    return value


def _respects_real_time(perm) -> bool:
    for i, earlier in enumerate(perm):
        for later in perm[i + 1 :]:
            if later.t_res is not None and later.t_res < earlier.t_inv:
                return False
    return True


def _replays(perm, spec) -> bool:
    state = spec.initial
    for rec in perm:
        state, res = spec.delta(state, rec.op)
        if rec.t_res is not None and _canon(res) != _canon(rec.result):
            return False
    return True


def naive_linearizable(recs, spec) -> bool:
    complete = [r for r in recs if r.t_res is not None]
    pending = [r for r in recs if r.t_res is None]
    for k in range(len(pending) + 1):
        for included in combinations(pending, k):
            for perm in permutations(complete + list(included)):
                if _respects_real_time(perm) and _replays(perm, spec):
                    return True
    return False


def accepted_read_vectors(ops, spec_factory) -> set[tuple]:
    """All read-result vectors realizable by some real-time-respecting
    permutation of `ops` (records whose read results are placeholders).

    Shares one permutation sweep across every possible result assignment:
    each valid permutation realizes exactly one result vector.
    """
    read_idx = [i for i, r in enumerate(ops) if r.op[0] == "read"]
    vectors: set[tuple] = set()
    spec = spec_factory()
    for perm in permutations(ops):
        if not _respects_real_time(perm):
            continue
        state = spec.initial
        results = {}
        for rec in perm:
            state, res = spec.delta(state, rec.op)
            results[id(rec)] = res
        vectors.add(tuple(results[id(ops[i])] for i in read_idx))
    return vectors
