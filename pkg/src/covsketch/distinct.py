"""Mergeable distinct-count sketches and the enumeration k-cover baseline.

Each sketch keeps the `capacity` smallest keyed hashes per repetition
(bottom-t); unions of sets become merges of sketches, and a k-cover candidate
is scored by merging its k per-set sketches. Space grows with n*k-ish
enumeration needs, which is the contrast point against the edge-budget sketch.
"""

from __future__ import annotations

import math
import statistics
import struct
from bisect import bisect_left, insort
from itertools import combinations
from typing import IO, Iterable

from .errors import (ConfigError, GuardExceededError, IdRangeError,
                     IncompatibleSketchError, ParseError)
from .hashing import ElementHasher, derive_seed, unit_from_u64
from .instance import Edge
from .solvers import Solution

L0_ENUM_GUARD = 1_000_000

_DS_HEAD = struct.Struct("<IIQ")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class DistinctSketch:
    """Bottom-t distinct counter: the t smallest distinct hashes per repetition.

    Estimates are exact while fewer than t distinct values have been seen,
    and (t-1)/t_th_smallest_normalized_hash afterwards; with reps > 1 the
    per-repetition estimates are medianed. Two sketches merge iff they share
    (capacity, reps, seed).
    """

    __slots__ = ("capacity", "seed", "reps", "mins", "_hashers")

    def __init__(self, capacity: int, seed: int, reps: int = 1):
        if capacity < 2:
            raise ConfigError(f"capacity must be >= 2, got {capacity}")
        if reps < 1:
            raise ConfigError(f"reps must be >= 1, got {reps}")
        self.capacity = capacity
        self.seed = seed
        self.reps = reps
        self.mins: list[list[int]] = [[] for _ in range(reps)]
        self._hashers = tuple(ElementHasher(derive_seed(seed, rep))
                              for rep in range(reps))

    @classmethod
    def from_accuracy(cls, eps: float, delta: float, seed: int) -> "DistinctSketch":
        """capacity = ceil(4/eps^2), reps = ceil(ln(1/delta)), median combined."""
        if not 0.0 < eps <= 1.0:
            raise ConfigError(f"eps must lie in (0, 1], got {eps}")
        if not 0.0 < delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {delta}")
        capacity = math.ceil(4.0 / (eps * eps))
        reps = max(1, math.ceil(math.log(1.0 / delta)))
        return cls(capacity=capacity, seed=seed, reps=reps)

    def insert(self, element: int) -> None:
        """Keep element's hash iff among the t smallest; duplicate-safe."""
        if element < 0:
            raise IdRangeError(f"element id {element} is negative")
        cap = self.capacity
        for rep, hasher in enumerate(self._hashers):
            h = hasher.value(element)
            mins = self.mins[rep]
            if len(mins) >= cap:
                if h >= mins[-1]:
                    continue
                pos = bisect_left(mins, h)
                if pos < len(mins) and mins[pos] == h:
                    continue
                insort(mins, h)
                mins.pop()
            else:
                pos = bisect_left(mins, h)
                if pos < len(mins) and mins[pos] == h:
                    continue
                insort(mins, h)

    def estimate(self) -> float:
        """Median across repetitions of the per-repetition KMV estimate."""
        values = []
        for mins in self.mins:
            if len(mins) < self.capacity:
                values.append(float(len(mins)))
            else:
                tail = unit_from_u64(mins[self.capacity - 1])
                values.append((self.capacity - 1) / max(tail, 2.0 ** -64))
        return float(statistics.median(values))

    def merge(self, other: "DistinctSketch") -> "DistinctSketch":
        """Union semantics: bottom-t of the combined hash multiset, per rep."""
        if (self.capacity, self.seed, self.reps) != (other.capacity, other.seed,
                                                     other.reps):
            raise IncompatibleSketchError(
                f"cannot merge (capacity={self.capacity}, seed={self.seed}, "
                f"reps={self.reps}) with (capacity={other.capacity}, "
                f"seed={other.seed}, reps={other.reps})")
        out = DistinctSketch(self.capacity, self.seed, self.reps)
        for rep in range(self.reps):
            a, b = self.mins[rep], other.mins[rep]
            merged = sorted(set(a).union(b))[:self.capacity]
            if len(a) < self.capacity and len(b) < self.capacity:
                # exact regime: union estimate dominates both components
                assert len(merged) >= max(len(a), len(b))
            out.mins[rep] = merged
        return out

    @property
    def retained_hash_count(self) -> int:
        return sum(len(mins) for mins in self.mins)

    @property
    def space_units(self) -> int:
        return self.retained_hash_count

    def __eq__(self, other):
        if not isinstance(other, DistinctSketch):
            return NotImplemented
        return ((self.capacity, self.seed, self.reps, self.mins)
                == (other.capacity, other.seed, other.reps, other.mins))

    def __repr__(self):
        return (f"DistinctSketch(capacity={self.capacity}, reps={self.reps}, "
                f"retained={self.retained_hash_count})")


def merge_sketches(a: DistinctSketch, b: DistinctSketch) -> DistinctSketch:
    return a.merge(b)


def build_per_set_sketches(edges: Iterable[Edge], n: int, capacity: int,
                           seed: int, reps: int = 1) -> list[DistinctSketch]:
    """One distinct-count sketch per set, filled in a single pass."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    bank = [DistinctSketch(capacity, seed, reps) for _ in range(n)]
    for u, v in edges:
        if not 0 <= u < n:
            raise IdRangeError(f"set id {u} outside [0, {n})")
        bank[u].insert(v)
    return bank


def kcover_via_l0(sketches: list[DistinctSketch], k: int, *,
                  guard: int = L0_ENUM_GUARD) -> Solution:
    """Enumerate every k-subset, score by merged-estimate, keep the argmax.

    Ties resolve to the lexicographically first subset (strict-improvement
    scan over combinations in lexicographic order). Exponential time, guarded
    by comb(n, k) <= guard; space across the bank is n sketches of capacity t.
    """
    n = len(sketches)
    if n < 1:
        raise ConfigError("need at least one sketch")
    if not 1 <= k <= n:
        raise ConfigError(f"k must lie in [1, n={n}], got {k}")
    first = sketches[0]
    for sk in sketches[1:]:
        if (sk.capacity, sk.seed, sk.reps) != (first.capacity, first.seed,
                                               first.reps):
            raise IncompatibleSketchError("bank sketches disagree on "
                                          "(capacity, seed, reps)")
    work = math.comb(n, k)
    if work > guard:
        raise GuardExceededError(f"comb({n}, {k}) = {work} exceeds guard {guard}")
    best_value = -1.0
    best_combo: tuple[int, ...] = ()
    for combo in combinations(range(n), k):
        merged = sketches[combo[0]]
        for u in combo[1:]:
            merged = merged.merge(sketches[u])
        value = merged.estimate()
        if value > best_value:
            best_value = value
            best_combo = combo
    space = sum(sk.retained_hash_count for sk in sketches)
    return Solution(chosen=best_combo, covered_on_target=None, gains=(),
                    meta={"estimate": best_value, "candidates": work,
                          "space_units": space})


# ---------------------------------------------------------------------------
# Serialization: {capacity, reps, seed} then per rep {count, hashes...}


def save_distinct(sk: DistinctSketch, stream: IO) -> int:
    head = _DS_HEAD.pack(sk.capacity, sk.reps, sk.seed)
    stream.write(head)
    written = len(head)
    for mins in sk.mins:
        stream.write(_U32.pack(len(mins)))
        written += 4
        for h in mins:
            stream.write(_U64.pack(h))
            written += 8
    return written


def load_distinct(stream: IO) -> DistinctSketch:
    head = stream.read(_DS_HEAD.size)
    if len(head) != _DS_HEAD.size:
        raise ParseError("truncated distinct-sketch header", offset=0)
    capacity, reps, seed = _DS_HEAD.unpack(head)
    sk = DistinctSketch(capacity, seed, reps)
    offset = _DS_HEAD.size
    for rep in range(reps):
        raw = stream.read(4)
        if len(raw) != 4:
            raise ParseError("truncated repetition count", offset=offset)
        offset += 4
        (count,) = _U32.unpack(raw)
        data = stream.read(8 * count)
        if len(data) != 8 * count:
            raise ParseError("truncated hash list", offset=offset)
        offset += 8 * count
        mins = [h[0] for h in _U64.iter_unpack(data)]
        if any(mins[i] >= mins[i + 1] for i in range(len(mins) - 1)):
            raise ParseError("hash list not strictly increasing", offset=offset)
        sk.mins[rep] = mins
    return sk
