"""Degree-capped subsampling sketches of edge streams.

The sketch keeps the elements with the smallest keyed hashes, each with at
most `degree_cap` incident set ids, admitting elements in hash order until
`edge_budget` edges are retained. The effective sampling threshold is the
largest retained hash mapped into [0, 1); coverage counts on the retained
elements divided by that threshold estimate coverage on the full instance.

Two builders produce the same structure: an offline one that sorts all
elements of a materialized instance by hash, and a single-pass streaming one
that evicts the largest-hash element whenever the retained edge count exceeds
edge_budget + degree_cap. Under one (seed, params) pair and a cap that never
binds, their finalized sketches are byte-identical after serialization.
"""

from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple

from .errors import ConfigError, IdRangeError, ParseError, StateError
from .hashing import ElementHasher, unit_from_u64
from .instance import CoverageInstance, Edge

_MAGIC = b"CVSK"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIddQdIQ")
_ELEM_HEAD = struct.Struct("<IQI")
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class SketchParams:
    """Budget configuration for one sketch.

    `derive` computes the cap and budget from (n, k, eps, delta2) with the
    scaling that backs the estimation guarantee; `custom` accepts explicit
    budgets for experiments where the formula values would never bind at the
    instance sizes in play. eps must lie in (0, 1/5].
    """

    n: int
    k: int
    eps: float
    delta2: float
    m_hint: int
    delta: float
    degree_cap: int
    edge_budget: int

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.eps <= 0.2:
            raise ConfigError(f"eps must lie in (0, 0.2], got {self.eps}")
        if self.delta2 < 1.0:
            raise ConfigError(f"delta2 must be >= 1, got {self.delta2}")
        if self.degree_cap < 1 or self.edge_budget < 1:
            raise ConfigError("degree_cap and edge_budget must be >= 1")

    @staticmethod
    def _delta(eps: float, delta2: float, m_hint: int) -> float:
        inner = 2.0 + math.log(m_hint) / math.log(1.0 / (1.0 - eps))
        return delta2 * max(1.0, math.log(inner))

    @classmethod
    def derive(cls, n: int, k: int, eps: float, delta2: float = 1.0,
               m_hint: int = 2) -> "SketchParams":
        """Formula-derived budgets.

        degree_cap = ceil(n ln(1/eps) / (eps k)) with k clamped to n;
        edge_budget = ceil(24 n delta ln(1/eps) ln n / ((1-eps) eps^3)), where
        delta folds delta2 with a slowly growing function of the element-count
        hint. Both floor at 1, and ln n floors at ln 2, to keep degenerate
        configurations well defined.
        """
        if not 0.0 < eps <= 0.2:
            raise ConfigError(f"eps must lie in (0, 0.2], got {eps}")
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
        if delta2 < 1.0:
            raise ConfigError(f"delta2 must be >= 1, got {delta2}")
        m_hint = max(2, int(m_hint))
        delta = cls._delta(eps, delta2, m_hint)
        lg = math.log(1.0 / eps)
        cap = max(1, math.ceil(n * lg / (eps * min(k, n))))
        budget = max(1, math.ceil(
            24.0 * n * delta * lg * math.log(max(n, 2)) / ((1.0 - eps) * eps ** 3)))
        return cls(n=n, k=k, eps=eps, delta2=delta2, m_hint=m_hint,
                   delta=delta, degree_cap=cap, edge_budget=budget)

    @classmethod
    def custom(cls, n: int, k: int, eps: float, degree_cap: int,
               edge_budget: int, delta2: float = 1.0, m_hint: int = 2) -> "SketchParams":
        """Explicit budgets; validation matches `derive`, values are taken as given."""
        m_hint = max(2, int(m_hint))
        delta = cls._delta(eps, delta2, m_hint)
        return cls(n=n, k=k, eps=eps, delta2=delta2, m_hint=m_hint,
                   delta=delta, degree_cap=degree_cap, edge_budget=edge_budget)


class SketchElement(NamedTuple):
    element: int
    hash: int                 # u64 keyed hash
    sets: tuple[int, ...]     # incident set ids, sorted ascending


@dataclass(frozen=True)
class SubgraphView:
    """Hash-filtered (optionally degree-capped) view of an instance.

    Elements whose unit hash is <= p survive; incident lists are sorted.
    """

    n: int
    p: float
    seed: int
    elements: tuple[int, ...]
    incident: dict[int, tuple[int, ...]]

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.incident.values())

    def degree(self, element: int) -> int:
        return len(self.incident[element])

    def covered_count(self, chosen: Iterable[int]) -> int:
        picked = set(chosen)
        total = 0
        for e in self.elements:
            if picked.intersection(self.incident[e]):
                total += 1
        return total


def sample_subgraph(inst: CoverageInstance, p: float, seed: int) -> SubgraphView:
    """Keep exactly the elements whose unit hash is <= p, with all their edges.

    p=1 keeps everything; element sets are nested across p for a fixed seed.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must lie in [0, 1], got {p}")
    hasher = ElementHasher(seed)
    kept = []
    incident = {}
    if p > 0.0:
        for e in range(inst.m):
            if unit_from_u64(hasher.value(e)) <= p:
                kept.append(e)
                incident[e] = inst.elements[e]
    return SubgraphView(n=inst.n, p=p, seed=seed,
                        elements=tuple(kept), incident=incident)


def cap_element_degrees(view: SubgraphView, cap: int) -> SubgraphView:
    """Truncate each element's incident list to its `cap` smallest set ids."""
    if cap < 1:
        raise ConfigError(f"cap must be >= 1, got {cap}")
    incident = {e: sets[:cap] for e, sets in view.incident.items()}
    return SubgraphView(n=view.n, p=view.p, seed=view.seed,
                        elements=view.elements, incident=incident)


class Sketch:
    """Finalized sketch: retained elements in ascending (hash, id) order."""

    __slots__ = ("params", "seed", "elements", "threshold", "edge_total",
                 "_system")

    def __init__(self, params: SketchParams, seed: int,
                 elements: tuple[SketchElement, ...], threshold: float,
                 edge_total: int):
        self.params = params
        self.seed = seed
        self.elements = elements
        self.threshold = threshold
        self.edge_total = edge_total
        self._system = None

    @property
    def element_count(self) -> int:
        return len(self.elements)

    @property
    def space_units(self) -> int:
        """Abstract footprint: one unit per retained hash plus one per edge."""
        return len(self.elements) + self.edge_total

    @property
    def full_retention(self) -> bool:
        return self.threshold >= 1.0

    def element_ids(self) -> tuple[int, ...]:
        return tuple(item.element for item in self.elements)

    def covered_retained(self, chosen: Iterable[int]) -> int:
        """Number of retained elements hit by the chosen sets (unscaled)."""
        picked = set(chosen)
        for u in picked:
            if not 0 <= u < self.params.n:
                raise IdRangeError(f"set id {u} outside [0, {self.params.n})")
        total = 0
        for item in self.elements:
            if picked.intersection(item.sets):
                total += 1
        return total

    def __eq__(self, other):
        # Equality matches the serialized identity: the header stores
        # (n, k, eps, delta2) but not m_hint or override budgets, so two
        # sketches with the same bytes on disk compare equal.
        if not isinstance(other, Sketch):
            return NotImplemented
        a, b = self.params, other.params
        return (self.seed == other.seed
                and (a.n, a.k, a.eps, a.delta2) == (b.n, b.k, b.eps, b.delta2)
                and self.threshold == other.threshold
                and self.edge_total == other.edge_total
                and self.elements == other.elements)

    def __repr__(self):
        return (f"Sketch(elements={len(self.elements)}, edges={self.edge_total}, "
                f"threshold={self.threshold:.6g})")


class CoverageEstimate(NamedTuple):
    raw: int        # retained elements covered
    scaled: float   # raw divided by the sampling threshold

    def __float__(self):
        return self.scaled


def estimate_coverage(sk: Sketch, chosen: Iterable[int]) -> CoverageEstimate:
    """Estimate coverage of the chosen sets on the sketched instance."""
    raw = sk.covered_retained(chosen)
    return CoverageEstimate(raw=raw, scaled=raw / sk.threshold)


def _finalize_items(params, seed, items):
    """Trim (key-sorted) admitted elements to the minimal budget-meeting prefix."""
    total = 0
    for idx, (hash_val, elem, sets) in enumerate(items):
        total += len(sets)
        if total >= params.edge_budget:
            kept = items[:idx + 1]
            threshold = unit_from_u64(hash_val)
            elements = tuple(SketchElement(elem, h, s) for h, elem, s in kept)
            return Sketch(params, seed, elements, threshold, total)
    elements = tuple(SketchElement(elem, h, s) for h, elem, s in items)
    return Sketch(params, seed, elements, 1.0, total)


def build_sketch_offline(inst: CoverageInstance, params: SketchParams,
                         seed: int) -> Sketch:
    """Admit elements in ascending (hash, id) order until edge_budget edges.

    Each admitted element contributes at most degree_cap edges (its smallest
    set ids). If the whole instance holds fewer than edge_budget capped edges
    the sketch retains everything and the threshold is 1.
    """
    if inst.n != params.n:
        raise ConfigError(f"instance has n={inst.n} but params expect n={params.n}")
    hasher = ElementHasher(seed)
    order = sorted((hasher.value(e), e) for e in range(inst.m))
    cap = params.degree_cap
    items = []
    total = 0
    for hash_val, elem in order:
        sets = inst.elements[elem][:cap]
        items.append((hash_val, elem, sets))
        total += len(sets)
        if total >= params.edge_budget:
            break
    return _finalize_items(params, seed, items)


class StreamingSketchBuilder:
    """Single-pass builder over (set_id, element_id) arrivals.

    Maintains at most edge_budget + degree_cap edges: when an arrival pushes
    the count past that, whole elements are evicted in descending (hash, id)
    order until it fits. An evicted element is never re-admitted (arrivals
    hashing at or above the last eviction key are dropped on sight), and an
    element whose incident list reached degree_cap accepts no further set
    ids even after evictions make room; both rules keep the pass equivalent
    to offline admission in hash order.
    """

    __slots__ = ("params", "seed", "_hasher", "_incident", "_hashes", "_heap",
                 "_reject_key", "_total", "_seen_edges", "_finalized")

    def __init__(self, params: SketchParams, seed: int):
        self.params = params
        self.seed = seed
        self._hasher = ElementHasher(seed)
        self._incident: dict[int, dict[int, None]] = {}
        self._hashes: dict[int, int] = {}
        self._heap: list[tuple[int, int]] = []   # (-hash, -element): max-heap
        self._reject_key: tuple[int, int] | None = None
        self._total = 0
        self._seen_edges = 0
        self._finalized = False

    @property
    def retained_edge_count(self) -> int:
        return self._total

    @property
    def seen_edge_count(self) -> int:
        return self._seen_edges

    def update(self, set_id: int, element_id: int) -> None:
        if self._finalized:
            raise StateError("update() after finalize()")
        n = self.params.n
        if not 0 <= set_id < n:
            raise IdRangeError(f"set id {set_id} outside [0, {n})")
        if element_id < 0:
            raise IdRangeError(f"element id {element_id} is negative")
        self._seen_edges += 1
        sets = self._incident.get(element_id)
        if sets is None:
            hash_val = self._hasher.value(element_id)
            if (self._reject_key is not None
                    and (hash_val, element_id) >= self._reject_key):
                return
            self._incident[element_id] = {set_id: None}
            self._hashes[element_id] = hash_val
            heapq.heappush(self._heap, (-hash_val, -element_id))
            self._total += 1
        else:
            if set_id in sets or len(sets) >= self.params.degree_cap:
                return
            sets[set_id] = None
            self._total += 1
        limit = self.params.edge_budget + self.params.degree_cap
        while self._total > limit:
            neg_hash, neg_elem = heapq.heappop(self._heap)
            victim = -neg_elem
            self._reject_key = (-neg_hash, victim)
            self._total -= len(self._incident.pop(victim))
            del self._hashes[victim]

    def extend(self, edges: Iterable[Edge]) -> None:
        for u, v in edges:
            self.update(u, v)

    def finalize(self) -> Sketch:
        """Trim to the minimal hash-prefix meeting edge_budget and freeze."""
        if self._finalized:
            raise StateError("finalize() called twice")
        self._finalized = True
        items = sorted((h, e, tuple(sorted(self._incident[e])))
                       for e, h in self._hashes.items())
        sk = _finalize_items(self.params, self.seed, items)
        self._incident = {}
        self._hashes = {}
        self._heap = []
        return sk


def build_sketch_from_stream(edges: Iterable[Edge], params: SketchParams,
                             seed: int) -> Sketch:
    builder = StreamingSketchBuilder(params, seed)
    builder.extend(edges)
    return builder.finalize()


# ---------------------------------------------------------------------------
# Serialization


def save_sketch(sk: Sketch, stream: IO) -> int:
    """Write the versioned binary form; returns the byte count."""
    p = sk.params
    head = _HEADER.pack(_MAGIC, _VERSION, p.n, p.k, p.eps, p.delta2,
                        sk.seed, sk.threshold, len(sk.elements), sk.edge_total)
    stream.write(head)
    written = len(head)
    for item in sk.elements:
        rec = _ELEM_HEAD.pack(item.element, item.hash, len(item.sets))
        stream.write(rec)
        written += len(rec)
        for u in item.sets:
            stream.write(_U32.pack(u))
            written += 4
    return written


def _read_exact(stream, size, offset, what):
    data = stream.read(size)
    if len(data) != size:
        raise ParseError(f"truncated sketch: expected {size} byte(s) for {what}",
                         offset=offset)
    return data


def load_sketch(stream: IO) -> Sketch:
    """Read a sketch written by save_sketch.

    Budget parameters are re-derived from the stored (n, k, eps, delta2), so
    a sketch built with custom budgets loads with formula params; the stored
    structure (elements, hashes, threshold, edge total) is authoritative and
    is all that estimation and solving consume.
    """
    offset = 0
    head = _read_exact(stream, _HEADER.size, offset, "header")
    offset += _HEADER.size
    magic, version, n, k, eps, delta2, seed, threshold, count, edge_total = \
        _HEADER.unpack(head)
    if magic != _MAGIC:
        raise ParseError(f"bad magic {magic!r}", offset=0)
    if version != _VERSION:
        raise ParseError(f"unsupported sketch version {version}", offset=4)
    params = SketchParams.derive(n=n, k=k, eps=eps, delta2=delta2)
    elements = []
    total = 0
    for _ in range(count):
        rec = _read_exact(stream, _ELEM_HEAD.size, offset, "element record")
        offset += _ELEM_HEAD.size
        elem, hash_val, degree = _ELEM_HEAD.unpack(rec)
        raw = _read_exact(stream, 4 * degree, offset, "set id list")
        offset += 4 * degree
        sets = tuple(u[0] for u in _U32.iter_unpack(raw))
        elements.append(SketchElement(elem, hash_val, sets))
        total += degree
    if total != edge_total:
        raise ParseError(f"edge total mismatch: header says {edge_total}, "
                         f"records hold {total}", offset=offset)
    trailing = stream.read(1)
    if trailing:
        raise ParseError("trailing bytes after last element record", offset=offset)
    return Sketch(params, seed, tuple(elements), threshold, edge_total)
