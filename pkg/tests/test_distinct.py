"""Distinct-count sketches and the enumeration k-cover baseline."""

import io
import math

import pytest

from covsketch import (DistinctSketch, build_per_set_sketches, gen_random,
                       kcover_via_l0, load_distinct, merge_sketches,
                       save_distinct)
from covsketch.errors import (ConfigError, GuardExceededError, IdRangeError,
                              IncompatibleSketchError, ParseError)
from covsketch.hashing import ElementHasher, derive_seed, unit_from_u64


def _filled(values, capacity=8, seed=3, reps=1):
    sk = DistinctSketch(capacity, seed, reps)
    for v in values:
        sk.insert(v)
    return sk


def test_constructor_domain():
    with pytest.raises(ConfigError):
        DistinctSketch(1, seed=0)
    with pytest.raises(ConfigError):
        DistinctSketch(4, seed=0, reps=0)
    with pytest.raises(IdRangeError):
        DistinctSketch(4, seed=0).insert(-1)


def test_exact_below_capacity():
    sk = _filled(range(5), capacity=64)
    assert sk.estimate() == 5.0
    assert sk.retained_hash_count == 5
    empty = DistinctSketch(8, seed=0)
    assert empty.estimate() == 0.0


def test_insert_idempotent():
    sk = _filled([7, 7, 7, 3, 3], capacity=16)
    assert sk.estimate() == 2.0
    again = _filled([7, 3], capacity=16)
    assert sk == again


def test_estimate_formula_above_capacity():
    capacity, seed = 8, 5
    sk = _filled(range(100), capacity=capacity, seed=seed)
    hasher = ElementHasher(derive_seed(seed, 0))
    lows = sorted(hasher.value(e) for e in range(100))[:capacity]
    assert sk.mins[0] == lows
    want = (capacity - 1) / unit_from_u64(lows[-1])
    assert sk.estimate() == pytest.approx(want)


def test_from_accuracy_mapping():
    sk = DistinctSketch.from_accuracy(eps=0.1, delta=0.05, seed=1)
    assert sk.capacity == math.ceil(4.0 / 0.01)
    assert sk.reps == math.ceil(math.log(1.0 / 0.05))
    with pytest.raises(ConfigError):
        DistinctSketch.from_accuracy(eps=0.0, delta=0.05, seed=1)
    with pytest.raises(ConfigError):
        DistinctSketch.from_accuracy(eps=0.1, delta=1.0, seed=1)


def test_merge_laws():
    a = _filled(range(0, 30), capacity=8)
    b = _filled(range(20, 50), capacity=8)
    empty = _filled([], capacity=8)
    assert a.merge(empty) == a
    assert a.merge(b) == b.merge(a)
    assert a.merge(a) == a
    # associativity on a third sketch
    c = _filled(range(40, 70), capacity=8)
    assert a.merge(b).merge(c) == a.merge(b.merge(c))
    # merge equals the sketch of the union stream
    union = _filled(range(0, 50), capacity=8)
    assert a.merge(b) == union


def test_merge_exact_regime_counts_union():
    a = _filled([1, 2, 3], capacity=64)
    b = _filled([3, 4], capacity=64)
    merged = merge_sketches(a, b)
    assert merged.estimate() == 4.0


def test_merge_incompatibilities():
    base = _filled([1], capacity=8, seed=3)
    with pytest.raises(IncompatibleSketchError):
        base.merge(_filled([1], capacity=16, seed=3))
    with pytest.raises(IncompatibleSketchError):
        base.merge(_filled([1], capacity=8, seed=4))
    with pytest.raises(IncompatibleSketchError):
        base.merge(_filled([1], capacity=8, seed=3, reps=2))


def test_estimate_concentrates():
    # relative error within 3/sqrt(capacity) for most seeds
    capacity, truth = 256, 4000
    tolerance = 3.0 / math.sqrt(capacity)
    misses = 0
    seeds = 60
    for seed in range(seeds):
        sk = _filled(range(truth), capacity=capacity, seed=seed)
        if abs(sk.estimate() - truth) > tolerance * truth:
            misses += 1
    assert misses <= 3


def test_median_across_reps_tightens():
    truth = 3000
    single = _filled(range(truth), capacity=64, seed=11, reps=1)
    voted = _filled(range(truth), capacity=64, seed=11, reps=9)
    assert abs(voted.estimate() - truth) <= abs(single.estimate() - truth) * 2
    assert voted.retained_hash_count == 9 * 64
    assert voted.space_units == voted.retained_hash_count


# ---------------------------------------------------------------------------
# Enumeration baseline


def test_build_per_set_sketches():
    inst = gen_random(5, 30, 0.3, seed=2)
    bank = build_per_set_sketches(inst.edges_by_element(), 5, 64, seed=7)
    assert len(bank) == 5
    for u, sk in enumerate(bank):
        assert sk.estimate() == float(len(inst.sets[u]))
    with pytest.raises(IdRangeError):
        build_per_set_sketches([(5, 0)], 5, 64, seed=7)
    with pytest.raises(ConfigError):
        build_per_set_sketches([], 0, 64, seed=7)


def test_kcover_via_l0_takes_everything_at_k_equals_n():
    inst = gen_random(3, 12, 0.5, seed=4)
    bank = build_per_set_sketches(inst.edges_by_element(), 3, 64, seed=1)
    sol = kcover_via_l0(bank, 3)
    assert sol.chosen == (0, 1, 2)
    assert sol.covered_on_target is None
    assert sol.meta["estimate"] == float(inst.m)
    assert sol.meta["candidates"] == 1
    assert sol.meta["space_units"] == sum(sk.retained_hash_count for sk in bank)


def test_kcover_via_l0_disjoint_equal_sets_prefers_first():
    edges = [(u, 3 * u + j) for u in range(4) for j in range(3)]
    bank = build_per_set_sketches(edges, 4, 64, seed=9)
    sol = kcover_via_l0(bank, 2)
    assert sol.chosen == (0, 1)
    assert sol.meta["estimate"] == 6.0


def test_kcover_via_l0_matches_exact_in_exact_regime():
    from covsketch import brute_force_kcover
    for seed in range(8):
        inst = gen_random(6, 20, 0.3, seed=seed)
        bank = build_per_set_sketches(inst.edges_by_element(), 6, 64, seed=seed)
        sol = kcover_via_l0(bank, 2)
        opt, _ = brute_force_kcover(inst, 2)
        assert inst.coverage(sol.chosen) == opt


def test_kcover_via_l0_guard_and_validation():
    bank = [DistinctSketch(4, seed=0) for _ in range(30)]
    with pytest.raises(GuardExceededError):
        kcover_via_l0(bank, 15, guard=1000)
    with pytest.raises(ConfigError):
        kcover_via_l0(bank, 0)
    with pytest.raises(ConfigError):
        kcover_via_l0([], 1)
    mixed = [DistinctSketch(4, seed=0), DistinctSketch(4, seed=1)]
    with pytest.raises(IncompatibleSketchError):
        kcover_via_l0(mixed, 1)


# ---------------------------------------------------------------------------
# Serialization


def test_distinct_round_trip():
    for reps in (1, 3):
        sk = _filled(range(200), capacity=16, seed=6, reps=reps)
        buf = io.BytesIO()
        written = save_distinct(sk, buf)
        assert written == len(buf.getvalue())
        buf.seek(0)
        loaded = load_distinct(buf)
        assert loaded == sk
        assert loaded.estimate() == sk.estimate()
        # loaded sketches keep accepting inserts
        loaded.insert(10**6)
        merged = sk.merge(loaded)
        assert merged.retained_hash_count >= sk.retained_hash_count


def test_distinct_load_rejects_corruption():
    sk = _filled(range(40), capacity=8, seed=2, reps=2)
    buf = io.BytesIO()
    save_distinct(sk, buf)
    blob = buf.getvalue()
    with pytest.raises(ParseError):
        load_distinct(io.BytesIO(blob[:10]))         # truncated header
    with pytest.raises(ParseError):
        load_distinct(io.BytesIO(blob[:-4]))         # truncated hash list
    # corrupt the sort order of the first repetition's list
    head = 16
    swapped = (blob[:head + 4] + blob[head + 12:head + 20]
               + blob[head + 4:head + 12] + blob[head + 20:])
    with pytest.raises(ParseError):
        load_distinct(io.BytesIO(swapped))


def test_distinct_repr():
    sk = _filled([1, 2], capacity=8)
    assert "DistinctSketch(" in repr(sk)
