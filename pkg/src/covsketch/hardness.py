"""Planted-deviation gadget: why coverage needs more than noisy value queries.

An instance hides k_gold "gold" items among n. The public oracles answer with
exact rational arithmetic: a deviation bit that fires only when a query's gold
count escapes a tolerance band around its expectation, and a noisy coverage
value that collapses to k + |S| whenever the bit is quiet. Since random-ish
queries essentially never leave the band, value-query strategies cannot steer
toward the gold set, which the demo harness makes measurable. The true
coverage formula k + (n/k) * Gold(S) is computed directly instead of
materializing n/k exclusive elements per gold item; n need not divide by k.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import ConfigError, IdRangeError

STRATEGIES = ("random_subsets", "greedy_via_noisy")


class PlantedGoldInstance:
    """n_items with a uniformly drawn hidden subset of k_gold gold items.

    The gold set never leaks through the query oracles; audit accessors
    (audit_gold, gold_count, true_coverage) exist for tests and gated
    reporting only.
    """

    __slots__ = ("n_items", "k_gold", "eps", "seed", "_gold")

    def __init__(self, n_items: int, k_gold: int, eps: float, seed: int):
        _validate_shape(n_items, k_gold, eps)
        self.n_items = n_items
        self.k_gold = k_gold
        self.eps = eps
        self.seed = seed
        rng = np.random.default_rng(seed)
        self._gold = frozenset(
            int(i) for i in rng.choice(n_items, size=k_gold, replace=False))

    @classmethod
    def from_gold(cls, n_items: int, gold: Iterable[int], eps: float
                  ) -> "PlantedGoldInstance":
        """Audit-level constructor with an explicit gold set (for tests)."""
        gold = frozenset(int(i) for i in gold)
        _validate_shape(n_items, len(gold), eps)
        for i in (min(gold), max(gold)):
            if not 0 <= i < n_items:
                raise IdRangeError(f"gold item {i} outside [0, {n_items})")
        inst = cls.__new__(cls)
        inst.n_items = n_items
        inst.k_gold = len(gold)
        inst.eps = eps
        inst.seed = None
        inst._gold = gold
        return inst

    @property
    def eps_prime(self) -> float:
        """Approximation slack of the noisy oracle: twice the band eps."""
        return 2.0 * self.eps

    @property
    def opt_value(self) -> int:
        """True optimum of the implied coverage instance: k + n."""
        return self.k_gold + self.n_items

    def _clean(self, items: Iterable[int]) -> frozenset:
        s = frozenset(int(i) for i in items)
        if s:
            lo, hi = min(s), max(s)
            if lo < 0 or hi >= self.n_items:
                bad = lo if lo < 0 else hi
                raise IdRangeError(f"item {bad} outside [0, {self.n_items})")
        return s

    # -- audit accessors (privileged; the CLI gates these behind --unsafe-audit)

    def audit_gold(self) -> frozenset:
        return self._gold

    def gold_count(self, items: Iterable[int]) -> int:
        """Exact |S intersect gold|. Audit-level: not available to strategies."""
        return len(self._clean(items) & self._gold)

    def true_coverage(self, items: Iterable[int]) -> Fraction:
        """Exact coverage value k + (n/k) * Gold(S) of a nonempty query."""
        s = self._clean(items)
        if not s:
            raise ConfigError("coverage is defined for nonempty queries only")
        g = len(s & self._gold)
        return (Fraction(self.k_gold)
                + Fraction(self.n_items, self.k_gold) * g)

    # -- public query interface

    def deviation_oracle(self, items: Iterable[int]) -> int:
        """1 iff the query's gold count escapes its tolerance band.

        The band is k|S|/n +- eps*(k|S|/n + k^2/n), evaluated in exact
        rationals; answers reveal a single bit.
        """
        s = self._clean(items)
        g = len(s & self._gold)
        center = Fraction(self.k_gold * len(s), self.n_items)
        slack = Fraction(self.eps) * (
            center + Fraction(self.k_gold * self.k_gold, self.n_items))
        return 0 if center - slack <= g <= center + slack else 1

    def noisy_coverage_oracle(self, items: Iterable[int]) -> Fraction:
        """k + |S| while the deviation bit is quiet, the true value otherwise."""
        s = self._clean(items)
        if not s:
            raise ConfigError("coverage is defined for nonempty queries only")
        if self.deviation_oracle(s) == 0:
            return Fraction(self.k_gold + len(s))
        return self.true_coverage(s)

    def __repr__(self):
        return (f"PlantedGoldInstance(n_items={self.n_items}, "
                f"k_gold={self.k_gold}, eps={self.eps})")


def _validate_shape(n_items, k_gold, eps):
    if n_items < 1:
        raise ConfigError(f"n_items must be >= 1, got {n_items}")
    if not 1 <= k_gold <= n_items:
        raise ConfigError(f"k_gold must lie in [1, n_items={n_items}], got {k_gold}")
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps must lie in (0, 1), got {eps}")


@dataclass(frozen=True)
class ValidityReport:
    trials: int
    eps_prime: float
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def _sample_query(rng, n):
    size = int(rng.integers(1, n + 1))
    return [int(i) for i in rng.choice(n, size=size, replace=False)]


def verify_oracle_validity(inst: PlantedGoldInstance, trials: int,
                           seed: int = 0) -> ValidityReport:
    """Check (1-eps')*noisy <= true <= (1+eps')*noisy on random queries.

    Comparisons are exact rationals; the construction guarantees zero
    violations, so any entry in the report is an implementation bug.
    """
    if trials < 0:
        raise ConfigError(f"trials must be >= 0, got {trials}")
    rng = np.random.default_rng(seed)
    lo = Fraction(1) - Fraction(inst.eps_prime)
    hi = Fraction(1) + Fraction(inst.eps_prime)
    violations = []
    for _ in range(trials):
        query = _sample_query(rng, inst.n_items)
        noisy = inst.noisy_coverage_oracle(query)
        true = inst.true_coverage(query)
        if not (lo * noisy <= true <= hi * noisy):
            if len(violations) < 10:
                violations.append((len(query), float(noisy), float(true)))
    return ValidityReport(trials=trials, eps_prime=inst.eps_prime,
                          violations=tuple(violations))


@dataclass(frozen=True)
class DemoReport:
    strategy: str
    budget: int
    queries_used: int
    deviation_found: bool
    best_ratio: float
    best_query_size: int | None


def query_counter_demo(inst: PlantedGoldInstance, strategy: str, budget: int,
                       seed: int = 0) -> DemoReport:
    """Run a query strategy against the oracles and score it by audit.

    random_subsets fires the deviation oracle on random queries until one
    deviates or the budget runs out; greedy_via_noisy grows a k_gold-sized set
    by maximizing the noisy coverage value (ties to the smallest item id),
    spending one budget unit per value query. The report's best_ratio is the
    audited true coverage of the best query relative to the k + n optimum;
    strategies themselves never see audit values.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if budget < 0:
        raise ConfigError(f"budget must be >= 0, got {budget}")
    rng = np.random.default_rng(seed)
    queries = 0
    found = False
    best_ratio = 0.0
    best_size = None

    def observe(query):
        nonlocal best_ratio, best_size
        if not query:
            return
        ratio = float(Fraction(inst.true_coverage(query)) / inst.opt_value)
        if ratio > best_ratio:
            best_ratio = ratio
            best_size = len(query)

    if strategy == "random_subsets":
        while queries < budget and not found:
            query = _sample_query(rng, inst.n_items)
            queries += 1
            found = inst.deviation_oracle(query) == 1
            observe(query)
    else:
        held: list[int] = []
        while len(held) < inst.k_gold and queries < budget:
            best_item = None
            best_value = None
            for cand in range(inst.n_items):
                if cand in held:
                    continue
                if queries >= budget:
                    break
                queries += 1
                value = inst.noisy_coverage_oracle(held + [cand])
                # value != k + |query| iff that query's deviation bit fired
                if value != inst.k_gold + len(held) + 1:
                    found = True
                observe(held + [cand])
                if best_value is None or value > best_value:
                    best_value = value
                    best_item = cand
            if best_item is None:
                break
            held.append(best_item)

    return DemoReport(strategy=strategy, budget=budget, queries_used=queries,
                      deviation_found=found, best_ratio=best_ratio,
                      best_query_size=best_size)
