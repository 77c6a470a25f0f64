from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from cloudsplit.allocate import Strategy, allocate_fragments, order_terms
from cloudsplit.errors import UnplaceableTerm
from cloudsplit.risk import PrivacyPolicy, TermAssessment, TermClass


def quasi(term: str, **risks: float) -> TermAssessment:
    return TermAssessment(term, 1.0, dict(risks), TermClass.QUASI_IDENTIFIER)


def policy(*entities: str, cap: float = 1.0) -> PrivacyPolicy:
    return PrivacyPolicy(frozenset(entities), cap)


def optimal_fragment_count(
    risks: list[dict[str, float]], entities: tuple[str, ...], cap: float
) -> int:
    """Exhaustive minimum-partition oracle via subset DP (independent of the
    greedy implementation)."""
    n = len(risks)
    if n == 0:
        return 0
    feasible = [False] * (1 << n)
    for mask in range(1, 1 << n):
        ok = True
        for entity in entities:
            total = sum(
                risks[i].get(entity, 0.0) for i in range(n) if mask >> i & 1
            )
            if not total < cap:
                ok = False
                break
        feasible[mask] = ok
    infinity = n + 1
    best = [infinity] * (1 << n)
    best[0] = 0
    for mask in range(1, 1 << n):
        low = mask & -mask
        sub = mask
        while sub:
            if sub & low and feasible[sub]:
                candidate = best[mask ^ sub] + 1
                if candidate < best[mask]:
                    best[mask] = candidate
            sub = (sub - 1) & mask
    return best[(1 << n) - 1]


class TestFirstFitTrace:
    def test_hand_traced_example(self):
        # risks 0.6 0.5 0.4 0.3 toward one entity, cap 1.0, extraction order:
        #   0.6 -> open f1
        #   0.5 -> 1.1 !< 1.0, open f2
        #   0.4 -> f1 would reach 1.0 (not < cap), f2 reaches 0.9 -> f2
        #   0.3 -> f1 reaches 0.9 -> f1
        terms = [
            quasi("a", c=0.6), quasi("b", c=0.5), quasi("c", c=0.4), quasi("d", c=0.3)
        ]
        result = allocate_fragments(terms, policy("c"), Strategy.UNORDERED)
        groups = [[a.term for a in g] for g in result.groups]
        assert groups == [["a", "d"], ["b", "c"]]
        # exhaustive search confirms two fragments is optimal here
        assert optimal_fragment_count(
            [t.risk for t in terms], ("c",), 1.0
        ) == 2

    def test_single_small_term(self):
        result = allocate_fragments([quasi("a", c=0.2)], policy("c"))
        assert len(result.fragments) == 1
        assert result.fragments[0].terms == ("a",)

    def test_empty_input(self):
        result = allocate_fragments([], policy("c"))
        assert result.fragments == [] and result.fit_checks == 0

    def test_strict_cap_boundary(self):
        # two 0.5 terms sum to exactly the cap, which the strict < rejects
        terms = [quasi("a", c=0.5), quasi("b", c=0.5)]
        result = allocate_fragments(terms, policy("c"))
        assert len(result.fragments) == 2

    def test_unplaceable_term(self):
        with pytest.raises(UnplaceableTerm):
            allocate_fragments([quasi("a", c=0.5)], policy("c", cap=0.4))

    def test_multi_entity_constraint(self):
        # fits toward c1 but would breach c2
        terms = [quasi("a", c1=0.2, c2=0.8), quasi("b", c1=0.2, c2=0.5)]
        result = allocate_fragments(terms, policy("c1", "c2"))
        assert len(result.fragments) == 2


class TestStrategies:
    def test_unordered_preserves_input_order(self):
        terms = [quasi("z", c=0.1), quasi("a", c=0.9)]
        assert [t.term for t in order_terms(terms, Strategy.UNORDERED)] == ["z", "a"]

    def test_ordered_desc(self):
        terms = [quasi("a", c=0.1), quasi("b", c=0.9), quasi("c", c=0.5)]
        ordered = order_terms(terms, Strategy.ORDERED_DESC)
        assert [t.term for t in ordered] == ["b", "c", "a"]

    def test_ordered_asc_with_lexicographic_ties(self):
        terms = [quasi("b", c=0.5), quasi("a", c=0.5), quasi("c", c=0.1)]
        ordered = order_terms(terms, Strategy.ORDERED_ASC)
        assert [t.term for t in ordered] == ["c", "a", "b"]

    def test_descending_never_worse_on_descending_friendly_input(self):
        terms = [quasi(f"t{i}", c=r) for i, r in
                 enumerate([0.55, 0.45, 0.55, 0.45, 0.3, 0.05])]
        unordered = allocate_fragments(terms, policy("c"), Strategy.UNORDERED)
        descending = allocate_fragments(terms, policy("c"), Strategy.ORDERED_DESC)
        assert len(descending.fragments) <= len(unordered.fragments)


@st.composite
def random_instances(draw):
    entities = draw(st.sampled_from([("c1",), ("c1", "c2")]))
    count = draw(st.integers(min_value=0, max_value=8))
    terms = []
    for i in range(count):
        risks = {
            e: draw(st.floats(min_value=0.0, max_value=0.95, allow_nan=False))
            for e in entities
        }
        terms.append(quasi(f"t{i:02d}", **risks))
    return entities, terms


class TestProperties:
    @given(random_instances())
    @settings(max_examples=150, deadline=None)
    def test_every_fragment_satisfies_cap(self, instance):
        entities, terms = instance
        pol = policy(*entities)
        result = allocate_fragments(terms, pol, Strategy.UNORDERED)
        for group in result.groups:
            for entity in entities:
                assert sum(a.risk.get(entity, 0.0) for a in group) < pol.risk_cap
        # every term placed exactly once
        placed = sorted(a.term for g in result.groups for a in g)
        assert placed == sorted(t.term for t in terms)

    @given(random_instances(), st.sampled_from(list(Strategy)))
    @settings(max_examples=100, deadline=None)
    def test_greedy_at_least_optimal(self, instance, strategy):
        entities, terms = instance
        result = allocate_fragments(terms, policy(*entities), strategy)
        optimal = optimal_fragment_count(
            [t.risk for t in terms], entities, 1.0
        )
        assert len(result.fragments) >= optimal


class TestExhaustiveAgreementSmall:
    def test_greedy_never_beats_brute_force_partitions(self):
        # cross-check the DP oracle itself against raw partition enumeration
        rng = random.Random(7)
        for _ in range(25):
            n = rng.randint(1, 6)
            risks = [{"c": rng.uniform(0.05, 0.9)} for _ in range(n)]

            def feasible(part: tuple[int, ...]) -> bool:
                return sum(risks[i]["c"] for i in part) < 1.0

            best = n
            indices = list(range(n))
            for split in _partitions(indices):
                if all(feasible(tuple(p)) for p in split):
                    best = min(best, len(split))
            assert best == optimal_fragment_count(risks, ("c",), 1.0)


def _partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for split in _partitions(rest):
        for i, part in enumerate(split):
            yield split[:i] + [[first] + part] + split[i + 1:]
        yield [[first]] + split
