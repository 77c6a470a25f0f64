"""Corpus-based disclosure assessment.

A term's information content is -log2 of its paragraph-level occurrence
probability. The disclosure a term t carries toward a protected entity c is
its positive pointwise mutual information with c, normalized by c's
information content:

    risk(t, c) = max(0, PMI(t; c)) / IC(c)
    PMI(t; c)  = log2( (codf(t,c)/N) / ((df(t)/N) * (df(c)/N)) )

risk is 1 exactly when every paragraph containing t also contains c (and in
particular for t = c), 0 when they never co-occur, and strictly between
otherwise. Terms with max risk >= 1 are identifiers, terms with risk in
(0, 1) are quasi-identifiers, and terms with zero risk toward every entity
are safe.

Counting substitutes keyword search over a local paragraph corpus for any
external assessment: a paragraph contains a term when the term's word
sequence appears contiguously in the paragraph's token stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import DegenerateEntity
from .model import Fragment, canonical_term
from .rake import _WORD_RE


@dataclass(frozen=True)
class PrivacyPolicy:
    """Protected entities plus the per-fragment disclosure budget.

    A fragment satisfies the policy when, for every protected entity, the
    sum of its terms' risks stays strictly below ``risk_cap``.
    """

    protected: frozenset[str]
    risk_cap: float = 1.0

    def __post_init__(self) -> None:
        canon = frozenset(canonical_term(t) for t in self.protected if t.strip())
        if not canon:
            raise ValueError("policy needs at least one protected entity")
        if not self.risk_cap > 0:
            raise ValueError("risk_cap must be positive")
        object.__setattr__(self, "protected", canon)

    @property
    def entities(self) -> tuple[str, ...]:
        return tuple(sorted(self.protected))


class TermClass(str, Enum):
    IDENTIFIER = "identifier"
    QUASI_IDENTIFIER = "quasi-identifier"
    SAFE = "safe"


@dataclass(frozen=True)
class TermAssessment:
    term: str
    ic: float
    risk: Mapping[str, float]
    label: TermClass

    @property
    def max_risk(self) -> float:
        return max(self.risk.values(), default=0.0)


class CorpusStats:
    """Paragraph-level document frequencies with memoized term lookups."""

    def __init__(self, paragraphs: Sequence[str]):
        if not paragraphs:
            raise ValueError("corpus statistics need at least one paragraph")
        self._tokens: list[tuple[str, ...]] = []
        self._word_paras: dict[str, set[int]] = {}
        for idx, para in enumerate(paragraphs):
            tokens = tuple(canonical_term(m.group()) for m in _WORD_RE.finditer(para))
            self._tokens.append(tokens)
            for word in set(tokens):
                self._word_paras.setdefault(word, set()).add(idx)
        self._term_paras: dict[str, frozenset[int]] = {}

    @property
    def paragraph_count(self) -> int:
        return len(self._tokens)

    def paragraphs_containing(self, term: str) -> frozenset[int]:
        term = canonical_term(term)
        cached = self._term_paras.get(term)
        if cached is not None:
            return cached
        words = tuple(term.split())
        if not words:
            result: frozenset[int] = frozenset()
        elif len(words) == 1:
            result = frozenset(self._word_paras.get(words[0], ()))
        else:
            candidates = self._word_paras.get(words[0], set())
            for word in words[1:]:
                candidates = candidates & self._word_paras.get(word, set())
                if not candidates:
                    break
            result = frozenset(
                idx for idx in candidates if self._contains_seq(idx, words)
            )
        self._term_paras[term] = result
        return result

    def _contains_seq(self, idx: int, words: tuple[str, ...]) -> bool:
        tokens = self._tokens[idx]
        first = words[0]
        span = len(words)
        for i, tok in enumerate(tokens):
            if tok == first and tokens[i:i + span] == words:
                return True
        return False

    def df(self, term: str) -> int:
        return len(self.paragraphs_containing(term))

    def codf(self, term: str, entity: str) -> int:
        return len(
            self.paragraphs_containing(term) & self.paragraphs_containing(entity)
        )


def information_content(term: str, stats: CorpusStats) -> float:
    """-log2 of the term's paragraph probability, in bits.

    An unseen term is capped at log2(N) + 1: one bit beyond the rarest
    observable term, keeping unseen terms maximally informative without an
    infinity.
    """
    n = stats.paragraph_count
    df = stats.df(term)
    if df == 0:
        return math.log2(n) + 1.0
    return -math.log2(df / n)


def disclosure_risk(term: str, entity: str, stats: CorpusStats) -> float:
    """Normalized positive PMI of term toward a protected entity."""
    term = canonical_term(term)
    entity = canonical_term(entity)
    n = stats.paragraph_count
    df_entity = stats.df(entity)
    if df_entity == 0 or df_entity == n:
        raise DegenerateEntity(
            f"entity {entity!r} occurs in {df_entity}/{n} paragraphs; "
            "its information content is unusable on this corpus"
        )
    if term == entity:
        return 1.0
    df_term = stats.df(term)
    codf = stats.codf(term, entity)
    if df_term == 0 or codf == 0:
        return 0.0
    pmi = math.log2((codf / n) / ((df_term / n) * (df_entity / n)))
    ic_entity = -math.log2(df_entity / n)
    return max(0.0, pmi) / ic_entity


def classify_terms(
    terms: Iterable[str], policy: PrivacyPolicy, stats: CorpusStats
) -> list[TermAssessment]:
    """Assess each term against every protected entity.

    The identifier boundary is inclusive at risk 1.0; any positive risk
    short of that makes a quasi-identifier.
    """
    assessments = []
    for term in terms:
        term = canonical_term(term)
        risks = {c: disclosure_risk(term, c, stats) for c in policy.entities}
        worst = max(risks.values())
        if worst >= 1.0:
            label = TermClass.IDENTIFIER
        elif worst > 0.0:
            label = TermClass.QUASI_IDENTIFIER
        else:
            label = TermClass.SAFE
        assessments.append(
            TermAssessment(term, information_content(term, stats), risks, label)
        )
    return assessments


def validate_policy(policy: PrivacyPolicy, stats: CorpusStats) -> None:
    """Raise DegenerateEntity if any protected entity is unusable."""
    for entity in policy.entities:
        disclosure_risk(entity, entity, stats)
        df = stats.df(entity)
        if df == 0 or df == stats.paragraph_count:
            raise DegenerateEntity(entity)


# --------------------------------------------------------------------------
# Independent privacy audit
# --------------------------------------------------------------------------
#
# Deliberately recomputes every risk from corpus counts instead of trusting
# any running totals kept by the allocator, so it can act as the second
# route of the privacy check.

@dataclass(frozen=True)
class CapViolation:
    fragment_key: str
    entity: str
    total: float


def fragment_risk_totals(
    terms: Iterable[str], policy: PrivacyPolicy, stats: CorpusStats
) -> dict[str, float]:
    totals = {c: 0.0 for c in policy.entities}
    for term in terms:
        for entity in policy.entities:
            totals[entity] += disclosure_risk(term, entity, stats)
    return totals


def within_cap(
    terms: Iterable[str], policy: PrivacyPolicy, stats: CorpusStats
) -> bool:
    totals = fragment_risk_totals(terms, policy, stats)
    return all(total < policy.risk_cap for total in totals.values())


def audit_fragments(
    fragments: Iterable[Fragment], policy: PrivacyPolicy, stats: CorpusStats
) -> list[CapViolation]:
    """Every (fragment, entity) pair whose recomputed risk sum breaches the
    cap. Empty means the allocation honored the policy everywhere."""
    violations = []
    for fragment in fragments:
        totals = fragment_risk_totals(fragment.terms, policy, stats)
        for entity, total in totals.items():
            if not total < policy.risk_cap:
                violations.append(CapViolation(fragment.key, entity, total))
    return violations
