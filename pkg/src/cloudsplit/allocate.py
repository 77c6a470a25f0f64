"""Greedy allocation of quasi-identifying terms into fragments.

First-fit under a per-entity budget: a term joins the first open fragment
where, for every protected entity, the fragment's accumulated risk plus the
term's risk stays strictly below the cap; otherwise a new fragment opens.
The iteration order is the strategy: document extraction order, or sorted
by worst-case risk descending or ascending (ties broken lexicographically).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import UnplaceableTerm
from .model import Fragment, Sensitivity
from .risk import PrivacyPolicy, TermAssessment


class Strategy(str, Enum):
    UNORDERED = "unordered"
    ORDERED_DESC = "ordered-desc"
    ORDERED_ASC = "ordered-asc"


@dataclass
class AllocationResult:
    fragments: list[Fragment]
    groups: list[list[TermAssessment]]  # parallel to fragments
    fit_checks: int  # feasibility evaluations against existing fragments


def order_terms(
    terms: Sequence[TermAssessment], strategy: Strategy
) -> list[TermAssessment]:
    if strategy is Strategy.UNORDERED:
        return list(terms)
    reverse = strategy is Strategy.ORDERED_DESC
    if reverse:
        return sorted(terms, key=lambda a: (-a.max_risk, a.term))
    return sorted(terms, key=lambda a: (a.max_risk, a.term))


def allocate_fragments(
    quasi: Sequence[TermAssessment],
    policy: PrivacyPolicy,
    strategy: Strategy = Strategy.UNORDERED,
) -> AllocationResult:
    """Pack quasi-identifiers into the fewest fragments first-fit will give.

    Every returned fragment satisfies the cap for every entity. A term
    whose own risk already breaches the cap cannot be placed at all; with
    the default cap of 1.0 classification makes that impossible, but the
    guard stays for tighter caps.
    """
    entities = policy.entities
    cap = policy.risk_cap
    sums: list[dict[str, float]] = []
    groups: list[list[TermAssessment]] = []
    fit_checks = 0

    for assessment in order_terms(quasi, strategy):
        risks = assessment.risk
        if any(not risks.get(c, 0.0) < cap for c in entities):
            raise UnplaceableTerm(
                f"term {assessment.term!r} alone exceeds the risk cap {cap}"
            )
        placed = False
        for totals, group in zip(sums, groups):
            fit_checks += 1
            if all(totals[c] + risks.get(c, 0.0) < cap for c in entities):
                group.append(assessment)
                for c in entities:
                    totals[c] += risks.get(c, 0.0)
                placed = True
                break
        if not placed:
            groups.append([assessment])
            sums.append({c: risks.get(c, 0.0) for c in entities})

    fragments = [
        Fragment.term_set((a.term for a in group), Sensitivity.QUASI_IDENTIFIER)
        for group in groups
    ]
    return AllocationResult(fragments, groups, fit_checks)
