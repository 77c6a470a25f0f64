"""Document splitting front-ends.

Semantic mode extracts candidate terms, assesses their disclosure risk,
asks the multi-cloud for each sensitive term before doing any local work
(terms already out there are reused as third-party fragments and never
stored), keeps identifiers at the proxy, packs the remaining
quasi-identifiers into capped fragments, and outsources those. Byte mode
chunks a document into fixed-size blocks and runs the same
broadcast-then-store placement per block.

Both modes emit a manifest that reassembles the original document
byte-for-byte.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .allocate import Strategy, allocate_fragments
from .model import (
    DocumentManifest,
    Fragment,
    FragmentRef,
    LocalRef,
    LocationEntry,
    LocationTable,
    Segment,
    Sensitivity,
    TextSegment,
    fragment_key,
    infer_case,
)
from .proxy import Proxy, StorePolicy
from .rake import Term, extract_terms
from .risk import CorpusStats, PrivacyPolicy, TermClass, classify_terms


@dataclass
class SplitMetrics:
    """Per-run counters, the deterministic cost proxy included."""

    terms_total: int = 0
    sensitive: int = 0
    identifiers: int = 0       # leftover identifiers kept at the proxy
    quasi_allocated: int = 0   # leftover quasi-identifiers packed locally
    third_party: int = 0       # terms answered by the multi-cloud (et)
    fragments: int = 0         # fragments produced by allocation
    fit_checks: int = 0
    store_calls: int = 0
    time_ms: float = 0.0

    @property
    def ops(self) -> int:
        """Operation-count cost proxy: allocation work plus store calls."""
        return self.fit_checks + self.store_calls


@dataclass
class SplitPlan:
    object_id: str
    third_party: list[tuple[str, tuple[str | None, ...]]]
    local_identifiers: tuple[str, ...]
    fragments: list[Fragment]
    manifest: DocumentManifest
    table: LocationTable
    metrics: SplitMetrics

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "third_party": [
                {"term": t, "slots": list(slots)} for t, slots in self.third_party
            ],
            "local_identifiers": list(self.local_identifiers),
            "fragments": [list(f.terms) for f in self.fragments],
            "metrics": {
                "terms_total": self.metrics.terms_total,
                "sensitive": self.metrics.sensitive,
                "identifiers": self.metrics.identifiers,
                "quasi_allocated": self.metrics.quasi_allocated,
                "third_party": self.metrics.third_party,
                "fragments": self.metrics.fragments,
                "fit_checks": self.metrics.fit_checks,
                "store_calls": self.metrics.store_calls,
                "ops": self.metrics.ops,
                "time_ms": self.metrics.time_ms,
            },
        }


def _occurrence_segments(
    text: str,
    replacements: dict[str, Segment],
    term_occurrences: dict[str, tuple[tuple[int, int], ...]],
) -> tuple[Segment, ...]:
    """Interleave clear text with placeholders for every occurrence of every
    replaced term. Spans never overlap because they come from disjoint
    phrase instances."""
    events: list[tuple[int, int, str]] = []
    for term, spans in term_occurrences.items():
        if term not in replacements:
            continue
        for start, end in spans:
            events.append((start, end, term))
    events.sort()

    segments: list[Segment] = []
    cursor = 0
    for start, end, term in events:
        if start > cursor:
            segments.append(TextSegment(text[cursor:start]))
        base = replacements[term]
        surface = text[start:end]
        case, fallback = infer_case(surface, term)
        if isinstance(base, FragmentRef):
            segments.append(FragmentRef(base.row, base.term, case, fallback))
        else:
            assert isinstance(base, LocalRef)
            segments.append(LocalRef(base.index, case, fallback))
        cursor = end
    if cursor < len(text):
        segments.append(TextSegment(text[cursor:]))
    return tuple(segments)


class SemanticSplitter:
    """Splits text documents against a fixed corpus-statistics context."""

    def __init__(self, proxy: Proxy, stats: CorpusStats):
        self.proxy = proxy
        self.stats = stats

    def split(
        self,
        object_id: str,
        text: str,
        policy: PrivacyPolicy,
        strategy: Strategy = Strategy.UNORDERED,
        store_policy: StorePolicy = StorePolicy.SKIP_IF_ANY_FOUND,
        reuse: bool = True,
        source_name: str | None = None,
    ) -> SplitPlan:
        """Run the full pipeline and commit the object to the proxy.

        With ``reuse`` off the broadcast step is skipped entirely, which is
        the baseline splitter; with an empty multi-cloud the two behave
        identically.
        """
        started = time.perf_counter()
        metrics = SplitMetrics()

        terms = extract_terms(text)
        metrics.terms_total = len(terms)
        assessments = {
            a.term: a for a in classify_terms((t.text for t in terms), policy, self.stats)
        }
        sensitive = [t for t in terms if assessments[t.text].label is not TermClass.SAFE]
        metrics.sensitive = len(sensitive)

        third_party: list[tuple[str, tuple[str | None, ...]]] = []
        leftovers: list[Term] = []
        if reuse and sensitive:
            for term in sensitive:
                slots = self.proxy.broadcast_query(fragment_key([term.text]))
                if any(s is not None for s in slots):
                    third_party.append((term.text, tuple(slots)))
                else:
                    leftovers.append(term)
        else:
            leftovers = list(sensitive)
        metrics.third_party = len(third_party)

        identifiers = [
            t for t in leftovers if assessments[t.text].label is TermClass.IDENTIFIER
        ]
        quasi = [
            t for t in leftovers
            if assessments[t.text].label is TermClass.QUASI_IDENTIFIER
        ]
        metrics.identifiers = len(identifiers)
        metrics.quasi_allocated = len(quasi)

        allocation = allocate_fragments(
            [assessments[t.text] for t in quasi], policy, strategy
        )
        metrics.fragments = len(allocation.fragments)
        metrics.fit_checks = allocation.fit_checks

        placement = self.proxy.place_fragments(allocation.fragments, store_policy)
        metrics.store_calls = placement.stored

        rows: list[LocationEntry] = [
            LocationEntry(fragment_key([term]), slots) for term, slots in third_party
        ]
        rows.extend(placement.rows)

        local_terms = tuple(dict.fromkeys(t.text for t in identifiers))
        local_index = {term: i for i, term in enumerate(local_terms)}

        replacements: dict[str, Segment] = {}
        for i, (term, _) in enumerate(third_party):
            replacements[term] = FragmentRef(row=i, term=0)
        offset = len(third_party)
        for fi, fragment in enumerate(allocation.fragments):
            for ti, term in enumerate(fragment.terms):
                replacements[term] = FragmentRef(row=offset + fi, term=ti)
        for term, j in local_index.items():
            replacements[term] = LocalRef(index=j)

        occurrences = {t.text: t.occurrences for t in sensitive}
        manifest = DocumentManifest(
            object_id=object_id,
            mode="semantic",
            segments=_occurrence_segments(text, replacements, occurrences),
            local_identifiers=local_terms,
            source_name=source_name,
        )

        table = LocationTable(object_id, self.proxy.csp_ids, rows)
        identifier_fragments = [
            Fragment.term_set([term], Sensitivity.IDENTIFIER) for term in local_terms
        ]
        self.proxy.commit_object(table, manifest, identifier_fragments)

        metrics.time_ms = (time.perf_counter() - started) * 1000.0
        return SplitPlan(
            object_id=object_id,
            third_party=third_party,
            local_identifiers=local_terms,
            fragments=allocation.fragments,
            manifest=manifest,
            table=table,
            metrics=metrics,
        )


def chunk_bytes(data: bytes, chunk_size: int) -> list[bytes]:
    if chunk_size < 1:
        raise ValueError("chunk size must be at least 1")
    return [data[i:i + chunk_size] for i in range(0, len(data), chunk_size)]


def split_byte_document(
    proxy: Proxy,
    object_id: str,
    data: bytes,
    chunk_size: int = 4096,
    store_policy: StorePolicy = StorePolicy.PCSP_IF_MISSING,
    source_name: str | None = None,
) -> LocationTable:
    """Chunk a document into byte blocks and outsource them."""
    fragments = [Fragment.byte_block(chunk) for chunk in chunk_bytes(data, chunk_size)]
    manifest = DocumentManifest(
        object_id=object_id,
        mode="bytes",
        segments=tuple(FragmentRef(row=i) for i in range(len(fragments))),
        source_name=source_name,
    )
    return proxy.outsource(object_id, fragments, store_policy, manifest)
