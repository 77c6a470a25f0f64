"""Corpus ingestion, term-database seeding, and the comparison benchmark.

The benchmark splits every corpus paragraph twice per strategy: once with
the baseline splitter (no multi-cloud lookups) and once with the reuse
framework against a term database seeded into the secondary providers. It
reports averaged fragment/identifier/quasi-identifier/reuse counts, wall
time, and a deterministic operation-count cost proxy (allocation
feasibility checks plus store calls), since wall time is noisy at this
scale.
"""

from __future__ import annotations

import json
import re
import statistics
import time
from collections import Counter
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Sequence

from .allocate import Strategy
from .csp import CspStore
from .errors import CloudSplitError, EmptyCorpus
from .model import CspDescriptor, Fragment, Sensitivity, Tier
from .proxy import Proxy, StorePolicy
from .rake import extract_terms
from .risk import CorpusStats, PrivacyPolicy, validate_policy
from .splitter import SemanticSplitter, SplitPlan

REPORT_SCHEMA = 1

# Paragraph packing targets ~1 KiB with +/- 25% slack.
TARGET_BYTES = 1024
LOW_BYTES = 768
HIGH_BYTES = 1280

_SENTENCE_BREAK = re.compile(r"[.!?]+[\)\"']*\s+|\n[ \t]*\n\s*")


def bundled_corpus_dir() -> Path:
    """Directory of the small text corpus shipped with the package."""
    return Path(str(files("cloudsplit") / "data" / "corpus"))


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    spans = []
    start = 0
    for match in _SENTENCE_BREAK.finditer(text):
        end = match.end()
        if end > start:
            spans.append((start, end))
            start = end
    if start < len(text):
        spans.append((start, len(text)))
    return spans


def pack_paragraphs(text: str) -> list[str]:
    """Greedy packing of one file's text into ~1 KiB paragraphs.

    Sentences accumulate until the chunk reaches the lower bound, so every
    chunk except possibly the last lands in [LOW_BYTES, HIGH_BYTES] for
    ordinary prose (a single sentence longer than the slack can overshoot).
    """
    chunks = []
    current = ""
    for start, end in _sentence_spans(text):
        current += text[start:end]
        if len(current.strip().encode("utf-8")) >= LOW_BYTES:
            chunks.append(current.strip())
            current = ""
    tail = current.strip()
    if tail:
        chunks.append(tail)
    return chunks


def ingest_corpus(directory: Path) -> tuple[list[str], CorpusStats]:
    """Read every file in a directory (sorted by name), pack paragraphs,
    and compute paragraph-level corpus statistics."""
    directory = Path(directory)
    paragraphs: list[str] = []
    if directory.is_dir():
        for path in sorted(p for p in directory.iterdir() if p.is_file()):
            paragraphs.extend(pack_paragraphs(path.read_text(encoding="utf-8")))
    if not paragraphs:
        raise EmptyCorpus(f"no usable text under {directory}")
    return paragraphs, CorpusStats(paragraphs)


def select_db_terms(paragraphs: Sequence[str], coverage: float) -> list[str]:
    """Top ``coverage`` fraction of extracted terms by document frequency
    (ties broken lexicographically)."""
    if not 0.0 <= coverage <= 1.0:
        raise ValueError("coverage must be within [0, 1]")
    df: Counter[str] = Counter()
    for para in paragraphs:
        df.update({t.text for t in extract_terms(para)})
    ranked = sorted(df, key=lambda t: (-df[t], t))
    take = int(len(ranked) * coverage + 1e-9)
    return ranked[:take]


def seed_term_db(terms: Sequence[str], stores: Sequence[CspStore]) -> None:
    """Seed one-term fragments round-robin across the given providers,
    simulating pre-existing third-party content."""
    if not stores:
        return
    for i, term in enumerate(terms):
        fragment = Fragment.term_set([term], Sensitivity.NON_SENSITIVE)
        stores[i % len(stores)].store(fragment)


@dataclass(frozen=True)
class MetricRow:
    solution: str               # "baseline" | "framework"
    strategy: str
    coverage: float | None      # None for baseline (it never queries)
    documents: int
    frag: float
    id: float
    qid: float
    et: float | None            # None for baseline
    ops: float
    time_ms: float

    def to_dict(self) -> dict:
        return {
            "solution": self.solution,
            "strategy": self.strategy,
            "coverage": self.coverage,
            "documents": self.documents,
            "frag": self.frag,
            "id": self.id,
            "qid": self.qid,
            "et": self.et,
            "ops": self.ops,
            "time_ms": self.time_ms,
        }


@dataclass
class BenchReport:
    rows: list[MetricRow]
    failures: list[dict]
    paragraphs: int
    coverages: list[float]
    strategies: list[str]
    seed: int
    plans: list[SplitPlan] = field(default_factory=list, repr=False)

    def row(
        self, solution: str, strategy: str, coverage: float | None = None
    ) -> MetricRow:
        for row in self.rows:
            if (
                row.solution == solution
                and row.strategy == strategy
                and (solution == "baseline" or row.coverage == coverage)
            ):
                return row
        raise KeyError((solution, strategy, coverage))

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "paragraphs": self.paragraphs,
            "coverages": self.coverages,
            "strategies": self.strategies,
            "seed": self.seed,
            "rows": [row.to_dict() for row in self.rows],
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def render_text(self) -> str:
        headers = [
            "solution", "strategy", "coverage", "docs",
            "frag", "id", "qid", "et", "ops", "time_ms",
        ]
        body = []
        for row in self.rows:
            body.append([
                row.solution,
                row.strategy,
                "-" if row.coverage is None else f"{row.coverage:.2f}",
                str(row.documents),
                f"{row.frag:.2f}",
                f"{row.id:.2f}",
                f"{row.qid:.2f}",
                "-" if row.et is None else f"{row.et:.2f}",
                f"{row.ops:.1f}",
                f"{row.time_ms:.1f}",
            ])
        widths = [
            max(len(headers[i]), *(len(r[i]) for r in body)) if body else len(headers[i])
            for i in range(len(headers))
        ]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
            "  ".join("-" * w for w in widths),
        ]
        for r in body:
            lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))))
        if self.failures:
            lines.append(f"failures: {len(self.failures)}")
        return "\n".join(lines)


def _fresh_cloud(seeded_peers: Sequence[CspStore]) -> Proxy:
    primary = CspStore(CspDescriptor("primary", Tier.PUBLIC))
    return Proxy([primary, *seeded_peers])


def _run_solution(
    paragraphs: Sequence[str],
    stats: CorpusStats,
    policy: PrivacyPolicy,
    strategy: Strategy,
    reuse: bool,
    seeded_peers: Sequence[CspStore],
    coverage: float | None,
    failures: list[dict],
    keep_plans: list[SplitPlan] | None,
) -> MetricRow | None:
    solution = "framework" if reuse else "baseline"
    frag, ids, qid, et, ops, elapsed = [], [], [], [], [], []
    for index, text in enumerate(paragraphs):
        proxy = _fresh_cloud(seeded_peers)
        splitter = SemanticSplitter(proxy, stats)
        started = time.perf_counter()
        try:
            plan = splitter.split(
                f"doc-{index:05d}",
                text,
                policy,
                strategy=strategy,
                store_policy=StorePolicy.SKIP_IF_ANY_FOUND,
                reuse=reuse,
            )
        except CloudSplitError as exc:
            failures.append({
                "solution": solution,
                "strategy": strategy.value,
                "coverage": coverage,
                "document": index,
                "error": type(exc).__name__,
                "message": str(exc),
            })
            continue
        wall = (time.perf_counter() - started) * 1000.0
        frag.append(plan.metrics.fragments)
        ids.append(plan.metrics.identifiers)
        qid.append(plan.metrics.quasi_allocated)
        et.append(plan.metrics.third_party)
        ops.append(plan.metrics.ops)
        elapsed.append(wall)
        if keep_plans is not None:
            keep_plans.append(plan)
    if not frag:
        return None
    return MetricRow(
        solution=solution,
        strategy=strategy.value,
        coverage=coverage,
        documents=len(frag),
        frag=statistics.fmean(frag),
        id=statistics.fmean(ids),
        qid=statistics.fmean(qid),
        et=statistics.fmean(et) if reuse else None,
        ops=statistics.fmean(ops),
        time_ms=statistics.fmean(elapsed),
    )


def run_benchmark(
    paragraphs: Sequence[str],
    stats: CorpusStats,
    policy: PrivacyPolicy,
    strategies: Sequence[Strategy] = (Strategy.UNORDERED,),
    coverages: Sequence[float] = (0.5,),
    seed: int = 0,
    peer_count: int = 2,
    keep_plans: bool = False,
) -> BenchReport:
    """Compare baseline splitting against the reuse framework.

    Every paragraph is split against a cloud holding only the seeded term
    database (stores during splitting go to a per-document fresh primary),
    so documents do not contaminate each other's measurements. Per-document
    errors are recorded as failures without aborting the run.
    """
    validate_policy(policy, stats)
    failures: list[dict] = []
    rows: list[MetricRow] = []
    plans: list[SplitPlan] = []
    sink = plans if keep_plans else None

    for strategy in strategies:
        row = _run_solution(
            paragraphs, stats, policy, strategy,
            reuse=False, seeded_peers=(), coverage=None,
            failures=failures, keep_plans=sink,
        )
        if row:
            rows.append(row)

    for coverage in coverages:
        terms = select_db_terms(paragraphs, coverage)
        peers = [
            CspStore(CspDescriptor(f"peer{i + 1}", Tier.PUBLIC))
            for i in range(max(1, peer_count))
        ]
        seed_term_db(terms, peers)
        for strategy in strategies:
            row = _run_solution(
                paragraphs, stats, policy, strategy,
                reuse=True, seeded_peers=peers, coverage=coverage,
                failures=failures, keep_plans=sink,
            )
            if row:
                rows.append(row)

    return BenchReport(
        rows=rows,
        failures=failures,
        paragraphs=len(paragraphs),
        coverages=list(coverages),
        strategies=[s.value for s in strategies],
        seed=seed,
        plans=plans,
    )
