from __future__ import annotations

import pytest

from cloudsplit.bench import bundled_corpus_dir, ingest_corpus
from cloudsplit.csp import CspStore
from cloudsplit.model import CspDescriptor, Tier
from cloudsplit.proxy import Proxy
from cloudsplit.risk import CorpusStats, PrivacyPolicy

# Eight-paragraph toy corpus with hand-checkable counts:
#   df(hiv)=2  df(retrovirus)=2  df(clinic)=4  df(omega)=2
#   codf(retrovirus,hiv)=2  codf(clinic,hiv)=1  codf(omega,hiv)=1
TOY_PARAGRAPHS = (
    "hiv retrovirus clinic omega",
    "hiv retrovirus",
    "clinic alpha",
    "clinic beta",
    "clinic gamma",
    "delta omega",
    "epsilon theta",
    "zeta eta",
)


@pytest.fixture
def toy_stats() -> CorpusStats:
    return CorpusStats(TOY_PARAGRAPHS)


@pytest.fixture
def toy_policy() -> PrivacyPolicy:
    return PrivacyPolicy(frozenset(["hiv"]))


def make_proxy(n: int = 3) -> Proxy:
    names = ["pcsp"] + [f"scsp{i}" for i in range(1, n)]
    return Proxy([CspStore(CspDescriptor(name, Tier.PUBLIC)) for name in names])


@pytest.fixture
def proxy() -> Proxy:
    return make_proxy()


@pytest.fixture(scope="session")
def corpus():
    return ingest_corpus(bundled_corpus_dir())
