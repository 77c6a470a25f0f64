"""Privacy-preserving data splitting over a simulated multi-cloud.

Documents are split into content-addressed fragments. Before anything is
stored, the trusted proxy broadcasts queries for each fragment so content
already present in the multi-cloud is reused instead of re-created, and
retrieval verifies every primary copy, rebuilding damaged fragments from
secondary sources.
"""

from .allocate import AllocationResult, Strategy, allocate_fragments
from .bench import (
    BenchReport,
    MetricRow,
    bundled_corpus_dir,
    ingest_corpus,
    pack_paragraphs,
    run_benchmark,
    seed_term_db,
    select_db_terms,
)
from .csp import CORRUPTED, MISSING, CspStore, Fault
from .errors import (
    BadRow,
    CloudSplitError,
    CspUnreachable,
    DegenerateEntity,
    EmptyCorpus,
    EmptyCspList,
    NoNewPcsp,
    PcspUnreachable,
    PolicyViolation,
    SelfCheckFailed,
    SharedFragment,
    UnknownCsp,
    UnknownLocation,
    UnknownObject,
    UnplaceableTerm,
    Unrecoverable,
    WorkspaceLocked,
)
from .model import (
    CspDescriptor,
    DocumentManifest,
    Fragment,
    FragmentKind,
    FragmentRef,
    LocalRef,
    LocationEntry,
    LocationTable,
    RefCountIndex,
    Sensitivity,
    TextSegment,
    Tier,
    Trust,
    canonical_term,
    canonical_terms,
    canonicalize,
    fragment_key,
    reassemble,
)
from .proxy import (
    Proxy,
    RepairEvent,
    RetrieveResult,
    StorePolicy,
    UpdateApproach,
    check_fragment,
    reconstruct_fragment,
)
from .rake import Term, extract_terms
from .risk import (
    CorpusStats,
    PrivacyPolicy,
    TermAssessment,
    TermClass,
    audit_fragments,
    classify_terms,
    disclosure_risk,
    information_content,
    validate_policy,
    within_cap,
)
from .splitter import SemanticSplitter, SplitMetrics, SplitPlan, split_byte_document
from .workspace import Workspace

__version__ = "0.1.0"
