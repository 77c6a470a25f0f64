"""Core domain model: fragments, content addressing, location tables, manifests.

The canonical encoding defined here is part of the on-disk and wire contract:

* a term-set payload is encoded as UTF-8 NFC, lowercase, deduplicated terms,
  sorted lexicographically and joined with LF;
* a byte-block payload is passed through unchanged;
* a fragment key is the lowercase-hex SHA-256 of the canonical bytes.

Two payloads are "the same fragment" exactly when their canonical bytes are
equal, which is what makes reuse of third-party fragments sound: a reused
fragment reconstructs the caller's data bit-exactly.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Union

from .errors import Unrecoverable

TermPayload = tuple[str, ...]
Payload = Union[TermPayload, bytes]


class FragmentKind(str, Enum):
    TERM_SET = "term-set"
    BYTE_BLOCK = "byte-block"


class Sensitivity(str, Enum):
    IDENTIFIER = "identifier"
    QUASI_IDENTIFIER = "quasi-identifier"
    NON_SENSITIVE = "non-sensitive"


class Tier(str, Enum):
    PUBLIC = "public"
    PRIVATE = "private"


class Trust(str, Enum):
    TRUSTED = "trusted"
    SEMI_HONEST = "semi-honest"


def canonical_term(term: str) -> str:
    """Normalize a single term: NFC, lowercase, NFC again.

    The second NFC pass guards against lowercasing producing a decomposed
    sequence (e.g. dotted capital I), so the result is both lowercase and
    NFC-normal, and the function is idempotent.
    """
    return unicodedata.normalize("NFC", unicodedata.normalize("NFC", term).lower())


def canonical_terms(terms: Iterable[str]) -> TermPayload:
    """Deduplicated, normalized, sorted term tuple. Empty terms are dropped
    so that the LF-joined encoding stays unambiguous."""
    return tuple(sorted({t for t in (canonical_term(x) for x in terms) if t}))


def canonicalize(payload: Iterable[str] | bytes) -> bytes:
    """Deterministic byte encoding of a fragment payload.

    Total function: bytes pass through, any iterable of strings is treated as
    a term set and normalized per the wire contract.
    """
    if isinstance(payload, (bytes, bytearray, memoryview)):
        return bytes(payload)
    return "\n".join(canonical_terms(payload)).encode("utf-8")


def fragment_key(payload: Iterable[str] | bytes) -> str:
    """Content address of a payload: SHA-256 of its canonical bytes, hex."""
    return hashlib.sha256(canonicalize(payload)).hexdigest()


def _digest(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


@dataclass(frozen=True)
class Fragment:
    """A content-addressed unit of split data.

    ``payload`` is the logical value: a tuple of canonical terms for
    TERM_SET, raw bytes for BYTE_BLOCK. ``payload_bytes`` is the exact byte
    form used for hashing and storage; for a well-formed fragment it equals
    the canonical encoding, while a fragment rebuilt from tampered storage
    keeps the tampered bytes so that verification can fail.
    """

    key: str
    kind: FragmentKind
    payload: Payload
    sensitivity: Sensitivity

    @classmethod
    def term_set(
        cls,
        terms: Iterable[str],
        sensitivity: Sensitivity = Sensitivity.QUASI_IDENTIFIER,
    ) -> "Fragment":
        canon = canonical_terms(terms)
        raw = "\n".join(canon).encode("utf-8")
        return cls(_digest(raw), FragmentKind.TERM_SET, canon, sensitivity)

    @classmethod
    def byte_block(
        cls,
        data: bytes,
        sensitivity: Sensitivity = Sensitivity.NON_SENSITIVE,
    ) -> "Fragment":
        data = bytes(data)
        return cls(_digest(data), FragmentKind.BYTE_BLOCK, data, sensitivity)

    @classmethod
    def from_stored(
        cls,
        key: str,
        kind: FragmentKind,
        raw: bytes,
        sensitivity: Sensitivity,
    ) -> "Fragment":
        """Rebuild a fragment from stored bytes without re-normalizing.

        Corruption must stay observable, so the payload reflects ``raw``
        exactly; surrogateescape keeps the decode/encode round trip lossless
        even for invalid UTF-8.
        """
        if kind is FragmentKind.BYTE_BLOCK:
            return cls(key, kind, bytes(raw), sensitivity)
        terms = tuple(raw.decode("utf-8", "surrogateescape").split("\n")) if raw else ()
        return cls(key, kind, terms, sensitivity)

    @property
    def payload_bytes(self) -> bytes:
        if self.kind is FragmentKind.BYTE_BLOCK:
            assert isinstance(self.payload, bytes)
            return self.payload
        return "\n".join(self.payload).encode("utf-8", "surrogateescape")

    @property
    def terms(self) -> TermPayload:
        if self.kind is not FragmentKind.TERM_SET:
            raise TypeError("not a term-set fragment")
        return self.payload  # type: ignore[return-value]

    def verify(self) -> bool:
        """Self-verification: the key matches the hash of the payload bytes."""
        return _digest(self.payload_bytes) == self.key

    def matches(self, expected_key: str) -> bool:
        return _digest(self.payload_bytes) == expected_key


# --------------------------------------------------------------------------
# Providers and locations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CspDescriptor:
    """A simulated cloud storage provider.

    Trust follows tier: private providers are trusted, public ones are
    semi-honest. The constructor derives it so the pair can never disagree.
    """

    csp_id: str
    tier: Tier
    trust: Trust = field(init=False)

    def __post_init__(self) -> None:
        if not self.csp_id or "/" in self.csp_id or self.csp_id != self.csp_id.strip():
            raise ValueError(f"invalid csp_id: {self.csp_id!r}")
        trust = Trust.TRUSTED if self.tier is Tier.PRIVATE else Trust.SEMI_HONEST
        object.__setattr__(self, "trust", trust)


def make_location(csp_id: str, object_key: str) -> str:
    return f"{csp_id}/{object_key}"


def split_location(location: str) -> tuple[str, str]:
    csp_id, _, object_key = location.partition("/")
    return csp_id, object_key


@dataclass(frozen=True)
class LocationEntry:
    """One row of a location table: a fragment key plus one slot per
    provider in the table's provider list. Slot 0 is the primary slot."""

    fragment_key: str
    slots: tuple[str | None, ...]

    def with_slot(self, index: int, location: str | None) -> "LocationEntry":
        slots = list(self.slots)
        slots[index] = location
        return LocationEntry(self.fragment_key, tuple(slots))


@dataclass
class LocationTable:
    """Per-object table of storage locations, one row per fragment.

    ``csp_list`` records the provider ordering in force when the object was
    outsourced (index 0 = primary). Repairs may later point slot 0 at a
    provider outside this list; the list itself is bookkeeping of the
    original broadcast width.
    """

    object_id: str
    csp_list: tuple[str, ...]
    rows: list[LocationEntry]

    def __post_init__(self) -> None:
        n = len(self.csp_list)
        for row in self.rows:
            if len(row.slots) != n:
                raise ValueError("row slot count does not match provider list")

    @property
    def width(self) -> int:
        return len(self.csp_list)


# --------------------------------------------------------------------------
# Manifests
# --------------------------------------------------------------------------

# Case tags let the manifest restore the surface form of an occurrence from
# the canonically stored (lowercase) term. When no simple transform fits,
# the surface text itself is recorded.
_CASE_FUNCS = {
    "exact": lambda s: s,
    "capitalize": str.capitalize,
    "title": str.title,
    "upper": str.upper,
}


def infer_case(surface: str, canonical: str) -> tuple[str, str | None]:
    for name, fn in _CASE_FUNCS.items():
        if fn(canonical) == surface:
            return name, None
    return "surface", surface


def apply_case(canonical: str, case: str, surface: str | None) -> str:
    if case == "surface":
        if surface is None:
            raise ValueError("surface form missing")
        return surface
    try:
        return _CASE_FUNCS[case](canonical)
    except KeyError:
        raise ValueError(f"unknown case tag: {case}") from None


@dataclass(frozen=True)
class TextSegment:
    text: str


@dataclass(frozen=True)
class FragmentRef:
    """Placeholder bound to a location-table row.

    ``term`` indexes the row's (sorted) term tuple for semantic objects and
    is None for byte blocks, where the whole payload is substituted.
    """

    row: int
    term: int | None = None
    case: str = "exact"
    surface: str | None = None


@dataclass(frozen=True)
class LocalRef:
    """Placeholder bound to an identifier kept at the proxy."""

    index: int
    case: str = "exact"
    surface: str | None = None


@dataclass(frozen=True)
class DroppedRef:
    """Placeholder whose source row was deleted by the owner."""


Segment = Union[TextSegment, FragmentRef, LocalRef, DroppedRef]


@dataclass
class DocumentManifest:
    """Lossless reassembly record for one data object.

    Substituting every placeholder from its source reproduces the original
    document byte-for-byte. Mode "semantic" manifests interleave clear text
    with term references; mode "bytes" manifests are a pure sequence of
    fragment references whose payloads concatenate to the document.
    """

    object_id: str
    mode: str  # "semantic" | "bytes"
    segments: tuple[Segment, ...]
    local_identifiers: tuple[str, ...] = ()
    source_name: str | None = None


def reassemble(
    manifest: DocumentManifest,
    fragments_by_row: Mapping[int, Fragment],
) -> bytes:
    """Rebuild the original document from a manifest plus fetched fragments.

    Raises Unrecoverable when a placeholder cannot be resolved (dropped row,
    missing fragment, or a term index that no longer exists).
    """
    if manifest.mode == "bytes":
        parts: list[bytes] = []
        for seg in manifest.segments:
            if isinstance(seg, DroppedRef):
                raise Unrecoverable(None, "content was deleted by its owner")
            assert isinstance(seg, FragmentRef)
            frag = fragments_by_row.get(seg.row)
            if frag is None:
                raise Unrecoverable(seg.row, f"no fragment for row {seg.row}")
            parts.append(frag.payload_bytes)
        return b"".join(parts)

    out: list[str] = []
    for seg in manifest.segments:
        if isinstance(seg, TextSegment):
            out.append(seg.text)
        elif isinstance(seg, LocalRef):
            try:
                term = manifest.local_identifiers[seg.index]
            except IndexError:
                raise Unrecoverable(None, f"local identifier {seg.index} missing") from None
            out.append(apply_case(term, seg.case, seg.surface))
        elif isinstance(seg, DroppedRef):
            raise Unrecoverable(None, "content was deleted by its owner")
        else:
            frag = fragments_by_row.get(seg.row)
            if frag is None:
                raise Unrecoverable(seg.row, f"no fragment for row {seg.row}")
            if seg.term is None:
                raise Unrecoverable(seg.row, "semantic manifest requires a term index")
            try:
                term = frag.terms[seg.term]
            except (IndexError, TypeError):
                raise Unrecoverable(
                    seg.row, f"term {seg.term} not present in row {seg.row}"
                ) from None
            out.append(apply_case(term, seg.case, seg.surface))
    return "".join(out).encode("utf-8")


# --------------------------------------------------------------------------
# Reference counting
# --------------------------------------------------------------------------

class RefCountIndex:
    """Fragment key -> set of object ids whose tables reference it."""

    def __init__(self) -> None:
        self._refs: dict[str, set[str]] = {}

    def add(self, key: str, object_id: str) -> None:
        self._refs.setdefault(key, set()).add(object_id)

    def remove(self, key: str, object_id: str) -> None:
        objs = self._refs.get(key)
        if objs is None:
            return
        objs.discard(object_id)
        if not objs:
            del self._refs[key]

    def objects_for(self, key: str) -> frozenset[str]:
        return frozenset(self._refs.get(key, ()))

    def as_dict(self) -> dict[str, frozenset[str]]:
        return {k: frozenset(v) for k, v in self._refs.items()}

    @classmethod
    def rebuild(cls, tables: Iterable[LocationTable]) -> "RefCountIndex":
        index = cls()
        for table in tables:
            for row in table.rows:
                index.add(row.fragment_key, table.object_id)
        return index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RefCountIndex):
            return NotImplemented
        return self.as_dict() == other.as_dict()


# --------------------------------------------------------------------------
# JSON (de)serialization of the persistent records
# --------------------------------------------------------------------------

def table_to_dict(table: LocationTable) -> dict:
    return {
        "object_id": table.object_id,
        "csp_list": list(table.csp_list),
        "rows": [
            {"key": row.fragment_key, "slots": list(row.slots)} for row in table.rows
        ],
    }


def table_from_dict(data: dict) -> LocationTable:
    rows = [
        LocationEntry(row["key"], tuple(row["slots"])) for row in data["rows"]
    ]
    return LocationTable(data["object_id"], tuple(data["csp_list"]), rows)


def _segment_to_dict(seg: Segment) -> dict:
    if isinstance(seg, TextSegment):
        return {"kind": "text", "text": seg.text}
    if isinstance(seg, FragmentRef):
        out: dict = {"kind": "fragment", "row": seg.row, "term": seg.term}
        if seg.case != "exact":
            out["case"] = seg.case
        if seg.surface is not None:
            out["surface"] = seg.surface
        return out
    if isinstance(seg, LocalRef):
        out = {"kind": "local", "index": seg.index}
        if seg.case != "exact":
            out["case"] = seg.case
        if seg.surface is not None:
            out["surface"] = seg.surface
        return out
    return {"kind": "dropped"}


def _segment_from_dict(data: dict) -> Segment:
    kind = data["kind"]
    if kind == "text":
        return TextSegment(data["text"])
    if kind == "fragment":
        return FragmentRef(
            data["row"], data.get("term"), data.get("case", "exact"), data.get("surface")
        )
    if kind == "local":
        return LocalRef(data["index"], data.get("case", "exact"), data.get("surface"))
    if kind == "dropped":
        return DroppedRef()
    raise ValueError(f"unknown segment kind: {kind}")


def manifest_to_dict(manifest: DocumentManifest) -> dict:
    return {
        "object_id": manifest.object_id,
        "mode": manifest.mode,
        "segments": [_segment_to_dict(s) for s in manifest.segments],
        "local_identifiers": list(manifest.local_identifiers),
        "source_name": manifest.source_name,
    }


def manifest_from_dict(data: dict) -> DocumentManifest:
    return DocumentManifest(
        object_id=data["object_id"],
        mode=data["mode"],
        segments=tuple(_segment_from_dict(s) for s in data["segments"]),
        local_identifiers=tuple(data.get("local_identifiers", ())),
        source_name=data.get("source_name"),
    )
