"""Simulated cloud storage providers.

Each provider is an in-process content-addressed store implementing the
query / store / fetch / delete protocol the proxy broadcasts against, plus
fault injection (missing or corrupted fragments) and an offline toggle for
conflict and repair testing.

Persistence layout (round-trips bit-exact):

    <root>/<csp_id>/fragments/<key>   canonical payload bytes
    <root>/<csp_id>/meta.json         descriptor, reachability, fault table,
                                      per-location fragment metadata
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import CspUnreachable, SelfCheckFailed, UnknownLocation
from .model import (
    CspDescriptor,
    Fragment,
    FragmentKind,
    Sensitivity,
    Tier,
    make_location,
)

META_SCHEMA = 1

MISSING = "missing"
CORRUPTED = "corrupted"


@dataclass(frozen=True)
class Fault:
    mode: str  # MISSING | CORRUPTED
    position: int = 0

    def __post_init__(self) -> None:
        if self.mode not in (MISSING, CORRUPTED):
            raise ValueError(f"unknown fault mode: {self.mode}")


def _flip_byte(raw: bytes, position: int) -> bytes:
    """XOR one byte with 0xFF. An empty payload gains a single flipped byte
    so the corruption is still observable."""
    if not raw:
        return b"\xff"
    i = position % len(raw)
    return raw[:i] + bytes([raw[i] ^ 0xFF]) + raw[i + 1:]


@dataclass
class OpStats:
    """Invocation counters, used by tests and the benchmark cost proxy."""

    queries: int = 0
    stores: int = 0
    fetches: int = 0
    deletes: int = 0

    def reset(self) -> None:
        self.queries = self.stores = self.fetches = self.deletes = 0


class CspStore:
    """One simulated provider.

    Mutations are serialized by an internal lock; reads are safe to issue
    concurrently. Fragments are indexed by key, so "store an already-present
    fragment" is idempotent and returns the existing location.
    """

    def __init__(self, descriptor: CspDescriptor, reachable: bool = True):
        self.descriptor = descriptor
        self.reachable = reachable
        self.stats = OpStats()
        self._objects: dict[str, Fragment] = {}
        self._index: dict[str, str] = {}
        self._faults: dict[str, Fault] = {}
        self._lock = threading.RLock()

    @property
    def csp_id(self) -> str:
        return self.descriptor.csp_id

    @property
    def fragment_count(self) -> int:
        return len(self._objects)

    def locations(self) -> tuple[str, ...]:
        return tuple(self._objects)

    def has_key(self, key: str) -> bool:
        """Raw index membership, ignoring faults and reachability."""
        return key in self._index

    def _check_reachable(self) -> None:
        if not self.reachable:
            raise CspUnreachable(f"provider {self.csp_id} is offline")

    # -- protocol ----------------------------------------------------------

    def query(self, key: str) -> str | None:
        """Location of a fragment with this key, or None.

        A fragment with an injected 'missing' fault is reported as absent; a
        corrupted fragment still answers (the damage only shows on fetch).
        """
        self._check_reachable()
        self.stats.queries += 1
        location = self._index.get(key)
        if location is None:
            return None
        fault = self._faults.get(location)
        if fault is not None and fault.mode == MISSING:
            return None
        return location

    def store(self, fragment: Fragment) -> str:
        """Store a self-verifying fragment, returning its location.

        Idempotent on key. Re-storing clears any injected fault at the
        location, since the content is written afresh.
        """
        self._check_reachable()
        with self._lock:
            self.stats.stores += 1
            if not fragment.verify():
                raise SelfCheckFailed(
                    f"fragment key {fragment.key[:12]} does not match payload"
                )
            existing = self._index.get(fragment.key)
            if existing is not None:
                self._objects[existing] = fragment
                self._faults.pop(existing, None)
                return existing
            location = make_location(self.csp_id, fragment.key)
            self._objects[location] = fragment
            self._index[fragment.key] = location
            return location

    def fetch(self, location: str) -> Fragment | None:
        """Fragment at a location, honoring injected faults.

        A corrupted location returns the fragment with one payload byte
        flipped and the key unchanged, so self-verification fails.
        """
        self._check_reachable()
        self.stats.fetches += 1
        fragment = self._objects.get(location)
        if fragment is None:
            return None
        fault = self._faults.get(location)
        if fault is None:
            return fragment
        if fault.mode == MISSING:
            return None
        mutated = _flip_byte(fragment.payload_bytes, fault.position)
        return Fragment.from_stored(
            fragment.key, fragment.kind, mutated, fragment.sensitivity
        )

    def delete(self, location: str) -> bool:
        self._check_reachable()
        with self._lock:
            self.stats.deletes += 1
            fragment = self._objects.pop(location, None)
            if fragment is None:
                return False
            if self._index.get(fragment.key) == location:
                del self._index[fragment.key]
            self._faults.pop(location, None)
            return True

    def inject_fault(self, location: str, fault: Fault) -> None:
        with self._lock:
            if location not in self._objects:
                raise UnknownLocation(f"{location} not stored on {self.csp_id}")
            self._faults[location] = fault

    def clear_fault(self, location: str) -> None:
        with self._lock:
            self._faults.pop(location, None)

    # -- persistence --------------------------------------------------------

    def save(self, root: Path) -> None:
        base = Path(root) / self.csp_id
        frag_dir = base / "fragments"
        frag_dir.mkdir(parents=True, exist_ok=True)
        meta = {
            "schema": META_SCHEMA,
            "descriptor": {
                "csp_id": self.descriptor.csp_id,
                "tier": self.descriptor.tier.value,
            },
            "reachable": self.reachable,
            "objects": {
                loc: {
                    "key": frag.key,
                    "kind": frag.kind.value,
                    "sensitivity": frag.sensitivity.value,
                }
                for loc, frag in self._objects.items()
            },
            "faults": {
                loc: {"mode": fault.mode, "position": fault.position}
                for loc, fault in self._faults.items()
            },
        }
        (base / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        live_keys = set()
        for fragment in self._objects.values():
            live_keys.add(fragment.key)
            (frag_dir / fragment.key).write_bytes(fragment.payload_bytes)
        for path in frag_dir.iterdir():
            if path.name not in live_keys:
                path.unlink()

    @classmethod
    def load(cls, root: Path, csp_id: str) -> "CspStore":
        base = Path(root) / csp_id
        meta = json.loads((base / "meta.json").read_text())
        if meta.get("schema") != META_SCHEMA:
            raise ValueError(f"unsupported provider schema: {meta.get('schema')}")
        descriptor = CspDescriptor(
            meta["descriptor"]["csp_id"], Tier(meta["descriptor"]["tier"])
        )
        store = cls(descriptor, reachable=meta.get("reachable", True))
        for location, info in meta["objects"].items():
            raw = (base / "fragments" / info["key"]).read_bytes()
            fragment = Fragment.from_stored(
                info["key"],
                FragmentKind(info["kind"]),
                raw,
                Sensitivity(info["sensitivity"]),
            )
            store._objects[location] = fragment
            store._index[fragment.key] = location
        for location, info in meta["faults"].items():
            store._faults[location] = Fault(info["mode"], info.get("position", 0))
        return store
