"""The trusted proxy.

Outsourcing broadcasts a query for each fragment to every registered
provider before deciding whether to store it; retrieval fans out fetches,
verifies the primary response, and rebuilds damaged or missing fragments
from secondary copies, moving the primary slot to a fresh provider so the
same conflict cannot recur. Update and delete cover the fragment lifecycle,
including the conflicts deletion knowingly inflicts on other objects.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from .csp import CspStore
from .errors import (
    BadRow,
    CspUnreachable,
    EmptyCspList,
    NoNewPcsp,
    PcspUnreachable,
    PolicyViolation,
    SelfCheckFailed,
    SharedFragment,
    UnknownCsp,
    UnknownObject,
    Unrecoverable,
)
from .model import (
    DocumentManifest,
    DroppedRef,
    Fragment,
    FragmentRef,
    LocationEntry,
    LocationTable,
    RefCountIndex,
    Sensitivity,
    reassemble,
    split_location,
)

log = logging.getLogger(__name__)


class StorePolicy(str, Enum):
    """What outsourcing does with a fragment after the broadcast.

    PCSP_IF_MISSING stores whenever the primary itself answered None, even
    if a secondary already holds a copy. SKIP_IF_ANY_FOUND stores only when
    no provider answered, treating any hit as a reusable third-party
    fragment. Both behaviors are legitimate; callers pick per mode.
    """

    PCSP_IF_MISSING = "pcsp-if-missing"
    SKIP_IF_ANY_FOUND = "skip-if-any-found"


class UpdateApproach(str, Enum):
    IN_PLACE = "in-place"
    NEW_PCSP = "new-pcsp"


@dataclass(frozen=True)
class RepairEvent:
    row: int
    fragment_key: str
    old_location: str | None
    new_location: str


@dataclass(frozen=True)
class RetrieveResult:
    data: bytes
    repairs: tuple[RepairEvent, ...] = ()


@dataclass
class PlacementResult:
    rows: list[LocationEntry]
    stored: int  # store calls issued (the write-frugality measure)


def check_fragment(response: Fragment | None, expected_key: str) -> bool:
    """True iff the response exists and its payload hashes to the expected
    key. Content self-verification subsumes cross-checking against the
    secondaries when fragments are content-addressed."""
    return response is not None and response.matches(expected_key)


def reconstruct_fragment(
    responses: Sequence[Fragment | None], expected_key: str
) -> Fragment:
    """First verifying response, preferring secondaries over the primary.

    The primary already failed its check when this is called, so slots
    1..n-1 are scanned before slot 0.
    """
    order = list(range(1, len(responses))) + ([0] if responses else [])
    for i in order:
        candidate = responses[i]
        if candidate is not None and candidate.matches(expected_key):
            return candidate
    raise Unrecoverable(None, f"no verifying copy of {expected_key[:12]} anywhere")


class Proxy:
    """Client-side coordinator owning the location tables, the manifests,
    the identifier store, and the provider registry (index 0 = primary)."""

    def __init__(self, csps: Sequence[CspStore] = ()):
        self._csps: dict[str, CspStore] = {}
        for store in csps:
            self.register_csp(store)
        self.tables: dict[str, LocationTable] = {}
        self.manifests: dict[str, DocumentManifest] = {}
        self.local_store: dict[str, Fragment] = {}
        self.refcounts = RefCountIndex()
        self._object_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- registry -----------------------------------------------------------

    def register_csp(self, store: CspStore) -> None:
        if store.csp_id in self._csps:
            raise ValueError(f"provider {store.csp_id} already registered")
        self._csps[store.csp_id] = store

    @property
    def csp_ids(self) -> tuple[str, ...]:
        return tuple(self._csps)

    @property
    def csps(self) -> tuple[CspStore, ...]:
        return tuple(self._csps.values())

    def csp(self, csp_id: str) -> CspStore:
        try:
            return self._csps[csp_id]
        except KeyError:
            raise UnknownCsp(f"no provider registered as {csp_id!r}") from None

    @property
    def primary(self) -> CspStore:
        if not self._csps:
            raise EmptyCspList("no providers registered")
        return next(iter(self._csps.values()))

    def _lock_for(self, object_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._object_locks.setdefault(object_id, threading.Lock())

    # -- broadcast ----------------------------------------------------------

    def broadcast_query(
        self, key: str, csp_ids: Sequence[str] | None = None
    ) -> list[str | None]:
        """Query every provider for a fragment key; one slot per provider,
        in registry (or caller-given) order. An offline provider is logged
        and slotted as None."""
        ids = tuple(csp_ids) if csp_ids is not None else self.csp_ids
        if not ids:
            raise EmptyCspList("broadcast requires at least one provider")
        slots: list[str | None] = []
        for csp_id in ids:
            store = self._csps.get(csp_id)
            if store is None:
                slots.append(None)
                continue
            try:
                slots.append(store.query(key))
            except CspUnreachable:
                log.warning("provider %s unreachable during broadcast", csp_id)
                slots.append(None)
        return slots

    # -- outsourcing --------------------------------------------------------

    def place_fragments(
        self, fragments: Sequence[Fragment], policy: StorePolicy
    ) -> PlacementResult:
        """Broadcast-then-store placement for a fragment sequence.

        All-or-nothing: if the primary goes offline mid-way, fragments this
        call stored are removed again and PcspUnreachable is raised.
        """
        primary = self.primary
        if not primary.reachable:
            raise PcspUnreachable(f"primary provider {primary.csp_id} is offline")
        rows: list[LocationEntry] = []
        newly_stored: list[str] = []
        stored_calls = 0
        try:
            for fragment in fragments:
                if not fragment.verify():
                    raise SelfCheckFailed(
                        f"fragment {fragment.key[:12]} failed self-verification"
                    )
                slots = self.broadcast_query(fragment.key)
                if policy is StorePolicy.PCSP_IF_MISSING:
                    need_store = slots[0] is None
                else:
                    need_store = all(s is None for s in slots)
                if need_store:
                    was_present = primary.has_key(fragment.key)
                    try:
                        location = primary.store(fragment)
                    except CspUnreachable:
                        raise PcspUnreachable(
                            f"primary provider {primary.csp_id} went offline"
                        ) from None
                    stored_calls += 1
                    if not was_present:
                        newly_stored.append(location)
                    slots[0] = location
                rows.append(LocationEntry(fragment.key, tuple(slots)))
        except PcspUnreachable:
            for location in newly_stored:
                try:
                    primary.delete(location)
                except CspUnreachable:
                    log.error("rollback failed for %s", location)
            raise
        return PlacementResult(rows, stored_calls)

    def commit_object(
        self,
        table: LocationTable,
        manifest: DocumentManifest,
        identifier_fragments: Iterable[Fragment] = (),
    ) -> None:
        if table.object_id in self.tables:
            raise ValueError(f"object {table.object_id} already exists")
        self.tables[table.object_id] = table
        self.manifests[table.object_id] = manifest
        for row in table.rows:
            self.refcounts.add(row.fragment_key, table.object_id)
        for fragment in identifier_fragments:
            self.local_store[fragment.key] = fragment

    def outsource(
        self,
        object_id: str,
        fragments: Sequence[Fragment],
        policy: StorePolicy = StorePolicy.PCSP_IF_MISSING,
        manifest: DocumentManifest | None = None,
    ) -> LocationTable:
        """Place fragments and commit the object in one step.

        When no manifest is given, a byte-mode manifest concatenating the
        fragments in row order is generated, which reassembles byte blocks
        exactly and term sets as their canonical encoding.
        """
        with self._lock_for(object_id):
            placement = self.place_fragments(fragments, policy)
            table = LocationTable(object_id, self.csp_ids, placement.rows)
            if manifest is None:
                manifest = DocumentManifest(
                    object_id=object_id,
                    mode="bytes",
                    segments=tuple(FragmentRef(row=i) for i in range(len(fragments))),
                )
            self.commit_object(table, manifest)
            return table

    # -- retrieval ----------------------------------------------------------

    def _fetch_slot(self, location: str | None) -> Fragment | None:
        if location is None:
            return None
        csp_id, _ = split_location(location)
        store = self._csps.get(csp_id)
        if store is None:
            log.warning("location %s references unknown provider", location)
            return None
        try:
            return store.fetch(location)
        except CspUnreachable:
            log.warning("provider %s unreachable during fetch", csp_id)
            return None

    def _pick_new_primary(
        self, exclude_csp_id: str | None, requested: str | None
    ) -> CspStore:
        if requested is not None and requested != exclude_csp_id:
            return self.csp(requested)
        candidates = [
            s
            for s in self._csps.values()
            if s.csp_id != exclude_csp_id and s.reachable
        ]
        if not candidates:
            raise NoNewPcsp(
                "repair needs a fresh primary provider and none is available"
            )
        return min(candidates, key=lambda s: (s.fragment_count, s.csp_id))

    def retrieve(
        self,
        object_id: str,
        new_pcsp: str | None = None,
        promote_third_party: bool = False,
    ) -> RetrieveResult:
        """Fetch, verify, repair if needed, and reassemble an object.

        Rows whose primary slot is filled are verified against the primary
        response; on failure the fragment is rebuilt from the secondaries,
        stored at a provider different from the failing one, and the slot is
        updated. Rows without a primary slot (reused third-party fragments)
        accept any verifying response and are only copied to an own primary
        when ``promote_third_party`` is set. A fully healthy object incurs
        zero writes.
        """
        table = self.tables.get(object_id)
        if table is None:
            raise UnknownObject(f"no object {object_id!r}")
        manifest = self.manifests[object_id]
        repairs: list[RepairEvent] = []
        fragments_by_row: dict[int, Fragment] = {}

        for idx, row in enumerate(table.rows):
            responses = [self._fetch_slot(loc) for loc in row.slots]
            primary_loc = row.slots[0]
            if primary_loc is not None:
                if check_fragment(responses[0], row.fragment_key):
                    fragment = responses[0]
                else:
                    fragment = self._repair_row(
                        table, idx, responses, new_pcsp, repairs
                    )
            else:
                try:
                    fragment = reconstruct_fragment(responses, row.fragment_key)
                except Unrecoverable as exc:
                    raise Unrecoverable(idx, str(exc)) from None
                if promote_third_party:
                    target = self._pick_new_primary(None, new_pcsp)
                    location = target.store(fragment)
                    table.rows[idx] = row.with_slot(0, location)
                    repairs.append(
                        RepairEvent(idx, row.fragment_key, None, location)
                    )
            assert fragment is not None
            fragments_by_row[idx] = fragment

        data = reassemble(manifest, fragments_by_row)
        return RetrieveResult(data, tuple(repairs))

    def _repair_row(
        self,
        table: LocationTable,
        idx: int,
        responses: Sequence[Fragment | None],
        new_pcsp: str | None,
        repairs: list[RepairEvent],
    ) -> Fragment:
        row = table.rows[idx]
        try:
            fragment = reconstruct_fragment(responses, row.fragment_key)
        except Unrecoverable as exc:
            raise Unrecoverable(idx, str(exc)) from None
        old_loc = row.slots[0]
        old_csp = split_location(old_loc)[0] if old_loc else None
        target = self._pick_new_primary(old_csp, new_pcsp)
        try:
            location = target.store(fragment)
        except CspUnreachable:
            raise NoNewPcsp(f"chosen provider {target.csp_id} went offline") from None
        table.rows[idx] = row.with_slot(0, location)
        repairs.append(RepairEvent(idx, row.fragment_key, old_loc, location))
        log.info(
            "repaired row %d of %s: %s -> %s", idx, table.object_id, old_loc, location
        )
        return fragment

    # -- lifecycle ----------------------------------------------------------

    def _require_table(self, object_id: str) -> LocationTable:
        table = self.tables.get(object_id)
        if table is None:
            raise UnknownObject(f"no object {object_id!r}")
        return table

    def _key_still_referenced(self, table: LocationTable, key: str) -> bool:
        return any(r.fragment_key == key for r in table.rows)

    def update_fragment(
        self,
        object_id: str,
        row_index: int,
        new_payload: Iterable[str] | bytes,
        approach: UpdateApproach,
        validator: Callable[[Fragment], bool] | None = None,
    ) -> LocationEntry:
        """Replace one fragment's content.

        IN_PLACE rewrites the fragment at its current primary location and
        is refused while any other object still references the old key.
        NEW_PCSP stores the new content at a freshly selected provider and
        leaves the old fragment untouched for its other users. Both refresh
        the secondary slots with a new broadcast. ``validator`` is the
        policy hook: it receives the new fragment and a False return raises
        PolicyViolation.

        Term references in the manifest resolve against the new (sorted)
        term list afterwards, so updating revises the reassembled document.
        """
        with self._lock_for(object_id):
            table = self._require_table(object_id)
            if not 0 <= row_index < len(table.rows):
                raise BadRow(f"row {row_index} out of range")
            old_row = table.rows[row_index]
            manifest = self.manifests[object_id]
            if manifest.mode == "bytes":
                if not isinstance(new_payload, (bytes, bytearray)):
                    raise PolicyViolation("byte-mode rows take bytes payloads")
                new_fragment = Fragment.byte_block(bytes(new_payload))
            else:
                if isinstance(new_payload, (bytes, bytearray)):
                    raise PolicyViolation("semantic rows take term payloads")
                new_fragment = Fragment.term_set(
                    new_payload, Sensitivity.QUASI_IDENTIFIER
                )
            if validator is not None and not validator(new_fragment):
                raise PolicyViolation(
                    "replacement fragment violates the object's privacy policy"
                )

            old_key = old_row.fragment_key
            if approach is UpdateApproach.IN_PLACE:
                referents = self.refcounts.objects_for(old_key)
                if referents - {object_id}:
                    raise SharedFragment(
                        f"fragment {old_key[:12]} is referenced by "
                        f"{sorted(referents - {object_id})}"
                    )
                if old_row.slots[0] is None:
                    raise BadRow("row has no owned primary copy to replace")
                old_loc = old_row.slots[0]
                store = self.csp(split_location(old_loc)[0])
                new_loc = store.store(new_fragment)
                if new_loc != old_loc:
                    store.delete(old_loc)
            else:
                exclude = (
                    split_location(old_row.slots[0])[0]
                    if old_row.slots[0] is not None
                    else None
                )
                target = self._pick_new_primary(exclude, None)
                new_loc = target.store(new_fragment)

            slots = self.broadcast_query(new_fragment.key, table.csp_list)
            slots[0] = new_loc
            new_row = LocationEntry(new_fragment.key, tuple(slots))
            table.rows[row_index] = new_row
            if old_key != new_fragment.key:
                if not self._key_still_referenced(table, old_key):
                    self.refcounts.remove(old_key, object_id)
                self.refcounts.add(new_fragment.key, object_id)
            return new_row

    def delete_fragment(self, object_id: str, row_index: int) -> set[str]:
        """Delete one fragment from its primary provider, unconditionally.

        Returns the ids of other objects whose primary slot pointed at the
        deleted location; their next retrieval either heals from a
        secondary copy or fails as unrecoverable. The owner's manifest
        entries for the row become dropped markers and later rows shift
        down, so the owner's own document loses that content for good.
        """
        with self._lock_for(object_id):
            table = self._require_table(object_id)
            if not 0 <= row_index < len(table.rows):
                raise BadRow(f"row {row_index} out of range")
            row = table.rows[row_index]
            if row.slots[0] is None:
                raise BadRow("row has no owned primary copy to delete")
            location = row.slots[0]
            store = self.csp(split_location(location)[0])
            try:
                store.delete(location)
            except CspUnreachable:
                log.warning("primary offline; recording delete of %s anyway", location)

            conflicted = {
                other_id
                for other_id, other in self.tables.items()
                if other_id != object_id
                and any(r.slots[0] == location for r in other.rows)
            }

            del table.rows[row_index]
            if not self._key_still_referenced(table, row.fragment_key):
                self.refcounts.remove(row.fragment_key, object_id)
            self._drop_manifest_row(object_id, row_index)
            return conflicted

    def _drop_manifest_row(self, object_id: str, row_index: int) -> None:
        manifest = self.manifests[object_id]
        segments = []
        for seg in manifest.segments:
            if isinstance(seg, FragmentRef):
                if seg.row == row_index:
                    segments.append(DroppedRef())
                    continue
                if seg.row > row_index:
                    seg = FragmentRef(seg.row - 1, seg.term, seg.case, seg.surface)
            segments.append(seg)
        self.manifests[object_id] = DocumentManifest(
            object_id=manifest.object_id,
            mode=manifest.mode,
            segments=tuple(segments),
            local_identifiers=manifest.local_identifiers,
            source_name=manifest.source_name,
        )

    # -- audits --------------------------------------------------------------

    def audit_refcounts(self) -> bool:
        """Rebuild the reference index from the tables and compare with the
        live one. True iff they agree."""
        return RefCountIndex.rebuild(self.tables.values()) == self.refcounts
