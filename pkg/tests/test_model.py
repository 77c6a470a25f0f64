from __future__ import annotations

import hashlib
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from cloudsplit.errors import Unrecoverable
from cloudsplit.model import (
    CspDescriptor,
    DocumentManifest,
    DroppedRef,
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
    apply_case,
    canonical_terms,
    canonicalize,
    fragment_key,
    infer_case,
    manifest_from_dict,
    manifest_to_dict,
    reassemble,
    split_location,
    table_from_dict,
    table_to_dict,
)

# sha256 digests frozen from direct hashlib computation of the canonical bytes
KEY_HIV = "dca3d101447ca58acfd3af449a693b49f02ad841bdb4ae92fcf49c4d603c19f3"
KEY_VIRUS = "2898a07b2cf23dda8530b14b6aa522e67b002886d170c02219acc3598fdb50f3"
KEY_HIV_VIRUS = "bbce3d26d460ccaf8c51ba2b0c14772baa807afa003b6b75279daa53a77133f5"
KEY_DEADBEEF = "5f78c33274e43fa9de5659265c1d917e25c03722dcb0b8d27db8d5feaa813953"
KEY_DEADBEEF_00 = "e2867e538491f86ac5906b12ac667abf7761171d1ae94d867c231df82b0c7c90"
KEY_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


class TestCanonicalize:
    def test_term_set_normalization(self):
        assert canonicalize(["Virus", "HIV", "virus"]) == b"hiv\nvirus"

    def test_empty_term_set(self):
        assert canonicalize([]) == b""

    def test_byte_block_identity(self):
        assert canonicalize(bytes.fromhex("deadbeef")) == bytes.fromhex("deadbeef")

    def test_empty_terms_dropped(self):
        assert canonicalize(["", "a"]) == b"a"


class TestFragmentKey:
    def test_order_and_case_invariance(self):
        assert fragment_key(["Virus", "HIV"]) == fragment_key(["hiv", "virus"])
        assert fragment_key(["Virus", "HIV", "virus"]) == KEY_HIV_VIRUS

    def test_distinct_terms_distinct_keys(self):
        assert fragment_key(["hiv"]) == KEY_HIV
        assert fragment_key(["virus"]) == KEY_VIRUS
        assert KEY_HIV != KEY_VIRUS

    def test_byte_extension_changes_key(self):
        assert fragment_key(bytes.fromhex("deadbeef")) == KEY_DEADBEEF
        assert fragment_key(bytes.fromhex("deadbeef00")) == KEY_DEADBEEF_00
        assert KEY_DEADBEEF != KEY_DEADBEEF_00

    def test_cross_process_determinism(self):
        # the same payload must hash identically in an independent process
        code = (
            "from cloudsplit.model import fragment_key;"
            "print(fragment_key(['Virus','HIV','virus']))"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, check=True
        )
        assert out.stdout.strip() == KEY_HIV_VIRUS

    @given(st.lists(st.text(max_size=8), max_size=6))
    def test_key_matches_direct_hash_of_canonical_bytes(self, terms):
        assert (
            fragment_key(terms)
            == hashlib.sha256(canonicalize(terms)).hexdigest()
        )


class TestFragment:
    def test_term_set_self_verifies(self):
        frag = Fragment.term_set(["Virus", "HIV", "virus"])
        assert frag.key == KEY_HIV_VIRUS
        assert frag.payload == ("hiv", "virus")
        assert frag.verify()

    def test_byte_block_self_verifies(self):
        frag = Fragment.byte_block(b"\xde\xad\xbe\xef")
        assert frag.key == KEY_DEADBEEF
        assert frag.verify()

    def test_empty_term_set_key(self):
        assert Fragment.term_set([]).key == KEY_EMPTY

    def test_from_stored_preserves_tampering(self):
        frag = Fragment.term_set(["hiv", "virus"])
        tampered = Fragment.from_stored(
            frag.key, FragmentKind.TERM_SET, b"HIV\nvirus", frag.sensitivity
        )
        assert not tampered.verify()
        assert tampered.payload_bytes == b"HIV\nvirus"

    def test_from_stored_invalid_utf8_round_trips(self):
        raw = b"\xff\xfe weird"
        frag = Fragment.from_stored(
            "00", FragmentKind.TERM_SET, raw, Sensitivity.QUASI_IDENTIFIER
        )
        assert frag.payload_bytes == raw

    @given(st.lists(st.text(min_size=1, max_size=10), min_size=1, max_size=8))
    def test_canonical_idempotence(self, terms):
        once = canonical_terms(terms)
        assert canonical_terms(once) == once
        frag = Fragment.term_set(terms)
        assert Fragment.term_set(frag.payload).key == frag.key

    @given(
        st.lists(st.sampled_from(["HIV", "hiv", "Virus", "virus", "Flu"]),
                 min_size=1, max_size=6),
        st.randoms(),
    )
    def test_key_invariant_under_shuffle(self, terms, rng):
        shuffled = list(terms)
        rng.shuffle(shuffled)
        assert fragment_key(terms) == fragment_key(shuffled)


class TestCspDescriptor:
    def test_trust_follows_tier(self):
        assert CspDescriptor("a", Tier.PRIVATE).trust is Trust.TRUSTED
        assert CspDescriptor("b", Tier.PUBLIC).trust is Trust.SEMI_HONEST

    def test_rejects_bad_ids(self):
        with pytest.raises(ValueError):
            CspDescriptor("has/slash", Tier.PUBLIC)
        with pytest.raises(ValueError):
            CspDescriptor("", Tier.PUBLIC)


class TestLocations:
    def test_split_location(self):
        assert split_location("pcsp/abcd") == ("pcsp", "abcd")

    def test_table_rejects_ragged_rows(self):
        with pytest.raises(ValueError):
            LocationTable("o", ("a", "b"), [LocationEntry("k", (None,))])


class TestCaseTransforms:
    @pytest.mark.parametrize(
        "surface,canonical,tag",
        [
            ("virus", "virus", "exact"),
            ("Virus", "virus", "capitalize"),
            ("VIRUS", "virus", "upper"),
            ("Immune System", "immune system", "title"),
        ],
    )
    def test_round_trip_via_tag(self, surface, canonical, tag):
        got_tag, fallback = infer_case(surface, canonical)
        assert got_tag == tag and fallback is None
        assert apply_case(canonical, got_tag, fallback) == surface

    def test_fallback_to_surface(self):
        tag, fallback = infer_case("ViRuS", "virus")
        assert tag == "surface" and fallback == "ViRuS"
        assert apply_case("virus", tag, fallback) == "ViRuS"


class TestManifest:
    def _manifest(self):
        return DocumentManifest(
            object_id="obj",
            mode="semantic",
            segments=(
                TextSegment("The "),
                FragmentRef(0, 0, "capitalize"),
                TextSegment(" spread; "),
                LocalRef(0, "upper"),
                TextSegment(" was involved."),
            ),
            local_identifiers=("hiv",),
        )

    def test_reassemble_semantic(self):
        frag = Fragment.term_set(["virus"])
        data = reassemble(self._manifest(), {0: frag})
        assert data == "The Virus spread; HIV was involved.".encode()

    def test_reassemble_bytes_mode(self):
        manifest = DocumentManifest(
            "obj", "bytes", (FragmentRef(0), FragmentRef(1))
        )
        frags = {0: Fragment.byte_block(b"ab"), 1: Fragment.byte_block(b"cd")}
        assert reassemble(manifest, frags) == b"abcd"

    def test_dropped_segment_raises(self):
        manifest = DocumentManifest("obj", "bytes", (DroppedRef(),))
        with pytest.raises(Unrecoverable):
            reassemble(manifest, {})

    def test_missing_term_index_raises(self):
        manifest = DocumentManifest(
            "obj", "semantic", (FragmentRef(0, 5),), ()
        )
        with pytest.raises(Unrecoverable):
            reassemble(manifest, {0: Fragment.term_set(["only"])})

    def test_json_round_trip(self):
        manifest = self._manifest()
        data = manifest_to_dict(manifest)
        assert manifest_from_dict(data) == manifest

    def test_table_json_round_trip(self):
        table = LocationTable(
            "obj", ("a", "b"),
            [LocationEntry("k1", ("a/k1", None)), LocationEntry("k2", (None, "b/k2"))],
        )
        assert table_from_dict(table_to_dict(table)) == table


class TestRefCountIndex:
    def test_add_remove(self):
        idx = RefCountIndex()
        idx.add("k", "a")
        idx.add("k", "b")
        assert idx.objects_for("k") == frozenset({"a", "b"})
        idx.remove("k", "a")
        assert idx.objects_for("k") == frozenset({"b"})
        idx.remove("k", "b")
        assert idx.objects_for("k") == frozenset()

    def test_rebuild_matches_incremental(self):
        tables = [
            LocationTable("a", ("x",), [LocationEntry("k1", ("x/k1",))]),
            LocationTable("b", ("x",), [LocationEntry("k1", ("x/k1",)),
                                        LocationEntry("k2", ("x/k2",))]),
        ]
        rebuilt = RefCountIndex.rebuild(tables)
        manual = RefCountIndex()
        manual.add("k1", "a")
        manual.add("k1", "b")
        manual.add("k2", "b")
        assert rebuilt == manual
