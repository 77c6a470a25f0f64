"""Command-line entry point.

Subcommands: outsource, retrieve, update, delete, bench, and csp-admin
{add | seed | delete | corrupt | offline}. All state lives in a workspace
directory so multi-step scenarios can be driven and inspected from the
shell. Structured output goes to stdout as JSON with --json; errors are
always machine-readable JSON on stderr with a distinct exit code per error
class.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from .allocate import Strategy
from .bench import bundled_corpus_dir, ingest_corpus, run_benchmark, seed_term_db
from .csp import CORRUPTED, Fault
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
from .model import Tier, split_location
from .proxy import StorePolicy, UpdateApproach
from .risk import CorpusStats, PrivacyPolicy, within_cap
from .splitter import SemanticSplitter, split_byte_document
from .workspace import Workspace

EXIT_CODES: dict[type, int] = {
    PcspUnreachable: 10,
    UnknownObject: 11,
    Unrecoverable: 12,
    NoNewPcsp: 13,
    SharedFragment: 14,
    PolicyViolation: 15,
    BadRow: 16,
    UnknownLocation: 17,
    SelfCheckFailed: 18,
    EmptyCspList: 19,
    DegenerateEntity: 20,
    EmptyCorpus: 21,
    UnplaceableTerm: 22,
    WorkspaceLocked: 23,
    UnknownCsp: 24,
    CspUnreachable: 25,
}


def _exit_code(exc: CloudSplitError) -> int:
    return EXIT_CODES.get(type(exc), 1)


def load_policy_file(path: Path) -> tuple[PrivacyPolicy, Strategy | None, StorePolicy | None]:
    data = json.loads(Path(path).read_text())
    policy = PrivacyPolicy(
        frozenset(data["protected"]), float(data.get("risk_cap", 1.0))
    )
    strategy = Strategy(data["strategy"]) if "strategy" in data else None
    store_policy = StorePolicy(data["store_policy"]) if "store_policy" in data else None
    return policy, strategy, store_policy


def _emit(args: argparse.Namespace, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(text)


def _load_corpus(args: argparse.Namespace) -> tuple[list[str], CorpusStats]:
    corpus_dir = Path(args.corpus) if args.corpus else bundled_corpus_dir()
    return ingest_corpus(corpus_dir)


# --------------------------------------------------------------------------
# subcommand implementations
# --------------------------------------------------------------------------

def cmd_outsource(args: argparse.Namespace, ws: Workspace) -> int:
    proxy = ws.load_proxy()
    if not proxy.csp_ids:
        raise EmptyCspList("register providers with 'csp-admin add' first")
    content = Path(args.file).read_bytes()
    object_id = ws.next_object_id(proxy, content, args.mode)

    if args.mode == "bytes":
        store_policy = StorePolicy(args.store_policy or "pcsp-if-missing")
        before = sum(s.stats.stores for s in proxy.csps)
        table = split_byte_document(
            proxy, object_id, content,
            chunk_size=args.chunk, store_policy=store_policy,
            source_name=Path(args.file).name,
        )
        stored = sum(s.stats.stores for s in proxy.csps) - before
        ws.save_proxy(proxy)
        payload = {
            "object_id": object_id,
            "mode": "bytes",
            "rows": len(table.rows),
            "stored": stored,
        }
        _emit(args, payload, f"{object_id}  rows={len(table.rows)} stored={stored}")
        return 0

    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        raise PolicyViolation(
            "input is not UTF-8 text; use --mode bytes for binary data"
        ) from None
    policy, file_strategy, file_store_policy = load_policy_file(Path(args.policy))
    strategy = Strategy(args.strategy) if args.strategy else (file_strategy or Strategy.UNORDERED)
    store_policy = (
        StorePolicy(args.store_policy)
        if args.store_policy
        else (file_store_policy or StorePolicy.SKIP_IF_ANY_FOUND)
    )
    _, stats = _load_corpus(args)
    splitter = SemanticSplitter(proxy, stats)
    plan = splitter.split(
        object_id, text, policy,
        strategy=strategy, store_policy=store_policy,
        source_name=Path(args.file).name,
    )
    ws.save_proxy(proxy)
    plan_dir = ws.proxy_dir / "plans"
    plan_dir.mkdir(parents=True, exist_ok=True)
    (plan_dir / f"{object_id}.json").write_text(
        json.dumps({"schema": 1, "plan": plan.to_dict()}, indent=2)
    )
    m = plan.metrics
    payload = {"object_id": object_id, "mode": "semantic", **plan.to_dict()["metrics"]}
    _emit(
        args,
        payload,
        f"{object_id}  fragments={m.fragments} stored={m.store_calls} "
        f"third_party={m.third_party} identifiers={m.identifiers} "
        f"quasi={m.quasi_allocated}",
    )
    return 0


def cmd_retrieve(args: argparse.Namespace, ws: Workspace) -> int:
    proxy = ws.load_proxy()
    result = proxy.retrieve(args.object_id, new_pcsp=args.new_pcsp)
    out_path = Path(args.out) if args.out else Path(f"{args.object_id}.out")
    out_path.write_bytes(result.data)
    ws.save_proxy(proxy)
    payload = {
        "object_id": args.object_id,
        "out": str(out_path),
        "bytes": len(result.data),
        "repairs": [
            {
                "row": r.row,
                "fragment_key": r.fragment_key,
                "old_location": r.old_location,
                "new_location": r.new_location,
            }
            for r in result.repairs
        ],
    }
    _emit(
        args, payload,
        f"wrote {len(result.data)} bytes to {out_path} ({len(result.repairs)} repairs)",
    )
    return 0


def cmd_update(args: argparse.Namespace, ws: Workspace) -> int:
    proxy = ws.load_proxy()
    if args.payload_file:
        payload: bytes | list[str] = Path(args.payload_file).read_bytes()
    elif args.term:
        payload = list(args.term)
    else:
        raise PolicyViolation("update needs --term ... or --payload-file")

    validator = None
    if args.policy:
        policy, _, _ = load_policy_file(Path(args.policy))
        _, stats = _load_corpus(args)
        validator = lambda frag: within_cap(frag.terms, policy, stats)

    row = proxy.update_fragment(
        args.object_id, args.row, payload,
        UpdateApproach(args.approach), validator=validator,
    )
    ws.save_proxy(proxy)
    _emit(
        args,
        {"object_id": args.object_id, "row": args.row,
         "fragment_key": row.fragment_key, "slots": list(row.slots)},
        f"row {args.row} -> {row.fragment_key[:12]} slot0={row.slots[0]}",
    )
    return 0


def cmd_delete(args: argparse.Namespace, ws: Workspace) -> int:
    proxy = ws.load_proxy()
    conflicts = proxy.delete_fragment(args.object_id, args.row)
    ws.save_proxy(proxy)
    _emit(
        args,
        {"object_id": args.object_id, "row": args.row,
         "conflicts": sorted(conflicts)},
        f"deleted row {args.row}; conflicted objects: {sorted(conflicts) or 'none'}",
    )
    return 0


def cmd_bench(args: argparse.Namespace, ws: Workspace) -> int:
    policy, file_strategy, _ = load_policy_file(Path(args.policy))
    strategies = (
        [Strategy(s) for s in args.strategy]
        if args.strategy
        else [file_strategy or Strategy.UNORDERED]
    )
    coverages = [float(c) for c in (args.coverage or ["0.5"])]
    paragraphs, stats = _load_corpus(args)
    report = run_benchmark(
        paragraphs, stats, policy,
        strategies=strategies, coverages=coverages,
        seed=args.seed, peer_count=args.peers,
    )
    out_dir = Path(args.out) if args.out else ws.root / "bench"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json())
    (out_dir / "report.txt").write_text(report.render_text() + "\n")
    if args.json:
        print(report.to_json())
    else:
        print(report.render_text())
        print(f"reports written to {out_dir}")
    return 0


def cmd_csp_admin(args: argparse.Namespace, ws: Workspace) -> int:
    action = args.action
    if action == "add":
        ws.ensure_layout()
        ws.add_csp(args.csp_id, Tier(args.tier))
        _emit(args, {"added": args.csp_id, "tier": args.tier},
              f"registered provider {args.csp_id} ({args.tier})")
        return 0

    proxy = ws.load_proxy()
    if action == "seed":
        store = proxy.csp(args.csp_id)
        terms = list(args.term or [])
        if args.terms_file:
            terms.extend(
                line.strip()
                for line in Path(args.terms_file).read_text().splitlines()
                if line.strip()
            )
        seed_term_db(terms, [store])
        ws.save_proxy(proxy)
        _emit(args, {"seeded": len(terms), "csp": args.csp_id},
              f"seeded {len(terms)} terms into {args.csp_id}")
        return 0
    if action == "delete":
        csp_id, _ = split_location(args.location)
        removed = proxy.csp(csp_id).delete(args.location)
        ws.save_proxy(proxy)
        _emit(args, {"deleted": removed, "location": args.location},
              f"{'deleted' if removed else 'no fragment at'} {args.location}")
        return 0
    if action == "corrupt":
        csp_id, _ = split_location(args.location)
        proxy.csp(csp_id).inject_fault(
            args.location, Fault(CORRUPTED, args.position)
        )
        ws.save_proxy(proxy)
        _emit(args, {"corrupted": args.location, "position": args.position},
              f"corrupted {args.location} at byte {args.position}")
        return 0
    if action == "offline":
        store = proxy.csp(args.csp_id)
        store.reachable = bool(args.restore)
        ws.save_proxy(proxy)
        state = "reachable" if store.reachable else "offline"
        _emit(args, {"csp": args.csp_id, "state": state},
              f"{args.csp_id} is now {state}")
        return 0
    raise ValueError(f"unknown csp-admin action: {action}")


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloudsplit",
        description="Privacy-preserving data splitting over a simulated multi-cloud",
    )
    parser.add_argument("--workspace", "-w", default="workspace",
                        help="workspace directory (default: ./workspace)")
    parser.add_argument("--json", action="store_true",
                        help="structured JSON output on stdout")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for any randomized choice")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("outsource", help="split a document and outsource it")
    p.add_argument("file")
    p.add_argument("--policy", help="policy JSON (required for semantic mode)")
    p.add_argument("--mode", choices=["semantic", "bytes"], default="semantic")
    p.add_argument("--chunk", type=int, default=4096, help="byte-mode chunk size")
    p.add_argument("--strategy", choices=[s.value for s in Strategy])
    p.add_argument("--store-policy", choices=[s.value for s in StorePolicy])
    p.add_argument("--corpus", help="corpus directory for statistics "
                                    "(default: bundled corpus)")
    p.set_defaults(func=cmd_outsource)

    p = sub.add_parser("retrieve", help="rebuild a document, repairing conflicts")
    p.add_argument("object_id")
    p.add_argument("--out", help="output path (default: <object_id>.out)")
    p.add_argument("--new-pcsp", help="provider to host repaired fragments")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("update", help="replace one fragment's content")
    p.add_argument("object_id")
    p.add_argument("row", type=int)
    p.add_argument("--approach", choices=[a.value for a in UpdateApproach],
                   required=True)
    p.add_argument("--term", action="append", help="term payload (repeatable)")
    p.add_argument("--payload-file", help="byte payload file")
    p.add_argument("--policy", help="policy JSON to enforce on the new fragment")
    p.add_argument("--corpus", help="corpus directory for the policy check")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("delete", help="delete one fragment from its primary")
    p.add_argument("object_id")
    p.add_argument("row", type=int)
    p.set_defaults(func=cmd_delete)

    p = sub.add_parser("bench", help="compare baseline vs reuse framework")
    p.add_argument("--policy", required=True)
    p.add_argument("--corpus", help="corpus directory (default: bundled corpus)")
    p.add_argument("--coverage", action="append",
                   help="term-database coverage in [0,1] (repeatable)")
    p.add_argument("--strategy", action="append",
                   choices=[s.value for s in Strategy])
    p.add_argument("--peers", type=int, default=2,
                   help="secondary providers holding the term database")
    p.add_argument("--out", help="report directory (default: <workspace>/bench)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("csp-admin", help="manage simulated providers")
    admin = p.add_subparsers(dest="action", required=True)
    a = admin.add_parser("add")
    a.add_argument("csp_id")
    a.add_argument("--tier", choices=[t.value for t in Tier], default="public")
    a = admin.add_parser("seed")
    a.add_argument("csp_id")
    a.add_argument("--term", action="append")
    a.add_argument("--terms-file")
    a = admin.add_parser("delete")
    a.add_argument("location")
    a = admin.add_parser("corrupt")
    a.add_argument("location")
    a.add_argument("--position", type=int, default=0)
    a = admin.add_parser("offline")
    a.add_argument("csp_id")
    a.add_argument("--restore", action="store_true",
                   help="bring the provider back online")
    p.set_defaults(func=cmd_csp_admin)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    random.seed(args.seed)
    ws = Workspace(args.workspace)
    try:
        if args.command == "outsource" and args.mode == "semantic" and not args.policy:
            parser.error("outsource --mode semantic requires --policy")
        with ws.lock():
            return args.func(args, ws)
    except CloudSplitError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return _exit_code(exc)
    except (ValueError, OSError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


def main_entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
