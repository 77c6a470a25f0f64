"""File-backed workspace: provider stores, proxy metadata, and a lock.

Layout under the workspace root:

    .lock                      held for the duration of an invocation
    csps/registry.json         provider ordering (index 0 = primary)
    csps/<id>/...              one directory per provider (see csp module)
    proxy/tables.json          location tables, schema-versioned
    proxy/manifests/<id>.json  one manifest per object
    proxy/local_store/<key>    identifier fragments kept at the proxy

Everything round-trips bit-exact, so scenarios can be inspected and
tampered with on disk between invocations.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from .csp import CspStore
from .errors import UnknownCsp, WorkspaceLocked
from .model import (
    CspDescriptor,
    Fragment,
    FragmentKind,
    Sensitivity,
    Tier,
    manifest_from_dict,
    manifest_to_dict,
    table_from_dict,
    table_to_dict,
)
from .proxy import Proxy

SCHEMA = 1


class Workspace:
    def __init__(self, root: Path | str):
        self.root = Path(root)

    @property
    def csps_dir(self) -> Path:
        return self.root / "csps"

    @property
    def registry_path(self) -> Path:
        return self.csps_dir / "registry.json"

    @property
    def proxy_dir(self) -> Path:
        return self.root / "proxy"

    @property
    def tables_path(self) -> Path:
        return self.proxy_dir / "tables.json"

    @property
    def manifests_dir(self) -> Path:
        return self.proxy_dir / "manifests"

    @property
    def local_store_dir(self) -> Path:
        return self.proxy_dir / "local_store"

    def ensure_layout(self) -> None:
        self.csps_dir.mkdir(parents=True, exist_ok=True)
        self.manifests_dir.mkdir(parents=True, exist_ok=True)
        self.local_store_dir.mkdir(parents=True, exist_ok=True)

    @contextmanager
    def lock(self) -> Iterator[None]:
        """Exclusive advisory lock; a stale lock must be removed by hand."""
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / ".lock"
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLocked(
                f"{path} exists; another invocation is running (or crashed)"
            ) from None
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield
        finally:
            path.unlink(missing_ok=True)

    # -- registry ------------------------------------------------------------

    def csp_order(self) -> list[str]:
        if not self.registry_path.exists():
            return []
        data = json.loads(self.registry_path.read_text())
        return list(data["order"])

    def _write_registry(self, order: list[str]) -> None:
        self.ensure_layout()
        self.registry_path.write_text(
            json.dumps({"schema": SCHEMA, "order": order}, indent=2)
        )

    def add_csp(self, csp_id: str, tier: Tier) -> CspStore:
        order = self.csp_order()
        if csp_id in order:
            raise ValueError(f"provider {csp_id} already registered")
        store = CspStore(CspDescriptor(csp_id, tier))
        store.save(self.csps_dir)
        self._write_registry(order + [csp_id])
        return store

    # -- proxy state -----------------------------------------------------------

    def load_proxy(self) -> Proxy:
        stores = []
        for csp_id in self.csp_order():
            if not (self.csps_dir / csp_id / "meta.json").exists():
                raise UnknownCsp(f"registry lists {csp_id} but its store is missing")
            stores.append(CspStore.load(self.csps_dir, csp_id))
        proxy = Proxy(stores)

        if self.tables_path.exists():
            data = json.loads(self.tables_path.read_text())
            if data.get("schema") != SCHEMA:
                raise ValueError(f"unsupported tables schema: {data.get('schema')}")
            for table_data in data["tables"]:
                table = table_from_dict(table_data)
                proxy.tables[table.object_id] = table
                for row in table.rows:
                    proxy.refcounts.add(row.fragment_key, table.object_id)

        if self.manifests_dir.exists():
            for path in sorted(self.manifests_dir.glob("*.json")):
                data = json.loads(path.read_text())
                manifest = manifest_from_dict(data["manifest"])
                proxy.manifests[manifest.object_id] = manifest

        if self.local_store_dir.exists():
            for path in sorted(self.local_store_dir.iterdir()):
                fragment = Fragment.from_stored(
                    path.name,
                    FragmentKind.TERM_SET,
                    path.read_bytes(),
                    Sensitivity.IDENTIFIER,
                )
                proxy.local_store[fragment.key] = fragment
        return proxy

    def save_proxy(self, proxy: Proxy) -> None:
        self.ensure_layout()
        for store in proxy.csps:
            store.save(self.csps_dir)
        self._write_registry(list(proxy.csp_ids))

        tables = {
            "schema": SCHEMA,
            "tables": [table_to_dict(t) for t in proxy.tables.values()],
        }
        self.tables_path.write_text(json.dumps(tables, indent=2, sort_keys=True))

        live = set()
        for object_id, manifest in proxy.manifests.items():
            live.add(f"{object_id}.json")
            (self.manifests_dir / f"{object_id}.json").write_text(
                json.dumps(
                    {"schema": SCHEMA, "manifest": manifest_to_dict(manifest)},
                    indent=2,
                )
            )
        for path in self.manifests_dir.glob("*.json"):
            if path.name not in live:
                path.unlink()

        live_keys = set(proxy.local_store)
        for key, fragment in proxy.local_store.items():
            (self.local_store_dir / key).write_bytes(fragment.payload_bytes)
        for path in self.local_store_dir.iterdir():
            if path.name not in live_keys:
                path.unlink()

    def next_object_id(self, proxy: Proxy, content: bytes, mode: str) -> str:
        import hashlib

        base = hashlib.sha256(mode.encode() + b"\x00" + content).hexdigest()[:12]
        if base not in proxy.tables:
            return base
        n = 2
        while f"{base}-{n}" in proxy.tables:
            n += 1
        return f"{base}-{n}"
