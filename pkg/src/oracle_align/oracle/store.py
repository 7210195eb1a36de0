"""Append-only verdict log that doubles as a cache and as the source for replay."""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterator

from ..alignment import Mapping
from .base import OracleVerdict, ReplayMissError

CacheKey = tuple  # (template id, system id, source, target, relation, model)


def cache_key(template: str, system: str, mapping_key, model: str) -> CacheKey:
    return (template, system, *mapping_key, model)


class VerdictStore:
    """Verdicts keyed by template, system prompt, mapping and model.

    With a path, existing records are loaded on open and every ``put`` is
    appended and flushed immediately, so an aborted batch loses nothing.
    Reads may happen from any thread; writes are serialised.
    """

    def __init__(self, path=None, read_only: bool = False):
        self.path = Path(path) if path else None
        self.read_only = read_only
        self._entries: dict[CacheKey, OracleVerdict] = {}
        self._lock = threading.Lock()
        self._fh = None
        if self.path is not None and self.path.exists():
            for record in _read_records(self.path):
                self._entries[_record_key(record)] = OracleVerdict.from_record(record)

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key: CacheKey) -> bool:
        return key in self._entries

    def get(self, key: CacheKey) -> OracleVerdict | None:
        return self._entries.get(key)

    def put(self, key: CacheKey, verdict: OracleVerdict):
        if self.read_only:
            raise PermissionError("verdict store is read-only")
        record = verdict.to_record()
        record.update(template=key[0], system=key[1], model=key[-1])
        line = json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock:
            self._entries[key] = verdict
            if self.path is not None:
                if self._fh is None:
                    self.path.parent.mkdir(parents=True, exist_ok=True)
                    self._fh = open(self.path, "a", encoding="utf-8", newline="\n")
                self._fh.write(line)
                self._fh.flush()

    def compact(self):
        """Rewrite the log with one record per key in key order.

        Arrival order depends on thread scheduling; a sorted rewrite keeps
        finished logs byte-identical across runs.
        """
        if self.path is None or self.read_only:
            return
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
            tmp = self.path.with_name(self.path.name + ".tmp")
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                for key in sorted(self._entries, key=repr):
                    record = self._entries[key].to_record()
                    record.update(template=key[0], system=key[1], model=key[-1])
                    fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
            os.replace(tmp, self.path)

    def flush(self):
        with self._lock:
            if self._fh is not None:
                self._fh.flush()

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _record_key(record: dict) -> CacheKey:
    return cache_key(record["template"], record["system"], record["key"], record["model"])


def _read_records(path: Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad verdict record ({exc})") from None


class ReplayOracle:
    """Answers strictly from a recorded verdict log; never touches the network."""

    needs_prompt = False

    def __init__(self, log_path, identity: str, template: str = "-", system: str = "-", max_in_flight: int = 8):
        if not Path(log_path).exists():
            raise ReplayMissError(f"verdict log {log_path} does not exist")
        self.store = VerdictStore(log_path, read_only=True)
        self.identity = identity
        self.template = template
        self.system = system
        self.max_in_flight = max_in_flight

    def assess(self, mapping: Mapping, prompt=None) -> OracleVerdict:
        template = prompt.template.value if prompt is not None else self.template
        system = prompt.system.value if prompt is not None else self.system
        verdict = self.store.get(cache_key(template, system, mapping.key, self.identity))
        if verdict is None:
            raise ReplayMissError(f"no recorded verdict for {mapping.key} ({template}/{system}/{self.identity})")
        return verdict
