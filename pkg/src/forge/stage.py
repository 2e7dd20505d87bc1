"""Resumable stage execution: append-only logs, manifests, and deterministic replay.

A stage appends one JSON record per processed item to its log (flushed per
line, so a kill leaves at most one partial trailing line, which is dropped on
load). The manifest {stage, input_hash, done_ids} guards resumption: if the
input hash changed, the stage restarts from scratch. Final outputs are always
re-derived from the log in input order, which makes an interrupted-and-resumed
run byte-identical to an uninterrupted one.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .inference import ordered_parallel_map

log = logging.getLogger(__name__)

MANIFEST_FLUSH_EVERY = 25


def file_sha256(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def append_jsonl(path: Path | str, record: dict[str, Any]) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
        fh.write("\n")
        fh.flush()


def load_jsonl(path: Path | str, tolerate_partial_tail: bool = False) -> list[dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        return []
    records: list[dict[str, Any]] = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    for index, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if tolerate_partial_tail and index == len(lines) - 1:
                log.warning("dropping partial trailing line in %s", path)
                break
            raise
    return records


def write_jsonl(path: Path | str, records: Iterable[dict[str, Any]]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count


@dataclass(slots=True)
class StageManifest:
    stage: str
    input_hash: str
    done_ids: list[str] = field(default_factory=list)

    def save(self, path: Path | str) -> None:
        payload = {
            "stage": self.stage,
            "input_hash": self.input_hash,
            "done_ids": sorted(self.done_ids),
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: Path | str) -> "StageManifest | None":
        path = Path(path)
        if not path.exists():
            return None
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            return cls(
                stage=payload["stage"],
                input_hash=payload["input_hash"],
                done_ids=list(payload.get("done_ids", [])),
            )
        except (json.JSONDecodeError, KeyError, TypeError):
            log.warning("unreadable stage manifest %s; stage will restart", path)
            return None


def run_stage(
    *,
    stage: str,
    input_hash: str,
    items: list[tuple[str, Any]],
    process: Callable[[Any], dict[str, Any]],
    log_path: Path | str,
    manifest_path: Path | str,
    max_workers: int = 4,
    key_field: str = "key",
) -> list[dict[str, Any]]:
    """Process items not yet in the log, appending records as they complete.

    `process` must return a JSON-serializable record for its item and never
    raise for per-item failures (those belong inside the record); anything it
    does raise is treated as a crash and propagates after the log is left in a
    consistent, resumable state. Returns all records in input order.
    """
    log_path, manifest_path = Path(log_path), Path(manifest_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)

    manifest = StageManifest.load(manifest_path)
    records_by_key: dict[str, dict[str, Any]] = {}
    if manifest is not None and manifest.stage == stage and manifest.input_hash == input_hash:
        for record in load_jsonl(log_path, tolerate_partial_tail=True):
            key = record.get(key_field)
            if key is not None and key not in records_by_key:
                records_by_key[key] = record
    else:
        if manifest is not None:
            log.warning("stage %s input changed; restarting", stage)
        if log_path.exists():
            log_path.unlink()
        manifest = None

    keys = [key for key, _ in items]
    unknown = set(records_by_key) - set(keys)
    if unknown:
        log.warning("stage %s log has %d records for unknown keys; ignored", stage, len(unknown))

    pending = [(key, item) for key, item in items if key not in records_by_key]
    progress = 0
    for (key, _item), future in ordered_parallel_map(pending, lambda ki: process(ki[1]),
                                                     max_workers):
        record = future.result()  # crash here propagates; log stays consistent
        record[key_field] = record.get(key_field, key)
        append_jsonl(log_path, record)
        records_by_key[key] = record
        progress += 1
        if progress % MANIFEST_FLUSH_EVERY == 0:
            StageManifest(stage, input_hash, list(records_by_key)).save(manifest_path)

    StageManifest(stage, input_hash, list(records_by_key)).save(manifest_path)
    return [records_by_key[key] for key in keys]
