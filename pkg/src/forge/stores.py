"""Filesystem layout and event-sourced stores under one output root.

Everything an API response or CLI report needs is reconstructible from the
JSONL files here; state changes are appends, never rewrites.
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .corpus import Sample, ScreeningGroup, SourceSpec
from .ingest import load_registry, read_samples
from .stage import append_jsonl, load_jsonl

log = logging.getLogger(__name__)

LABEL_GOOD = "good"
LABEL_BAD = "bad"


@dataclass(frozen=True, slots=True)
class LabelRecord:
    """One human event: a good/bad call on a sample, or a screening-group call.

    Exactly one of label/group is set. Group events target a source; the
    sample_id field carries the source_id for those.
    """

    sample_id: str
    rater_id: str
    label: str | None = None
    group: str | None = None
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if (self.label is None) == (self.group is None):
            raise ValueError("exactly one of label/group must be set")
        if self.label is not None and self.label not in (LABEL_GOOD, LABEL_BAD):
            raise ValueError(f"label must be good/bad, got {self.label!r}")
        if self.group is not None:
            ScreeningGroup(self.group)  # raises on anything but A/B/C


class PipelineStore:
    """Paths and readers for one run's artifacts."""

    def __init__(self, output_root: Path | str) -> None:
        self.root = Path(output_root)

    # -- layout --
    @property
    def originals_dir(self) -> Path:
        return self.root / "samples" / "original"

    @property
    def rewritten_path(self) -> Path:
        return self.root / "samples" / "rewritten" / "rewritten.jsonl"

    @property
    def kept_path(self) -> Path:
        return self.root / "samples" / "kept" / "kept.jsonl"

    @property
    def screening_dir(self) -> Path:
        return self.root / "screening"

    @property
    def verdicts_path(self) -> Path:
        return self.root / "verdicts" / "verdicts.jsonl"

    @property
    def scores_path(self) -> Path:
        return self.root / "scores" / "scores.jsonl"

    @property
    def labels_path(self) -> Path:
        return self.root / "labels" / "labels.jsonl"

    @property
    def manifests_dir(self) -> Path:
        return self.root / "manifests"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    def original_path(self, source_id: str) -> Path:
        return self.originals_dir / f"{source_id}.jsonl"

    # -- samples --
    def iter_originals(self) -> Iterator[Sample]:
        if self.originals_dir.is_dir():
            for path in sorted(self.originals_dir.glob("*.jsonl")):
                yield from read_samples(path)

    def iter_rewritten(self) -> Iterator[Sample]:
        if self.rewritten_path.exists():
            yield from read_samples(self.rewritten_path)

    def iter_kept(self) -> Iterator[Sample]:
        if self.kept_path.exists():
            yield from read_samples(self.kept_path)

    def load_all_samples(self) -> dict[str, Sample]:
        store: dict[str, Sample] = {}
        for sample in self.iter_originals():
            store[sample.id] = sample
        for sample in self.iter_rewritten():
            store[sample.id] = sample
        return store

    def children_index(self) -> dict[str, list[Sample]]:
        children: dict[str, list[Sample]] = defaultdict(list)
        for sample in self.iter_rewritten():
            if sample.parent_id:
                children[sample.parent_id].append(sample)
        return children

    # -- stage records --
    def verdict_records(self) -> list[dict[str, Any]]:
        return load_jsonl(self.verdicts_path, tolerate_partial_tail=True)

    def score_records(self) -> list[dict[str, Any]]:
        return load_jsonl(self.scores_path, tolerate_partial_tail=True)

    # -- labels / groups (append-only event store) --
    def label_records(self) -> list[LabelRecord]:
        records = []
        for payload in load_jsonl(self.labels_path, tolerate_partial_tail=True):
            records.append(
                LabelRecord(
                    sample_id=payload["sample_id"],
                    rater_id=payload["rater_id"],
                    label=payload.get("label"),
                    group=payload.get("group"),
                    timestamp=payload.get("timestamp", 0.0),
                )
            )
        return records

    def append_label(self, record: LabelRecord) -> None:
        self.labels_path.parent.mkdir(parents=True, exist_ok=True)
        payload: dict[str, Any] = {
            "sample_id": record.sample_id,
            "rater_id": record.rater_id,
            "timestamp": record.timestamp or time.time(),
        }
        if record.label is not None:
            payload["label"] = record.label
        if record.group is not None:
            payload["group"] = record.group
        append_jsonl(self.labels_path, payload)

    def human_labels(self) -> dict[str, dict[str, str]]:
        """rater_id -> {sample_id -> label}, last write wins per (sample, rater)."""
        labels: dict[str, dict[str, str]] = defaultdict(dict)
        for record in self.label_records():
            if record.label is not None:
                labels[record.rater_id][record.sample_id] = record.label
        return dict(labels)

    def group_events(self) -> dict[str, ScreeningGroup]:
        """source_id -> group, last write wins."""
        groups: dict[str, ScreeningGroup] = {}
        for record in self.label_records():
            if record.group is not None:
                groups[record.sample_id] = ScreeningGroup(record.group)
        return groups

    def effective_groups(self, registry: list[SourceSpec]) -> dict[str, ScreeningGroup | None]:
        """Registry groups overridden by recorded screening events."""
        effective: dict[str, ScreeningGroup | None] = {
            spec.source_id: spec.group for spec in registry
        }
        for source_id, group in self.group_events().items():
            if source_id in effective:
                effective[source_id] = group
        return effective


def load_registry_for(store: PipelineStore, registry_path: Path | str) -> list[SourceSpec]:
    return load_registry(registry_path)
