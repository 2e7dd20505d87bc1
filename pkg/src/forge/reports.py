"""Canonical report builders shared verbatim by the CLI and the review API.

Each report is a plain dict rendered through `canonical_json_bytes`, which is
the single serialization path: `forge report` output and the corresponding API
response are byte-identical for the same store.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .analytics import (
    AgreementMatrix,
    aggregate_scores,
    length_histogram,
    substitution_analysis,
    token_length,
)
from .corpus import SourceSpec
from .filtering import rate_rows_to_json, rates_from_verdicts
from .parse import Verdict
from .stores import LABEL_BAD, LABEL_GOOD, PipelineStore

MODEL_RATER_ID = "model"

# Judge verdicts enter agreement analysis as a rater using the human vocabulary.
_VERDICT_TO_LABEL = {Verdict.KEEP.value: LABEL_GOOD, Verdict.DISCARD.value: LABEL_BAD}


def canonical_json_bytes(payload: Any) -> bytes:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def filter_rate_report(store: PipelineStore) -> dict[str, Any]:
    category_by_id = {s.id: s.category.value for s in store.iter_rewritten()}
    rows = rates_from_verdicts(store.verdict_records(), category_by_id)
    return {"kind": "filter_rates", "rows": rate_rows_to_json(rows)}


def _labels_with_model(store: PipelineStore) -> dict[str, dict[str, str]]:
    labels = store.human_labels()
    model_labels = {
        record["sample_id"]: _VERDICT_TO_LABEL[record["verdict"]]
        for record in store.verdict_records()
        if record["verdict"] in _VERDICT_TO_LABEL
    }
    if model_labels:
        labels[MODEL_RATER_ID] = model_labels
    return labels


def agreement_report(store: PipelineStore, min_overlap: int = 2) -> dict[str, Any]:
    """Pairwise kappa matrix over human raters plus the judge, and both means.

    Means are present only when the matrix covers the model and at least two
    humans with enough shared items; otherwise a reason is reported.
    """
    labels = _labels_with_model(store)
    matrix = AgreementMatrix.from_labels(labels, min_overlap=min_overlap)
    humans = [r for r in matrix.raters if r != MODEL_RATER_ID]
    report: dict[str, Any] = {
        "kind": "agreement",
        "raters": matrix.raters,
        "pairs": matrix.to_rows(),
        "items_per_rater": {r: len(items) for r, items in sorted(labels.items())},
        "human_mean": None,
        "substituted_mean": None,
    }
    try:
        analysis = substitution_analysis(matrix, MODEL_RATER_ID, humans)
    except (ValueError, KeyError) as exc:
        report["reason"] = str(exc)
        return report
    report["human_mean"] = analysis["human_mean"]
    report["substituted_mean"] = analysis["substituted_mean"]
    report["per_combination"] = analysis["per_combination"]
    return report


def length_report(
    store: PipelineStore, bucket_width: int = 50, tokenizer_tag: str = "whitespace"
) -> dict[str, Any]:
    """Token-length histograms for original vs rewritten pools."""
    histograms: dict[str, Any] = {}
    for name, samples in (
        ("original", store.iter_originals()),
        ("rewritten", store.iter_rewritten()),
    ):
        lengths = [token_length(s, tokenizer_tag) for s in samples]
        histograms[name] = {
            "count": len(lengths),
            "mean": (sum(lengths) / len(lengths)) if lengths else None,
            "histogram": [[start, count] for start, count
                          in length_histogram(lengths, bucket_width)],
        }
    return {
        "kind": "token_lengths",
        "tokenizer": tokenizer_tag,
        "bucket_width": bucket_width,
        "pools": histograms,
    }


def score_report(store: PipelineStore) -> dict[str, Any]:
    return {"kind": "scores", **aggregate_scores(store.score_records())}


def sources_report(store: PipelineStore, registry: list[SourceSpec]) -> list[dict[str, Any]]:
    groups = store.effective_groups(registry)
    return [
        {
            "source_id": spec.source_id,
            "display_name": spec.display_name,
            "root_path": spec.root_path,
            "format_tag": spec.format_tag,
            "category": spec.category.value,
            "group": groups[spec.source_id].value if groups[spec.source_id] else None,
        }
        for spec in registry
    ]


REPORT_BUILDERS = {
    "filter-rates": filter_rate_report,
    "agreement": agreement_report,
    "lengths": length_report,
    "scores": score_report,
}


def build_report(kind: str, store: PipelineStore) -> dict[str, Any]:
    try:
        builder = REPORT_BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown report kind {kind!r}") from None
    return builder(store)


def write_report(kind: str, store: PipelineStore, path: Path | str | None = None) -> Path:
    path = Path(path) if path else store.reports_dir / f"{kind.replace('-', '_')}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(canonical_json_bytes(build_report(kind, store)) + b"\n")
    return path
