"""Model-as-judge filtering of rewritten samples and per-category filter-rate accounting."""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any

from .corpus import Provenance, Sample
from .inference import MULTIMODAL, ConfigError, EndpointClient, RequestFailed, build_request
from .parse import Verdict, parse_verdict
from .prompts import PromptTemplate, render
from .rewrite import media_paths, serialize_qa
from .stage import file_sha256, run_stage
from .ingest import read_samples, write_samples

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class JudgeVerdict:
    sample_id: str
    verdict: Verdict  # KEEP | DISCARD only; unparseable resolves to DISCARD
    raw_text: str
    attempts: int
    flagged: bool = False  # could not be verified (request failure); kept out, re-judgeable


def judge_sample(
    sample: Sample,
    client: EndpointClient,
    template: PromptTemplate,
    *,
    media_root: Path | str | None = None,
    temperature: float = 0.0,
) -> JudgeVerdict:
    """Ask the judge for a Yes/No on one rewritten sample.

    Unparseable verdicts get exactly one re-ask at temperature 0, then resolve
    to Discard; request failures fail closed (Discard, flagged).
    """
    if sample.provenance is not Provenance.REWRITTEN:
        raise ValueError("judging applies to rewritten samples")
    if client.cfg.kind != MULTIMODAL:
        raise ConfigError("judging requires a multimodal endpoint")
    prompt = render(template, {"qa_text": serialize_qa(sample)})
    request = build_request(
        prompt, MULTIMODAL, media_paths(sample, media_root), temperature=temperature
    )
    raw_text = ""
    for attempt in (1, 2):
        try:
            response = client.complete(request)
        except RequestFailed as exc:
            log.warning("judge call for %s failed; discarding flagged: %s", sample.id, exc)
            return JudgeVerdict(sample.id, Verdict.DISCARD, raw_text, attempt, flagged=True)
        raw_text = response.text
        verdict = parse_verdict(raw_text)
        if verdict is not Verdict.UNPARSEABLE:
            return JudgeVerdict(sample.id, verdict, raw_text, attempt)
        request = build_request(
            prompt, MULTIMODAL, media_paths(sample, media_root), temperature=0.0
        )
    log.info("unparseable verdict twice for %s; discarding", sample.id)
    return JudgeVerdict(sample.id, Verdict.DISCARD, raw_text, 2)


def run_judge_stage(
    input_path: Path | str,
    kept_path: Path | str,
    verdict_log_path: Path | str,
    client: EndpointClient,
    template: PromptTemplate,
    *,
    media_root: Path | str | None = None,
    temperature: float = 0.0,
    max_workers: int = 4,
) -> dict[str, int]:
    """Judge every rewritten sample; keep Yes verdicts. Returns {kept, discarded, flagged}."""
    input_path, kept_path = Path(input_path), Path(kept_path)
    verdict_log_path = Path(verdict_log_path)
    samples = list(read_samples(input_path))

    def process(sample: Sample) -> dict[str, Any]:
        verdict = judge_sample(
            sample, client, template, media_root=media_root, temperature=temperature
        )
        return {
            "sample_id": verdict.sample_id,
            "verdict": verdict.verdict.value,
            "attempts": verdict.attempts,
            "flagged": verdict.flagged,
        }

    records = run_stage(
        stage="judge",
        input_hash=file_sha256(input_path),
        items=[(s.id, s) for s in samples],
        process=process,
        log_path=verdict_log_path,
        manifest_path=verdict_log_path.with_suffix(".manifest.json"),
        max_workers=max_workers,
        key_field="sample_id",
    )

    verdict_by_id = {r["sample_id"]: r for r in records}
    kept = [s for s in samples if verdict_by_id[s.id]["verdict"] == Verdict.KEEP.value]
    write_samples(kept_path, kept)
    return {
        "kept": len(kept),
        "discarded": len(samples) - len(kept),
        "flagged": sum(1 for r in records if r["flagged"]),
    }


# --- filter-rate accounting ------------------------------------------------------

@dataclass(frozen=True, slots=True)
class FilterRateRow:
    category: str
    before: int
    after: int
    rate: float  # exact fraction filtered out, in [0, 1]
    pct: float  # percentage rounded half-up to one decimal

    def __post_init__(self) -> None:
        if self.before <= 0:
            raise ValueError("before count must be > 0")
        if not 0 <= self.after <= self.before:
            raise ValueError("after count must be in [0, before]")


def _round_pct(before: int, after: int) -> float:
    # Exact decimal arithmetic on the counts, so .X5 ties round half-up reliably.
    pct = Decimal(before - after) * 100 / Decimal(before)
    return float(pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def filter_rates(rows: Iterable[tuple[str, int, int]]) -> list[FilterRateRow]:
    """rate = 1 - after/before per category, reported as a one-decimal percentage."""
    out: list[FilterRateRow] = []
    for category, before, after in rows:
        if before <= 0:
            raise ValueError(f"category {category!r}: before count must be > 0")
        rate = 1.0 - after / before
        out.append(FilterRateRow(category, before, after, rate, _round_pct(before, after)))
    return out


def rates_from_verdicts(
    verdict_records: Iterable[Mapping[str, Any]],
    category_by_id: Mapping[str, str],
) -> list[FilterRateRow]:
    """Per-category before/after counts from a verdict log, plus a Total row."""
    before: Counter[str] = Counter()
    after: Counter[str] = Counter()
    for record in verdict_records:
        category = category_by_id.get(record["sample_id"], "Unknown")
        before[category] += 1
        if record["verdict"] == Verdict.KEEP.value:
            after[category] += 1
    rows = [(category, before[category], after[category]) for category in sorted(before)]
    if rows:
        rows.append(("Total", sum(before.values()), sum(after.values())))
    return filter_rates(rows)


def format_rate_table(rows: Iterable[FilterRateRow]) -> str:
    """Aligned-column text table of filter rates."""
    rows = list(rows)
    headers = ("Category", "Before", "After", "Filter Rate")
    cells = [
        (row.category, f"{row.before}", f"{row.after}", f"{row.pct:.1f}%") for row in rows
    ]
    widths = [
        max(len(headers[i]), *(len(c[i]) for c in cells)) if cells else len(headers[i])
        for i in range(4)
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * widths[i] for i in range(4)),
    ]
    for cell in cells:
        lines.append("  ".join(cell[i].ljust(widths[i]) for i in range(4)))
    return "\n".join(lines)


def rate_rows_to_json(rows: Iterable[FilterRateRow]) -> list[dict[str, Any]]:
    return [
        {
            "category": row.category,
            "before": row.before,
            "after": row.after,
            "rate": row.rate,
            "pct": row.pct,
        }
        for row in rows
    ]
