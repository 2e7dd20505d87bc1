"""Group-B rewriting: template selection, endpoint calls, parsing, lineage emission.

One original sample fans out to one rewritten sample per parsed pair (dialogue
parses become a single multi-turn sample). Category and media are inherited
unchanged; parent_id always points at the stage-input sample.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .corpus import (
    IMAGE_TOKEN,
    ROLE_ASSISTANT,
    ROLE_HUMAN,
    VIDEO_TOKEN,
    Provenance,
    Sample,
    Turn,
    is_video_ref,
    rewritten_sample_id,
    sample_from_record,
    sample_to_record,
)
from .inference import (
    MULTIMODAL,
    EndpointPool,
    RequestFailed,
    build_request,
)
from .ingest import read_samples, write_samples
from .parse import (
    KIND_DIALOGUE,
    KIND_PAIRS,
    KIND_REVISED,
    EmptyParse,
    ParsedRewrite,
    parse_angle_pairs,
    parse_dialogue,
    parse_hash_pairs,
    parse_revised_answer,
)
from .prompts import (
    PARSE_ANGLE_PAIRS,
    PARSE_DIALOGUE,
    PARSE_HASH_PAIRS,
    PARSE_REVISED_ANSWER,
    STAGE_REWRITE,
    NotRewritable,
    PromptTemplate,
    render,
    template_for,
)
from .stage import file_sha256, run_stage, write_jsonl

log = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_EMPTY_PARSE = "empty_parse"
STATUS_REQUEST_FAILED = "request_failed"
STATUS_SKIPPED = "skipped_not_rewritable"

DEFAULT_PAIR_NUM = 3

_MEDIA_TOKEN_RE = re.compile(r"(<image>|<video>)\s*")


class BindError(Exception):
    """Sample shape is incompatible with the template's slots."""


@dataclass(frozen=True, slots=True)
class RewriteOutcome:
    """Record of one rewrite call: raw text, parse result, and emitted lineage."""

    parent_id: str
    status: str
    raw_text: str = ""
    parsed: ParsedRewrite | None = None
    samples: tuple[Sample, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def emitted_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.samples)


def strip_media_tokens(text: str) -> str:
    return _MEDIA_TOKEN_RE.sub("", text).strip()


def media_paths(sample: Sample, media_root: Path | str | None) -> list[Path]:
    """Resolve image refs against the media root; video refs are never attached."""
    if media_root is None:
        return []
    root = Path(media_root)
    return [root / ref for ref in sample.media if not is_video_ref(ref)]


def qa_pairs(sample: Sample) -> list[tuple[str, str]]:
    """(question, answer) pairs from strictly alternating turns."""
    pairs: list[tuple[str, str]] = []
    turns = sample.turns
    for i in range(0, len(turns) - 1, 2):
        if turns[i].role == ROLE_HUMAN and turns[i + 1].role == ROLE_ASSISTANT:
            pairs.append(
                (strip_media_tokens(turns[i].text), strip_media_tokens(turns[i + 1].text))
            )
    return pairs


def serialize_qa(sample: Sample) -> str:
    """Question:/Answer: blocks over all turns, media placeholder tokens removed."""
    lines: list[str] = []
    for turn in sample.turns:
        label = "Question" if turn.role == ROLE_HUMAN else "Answer"
        lines.append(f"{label}: {strip_media_tokens(turn.text)}")
    return "\n".join(lines)


def bind_placeholders(
    sample: Sample, template: PromptTemplate, pair_num: int = DEFAULT_PAIR_NUM
) -> dict[str, str]:
    """Fill the template's slots from the sample; raises BindError on shape mismatch."""
    if sample.provenance is not Provenance.ORIGINAL:
        raise BindError("rewriting binds only original samples")
    bindings: dict[str, str] = {}
    pairs = qa_pairs(sample)
    for name in sorted(template.placeholders):
        if name == "qa_text":
            bindings[name] = serialize_qa(sample)
        elif name == "vqa":
            bindings[name] = serialize_qa(sample)
        elif name == "pair_num":
            bindings[name] = str(pair_num)
        elif name == "caption":
            assistant_turns = [t for t in sample.turns if t.role == ROLE_ASSISTANT]
            if len(sample.turns) > 2 or not assistant_turns:
                raise BindError("caption template expects a single caption turn")
            bindings[name] = strip_media_tokens(assistant_turns[0].text)
        elif name in ("question", "simple_answer"):
            if len(pairs) != 1:
                raise BindError(
                    f"template expects exactly one question/answer pair, got {len(pairs)}"
                )
            bindings[name] = pairs[0][0] if name == "question" else pairs[0][1]
        else:
            raise BindError(f"no binding rule for placeholder {name!r}")
    return bindings


_PARSERS = {
    PARSE_ANGLE_PAIRS: lambda text, sample: parse_angle_pairs(text),
    PARSE_HASH_PAIRS: lambda text, sample: parse_hash_pairs(text),
    PARSE_DIALOGUE: lambda text, sample: parse_dialogue(text),
    PARSE_REVISED_ANSWER: lambda text, sample: parse_revised_answer(
        text, sample.turns[0].text if sample.turns else ""
    ),
}


def _media_prefix(sample: Sample) -> str:
    tokens = [VIDEO_TOKEN if is_video_ref(m) else IMAGE_TOKEN for m in sample.media]
    return "".join(f"{t}\n" for t in tokens)


def emit_samples(parent: Sample, parsed: ParsedRewrite) -> list[Sample]:
    """Materialize rewritten Samples from a parse, preserving category and media."""
    prefix = _media_prefix(parent)
    emitted: list[Sample] = []
    if parsed.kind == KIND_PAIRS:
        for index, (instruction, response) in enumerate(parsed.pairs):
            emitted.append(
                Sample(
                    id=rewritten_sample_id(parent.id, index),
                    source_id=parent.source_id,
                    category=parent.category,
                    media=parent.media,
                    turns=(
                        Turn(ROLE_HUMAN, f"{prefix}{instruction}"),
                        Turn(ROLE_ASSISTANT, response),
                    ),
                    provenance=Provenance.REWRITTEN,
                    parent_id=parent.id,
                )
            )
    elif parsed.kind == KIND_DIALOGUE:
        turns = [
            Turn(t.role, f"{prefix}{t.text}" if i == 0 else t.text)
            for i, t in enumerate(parsed.dialogue)
        ]
        emitted.append(
            Sample(
                id=rewritten_sample_id(parent.id, 0),
                source_id=parent.source_id,
                category=parent.category,
                media=parent.media,
                turns=tuple(turns),
                provenance=Provenance.REWRITTEN,
                parent_id=parent.id,
            )
        )
    elif parsed.kind == KIND_REVISED:
        # The question turn is reused verbatim, so its media tokens are already there.
        emitted.append(
            Sample(
                id=rewritten_sample_id(parent.id, 0),
                source_id=parent.source_id,
                category=parent.category,
                media=parent.media,
                turns=(Turn(ROLE_HUMAN, parsed.question), Turn(ROLE_ASSISTANT, parsed.revised)),
                provenance=Provenance.REWRITTEN,
                parent_id=parent.id,
            )
        )
    else:
        raise ValueError(f"unknown parse kind {parsed.kind!r}")
    return emitted


def rewrite_sample(
    sample: Sample,
    pool: EndpointPool,
    registry: Mapping[str, PromptTemplate] | None = None,
    *,
    pair_num: int = DEFAULT_PAIR_NUM,
    media_root: Path | str | None = None,
    temperature: float | None = None,
) -> RewriteOutcome:
    """Rewrite one original sample; failures land in the outcome, never raised."""
    try:
        template = template_for(STAGE_REWRITE, sample.category, registry)
    except NotRewritable as exc:
        return RewriteOutcome(sample.id, STATUS_SKIPPED, warnings=(str(exc),))
    try:
        bindings = bind_placeholders(sample, template, pair_num=pair_num)
    except BindError as exc:
        return RewriteOutcome(sample.id, STATUS_SKIPPED, warnings=(f"bind error: {exc}",))

    prompt = render(template, bindings)
    client = pool.client_for(sample.category)
    request = build_request(
        prompt,
        client.cfg.kind,
        media_paths(sample, media_root) if client.cfg.kind == MULTIMODAL else (),
        temperature=temperature,
    )
    parser = _PARSERS[template.expected_parse]

    raw_text = ""
    warnings: tuple[str, ...] = ()
    for attempt in (1, 2):  # one re-ask on an unparseable rewrite, then drop
        try:
            response = client.complete(request)
        except RequestFailed as exc:
            log.warning("rewrite of %s failed: %s", sample.id, exc)
            return RewriteOutcome(
                sample.id, STATUS_REQUEST_FAILED, raw_text=raw_text, warnings=(str(exc),)
            )
        raw_text = response.text
        try:
            parsed = parser(raw_text, sample)
        except EmptyParse as exc:
            warnings = tuple(exc.warnings) + (str(exc),)
            if attempt == 1:
                log.info("empty parse for %s; re-asking", sample.id)
                continue
            return RewriteOutcome(
                sample.id, STATUS_EMPTY_PARSE, raw_text=raw_text, warnings=warnings
            )
        samples = emit_samples(sample, parsed)
        return RewriteOutcome(
            sample.id,
            STATUS_OK,
            raw_text=raw_text,
            parsed=parsed,
            samples=tuple(samples),
            warnings=parsed.warnings,
        )
    raise AssertionError("unreachable")  # loop always returns


def _outcome_to_record(outcome: RewriteOutcome) -> dict[str, Any]:
    return {
        "parent_id": outcome.parent_id,
        "status": outcome.status,
        "raw_text": outcome.raw_text,
        "emitted_ids": list(outcome.emitted_ids),
        "samples": [sample_to_record(s) for s in outcome.samples],
        "warnings": list(outcome.warnings),
    }


def run_rewrite_stage(
    input_path: Path | str,
    output_path: Path | str,
    pool: EndpointPool,
    registry: Mapping[str, PromptTemplate] | None = None,
    *,
    pair_num: int = DEFAULT_PAIR_NUM,
    media_root: Path | str | None = None,
    temperature: float | None = None,
    max_workers: int = 4,
) -> dict[str, int]:
    """Rewrite every sample in `input_path`, resumably; returns {ok, failed, skipped}.

    Only samples absent from the stage log are processed on re-runs; the final
    output (and the `.failed.jsonl` sidecar) is re-derived from the log in
    input order, so interrupted runs finish byte-identical to clean runs.
    """
    input_path, output_path = Path(input_path), Path(output_path)
    samples = list(read_samples(input_path))
    records = run_stage(
        stage="rewrite",
        input_hash=file_sha256(input_path),
        items=[(s.id, s) for s in samples],
        process=lambda s: _outcome_to_record(
            rewrite_sample(
                s, pool, registry,
                pair_num=pair_num, media_root=media_root, temperature=temperature,
            )
        ),
        log_path=output_path.with_suffix(".outcomes.jsonl"),
        manifest_path=output_path.with_suffix(".manifest.json"),
        max_workers=max_workers,
        key_field="parent_id",
    )

    emitted: list[dict[str, Any]] = []
    failures: list[dict[str, Any]] = []
    report = {"ok": 0, "failed": 0, "skipped": 0}
    for record in records:
        if record["status"] == STATUS_OK:
            report["ok"] += 1
            emitted.extend(record["samples"])
        elif record["status"] == STATUS_SKIPPED:
            report["skipped"] += 1
            failures.append({k: record[k] for k in ("parent_id", "status", "warnings")})
        else:
            report["failed"] += 1
            failures.append({k: record[k] for k in ("parent_id", "status", "warnings")})
    write_jsonl(output_path, emitted)
    write_jsonl(output_path.with_suffix(".failed.jsonl"), failures)
    return report


def copy_originals(input_path: Path | str, output_path: Path | str) -> int:
    """Pass originals through untouched (the keep-as-is screening group)."""
    return write_samples(output_path, read_samples(input_path))
