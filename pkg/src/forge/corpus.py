"""Core value types shared by every pipeline stage.

Samples, sources, categories and provenance are immutable value objects;
transformations always build new Samples, never mutate existing ones.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from pathlib import PurePosixPath
from typing import Any

IMAGE_TOKEN = "<image>"
VIDEO_TOKEN = "<video>"

# Media refs are plain relative paths; anything with one of these suffixes is
# treated as video, everything else as an image.
VIDEO_SUFFIXES = frozenset({".mp4", ".avi", ".mov", ".mkv", ".webm", ".m4v"})

ROLE_HUMAN = "human"
ROLE_ASSISTANT = "assistant"


class Category(str, Enum):
    """Closed ten-way task taxonomy; every sample carries exactly one."""

    GENERAL = "General"
    OCR = "OCR"
    CHART = "Chart"
    CAPTION = "Caption"
    DOMAIN_SPECIFIC = "DomainSpecific"
    CODE_MATH = "CodeMath"
    LANGUAGE = "Language"
    DETECTION = "Detection"
    MULTI_IMAGE = "MultiImage"
    VIDEO = "Video"


class ScreeningGroup(str, Enum):
    """Keep-as-is (A), rewrite candidate (B), or excluded (C)."""

    A = "A"
    B = "B"
    C = "C"


class Provenance(str, Enum):
    ORIGINAL = "original"
    REWRITTEN = "rewritten"


@dataclass(frozen=True, slots=True)
class Turn:
    role: str  # ROLE_HUMAN | ROLE_ASSISTANT
    text: str


@dataclass(frozen=True, slots=True)
class Sample:
    """One multimodal instruction record with lineage.

    `id` is content-addressed (see `sample_id`) so identical inputs yield
    identical ids across runs; `parent_id` is set iff provenance is rewritten.
    """

    id: str
    source_id: str
    category: Category
    media: tuple[str, ...]
    turns: tuple[Turn, ...]
    provenance: Provenance
    parent_id: str | None = None


@dataclass(frozen=True, slots=True)
class QualityScore:
    """Information-content / relevance pair, each an integer in [1, 5]."""

    content: int
    relevance: int

    def __post_init__(self) -> None:
        for axis, value in (("content", self.content), ("relevance", self.relevance)):
            if not isinstance(value, int) or not 1 <= value <= 5:
                raise ValueError(f"{axis} score must be an integer in [1, 5], got {value!r}")


@dataclass(frozen=True, slots=True)
class SourceSpec:
    """A registered dataset: where it lives, how to read it, how it screens."""

    source_id: str
    display_name: str
    root_path: str
    format_tag: str
    category: Category
    group: ScreeningGroup | None = None


def sample_id(*parts: object) -> str:
    """Content hash over the identifying parts, rendered as lowercase hex."""
    joined = "\x1f".join(str(p) for p in parts)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:32]


def original_sample_id(source_id: str, record_key: object) -> str:
    return sample_id(source_id, record_key, Provenance.ORIGINAL.value, 0)


def rewritten_sample_id(parent_id: str, pair_index: int) -> str:
    return sample_id(parent_id, Provenance.REWRITTEN.value, pair_index)


def is_video_ref(ref: str) -> bool:
    return PurePosixPath(ref).suffix.lower() in VIDEO_SUFFIXES


def validate_sample(s: Sample) -> list[str]:
    """Return every invariant violation; empty list means valid.

    Pure and total: identical input always yields the identical list.
    """
    violations: list[str] = []
    if not s.id:
        violations.append("missing id")
    if not s.source_id:
        violations.append("missing source_id")
    if not s.turns:
        violations.append("no turns")

    for i, turn in enumerate(s.turns):
        if turn.role not in (ROLE_HUMAN, ROLE_ASSISTANT):
            violations.append(f"unknown role {turn.role!r} at turn {i}")
        if not turn.text.strip():
            violations.append(f"empty turn text at turn {i}")

    roles = [t.role for t in s.turns]
    expected = [ROLE_HUMAN if i % 2 == 0 else ROLE_ASSISTANT for i in range(len(roles))]
    if roles and roles != expected and all(r in (ROLE_HUMAN, ROLE_ASSISTANT) for r in roles):
        violations.append("role alternation violated")

    image_refs = sum(1 for m in s.media if not is_video_ref(m))
    video_refs = len(s.media) - image_refs
    image_tokens = sum(t.text.count(IMAGE_TOKEN) for t in s.turns)
    video_tokens = sum(t.text.count(VIDEO_TOKEN) for t in s.turns)
    if image_tokens != image_refs:
        violations.append(
            f"media/placeholder mismatch: {image_tokens} {IMAGE_TOKEN} tokens"
            f" vs {image_refs} image refs"
        )
    if video_tokens != video_refs:
        violations.append(
            f"media/placeholder mismatch: {video_tokens} {VIDEO_TOKEN} tokens"
            f" vs {video_refs} video refs"
        )

    if s.provenance is Provenance.ORIGINAL and s.parent_id is not None:
        violations.append("parent_id set on original sample")
    if s.provenance is Provenance.REWRITTEN and not s.parent_id:
        violations.append("rewritten sample missing parent_id")
    return violations


def sample_to_record(s: Sample) -> dict[str, Any]:
    """Map a Sample to its canonical JSON record (fixed field order)."""
    record: dict[str, Any] = {
        "id": s.id,
        "source_id": s.source_id,
        "category": s.category.value,
        "media": list(s.media),
        "turns": [{"role": t.role, "text": t.text} for t in s.turns],
        "provenance": s.provenance.value,
    }
    if s.parent_id is not None:
        record["parent_id"] = s.parent_id
    return record


def sample_from_record(record: dict[str, Any]) -> Sample:
    """Build a Sample from a JSON record; unknown fields are tolerated."""
    try:
        return Sample(
            id=str(record["id"]),
            source_id=str(record["source_id"]),
            category=Category(record["category"]),
            media=tuple(record.get("media") or ()),
            turns=tuple(
                Turn(role=str(t["role"]), text=str(t["text"])) for t in record["turns"]
            ),
            provenance=Provenance(record.get("provenance", "original")),
            parent_id=record.get("parent_id"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed sample record: {exc}") from exc
