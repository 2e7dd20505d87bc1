"""Source readers, image-geometry standardization, screening draws, and JSONL persistence."""

from __future__ import annotations

import json
import logging
import random
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .corpus import (
    IMAGE_TOKEN,
    ROLE_ASSISTANT,
    ROLE_HUMAN,
    Category,
    Provenance,
    Sample,
    ScreeningGroup,
    SourceSpec,
    Turn,
    original_sample_id,
    sample_from_record,
    sample_to_record,
)

log = logging.getLogger(__name__)

MIN_DIM = 224
MAX_DIM = 4096
MAX_RATIO = 7

ACTION_NONE = "none"
ACTION_UPSCALE = "upscale"
ACTION_DOWNSCALE = "downscale"
ACTION_PAD_WIDTH = "pad_width"
ACTION_PAD_HEIGHT = "pad_height"


class IngestError(Exception):
    """Fatal ingest failure (unreadable path, unsupported format)."""


@dataclass(frozen=True, slots=True)
class RecordError:
    """One malformed input record; the stream continues past it."""

    line_no: int
    message: str


@dataclass(frozen=True, slots=True)
class ImageGeometry:
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"geometry dimensions must be >= 1, got {self.width}x{self.height}")


@dataclass(frozen=True, slots=True)
class StandardizationReport:
    input: ImageGeometry
    output: ImageGeometry
    actions: tuple[str, ...]


def _scale_factor(w: int, h: int) -> float:
    """Single uniform factor bringing dimensions toward [224, 4096]."""
    if max(w, h) > MAX_DIM:
        return MAX_DIM / max(w, h)
    if min(w, h) < MIN_DIM:
        # Cap so the long side cannot be pushed past the upper bound.
        return min(MIN_DIM / min(w, h), MAX_DIM / max(w, h))
    return 1.0


def standardize_geometry(g: ImageGeometry) -> StandardizationReport:
    """Scale into [224, 4096] with one uniform factor, then pad the short side for ratio.

    Scaling preserves aspect ratio (modulo pixel rounding); padding is applied
    only to bring the long/short ratio down to 7:1 and can never exceed 4096.
    Idempotent: running the output back through is always a no-op.
    """
    w, h = g.width, g.height
    actions: list[str] = []

    factor = _scale_factor(w, h)
    if factor != 1.0:
        w = max(1, round(w * factor))
        h = max(1, round(h * factor))
        actions.append(ACTION_UPSCALE if factor > 1 else ACTION_DOWNSCALE)

    long_side, short_side = max(w, h), min(w, h)
    if long_side > MAX_RATIO * short_side:
        target = -(-long_side // MAX_RATIO)  # ceil division
        if target > MAX_DIM:  # unreachable after scaling; kept as a guarded cap
            log.warning("ratio pad capped at %d for %dx%d", MAX_DIM, g.width, g.height)
            target = MAX_DIM
        if w < h:
            w = target
            actions.append(ACTION_PAD_WIDTH)
        else:
            h = target
            actions.append(ACTION_PAD_HEIGHT)

    if not actions:
        actions.append(ACTION_NONE)
    return StandardizationReport(g, ImageGeometry(w, h), tuple(actions))


def standardize_image_file(src: Path | str, dst: Path | str) -> StandardizationReport:
    """Apply `standardize_geometry` to an image file (centered, solid-white padding)."""
    from PIL import Image  # imported lazily; only pixel work needs Pillow

    src, dst = Path(src), Path(dst)
    dst.parent.mkdir(parents=True, exist_ok=True)
    with Image.open(src) as im:
        report = standardize_geometry(ImageGeometry(im.width, im.height))
        if report.actions == (ACTION_NONE,):
            if src != dst:
                im.save(dst)
            return report
        factor = _scale_factor(im.width, im.height)
        pre_w = max(1, round(im.width * factor))
        pre_h = max(1, round(im.height * factor))
        out = im.convert("RGB")
        if (pre_w, pre_h) != (im.width, im.height):
            out = out.resize((pre_w, pre_h), Image.LANCZOS)
        out_w, out_h = report.output.width, report.output.height
        if (pre_w, pre_h) != (out_w, out_h):
            canvas = Image.new("RGB", (out_w, out_h), (255, 255, 255))
            canvas.paste(out, ((out_w - pre_w) // 2, (out_h - pre_h) // 2))
            out = canvas
        out.save(dst)
        return report


# --- source readers ---------------------------------------------------------

RecordParser = Callable[[dict, SourceSpec, int], Sample]


def _parse_llava_record(record: dict, spec: SourceSpec, line_no: int) -> Sample:
    if "conversations" not in record:
        raise ValueError("missing field 'conversations'")
    media: list[str] = []
    if record.get("image"):
        images = record["image"]
        media.extend(images if isinstance(images, list) else [images])
    if record.get("images"):
        media.extend(record["images"])
    if record.get("video"):
        media.append(record["video"])
    turns = []
    for entry in record["conversations"]:
        role = {"human": ROLE_HUMAN, "gpt": ROLE_ASSISTANT, "assistant": ROLE_ASSISTANT}.get(
            entry.get("from", "")
        )
        if role is None:
            raise ValueError(f"unknown speaker {entry.get('from')!r}")
        turns.append(Turn(role=role, text=str(entry.get("value", ""))))
    record_key = record.get("id") or f"line{line_no}"
    return Sample(
        id=original_sample_id(spec.source_id, record_key),
        source_id=spec.source_id,
        category=spec.category,
        media=tuple(str(m) for m in media),
        turns=tuple(turns),
        provenance=Provenance.ORIGINAL,
    )


def _parse_pairs_record(record: dict, spec: SourceSpec, line_no: int) -> Sample:
    if "question" not in record or "answer" not in record:
        raise ValueError("missing field 'question'/'answer'")
    question = str(record["question"])
    media: tuple[str, ...] = ()
    if record.get("image"):
        media = (str(record["image"]),)
        if IMAGE_TOKEN not in question:
            question = f"{IMAGE_TOKEN}\n{question}"
    record_key = record.get("id") or f"line{line_no}"
    return Sample(
        id=original_sample_id(spec.source_id, record_key),
        source_id=spec.source_id,
        category=spec.category,
        media=media,
        turns=(Turn(ROLE_HUMAN, question), Turn(ROLE_ASSISTANT, str(record["answer"]))),
        provenance=Provenance.ORIGINAL,
    )


FORMAT_READERS: dict[str, RecordParser] = {
    "llava_jsonl": _parse_llava_record,
    "pairs_jsonl": _parse_pairs_record,
}


def register_format(tag: str, parser: RecordParser) -> None:
    FORMAT_READERS[tag] = parser


def read_source(
    spec: SourceSpec,
    on_error: Callable[[RecordError], None] | None = None,
) -> Iterator[Sample]:
    """Stream Samples from a registered source in file order.

    Malformed records are reported through `on_error` (default: logged) with
    their line number and the stream continues; an unreadable path is fatal.
    """
    parser = FORMAT_READERS.get(spec.format_tag)
    if parser is None:
        raise IngestError(f"unsupported format_tag {spec.format_tag!r} for {spec.source_id}")
    path = Path(spec.root_path)
    if not path.exists():
        raise IngestError(f"source path does not exist: {path}")
    report = on_error or (lambda err: log.warning(
        "%s line %d: %s", spec.source_id, err.line_no, err.message))
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("record is not a JSON object")
                yield parser(record, spec, line_no)
            except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
                report(RecordError(line_no, str(exc)))


def sample_for_screening(
    spec: SourceSpec,
    n: int = 1000,
    seed: int = 0,
    on_error: Callable[[RecordError], None] | None = None,
) -> list[Sample]:
    """Uniform draw without replacement; all records if the source has <= n."""
    population = list(read_source(spec, on_error=on_error))
    if len(population) <= n:
        return population
    return random.Random(seed).sample(population, n)


# --- sample persistence ------------------------------------------------------

def write_samples(path: Path | str, samples: Iterable[Sample]) -> int:
    """Write one canonical JSON object per line; returns the record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for s in samples:
                fh.write(json.dumps(sample_to_record(s), ensure_ascii=False,
                                    separators=(",", ":")))
                fh.write("\n")
                count += 1
    except OSError as exc:
        raise IngestError(f"cannot write samples to {path}: {exc}") from exc
    return count


def read_samples(path: Path | str) -> Iterator[Sample]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield sample_from_record(json.loads(line))
                except (json.JSONDecodeError, ValueError) as exc:
                    raise IngestError(f"{path} line {line_no}: {exc}") from exc
    except OSError as exc:
        raise IngestError(f"cannot read samples from {path}: {exc}") from exc


def load_sample_store(*paths: Path | str) -> dict[str, Sample]:
    """Id-keyed samples from one or more JSONL files (later files win on id)."""
    store: dict[str, Sample] = {}
    for path in paths:
        for s in read_samples(path):
            store[s.id] = s
    return store


# --- source registry ---------------------------------------------------------

def load_registry(path: Path | str) -> list[SourceSpec]:
    """JSON array of source specs; relative root_paths resolve against the file's dir."""
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read source registry {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"source registry {path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise IngestError(f"source registry {path} must be a JSON array")
    specs = []
    seen: set[str] = set()
    for entry in entries:
        root_path = Path(entry["root_path"])
        if not root_path.is_absolute():
            root_path = path.parent / root_path
        spec = SourceSpec(
            source_id=entry["source_id"],
            display_name=entry.get("display_name", entry["source_id"]),
            root_path=str(root_path),
            format_tag=entry.get("format_tag", "llava_jsonl"),
            category=Category(entry["category"]),
            group=ScreeningGroup(entry["group"]) if entry.get("group") else None,
        )
        if spec.source_id in seen:
            raise IngestError(f"duplicate source_id {spec.source_id!r} in registry")
        seen.add(spec.source_id)
        specs.append(spec)
    return specs


def save_registry(path: Path | str, specs: Iterable[SourceSpec]) -> None:
    payload: list[dict[str, Any]] = []
    for spec in specs:
        entry: dict[str, Any] = {
            "source_id": spec.source_id,
            "display_name": spec.display_name,
            "root_path": spec.root_path,
            "format_tag": spec.format_tag,
            "category": spec.category.value,
        }
        if spec.group is not None:
            entry["group"] = spec.group.value
        payload.append(entry)
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")
