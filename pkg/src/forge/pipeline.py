"""Stage drivers binding config + stores to the stage implementations."""

from __future__ import annotations

import dataclasses
import logging
import random
from collections import Counter
from pathlib import Path
from typing import Any

from .analytics import score_sample
from .config import RunConfig, build_pool
from .corpus import Category, Sample, ScreeningGroup
from .inference import MULTIMODAL, TEXT_ONLY, ConfigError
from .ingest import (
    RecordError,
    load_registry,
    read_samples,
    read_source,
    sample_for_screening,
    write_samples,
)
from .filtering import run_judge_stage
from .prompts import STAGE_JUDGE, STAGE_SCORE, load_registry as load_templates, template_for
from .rewrite import run_rewrite_stage
from .mixer import mix
from .mixer import export_manifest
from .stage import file_sha256, run_stage
from .stores import PipelineStore

log = logging.getLogger(__name__)


def open_store(cfg: RunConfig) -> PipelineStore:
    return PipelineStore(cfg.output_root)


def _screened_sources(cfg: RunConfig, wanted: set[ScreeningGroup]) -> list:
    registry = load_registry(cfg.source_registry)
    store = open_store(cfg)
    groups = store.effective_groups(registry)
    chosen = []
    for spec in registry:
        group = groups[spec.source_id]
        if group is None:
            log.warning("source %s has no screening group yet; skipped", spec.source_id)
        elif group in wanted:
            chosen.append(spec if spec.group == group else dataclasses.replace(spec, group=group))
    return chosen


def ingest_stage(
    cfg: RunConfig, dry_run: bool = False, standardize_images: bool = False
) -> dict[str, Any]:
    """Read every group A/B source into per-source canonical sample files.

    With standardize_images (and a configured media_root), referenced images
    are resized/padded into `<output_root>/media/` under their original
    relative paths; missing files are skipped with a warning.
    """
    from .corpus import is_video_ref
    from .ingest import standardize_image_file

    store = open_store(cfg)
    report: dict[str, Any] = {"sources": {}, "record_errors": 0}
    standardized: set[str] = set()
    for spec in _screened_sources(cfg, {ScreeningGroup.A, ScreeningGroup.B}):
        errors: list[RecordError] = []
        samples = list(read_source(spec, on_error=errors.append))
        report["sources"][spec.source_id] = {
            "records": len(samples),
            "errors": len(errors),
            "group": spec.group.value if spec.group else None,
        }
        report["record_errors"] += len(errors)
        if dry_run:
            continue
        write_samples(store.original_path(spec.source_id), samples)
        if standardize_images and cfg.media_root is not None:
            for sample in samples:
                for ref in sample.media:
                    if ref in standardized or is_video_ref(ref):
                        continue
                    standardized.add(ref)
                    src = Path(cfg.media_root) / ref
                    if not src.is_file():
                        log.warning("media missing, not standardized: %s", src)
                        continue
                    standardize_image_file(src, store.root / "media" / ref)
    if standardize_images:
        report["images_standardized"] = len(standardized)
    return report


def screen_stage(cfg: RunConfig, dry_run: bool = False) -> dict[str, Any]:
    """Draw a seeded screening batch from every registered source."""
    store = open_store(cfg)
    registry = load_registry(cfg.source_registry)
    report: dict[str, Any] = {"sources": {}}
    for spec in registry:
        batch = sample_for_screening(spec, n=cfg.screening_n, seed=cfg.seed)
        report["sources"][spec.source_id] = len(batch)
        if not dry_run:
            write_samples(store.screening_dir / f"{spec.source_id}.jsonl", batch)
    return report


def _group_b_input(cfg: RunConfig, store: PipelineStore) -> Path:
    """Concatenate group-B originals (source order) into the rewrite stage input."""
    specs = _screened_sources(cfg, {ScreeningGroup.B})
    samples: list[Sample] = []
    for spec in specs:
        path = store.original_path(spec.source_id)
        if path.exists():
            samples.extend(read_samples(path))
        else:
            log.warning("no ingested samples for group-B source %s", spec.source_id)
    input_path = store.root / "samples" / "rewritten" / "input.jsonl"
    write_samples(input_path, samples)
    return input_path


def rewrite_stage(cfg: RunConfig, dry_run: bool = False) -> dict[str, Any]:
    store = open_store(cfg)
    input_path = _group_b_input(cfg, store)
    samples = list(read_samples(input_path))
    by_category = Counter(s.category.value for s in samples)
    if dry_run:
        return {"planned": dict(sorted(by_category.items())), "total": len(samples)}
    if any(s.category is Category.CAPTION for s in samples):
        kinds = [e.config.kind for e in cfg.endpoints]
        if kinds.count(TEXT_ONLY) != 1:
            raise ConfigError("rewriting captions requires exactly one text_only endpoint")
    pool = build_pool(cfg)
    templates = load_templates(cfg.template_overrides)
    report = run_rewrite_stage(
        input_path,
        store.rewritten_path,
        pool,
        templates,
        pair_num=cfg.pair_num,
        media_root=cfg.media_root,
        temperature=cfg.temperature_for("rewrite"),
        max_workers=cfg.max_workers,
    )
    report["by_category"] = dict(sorted(by_category.items()))
    return report


def judge_stage(cfg: RunConfig, dry_run: bool = False) -> dict[str, Any]:
    store = open_store(cfg)
    if dry_run:
        count = sum(1 for _ in store.iter_rewritten())
        return {"planned": count}
    pool = build_pool(cfg)
    templates = load_templates(cfg.template_overrides)
    return run_judge_stage(
        store.rewritten_path,
        store.kept_path,
        store.verdicts_path,
        pool.client_of_kind(MULTIMODAL),
        template_for(STAGE_JUDGE, registry=templates),
        media_root=cfg.media_root,
        temperature=cfg.temperature_for("judge"),
        max_workers=cfg.max_workers,
    )


def _score_pools(cfg: RunConfig, store: PipelineStore) -> list[Sample]:
    """Seeded draw from the original and rewritten pools for quality scoring."""
    originals = [s for spec in _screened_sources(cfg, {ScreeningGroup.B})
                 for s in (read_samples(store.original_path(spec.source_id))
                           if store.original_path(spec.source_id).exists() else [])]
    rewritten_path = store.kept_path if store.kept_path.exists() else store.rewritten_path
    rewritten = list(read_samples(rewritten_path)) if rewritten_path.exists() else []
    rng = random.Random(cfg.seed)
    chosen: list[Sample] = []
    for pool in (originals, rewritten):
        ordered = sorted(pool, key=lambda s: s.id)
        n = min(cfg.score_sample_n, len(ordered))
        chosen.extend(rng.sample(ordered, n))
    return chosen


def score_stage(cfg: RunConfig, dry_run: bool = False) -> dict[str, Any]:
    store = open_store(cfg)
    chosen = _score_pools(cfg, store)
    if dry_run:
        return {"planned": len(chosen)}
    pool = build_pool(cfg)
    templates = load_templates(cfg.template_overrides)
    template = template_for(STAGE_SCORE, registry=templates)
    client = pool.client_of_kind(MULTIMODAL)

    def process(sample: Sample) -> dict[str, Any]:
        score = score_sample(
            sample, client, template,
            media_root=cfg.media_root, temperature=cfg.temperature_for("score"),
        )
        return {
            "sample_id": sample.id,
            "source_id": sample.source_id,
            "provenance": sample.provenance.value,
            "content": score.content if score else None,
            "relevance": score.relevance if score else None,
        }

    input_path = store.scores_path.with_suffix(".input.jsonl")
    write_samples(input_path, chosen)
    records = run_stage(
        stage="score",
        input_hash=file_sha256(input_path),
        items=[(s.id, s) for s in chosen],
        process=process,
        log_path=store.scores_path,
        manifest_path=store.scores_path.with_suffix(".manifest.json"),
        max_workers=cfg.max_workers,
        key_field="sample_id",
    )
    scored = sum(1 for r in records if r["content"] is not None)
    return {"scored": scored, "missing": len(records) - scored}


def mix_stage(cfg: RunConfig, dry_run: bool = False, name: str = "mix") -> dict[str, Any]:
    if cfg.mix is None:
        raise ConfigError("config has no mix plan")
    store = open_store(cfg)
    wanted = {
        "group_a": {ScreeningGroup.A},
        "group_b": {ScreeningGroup.B},
        "both": {ScreeningGroup.A, ScreeningGroup.B},
    }.get(cfg.mix_original_pool)
    if wanted is None:
        raise ConfigError(f"unknown mix_original_pool {cfg.mix_original_pool!r}")
    originals = [
        s
        for spec in _screened_sources(cfg, wanted)
        for s in (read_samples(store.original_path(spec.source_id))
                  if store.original_path(spec.source_id).exists() else [])
    ]
    rewritten_path = store.kept_path if store.kept_path.exists() else store.rewritten_path
    rewritten = list(read_samples(rewritten_path)) if rewritten_path.exists() else []
    if dry_run:
        from .mixer import split_counts

        n_rw, n_or = split_counts(cfg.mix.total, cfg.mix.rewritten_fraction)
        return {
            "planned": {"rewritten": n_rw, "original": n_or},
            "pool_sizes": {"rewritten": len(rewritten), "original": len(originals)},
        }
    ids = mix(originals, rewritten, cfg.mix)
    sample_store = {s.id: s for s in originals}
    sample_store.update({s.id: s for s in rewritten})
    manifest_path = store.manifests_dir / f"{name}.jsonl"
    count = export_manifest(ids, sample_store, manifest_path)
    return {"written": count, "manifest": str(manifest_path)}
