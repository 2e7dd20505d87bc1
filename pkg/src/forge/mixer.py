"""Seeded ratio mixing of original/rewritten pools into ordered training manifests."""

from __future__ import annotations

import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any

from .corpus import Category, Sample
from .ingest import write_samples


class MixError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class MixPlan:
    """How many samples to draw and in what rewritten/original proportion."""

    total: int
    rewritten_fraction: float
    seed: int
    category_constraints: Mapping[Category, tuple[float | None, float | None]] | None = None

    def __post_init__(self) -> None:
        if self.total < 0:
            raise ValueError("total must be >= 0")
        if not 0.0 <= self.rewritten_fraction <= 1.0:
            raise ValueError("rewritten_fraction must be in [0, 1]")


def split_counts(total: int, rewritten_fraction: float) -> tuple[int, int]:
    """(n_rewritten, n_original) with the rewritten share rounded half-up.

    The fraction is treated at its decimal face value (str round-trip), so
    0.45 of 10 is 5, not the 4 that raw binary-float arithmetic would give.
    """
    n_rewritten = int(
        (Decimal(str(rewritten_fraction)) * total).quantize(Decimal("1"), rounding=ROUND_HALF_UP)
    )
    return n_rewritten, total - n_rewritten


def _normalize_pool(pool: Iterable[Any], name: str) -> list[tuple[str, Category | None]]:
    items: list[tuple[str, Category | None]] = []
    seen: set[str] = set()
    for entry in pool:
        if isinstance(entry, Sample):
            item = (entry.id, entry.category)
        elif isinstance(entry, tuple):
            item = (str(entry[0]), entry[1])
        else:
            item = (str(entry), None)
        if item[0] in seen:
            raise MixError(f"duplicate id {item[0]!r} in {name} pool")
        seen.add(item[0])
        items.append(item)
    items.sort(key=lambda it: it[0])  # pool iteration order must not matter
    return items


def _draw(
    pool: list[tuple[str, Category | None]], n: int, name: str, rng: random.Random
) -> list[tuple[str, Category | None]]:
    if len(pool) < n:
        raise MixError(f"{name} pool short by {n - len(pool)} (have {len(pool)}, need {n})")
    return rng.sample(pool, n)


def _enforce_constraints(
    chosen_by_pool: dict[str, list[tuple[str, Category | None]]],
    unused_by_pool: dict[str, list[tuple[str, Category | None]]],
    constraints: Mapping[Category, tuple[float | None, float | None]],
    total: int,
    rng: random.Random,
) -> None:
    """Deterministic swap repair driving per-category manifest counts into [min, max].

    Bounds are fractions of the whole manifest; every swap replaces an item
    with one from the same pool, so the rewritten/original split is never
    disturbed. Mutates the chosen/unused lists in place.
    """
    all_items = [
        item
        for items in list(chosen_by_pool.values()) + list(unused_by_pool.values())
        for item in items
    ]
    if any(category is None for _, category in all_items):
        raise MixError("category constraints require categorized pools")

    def bounds(cat: Category) -> tuple[int, int]:
        lo_f, hi_f = constraints.get(cat, (None, None))
        lo = 0 if lo_f is None else int(
            (Decimal(str(lo_f)) * total).to_integral_value(rounding=ROUND_CEILING)
        )
        hi = total if hi_f is None else int(
            (Decimal(str(hi_f)) * total).to_integral_value(rounding=ROUND_FLOOR)
        )
        return lo, hi

    def count(cat: Category) -> int:
        return sum(
            1 for items in chosen_by_pool.values() for _, c in items if c == cat
        )

    def swap(pool: str, victim, incoming) -> None:
        chosen = chosen_by_pool[pool]
        unused = unused_by_pool[pool]
        chosen[chosen.index(victim)] = incoming
        unused.remove(incoming)
        unused.append(victim)

    pools = sorted(chosen_by_pool)
    for cat in sorted(constraints, key=lambda c: c.value):
        lo, hi = bounds(cat)
        # shed overflow: swap surplus `cat` items for same-pool items of other categories
        while count(cat) > hi:
            viable = [
                (pool, victim, incoming)
                for pool in pools
                for victim in chosen_by_pool[pool]
                if victim[1] == cat
                for incoming in unused_by_pool[pool]
                if incoming[1] != cat and count(incoming[1]) < bounds(incoming[1])[1]
            ]
            if not viable:
                raise MixError(f"infeasible category constraints for {cat.value}")
            swap(*rng.choice(viable))
        # fill shortfall: pull `cat` items in, evicting categories above their minimum
        while count(cat) < lo:
            viable = [
                (pool, victim, incoming)
                for pool in pools
                for incoming in unused_by_pool[pool]
                if incoming[1] == cat
                for victim in chosen_by_pool[pool]
                if victim[1] != cat and count(victim[1]) > bounds(victim[1])[0]
            ]
            if not viable:
                raise MixError(f"infeasible category constraints for {cat.value}")
            swap(*rng.choice(viable))


def mix(originals: Iterable[Any], rewrites: Iterable[Any], plan: MixPlan) -> list[str]:
    """Seeded draw of round(total * fraction) rewritten + remainder original ids.

    Uniform without replacement within each pool; the output order is one
    seeded shuffle of the combined selection. Deterministic for fixed
    (pools, plan); changing only the seed changes selection and order but
    never the split.
    """
    original_pool = _normalize_pool(originals, "original")
    rewritten_pool = _normalize_pool(rewrites, "rewritten")
    overlap = {i for i, _ in original_pool} & {i for i, _ in rewritten_pool}
    if overlap:
        raise MixError(f"pools are not disjoint: {sorted(overlap)[:5]}")

    n_rewritten, n_original = split_counts(plan.total, plan.rewritten_fraction)
    rng = random.Random(plan.seed)
    chosen_rewritten = _draw(rewritten_pool, n_rewritten, "rewritten", rng)
    chosen_original = _draw(original_pool, n_original, "original", rng)

    if plan.category_constraints:
        chosen_by_pool = {"original": chosen_original, "rewritten": chosen_rewritten}
        unused_by_pool = {
            "original": [item for item in original_pool if item not in chosen_original],
            "rewritten": [item for item in rewritten_pool if item not in chosen_rewritten],
        }
        _enforce_constraints(
            chosen_by_pool, unused_by_pool, plan.category_constraints, plan.total, rng
        )

    combined = [item_id for item_id, _ in chosen_rewritten + chosen_original]
    rng.shuffle(combined)
    return combined


def export_manifest(
    ids: Sequence[str], sample_store: Mapping[str, Sample], path: Path | str
) -> int:
    """Write the samples in manifest order (training JSONL schema); count == len(ids)."""
    seen: set[str] = set()
    for item_id in ids:
        if item_id in seen:
            raise MixError(f"duplicate id in manifest: {item_id}")
        seen.add(item_id)
    unresolved = [item_id for item_id in ids if item_id not in sample_store]
    if unresolved:
        raise MixError(f"unresolved ids: {unresolved[:10]}")
    return write_samples(path, (sample_store[item_id] for item_id in ids))
