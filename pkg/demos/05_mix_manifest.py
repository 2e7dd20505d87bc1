"""Seeded ratio mixing: 70% rewritten / 30% original, reproducibly.

Same pools + same plan => byte-identical manifest. Changing only the seed
reshuffles the selection but never the split.
"""

import tempfile
from pathlib import Path

from forge.corpus import Category, Provenance, Sample, Turn, original_sample_id
from forge.mixer import MixPlan, export_manifest, mix, split_counts


def sample(source: str, i: int, provenance: Provenance) -> Sample:
    parent = original_sample_id(source, i)
    return Sample(
        id=parent if provenance is Provenance.ORIGINAL else f"rw{parent[:28]}",
        source_id=source,
        category=Category.GENERAL,
        media=("img/x.jpg",),
        turns=(Turn("human", f"<image>\nq{i}"), Turn("assistant", f"a{i}")),
        provenance=provenance,
        parent_id=None if provenance is Provenance.ORIGINAL else parent,
    )


originals = [sample("orig", i, Provenance.ORIGINAL) for i in range(200)]
rewrites = [sample("rw", i, Provenance.REWRITTEN) for i in range(400)]
store = {s.id: s for s in originals + rewrites}

for total, fraction in [(10, 0.7), (3, 0.5), (100, 0.3)]:
    n_rw, n_or = split_counts(total, fraction)
    print(f"total {total:>4} at fraction {fraction}: {n_rw} rewritten + {n_or} original")

plan = MixPlan(total=50, rewritten_fraction=0.7, seed=7)
ids_a = mix(originals, rewrites, plan)
ids_b = mix(originals, rewrites, plan)
assert ids_a == ids_b
print("\nsame plan twice -> identical selection and order")

other_seed = mix(originals, rewrites, MixPlan(total=50, rewritten_fraction=0.7, seed=8))
assert other_seed != ids_a
assert sum(1 for i in other_seed if i.startswith("rw")) == 35
print("seed 8 -> different selection, identical 35/15 split")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "manifest.jsonl"
    count = export_manifest(ids_a, store, path)
    print(f"\nwrote {count} samples to {path.name} in manifest order")
    print("first line id:", ids_a[0])
