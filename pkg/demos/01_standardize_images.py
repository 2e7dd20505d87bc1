"""Walk through the image-geometry standardization rules.

Every image must land with both dimensions in [224, 4096] and an aspect ratio
of at most 7:1. The repair is a single uniform scale (aspect-preserving)
followed, only when needed, by padding the short side with solid white.
"""

from forge.ingest import ImageGeometry, standardize_geometry

CASES = [
    (300, 300),     # already fine: no-op
    (100, 100),     # too small: upscale to the 224 floor
    (8000, 1000),   # too large AND too wide: downscale, then pad the height
    (100, 4000),    # tiny width, tall: capped upscale, then pad the width
    (1, 100),       # pathological sliver
    (50000, 50000), # giant square: pure downscale
]

print(f"{'input':>14}  {'output':>12}  actions")
for w, h in CASES:
    report = standardize_geometry(ImageGeometry(w, h))
    out = report.output
    print(f"{w:>6} x {h:<5}  {out.width:>5} x {out.height:<4}  {', '.join(report.actions)}")

# Idempotence: feeding any output back through is always a no-op.
for w, h in CASES:
    out = standardize_geometry(ImageGeometry(w, h)).output
    assert standardize_geometry(out).actions == ("none",)
print("\nevery output is a fixed point of the transform")
