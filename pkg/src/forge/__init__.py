"""forge: rewrite terse multimodal Q&A into rationale-rich instruction data.

Pipeline stages: ingest -> screen -> rewrite -> judge -> score -> mix, each
resumable and deterministic under a fixed seed and a scripted mock endpoint.
"""

from .corpus import (
    Category,
    Provenance,
    QualityScore,
    Sample,
    ScreeningGroup,
    SourceSpec,
    Turn,
    validate_sample,
)

__version__ = "0.1.0"

__all__ = [
    "Category",
    "Provenance",
    "QualityScore",
    "Sample",
    "ScreeningGroup",
    "SourceSpec",
    "Turn",
    "validate_sample",
    "__version__",
]
