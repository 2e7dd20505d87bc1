"""Quality-score aggregation, token-length distributions, and rater agreement."""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Any

from .corpus import QualityScore, Sample
from .inference import EndpointClient, MULTIMODAL, RequestFailed, build_request
from .parse import ScoreParseError, parse_scores
from .prompts import PromptTemplate, render

log = logging.getLogger(__name__)


class ConfigError(Exception):
    pass


# --- Cohen's kappa -------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class KappaComputation:
    observed_agreement: float  # p_o
    expected_agreement: float  # p_e
    kappa: float


def cohens_kappa(a: Sequence[Any], b: Sequence[Any]) -> KappaComputation:
    """Chance-corrected agreement between two raters over the same items.

    p_o is the fraction of equal labels; p_e sums the product of the raters'
    per-label marginals; kappa = (p_o - p_e) / (1 - p_e). Computed from exact
    integer counts with a single final division, so results are reproducible
    to the last float digit. Both raters constant and identical (p_e = 1) is
    defined as kappa = 1.
    """
    if len(a) != len(b):
        raise ValueError(f"label vectors differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n == 0:
        raise ValueError("label vectors must be non-empty")
    equal = sum(1 for x, y in zip(a, b) if x == y)
    counts_a = Counter(a)
    counts_b = Counter(b)
    pe_numerator = sum(counts_a[label] * counts_b.get(label, 0) for label in counts_a)
    n_squared = n * n
    if pe_numerator == n_squared:
        if equal != n:  # unreachable for real inputs; flagged rather than silently wrong
            raise ValueError("degenerate agreement: constant raters that disagree")
        return KappaComputation(1.0, 1.0, 1.0)
    kappa = (equal * n - pe_numerator) / (n_squared - pe_numerator)
    return KappaComputation(equal / n, pe_numerator / n_squared, kappa)


class AgreementMatrix:
    """Symmetric pairwise kappa values; the diagonal is undefined."""

    def __init__(self, values: Mapping[tuple[str, str], float]) -> None:
        self._values: dict[frozenset[str], float] = {}
        raters: set[str] = set()
        for (a, b), value in values.items():
            if a == b:
                raise ValueError(f"diagonal entry for rater {a!r} is undefined")
            key = frozenset((a, b))
            existing = self._values.get(key)
            if existing is not None and existing != value:
                raise ValueError(f"conflicting kappa for pair ({a}, {b})")
            self._values[key] = value
            raters.update((a, b))
        self.raters = sorted(raters)

    def get(self, a: str, b: str) -> float:
        try:
            return self._values[frozenset((a, b))]
        except KeyError:
            raise KeyError(f"no kappa recorded for pair ({a}, {b})") from None

    def has(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self._values

    def to_rows(self) -> list[dict[str, Any]]:
        rows = []
        for a, b in combinations(self.raters, 2):
            if self.has(a, b):
                rows.append({"rater_a": a, "rater_b": b, "kappa": self.get(a, b)})
        return rows

    @classmethod
    def from_labels(
        cls, labels_by_rater: Mapping[str, Mapping[str, Any]], min_overlap: int = 1
    ) -> "AgreementMatrix":
        """Pairwise kappa over each rater pair's common items (sorted item order)."""
        values: dict[tuple[str, str], float] = {}
        for a, b in combinations(sorted(labels_by_rater), 2):
            common = sorted(set(labels_by_rater[a]) & set(labels_by_rater[b]))
            if len(common) < min_overlap:
                continue
            va = [labels_by_rater[a][item] for item in common]
            vb = [labels_by_rater[b][item] for item in common]
            values[(a, b)] = cohens_kappa(va, vb).kappa
        return cls(values)


def substitution_analysis(
    matrix: AgreementMatrix, model_id: str, human_ids: Sequence[str]
) -> dict[str, Any]:
    """Mean human-human kappa vs the mean after swapping the model in for each human.

    For every human h, the model replaces h and the mean pairwise kappa of the
    resulting rater set is taken; `substituted_mean` averages those means.
    """
    humans = sorted(human_ids)
    if model_id not in matrix.raters:
        raise ValueError(f"matrix does not cover model rater {model_id!r}")
    if len(humans) < 2:
        raise ValueError("substitution analysis needs at least two human raters")
    human_pairs = list(combinations(humans, 2))
    human_mean = sum(matrix.get(a, b) for a, b in human_pairs) / len(human_pairs)

    per_combination: dict[str, float] = {}
    for dropped in humans:
        group = [model_id] + [h for h in humans if h != dropped]
        pairs = list(combinations(group, 2))
        per_combination[dropped] = sum(matrix.get(a, b) for a, b in pairs) / len(pairs)
    substituted_mean = sum(per_combination.values()) / len(per_combination)
    return {
        "human_mean": human_mean,
        "substituted_mean": substituted_mean,
        "per_combination": per_combination,
    }


# --- token lengths --------------------------------------------------------------

def _whitespace_tokens(text: str) -> int:
    return len(text.split())


_TOKENIZERS: dict[str, Callable[[str], int]] = {"whitespace": _whitespace_tokens}


def register_tokenizer(tag: str, fn: Callable[[str], int]) -> None:
    _TOKENIZERS[tag] = fn


def token_length(sample: Sample, tokenizer_tag: str = "whitespace") -> int:
    """Instruction + response length: token count summed over all turns."""
    tokenizer = _TOKENIZERS.get(tokenizer_tag)
    if tokenizer is None:
        raise ConfigError(f"unknown tokenizer_tag {tokenizer_tag!r}")
    return sum(tokenizer(turn.text) for turn in sample.turns)


def length_histogram(lengths: Iterable[int], bucket_width: int) -> list[tuple[int, int]]:
    """(bucket_start, count) rows; total count equals the number of inputs."""
    if bucket_width < 1:
        raise ValueError("bucket_width must be >= 1")
    counts: Counter[int] = Counter((length // bucket_width) * bucket_width for length in lengths)
    return sorted(counts.items())


def histogram_to_csv(rows: Iterable[tuple[int, int]], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket_start", "count"])
        writer.writerows(rows)


def export_instruction_sample(
    samples: Iterable[Sample], path: Path | str, n: int = 80_000, seed: int = 0
) -> int:
    """Seeded draw of instruction texts, one per line, for external embedding tools.

    Instructions are the human turns with media placeholder tokens stripped and
    newlines flattened; the draw is uniform without replacement.
    """
    import random

    from .rewrite import strip_media_tokens

    texts: list[str] = []
    for sample in samples:
        for turn in sample.turns:
            if turn.role == "human":
                flat = " ".join(strip_media_tokens(turn.text).split())
                if flat:
                    texts.append(flat)
                break  # first instruction characterizes the sample
    if len(texts) > n:
        texts = random.Random(seed).sample(texts, n)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(texts) + ("\n" if texts else ""), encoding="utf-8")
    return len(texts)


# --- model-based quality scoring -------------------------------------------------

def score_sample(
    sample: Sample,
    client: EndpointClient,
    template: PromptTemplate,
    media_root: Path | str | None = None,
    temperature: float = 0.0,
) -> QualityScore | None:
    """Score one sample via the endpoint; one retry on parse failure, then missing."""
    from .rewrite import media_paths, serialize_qa  # local import avoids a cycle

    if client.cfg.kind != MULTIMODAL:
        raise ConfigError("scoring requires a multimodal endpoint")
    prompt = render(template, {"qa_text": serialize_qa(sample)})
    request = build_request(
        prompt, MULTIMODAL, media_paths(sample, media_root), temperature=temperature
    )
    for attempt in (1, 2):
        try:
            response = client.complete(request)
        except RequestFailed as exc:
            log.warning("scoring %s failed: %s", sample.id, exc)
            return None
        try:
            return parse_scores(response.text)
        except ScoreParseError as exc:
            if attempt == 1:
                log.info("re-asking scorer for %s: %s", sample.id, exc)
                continue
            log.warning("unparseable score for %s twice: %s", sample.id, exc)
    return None


# --- score aggregation -----------------------------------------------------------

def aggregate_scores(records: Iterable[Mapping[str, Any]]) -> dict[str, Any]:
    """Mean content/relevance per provenance, per source, and source-weighted.

    A record holds {source_id, provenance, content, relevance}; rows whose
    scores are missing are counted but excluded from means. Ordering in the
    report is sorted, so aggregation is permutation-invariant byte for byte.
    """
    sums: dict[tuple[str, str], list[float]] = defaultdict(lambda: [0.0, 0.0, 0])
    missing: Counter[str] = Counter()
    for record in records:
        provenance = str(record["provenance"])
        if record.get("content") is None or record.get("relevance") is None:
            missing[provenance] += 1
            continue
        key = (str(record["source_id"]), provenance)
        bucket = sums[key]
        bucket[0] += float(record["content"])
        bucket[1] += float(record["relevance"])
        bucket[2] += 1

    per_source: dict[str, dict[str, Any]] = {}
    overall: dict[str, list[float]] = defaultdict(lambda: [0.0, 0.0, 0])
    source_means: dict[str, list[float]] = defaultdict(lambda: [0.0, 0.0, 0])
    for (source_id, provenance), (content_sum, relevance_sum, count) in sorted(sums.items()):
        content_mean = content_sum / count
        relevance_mean = relevance_sum / count
        per_source.setdefault(source_id, {})[provenance] = {
            "content": content_mean,
            "relevance": relevance_mean,
            "samples": count,
        }
        overall[provenance][0] += content_sum
        overall[provenance][1] += relevance_sum
        overall[provenance][2] += count
        source_means[provenance][0] += content_mean
        source_means[provenance][1] += relevance_mean
        source_means[provenance][2] += 1

    def finish(acc: Mapping[str, list[float]], count_key: str) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for provenance in sorted(acc):
            content_total, relevance_total, count = acc[provenance]
            out[provenance] = {
                "content": content_total / count,
                "relevance": relevance_total / count,
                count_key: count,
            }
        return out

    return {
        "per_source": per_source,
        "overall": finish(overall, "samples"),
        "source_means": finish(source_means, "sources"),
        "missing": {k: missing[k] for k in sorted(missing)},
    }
