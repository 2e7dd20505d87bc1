from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from forge.analytics import (
    AgreementMatrix,
    ConfigError,
    aggregate_scores,
    cohens_kappa,
    length_histogram,
    score_sample,
    substitution_analysis,
    token_length,
)
from forge.corpus import QualityScore
from forge.inference import MockTransport
from forge.prompts import builtin_registry

from conftest import golden_json, make_sample, mm_config, no_sleep_client

# Pairwise kappas between the judge (M) and three human raters, as published.
PAIRWISE = {
    ("M", "E1"): 0.73,
    ("M", "E2"): 0.70,
    ("M", "E3"): 0.63,
    ("E1", "E2"): 0.70,
    ("E1", "E3"): 0.42,
    ("E2", "E3"): 0.53,
}


def kappa_oracle(a, b) -> Fraction:
    """Brute-force contingency-table kappa in exact rational arithmetic."""
    n = len(a)
    labels = sorted(set(a) | set(b), key=repr)
    table = {(x, y): 0 for x in labels for y in labels}
    for x, y in zip(a, b):
        table[(x, y)] += 1
    p_o = Fraction(sum(table[(x, x)] for x in labels), n)
    p_e = Fraction(0)
    for label in labels:
        row = sum(table[(label, y)] for y in labels)
        col = sum(table[(x, label)] for x in labels)
        p_e += Fraction(row, n) * Fraction(col, n)
    if p_e == 1:
        return Fraction(1)
    return (p_o - p_e) / (1 - p_e)


class TestCohensKappa:
    def test_identical_vectors(self):
        result = cohens_kappa(["G", "B", "G"], ["G", "B", "G"])
        assert result.kappa == 1.0

    def test_perfect_disagreement(self):
        result = cohens_kappa(list("GGBB"), list("BBGG"))
        assert result.observed_agreement == 0.0
        assert result.expected_agreement == 0.5
        assert result.kappa == -1.0

    def test_hand_computed_contingency(self):
        # p_o = 4/6, p_e = 1/2, kappa = (4/6 - 1/2) / (1/2) = 1/3
        result = cohens_kappa(list("GGGBBB"), list("GGBBBG"))
        assert math.isclose(result.observed_agreement, 4 / 6, rel_tol=0, abs_tol=1e-15)
        assert result.expected_agreement == 0.5
        assert math.isclose(result.kappa, 1 / 3, rel_tol=0, abs_tol=1e-15)

    def test_constant_identical_raters(self):
        result = cohens_kappa(["x", "x"], ["x", "x"])
        assert result.kappa == 1.0
        assert result.expected_agreement == 1.0

    def test_constant_different_raters(self):
        result = cohens_kappa(["x", "x"], ["y", "y"])
        assert result.kappa == 0.0  # p_o = 0, p_e = 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cohens_kappa([1], [1, 2])

    def test_empty(self):
        with pytest.raises(ValueError):
            cohens_kappa([], [])

    @given(
        st.integers(min_value=1, max_value=60).flatmap(
            lambda n: st.tuples(
                st.lists(st.sampled_from("abcd"), min_size=n, max_size=n),
                st.lists(st.sampled_from("abcd"), min_size=n, max_size=n),
            )
        )
    )
    @settings(max_examples=300)
    def test_matches_oracle_and_invariances(self, vectors):
        a, b = vectors
        result = cohens_kappa(a, b)
        assert abs(result.kappa - float(kappa_oracle(a, b))) < 1e-12
        # symmetry
        assert cohens_kappa(b, a).kappa == pytest.approx(result.kappa, abs=1e-15)
        # consistent relabeling leaves kappa unchanged
        mapping = {"a": "w", "b": "x", "c": "y", "d": "z"}
        relabeled = cohens_kappa([mapping[x] for x in a], [mapping[x] for x in b])
        assert relabeled.kappa == pytest.approx(result.kappa, abs=1e-15)
        # self-agreement
        assert cohens_kappa(a, a).kappa == 1.0
        # the stored decomposition is consistent
        if result.expected_agreement < 1.0:
            recomputed = (result.observed_agreement - result.expected_agreement) / (
                1.0 - result.expected_agreement
            )
            assert abs(recomputed - result.kappa) < 1e-12


class TestSubstitutionAnalysis:
    def test_published_matrix_reproduces_means(self):
        matrix = AgreementMatrix(PAIRWISE)
        result = substitution_analysis(matrix, "M", ["E1", "E2", "E3"])
        assert result["human_mean"] == pytest.approx(0.55, abs=1e-9)
        assert result["substituted_mean"] == pytest.approx(0.64, abs=0.005)

    def test_uniform_matrix(self):
        values = {pair: 0.4 for pair in PAIRWISE}
        result = substitution_analysis(AgreementMatrix(values), "M", ["E1", "E2", "E3"])
        assert result["human_mean"] == pytest.approx(0.4)
        assert result["substituted_mean"] == pytest.approx(0.4)

    def test_requires_two_humans(self):
        matrix = AgreementMatrix({("M", "E1"): 0.5})
        with pytest.raises(ValueError):
            substitution_analysis(matrix, "M", ["E1"])

    def test_requires_model_in_matrix(self):
        matrix = AgreementMatrix({("E1", "E2"): 0.5})
        with pytest.raises(ValueError):
            substitution_analysis(matrix, "M", ["E1", "E2"])

    def test_matrix_is_symmetric_store(self):
        matrix = AgreementMatrix(PAIRWISE)
        assert matrix.get("E2", "M") == matrix.get("M", "E2") == 0.70

    def test_two_humans_plus_model(self):
        matrix = AgreementMatrix({("M", "h1"): 0.8, ("M", "h2"): 0.6, ("h1", "h2"): 0.5})
        result = substitution_analysis(matrix, "M", ["h1", "h2"])
        assert result["human_mean"] == pytest.approx(0.5)
        assert result["substituted_mean"] == pytest.approx(0.7)

    def test_from_labels(self):
        labels = {
            "h1": {"s1": "good", "s2": "bad", "s3": "good"},
            "h2": {"s1": "good", "s2": "bad", "s3": "bad"},
        }
        matrix = AgreementMatrix.from_labels(labels)
        assert matrix.get("h1", "h2") == pytest.approx(
            float(kappa_oracle(["good", "bad", "good"], ["good", "bad", "bad"]))
        )


class TestTokenLength:
    def test_whitespace_rule(self):
        s = make_sample("What is shown?", "A cat.", media=())
        assert token_length(s) == 5

    def test_single_token(self):
        s = make_sample(turns=(make_sample().turns[0].__class__("human", "x"),), media=())
        assert token_length(s) == 1

    def test_unknown_tag(self):
        with pytest.raises(ConfigError):
            token_length(make_sample(), tokenizer_tag="bpe-unregistered")

    def test_histogram_counts(self):
        assert length_histogram([5, 15], 10) == [(0, 1), (10, 1)]

    def test_histogram_total_equals_sample_count(self):
        lengths = [1, 9, 10, 11, 57, 57, 300]
        rows = length_histogram(lengths, 25)
        assert sum(count for _, count in rows) == len(lengths)


class TestInstructionExport:
    def test_one_flattened_instruction_per_line(self, tmp_path):
        from forge.analytics import export_instruction_sample

        samples = [make_sample(f"<image>\nfirst line {i}\nsecond line", f"a{i}",
                               record_key=i) for i in range(4)]
        path = tmp_path / "instructions.txt"
        assert export_instruction_sample(samples, path) == 4
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "first line 0 second line"
        assert all("<image>" not in line for line in lines)

    def test_seeded_subsample(self, tmp_path):
        from forge.analytics import export_instruction_sample

        samples = [make_sample(f"<image>\nq{i}", "a", record_key=i) for i in range(50)]
        path_a, path_b = tmp_path / "a.txt", tmp_path / "b.txt"
        assert export_instruction_sample(samples, path_a, n=10, seed=1) == 10
        assert export_instruction_sample(samples, path_b, n=10, seed=1) == 10
        assert path_a.read_bytes() == path_b.read_bytes()


class TestScoreSample:
    def test_nominal(self):
        transport = MockTransport(
            default="1. Information Content Score (1-5): 4\n2. Relevance (1-5): 5"
        )
        client = no_sleep_client(mm_config(), transport)
        score = score_sample(make_sample(), client, builtin_registry()["score"])
        assert score == QualityScore(4, 5)

    def test_garbage_twice_is_missing(self):
        transport = MockTransport(default="I cannot rate this.")
        client = no_sleep_client(mm_config(), transport)
        score = score_sample(make_sample(), client, builtin_registry()["score"])
        assert score is None
        assert transport.calls == 2

    def test_request_failure_is_missing(self):
        transport = MockTransport(default="x", fail_first=99)
        client = no_sleep_client(mm_config(retry_limit=0), transport)
        assert score_sample(make_sample(), client, builtin_registry()["score"]) is None


def synthetic_records_for(source_id: str, provenance: str, content_mean: float,
                          relevance_mean: float) -> list[dict]:
    """Ten integer-score records whose means equal the requested one-decimal targets."""

    def tenths(mean: float) -> list[int]:
        low = int(mean)
        high_count = round((mean - low) * 10)
        return [low + 1] * high_count + [low] * (10 - high_count)

    return [
        {
            "sample_id": f"{source_id}-{provenance}-{i}",
            "source_id": source_id,
            "provenance": provenance,
            "content": c,
            "relevance": r,
        }
        for i, (c, r) in enumerate(zip(tenths(content_mean), tenths(relevance_mean)))
    ]


class TestAggregateScores:
    def test_engineered_store_reproduces_target_means(self):
        records = []
        for i in range(8):
            records += synthetic_records_for(f"src{i}", "original", 3.5, 4.2)
            records += synthetic_records_for(f"src{i}", "rewritten", 3.8, 4.4)
        report = aggregate_scores(records)
        assert report["overall"]["original"]["content"] == pytest.approx(3.5, abs=0.05)
        assert report["overall"]["original"]["relevance"] == pytest.approx(4.2, abs=0.05)
        assert report["overall"]["rewritten"]["content"] == pytest.approx(3.8, abs=0.05)
        assert report["overall"]["rewritten"]["relevance"] == pytest.approx(4.4, abs=0.05)
        assert report["source_means"]["original"]["sources"] == 8

    def test_full_source_table_regression(self):
        table = golden_json("source_score_table.json")
        records = []
        for source_id, oc, orel, rc, rrel in table["rows"]:
            records += synthetic_records_for(source_id, "original", oc, orel)
            records += synthetic_records_for(source_id, "rewritten", rc, rrel)
        report = aggregate_scores(records)
        means = report["source_means"]
        # Unweighted means over the 59 per-source rows, frozen from exact arithmetic.
        assert means["original"]["content"] == pytest.approx(3.5288, abs=5e-4)
        assert means["original"]["relevance"] == pytest.approx(4.2017, abs=5e-4)
        assert means["rewritten"]["content"] == pytest.approx(3.7831, abs=5e-4)
        assert means["rewritten"]["relevance"] == pytest.approx(4.3475, abs=5e-4)
        # Rewritten pool scores higher than the original on both axes.
        assert means["rewritten"]["content"] > means["original"]["content"]
        assert means["rewritten"]["relevance"] > means["original"]["relevance"]

    def test_permutation_invariance(self):
        records = synthetic_records_for("a", "original", 3.1, 4.0) + synthetic_records_for(
            "b", "original", 4.9, 2.2
        )
        forward = aggregate_scores(records)
        backward = aggregate_scores(list(reversed(records)))
        assert forward == backward

    def test_missing_rows_counted_not_averaged(self):
        records = synthetic_records_for("a", "original", 3.0, 3.0)
        records.append(
            {"sample_id": "x", "source_id": "a", "provenance": "original",
             "content": None, "relevance": None}
        )
        report = aggregate_scores(records)
        assert report["overall"]["original"]["content"] == pytest.approx(3.0)
        assert report["missing"] == {"original": 1}
