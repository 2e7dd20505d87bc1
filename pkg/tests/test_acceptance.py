"""Acceptance gate: every criterion below runs against the deterministic mock backend.

Test names carry their criterion number (test_c<N>_*); a summary section with
one pass/fail line per criterion is printed at the end of the pytest run.
"""

from __future__ import annotations

import random
import time
from pathlib import Path

import pytest

from forge.analytics import AgreementMatrix, aggregate_scores, cohens_kappa, substitution_analysis
from forge.filtering import filter_rates
from forge.ingest import ImageGeometry, standardize_geometry
from forge.inference import MULTIMODAL, MockTransport, build_request
from forge.mixer import MixPlan, mix, split_counts
from forge.parse import (
    ParseError,
    parse_angle_pairs,
    parse_dialogue,
    parse_hash_pairs,
    parse_revised_answer,
    parse_scores,
    parse_verdict,
)

from conftest import (
    build_project,
    golden_text,
    make_sample,
    mm_config,
    no_sleep_client,
    run_all_stages,
)
from test_analytics import PAIRWISE, kappa_oracle, synthetic_records_for

# --- criterion 1: filter-rate fixture ---------------------------------------------

PUBLISHED_RATES = [
    ("OCR", 1104960, 498337, 54.9),
    ("Chart", 7326189, 3782029, 48.4),
    ("GeneralQA", 1726180, 1584308, 8.2),
    pytest.param(
        "Caption", 244874, 199853, 18.3,
        marks=pytest.mark.xfail(
            strict=True,
            reason=(
                "fixture-internal inconsistency: 1 - 199853/244874 = 18.385%, "
                "which rounds to 18.4, not the published 18.3 (0.085pp off, "
                "tolerance is 0.05pp); every other row reproduces"
            ),
        ),
    ),
    ("Math", 590894, 518393, 12.3),
    ("Other", 1315039, 1178275, 10.4),
]


@pytest.mark.parametrize("category,before,after,expected_pct", PUBLISHED_RATES)
def test_c1_filter_rate_fixture(category, before, after, expected_pct):
    start = time.perf_counter()
    row = filter_rates([(category, before, after)])[0]
    assert abs(row.rate * 100 - expected_pct) <= 0.05, (
        f"{category}: computed {row.rate * 100:.4f}%, expected {expected_pct}%"
    )
    assert row.pct == expected_pct
    assert time.perf_counter() - start < 1.0


def test_c1_caption_rate_correct_rounding():
    # What the Caption counts actually yield, pinned so the xfail above stays honest.
    row = filter_rates([("Caption", 244874, 199853)])[0]
    assert row.pct == 18.4
    assert abs(row.rate - 0.18385374) < 1e-6


# --- criterion 2: agreement fixture ------------------------------------------------

def test_c2_agreement_fixture():
    start = time.perf_counter()
    matrix = AgreementMatrix(PAIRWISE)
    result = substitution_analysis(matrix, "M", ["E1", "E2", "E3"])
    assert abs(result["human_mean"] - 0.55) <= 0.005
    assert abs(result["substituted_mean"] - 0.64) <= 0.005
    assert time.perf_counter() - start < 1.0


# --- criterion 3: kappa vs brute-force oracle --------------------------------------

def test_c3_kappa_oracle_1000_random_pairs():
    rng = random.Random(20240831)
    relabel_pools = "wxyz", "PQRS", "0123"
    for trial in range(1000):
        n = rng.randint(2, 200)
        alphabet = "abcd"[: rng.randint(2, 4)]
        a = [rng.choice(alphabet) for _ in range(n)]
        b = [rng.choice(alphabet) for _ in range(n)]
        result = cohens_kappa(a, b)
        oracle = float(kappa_oracle(a, b))
        assert abs(result.kappa - oracle) < 1e-12, (trial, n, alphabet)
        # self-agreement
        assert cohens_kappa(a, a).kappa == 1.0
        # argument swap symmetry
        assert abs(cohens_kappa(b, a).kappa - result.kappa) < 1e-15
        # consistent relabeling invariance
        pool = relabel_pools[trial % 3]
        mapping = dict(zip("abcd", pool))
        relabeled = cohens_kappa([mapping[x] for x in a], [mapping[x] for x in b])
        assert abs(relabeled.kappa - result.kappa) < 1e-15


# --- criterion 4: parser fuzz + golden ---------------------------------------------

def _random_fuzz_corpus(count: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    markers = [
        "<Instruction:", "<Response:", ">", "##Instruction##:", "##Response##:",
        "Human:", "Assistant:", "Scenario:", "<response:", "Yes", "No",
        "Information Content Score (1-5):", "Relevance (1-5):", "\n", " ", "-",
    ]
    corpus = []
    for _ in range(count):
        if rng.random() < 0.5:
            # marker soup
            text = "".join(rng.choice(markers) for _ in range(rng.randint(0, 12)))
        else:
            # raw unicode (valid code points only; surrogates are not UTF-8)
            length = rng.randint(0, 60)
            chars = []
            for _ in range(length):
                cp = rng.randint(0, 0x10FFFF)
                while 0xD800 <= cp <= 0xDFFF:
                    cp = rng.randint(0, 0x10FFFF)
                chars.append(chr(cp))
            text = "".join(chars)
        corpus.append(text)
    return corpus


def test_c4_parser_fuzz_100k():
    start = time.perf_counter()
    corpus = _random_fuzz_corpus(100_000, seed=77)
    for text in corpus:
        for parser in (parse_angle_pairs, parse_hash_pairs, parse_dialogue):
            try:
                parser(text)
            except ParseError:
                pass
        try:
            parse_revised_answer(text, "q")
        except ParseError:
            pass
        parse_verdict(text)
        try:
            parse_scores(text)
        except ParseError:
            pass
    assert time.perf_counter() - start < 30.0


def test_c4_golden_cases_parse_into_expected_structures():
    caption = parse_angle_pairs(golden_text("caption_good.txt"))
    assert caption.pairs[0][0].startswith("Determine the artist's possible musical genre")
    assert parse_angle_pairs(golden_text("caption_bad.txt")).kind == "pairs"

    chart = parse_hash_pairs(golden_text("chart_good.txt"))
    assert chart.pairs[0][0].startswith("Analyze the global LNG market trends")
    chart_bad = parse_hash_pairs(golden_text("chart_bad.txt"))
    assert chart_bad.pairs[0][1].startswith("To calculate the average favorability")

    ocr = parse_dialogue(golden_text("ocr_good.txt"))
    assert len(ocr.dialogue) == 2 and ocr.scenario
    ocr_bad = parse_dialogue(golden_text("ocr_bad.txt"))
    assert ocr_bad.dialogue[0].role == "human"

    math_good = parse_revised_answer(golden_text("math_good.txt"), "angle QPS?")
    assert "x = 61" in math_good.revised
    math_bad = parse_revised_answer(golden_text("math_bad.txt"), "angle 3?")
    assert math_bad.revised.endswith("The answer is D.")


# --- criterion 5: image standardization property suite -----------------------------

def test_c5_geometry_property_suite_10k():
    start = time.perf_counter()
    rng = random.Random(424242)
    for _ in range(10_000):
        g = ImageGeometry(rng.randint(1, 50_000), rng.randint(1, 50_000))
        report = standardize_geometry(g)
        out = report.output
        assert 224 <= out.width <= 4096, (g, out)
        assert 224 <= out.height <= 4096, (g, out)
        assert max(out.width, out.height) <= 7 * min(out.width, out.height), (g, out)
        again = standardize_geometry(out)
        assert again.actions == ("none",), (g, out, again.actions)
    assert time.perf_counter() - start < 5.0


# --- criterion 6: end-to-end determinism -------------------------------------------

class KillSwitch(Exception):
    pass


def _manifest_bytes(output_root: Path) -> bytes:
    return (output_root / "manifests" / "mix.jsonl").read_bytes()


def test_c6_end_to_end_determinism_and_resume(tmp_path):
    start = time.perf_counter()
    n_per_source = 50  # 4 ingested sources -> 200-sample synthetic corpus
    mix_total, mix_fraction = 100, 0.7

    env_a = build_project(tmp_path / "a", n_per_source, mix_total=mix_total,
                          mix_fraction=mix_fraction)
    env_b = build_project(tmp_path / "b", n_per_source, mix_total=mix_total,
                          mix_fraction=mix_fraction)
    run_all_stages(env_a["config"])
    run_all_stages(env_b["config"])
    reference = _manifest_bytes(env_a["output_root"])
    assert reference == _manifest_bytes(env_b["output_root"])

    # third run: kill the rewrite stage at 50% of its calls, then resume
    from forge import pipeline
    from forge.config import load_config
    from forge.inference import EndpointPool, MockTransport
    from forge.prompts import load_registry as load_templates
    from forge.rewrite import run_rewrite_stage
    from conftest import MM_MOCK_RULES, TEXT_MOCK_RULES, mm_config, text_config

    env_c = build_project(tmp_path / "c", n_per_source, mix_total=mix_total,
                          mix_fraction=mix_fraction)
    cfg = load_config(env_c["config"])
    store = pipeline.open_store(cfg)
    pipeline.ingest_stage(cfg)
    input_path = pipeline._group_b_input(cfg, store)
    group_b_total = sum(1 for _ in open(input_path, encoding="utf-8"))

    def fault(call_index: int) -> None:
        if call_index >= group_b_total // 2:
            raise KillSwitch("simulated mid-stage crash")

    dying_mm = MockTransport(
        rules=[(r["contains"], r["text"]) for r in MM_MOCK_RULES], fault=fault
    )
    healthy_text = MockTransport(
        rules=[(r["contains"], r["text"]) for r in TEXT_MOCK_RULES]
    )
    dying_pool = EndpointPool([
        no_sleep_client(mm_config(model_name="mm-model"), dying_mm),
        no_sleep_client(text_config(model_name="text-model"), healthy_text),
    ])
    with pytest.raises(KillSwitch):
        run_rewrite_stage(
            input_path,
            store.rewritten_path,
            dying_pool,
            load_templates(cfg.template_overrides),
            pair_num=cfg.pair_num,
            media_root=cfg.media_root,
            temperature=cfg.temperature_for("rewrite"),
            max_workers=cfg.max_workers,
        )
    done_before_resume = len(
        [line for line in store.rewritten_path.with_suffix(".outcomes.jsonl")
         .read_text(encoding="utf-8").splitlines() if line.strip()]
    )
    assert 0 < done_before_resume < group_b_total  # genuinely interrupted mid-stage

    pipeline.rewrite_stage(cfg)
    pipeline.judge_stage(cfg)
    pipeline.score_stage(cfg)
    pipeline.mix_stage(cfg)
    assert _manifest_bytes(env_c["output_root"]) == reference

    # the rewrite outputs themselves are byte-identical too, not just the mix
    assert (env_c["output_root"] / "samples" / "rewritten" / "rewritten.jsonl").read_bytes() == (
        env_a["output_root"] / "samples" / "rewritten" / "rewritten.jsonl"
    ).read_bytes()
    assert time.perf_counter() - start < 60.0


# --- criterion 7: mix exactness ----------------------------------------------------

@pytest.mark.parametrize(
    "total,fraction,expected_rewritten",
    [(10, 0.7, 7), (3, 0.5, 2), (1000, 0.3, 300)],
)
def test_c7_mix_split_exactness(total, fraction, expected_rewritten):
    assert split_counts(total, fraction) == (expected_rewritten, total - expected_rewritten)

    originals = [f"o{i}" for i in range(max(total, 1200))]
    rewrites = [f"r{i}" for i in range(max(total, 1200))]
    selections = []
    for seed in (1, 2, 3):
        ids = mix(originals, rewrites, MixPlan(total=total, rewritten_fraction=fraction,
                                               seed=seed))
        n_rw = sum(1 for i in ids if i.startswith("r"))
        assert n_rw == expected_rewritten
        assert len(ids) == total
        selections.append(tuple(ids))
    assert len(set(selections)) == 3  # seed changes selection/order, never the split


# --- criterion 8: score aggregation fixture ----------------------------------------

def test_c8_score_aggregation_fixture():
    records = []
    for i in range(10):
        records += synthetic_records_for(f"src{i:02d}", "original", 3.5, 4.2)
        records += synthetic_records_for(f"src{i:02d}", "rewritten", 3.8, 4.4)
    report = aggregate_scores(records)
    for provenance, content_target, relevance_target in (
        ("original", 3.5, 4.2),
        ("rewritten", 3.8, 4.4),
    ):
        for view in ("overall", "source_means"):
            assert abs(report[view][provenance]["content"] - content_target) <= 0.05
            assert abs(report[view][provenance]["relevance"] - relevance_target) <= 0.05


# --- criterion 9: concurrency bound ------------------------------------------------

def test_c9_concurrency_bound_1k_requests():
    import threading

    limit = 8
    transport = MockTransport(default="Yes", latency=(0.0, 0.002), seed=99)
    client = no_sleep_client(mm_config(max_concurrent=limit), transport)
    request = build_request("probe", MULTIMODAL)
    errors: list[Exception] = []

    def worker(count: int) -> None:
        try:
            for _ in range(count):
                client.complete(request)
        except Exception as exc:  # pragma: no cover - fail loudly below
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(40,)) for _ in range(25)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert transport.calls == 1000
    assert transport.max_in_flight <= limit
    assert transport.max_in_flight >= 2  # it actually ran concurrently


def test_c9_output_independent_of_arrival_order(tmp_path):
    from forge.filtering import run_judge_stage
    from forge.ingest import write_samples
    from forge.prompts import builtin_registry
    from forge.corpus import Category, Provenance

    samples = [
        make_sample(f"<image>\nq{i}", f"a{i}", category=Category.CHART,
                    provenance=Provenance.REWRITTEN, parent_id="00ff" * 8, record_key=i)
        for i in range(60)
    ]
    template = builtin_registry()["judge"]
    responder = lambda m, p: "Yes" if "q1" in p or "q3" in p else "No"

    outputs = []
    for latency_seed in (5, 6):
        root = tmp_path / f"run{latency_seed}"
        root.mkdir()
        input_path = root / "in.jsonl"
        write_samples(input_path, samples)
        transport = MockTransport(responder=responder, latency=(0.0, 0.003),
                                  seed=latency_seed)
        client = no_sleep_client(mm_config(max_concurrent=6), transport)
        run_judge_stage(input_path, root / "kept.jsonl", root / "verdicts.jsonl",
                        client, template, max_workers=6)
        outputs.append((
            (root / "kept.jsonl").read_bytes(),
            (root / "verdicts.jsonl").read_bytes(),
        ))
    assert outputs[0] == outputs[1]
