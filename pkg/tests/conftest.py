from __future__ import annotations

import json
import re
from collections import defaultdict
from pathlib import Path

import pytest

CRITERION_TITLES = {
    1: "filter-rate fixture reproduces published per-category rates",
    2: "agreement fixture reproduces human/substituted kappa means",
    3: "cohens_kappa matches brute-force oracle with invariances",
    4: "parsers survive 100k fuzz inputs and match golden cases",
    5: "image standardization bounds/ratio/idempotence over 10k geometries",
    6: "end-to-end determinism incl. kill-and-resume byte identity",
    7: "mix split exactness under round-half-up across seeds",
    8: "score aggregation reproduces fixture pool means",
    9: "concurrency bound holds; output independent of arrival order",
}

_acceptance_outcomes: dict[int, list[str]] = defaultdict(list)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or report.when != "call":
        return
    match = re.search(r"test_c(\d+)", report.nodeid)
    if not match:
        return
    criterion = int(match.group(1))
    if hasattr(report, "wasxfail"):
        _acceptance_outcomes[criterion].append("xfail")
    elif report.passed:
        _acceptance_outcomes[criterion].append("pass")
    else:
        _acceptance_outcomes[criterion].append("fail")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_acceptance_outcomes):
        outcomes = _acceptance_outcomes[criterion]
        if "fail" in outcomes:
            status = "FAIL"
        elif "xfail" in outcomes:
            status = "PASS (with documented fixture inconsistency, see xfail)"
        else:
            status = "PASS"
        terminalreporter.write_line(
            f"criterion {criterion}: {status} - {CRITERION_TITLES.get(criterion, '')}"
        )

from forge.corpus import (
    Category,
    Provenance,
    Sample,
    Turn,
    original_sample_id,
)
from forge.inference import (
    MULTIMODAL,
    TEXT_ONLY,
    EndpointClient,
    EndpointConfig,
    EndpointPool,
    MockTransport,
)

GOLDEN_DIR = Path(__file__).parent / "golden"


def golden_text(name: str) -> str:
    return (GOLDEN_DIR / name).read_text(encoding="utf-8")


def golden_json(name: str) -> dict:
    return json.loads((GOLDEN_DIR / name).read_text(encoding="utf-8"))


def make_sample(
    question: str = "<image>\nWhat is shown?",
    answer: str = "A cat.",
    category: Category = Category.GENERAL,
    source_id: str = "src",
    media: tuple[str, ...] = ("img/0.jpg",),
    provenance: Provenance = Provenance.ORIGINAL,
    parent_id: str | None = None,
    record_key: object = 0,
    turns: tuple[Turn, ...] | None = None,
) -> Sample:
    if turns is None:
        turns = (Turn("human", question), Turn("assistant", answer))
    return Sample(
        id=original_sample_id(source_id, record_key),
        source_id=source_id,
        category=category,
        media=media,
        turns=turns,
        provenance=provenance,
        parent_id=parent_id,
    )


def mm_config(**overrides) -> EndpointConfig:
    defaults = dict(
        base_url="mock:mm",
        model_name="mm-model",
        kind=MULTIMODAL,
        max_concurrent=4,
        timeout=5.0,
        retry_limit=3,
        temperature=0.0,
    )
    defaults.update(overrides)
    return EndpointConfig(**defaults)


def text_config(**overrides) -> EndpointConfig:
    defaults = dict(
        base_url="mock:text",
        model_name="text-model",
        kind=TEXT_ONLY,
        max_concurrent=4,
        timeout=5.0,
        retry_limit=3,
        temperature=0.0,
    )
    defaults.update(overrides)
    return EndpointConfig(**defaults)


def no_sleep_client(cfg: EndpointConfig, transport: MockTransport) -> EndpointClient:
    return EndpointClient(cfg, transport, sleep=lambda _s: None)


@pytest.fixture()
def mock_pool():
    """(pool, mm_transport, text_transport) with configurable responders."""

    def build(mm_responder=None, text_responder=None, mm_default=None, text_default=None):
        mm_transport = MockTransport(responder=mm_responder, default=mm_default)
        text_transport = MockTransport(responder=text_responder, default=text_default)
        pool = EndpointPool(
            [
                no_sleep_client(mm_config(), mm_transport),
                no_sleep_client(text_config(), text_transport),
            ]
        )
        return pool, mm_transport, text_transport

    return build


# --- full offline project environment -------------------------------------------

CHART_REWRITE_TEXT = (
    "##Instruction##: alpha inspect series {prompt_sha8}\n"
    "##Response##: The alpha series rises steadily across the chart.\n"
    "##Instruction##: omega compare series {prompt_sha8}\n"
    "##Response##: The omega comparison shows a mild decline."
)
OCR_REWRITE_TEXT = (
    "Scenario: a clerk reviews a scanned page {prompt_sha8}\n"
    "Human: what stands out on the page\n"
    "Assistant: the page lists an amount and a date\n"
    "Human: read the amount aloud\n"
    "Assistant: the amount shown is 1999"
)
GENERAL_REWRITE_TEXT = (
    "<Instruction: project the visible trend {prompt_sha8}>\n"
    "<Response: The projection continues upward for two further quarters.>"
)
CAPTION_REWRITE_TEXT = (
    "<Instruction: infer the venue from the described scene {prompt_sha8}>\n"
    "<Response: The scene suggests a small indoor venue with rustic decor.>"
)
SCORE_TEXT = "1. Information Content Score (1-5): 4\n2. Relevance (1-5): 5"

MM_MOCK_RULES = [
    {"contains": "Information Content and Complexity", "text": SCORE_TEXT},
    {"contains": "omega", "text": "No"},
    {"contains": "single word Yes or No", "text": "Yes"},
    {"contains": '"##Instruction##:"', "text": CHART_REWRITE_TEXT},
    {"contains": "VQA:", "text": OCR_REWRITE_TEXT},
    {"contains": "Based on the following assets", "text": GENERAL_REWRITE_TEXT},
]
TEXT_MOCK_RULES = [
    {"contains": "Information Content and Complexity", "text": SCORE_TEXT},
    {"contains": "image caption", "text": CAPTION_REWRITE_TEXT},
]


def _llava_record(i: int, question: str, answer: str) -> dict:
    return {
        "id": f"r{i}",
        "image": f"img/{i % 3}.jpg",
        "conversations": [
            {"from": "human", "value": f"<image>\n{question}"},
            {"from": "gpt", "value": answer},
        ],
    }


def build_project(root: Path, n_per_source: int = 6, seed: int = 7,
                  mix_total: int = 20, mix_fraction: float = 0.7) -> dict:
    """A self-contained offline project: sources, registry, mock script, config."""
    data = root / "data"
    data.mkdir(parents=True, exist_ok=True)

    def write_source(name: str, questions_answers) -> None:
        with open(data / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for i, (q, a) in enumerate(questions_answers):
                fh.write(json.dumps(_llava_record(i, q, a)) + "\n")

    write_source("charts", [(f"What is the value at x={i}?", str(40 + i))
                            for i in range(n_per_source)])
    write_source("docs", [(f"whats the amount on page {i}?", "1999")
                          for i in range(n_per_source)])
    write_source("caps", [("Describe the image.", f"A rustic venue scene number {i}.")
                          for i in range(n_per_source)])
    write_source("refs", [(f"Reference question {i}?", f"A detailed reference answer {i}.")
                          for i in range(n_per_source)])
    write_source("junk", [(f"noise {i}", "meh") for i in range(n_per_source)])

    registry = [
        {"source_id": "charts", "root_path": "data/charts.jsonl", "category": "Chart",
         "group": "B"},
        {"source_id": "docs", "root_path": "data/docs.jsonl", "category": "OCR",
         "group": "B"},
        {"source_id": "caps", "root_path": "data/caps.jsonl", "category": "Caption",
         "group": "B"},
        {"source_id": "refs", "root_path": "data/refs.jsonl", "category": "General",
         "group": "A"},
        {"source_id": "junk", "root_path": "data/junk.jsonl", "category": "General",
         "group": "C"},
    ]
    (root / "registry.json").write_text(json.dumps(registry, indent=2), encoding="utf-8")
    (root / "mock_mm.json").write_text(json.dumps({"rules": MM_MOCK_RULES}),
                                       encoding="utf-8")
    (root / "mock_text.json").write_text(json.dumps({"rules": TEXT_MOCK_RULES}),
                                         encoding="utf-8")

    config = {
        "source_registry": "registry.json",
        "output_root": "out",
        "seed": seed,
        "pair_num": 2,
        "screening_n": 4,
        "score_sample_n": 50,
        "max_workers": 4,
        "endpoints": [
            {"base_url": "mock:mm", "model_name": "mm-model", "kind": "multimodal",
             "max_concurrent": 4, "retry_limit": 1, "temperature": 0.0,
             "mock_script": "mock_mm.json"},
            {"base_url": "mock:text", "model_name": "text-model", "kind": "text_only",
             "max_concurrent": 4, "retry_limit": 1, "temperature": 0.0,
             "mock_script": "mock_text.json"},
        ],
        "mix": {"total": mix_total, "rewritten_fraction": mix_fraction},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return {"root": root, "config": config_path, "registry": root / "registry.json",
            "output_root": root / "out"}


@pytest.fixture()
def project(tmp_path):
    return build_project(tmp_path)


def run_all_stages(config_path: Path, seed: int | None = None) -> dict:
    """ingest -> rewrite -> judge -> score -> mix, returning stage reports."""
    from forge import pipeline
    from forge.config import load_config

    cfg = load_config(config_path, seed_override=seed)
    return {
        "ingest": pipeline.ingest_stage(cfg),
        "rewrite": pipeline.rewrite_stage(cfg),
        "judge": pipeline.judge_stage(cfg),
        "score": pipeline.score_stage(cfg),
        "mix": pipeline.mix_stage(cfg),
    }
