"""The whole pipeline, end to end, against scripted mock endpoints.

Builds a small project (sources + registry + config + mock scripts) in a temp
directory, then runs ingest -> rewrite -> judge -> score -> mix and prints each
stage report. Re-running any stage is a no-op thanks to the stage manifests.
"""

import json
import tempfile
from pathlib import Path

from forge import pipeline
from forge.config import load_config

CHART_REWRITE = (
    "##Instruction##: Trace the series to its final reading {prompt_sha8} and explain "
    "the step-by-step arithmetic behind the closing average.\n"
    "##Response##: Reading the plotted points in order and averaging them shows the "
    "series closes above its mean, because the final two readings exceed every "
    "earlier one; summing and dividing by the count makes that concrete."
)
JUDGE_RULES = [
    {"contains": "Information Content and Complexity",
     "text": "1. Information Content Score (1-5): 4\n2. Relevance (1-5): 5"},
    {"contains": "single word Yes or No", "text": "Yes"},
    {"contains": '"##Instruction##:"', "text": CHART_REWRITE},
]


def build_project(root: Path) -> Path:
    data = root / "data"
    data.mkdir(parents=True)
    with open(data / "charts.jsonl", "w", encoding="utf-8") as fh:
        for i in range(8):
            record = {
                "id": f"c{i}",
                "image": f"img/{i}.png",
                "conversations": [
                    {"from": "human", "value": f"<image>\nWhat is the value at x={i}?"},
                    {"from": "gpt", "value": str(50 + i)},
                ],
            }
            fh.write(json.dumps(record) + "\n")
    (root / "registry.json").write_text(json.dumps([
        {"source_id": "charts", "root_path": "data/charts.jsonl",
         "category": "Chart", "group": "B"},
    ]), encoding="utf-8")
    (root / "mock.json").write_text(json.dumps({"rules": JUDGE_RULES}), encoding="utf-8")
    config = {
        "source_registry": "registry.json",
        "output_root": "out",
        "seed": 7,
        "score_sample_n": 20,
        "endpoints": [
            {"base_url": "mock:mm", "model_name": "demo-mm", "kind": "multimodal",
             "mock_script": "mock.json"},
        ],
        "stages": {"rewrite": True},
        "mix": {"total": 10, "rewritten_fraction": 0.7},
    }
    path = root / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


with tempfile.TemporaryDirectory() as tmp:
    config_path = build_project(Path(tmp))
    cfg = load_config(config_path)
    for name, stage in [
        ("ingest", pipeline.ingest_stage),
        ("rewrite", pipeline.rewrite_stage),
        ("judge", pipeline.judge_stage),
        ("score", pipeline.score_stage),
        ("mix", pipeline.mix_stage),
    ]:
        print(f"{name:>8}: {stage(cfg)}")
    manifest = cfg.output_root / "manifests" / "mix.jsonl"
    lines = manifest.read_text(encoding="utf-8").splitlines()
    print(f"\nmanifest holds {len(lines)} samples; first record:")
    print(json.dumps(json.loads(lines[0]), indent=2)[:400])
