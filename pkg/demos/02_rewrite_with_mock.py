"""Rewrite one terse chart Q&A into rationale-rich pairs, offline.

The scripted mock endpoint stands in for a real multimodal model: it answers
the chart-rewrite prompt with two marker-formatted pairs, which fan out into
two rewritten samples sharing one parent.
"""

from forge.corpus import Category, Provenance, Sample, Turn, original_sample_id
from forge.inference import EndpointClient, EndpointConfig, EndpointPool, MockTransport
from forge.rewrite import rewrite_sample

original = Sample(
    id=original_sample_id("charts", "demo"),
    source_id="charts",
    category=Category.CHART,
    media=("img/chart.png",),
    turns=(
        Turn("human", "<image>\nWhat's the rightmost value of the green graph?"),
        Turn("assistant", "64"),
    ),
    provenance=Provenance.ORIGINAL,
)

scripted_reply = (
    "##Instruction##: Compare the final readings of the green and blue series and "
    "explain what the widening gap implies for the next quarter.\n"
    "##Response##: The green series closes at 64 while the blue series trails at 49. "
    "The gap has widened in each period shown, which suggests the divergence is a "
    "trend rather than noise; if the drivers hold, expect the spread to grow further.\n"
    "##Instruction##: Estimate the average of the green series across the chart and "
    "walk through the calculation.\n"
    "##Response##: Reading the four plotted points as 73, 57, 49 and 64, the average "
    "is (73 + 57 + 49 + 64) / 4 = 243 / 4 = 60.75."
)

mock = MockTransport(default=scripted_reply)
pool = EndpointPool([
    EndpointClient(
        EndpointConfig(base_url="mock:", model_name="demo-mm", kind="multimodal"),
        mock,
    ),
    EndpointClient(
        EndpointConfig(base_url="mock:", model_name="demo-text", kind="text_only"),
        MockTransport(default="unused here"),
    ),
])

outcome = rewrite_sample(original, pool)
print(f"status: {outcome.status}, emitted {len(outcome.samples)} samples\n")
for child in outcome.samples:
    print(f"--- {child.id} (parent {child.parent_id})")
    for turn in child.turns:
        print(f"{turn.role}: {turn.text[:96]}{'...' if len(turn.text) > 96 else ''}")
    print()
