"""Judge rewritten samples with a Yes/No verdict and account for filter rates.

The judge keeps only samples it can verify against the image; everything it
cannot parse or reach fails closed. The rate table mirrors the published
per-category accounting format.
"""

from forge.corpus import Category, Provenance, Turn
from forge.corpus import Sample, original_sample_id, rewritten_sample_id
from forge.filtering import filter_rates, format_rate_table, judge_sample
from forge.inference import EndpointClient, EndpointConfig, MockTransport
from forge.prompts import builtin_registry

JUDGE = builtin_registry()["judge"]


def rewritten(i: int, text: str) -> Sample:
    parent = original_sample_id("demo", i)
    return Sample(
        id=rewritten_sample_id(parent, 0),
        source_id="demo",
        category=Category.OCR,
        media=("img/page.png",),
        turns=(Turn("human", f"<image>\n{text}"), Turn("assistant", "answer " + text)),
        provenance=Provenance.REWRITTEN,
        parent_id=parent,
    )


# The mock says No to anything mentioning "hallucinated", wavers once on
# "ambiguous" (exercising the single re-ask), and keeps the rest.
state = {"asked": set()}


def responder(model: str, prompt: str) -> str:
    if "hallucinated" in prompt:
        return "No"
    if "ambiguous" in prompt and prompt not in state["asked"]:
        state["asked"].add(prompt)
        return "hard to say"  # unparseable -> one re-ask at temperature 0
    return "Yes"


client = EndpointClient(
    EndpointConfig(base_url="mock:", model_name="demo-mm", kind="multimodal"),
    MockTransport(responder=responder),
)

samples = [
    rewritten(0, "plain grounded content"),
    rewritten(1, "hallucinated detail about a graphics card"),
    rewritten(2, "ambiguous phrasing near the margin"),
    rewritten(3, "another grounded row"),
]
for s in samples:
    verdict = judge_sample(s, client, JUDGE)
    print(f"{s.turns[0].text.splitlines()[1][:44]:<46} -> {verdict.verdict.value}"
          f" (attempts {verdict.attempts})")

print()
rows = filter_rates([
    ("OCR", 1104960, 498337),
    ("Chart", 7326189, 3782029),
    ("GeneralQA", 1726180, 1584308),
    ("Math", 590894, 518393),
])
print(format_rate_table(rows))
