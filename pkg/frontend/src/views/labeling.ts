/** Good/bad labeling with verdict blinding: the judge's call appears only after commit. */

import type { Api } from "../api";
import { clear, el, mediaUrl, renderTurnText, toast } from "../dom";
import type { LineageResponse, SampleRecord } from "../types";

const QUEUE_SIZE = 30;

interface LabelingState {
  raterId: string;
  queue: SampleRecord[];
  index: number;
  lineage: LineageResponse | null;
  committed: "good" | "bad" | null;
  labeled: number;
}

export function labelingView(root: HTMLElement, api: Api): { destroy: () => void } {
  const state: LabelingState = {
    raterId: "rater1",
    queue: [],
    index: 0,
    lineage: null,
    committed: null,
    labeled: 0,
  };

  const header = el("div", { class: "labeling-header" });
  const card = el("div", { class: "labeling-card", "data-testid": "labeling-card" });
  root.append(el("h2", {}, ["Labeling"]), header, card);

  function currentSample(): SampleRecord | null {
    return state.queue[state.index] ?? null;
  }

  function renderHeader(): void {
    clear(header);
    const raterInput = el("input", {
      value: state.raterId,
      "data-testid": "rater-id",
      "aria-label": "rater id",
    });
    raterInput.addEventListener("change", () => {
      state.raterId = raterInput.value.trim() || "rater1";
    });
    header.append(
      el("label", {}, ["rater: ", raterInput]),
      el("span", { class: "progress" }, [
        `${state.labeled} labeled, item ${Math.min(state.index + 1, state.queue.length)}` +
          ` of ${state.queue.length}`,
      ]),
    );
  }

  function renderCard(): void {
    clear(card);
    const sample = currentSample();
    if (!sample) {
      card.append(el("p", {}, ["Queue finished. Reload for a fresh seeded queue."]));
      return;
    }
    const pane = el("div", { class: "sample-pane" });
    for (const ref of sample.media) {
      pane.append(el("img", { src: mediaUrl(ref), alt: ref }));
    }
    // Side-by-side: original on the left, the rewritten sample under review on the right.
    const original = state.lineage?.original ?? null;
    const split = el("div", { class: "split" });
    if (original) {
      const left = el("div", { class: "pane original" }, [el("h3", {}, ["original"])]);
      for (const turn of original.turns) {
        left.append(
          el("div", { class: `turn ${turn.role}` }, [renderTurnText(turn.text)]),
        );
      }
      split.append(left);
    }
    const right = el("div", { class: "pane rewritten" }, [el("h3", {}, ["rewritten"])]);
    for (const turn of sample.turns) {
      right.append(el("div", { class: `turn ${turn.role}` }, [renderTurnText(turn.text)]));
    }
    split.append(right);
    pane.append(split);

    const actions = el("div", { class: "actions" });
    const goodButton = el("button", { "data-testid": "label-good" }, ["good"]);
    const badButton = el("button", { "data-testid": "label-bad" }, ["bad"]);
    goodButton.addEventListener("click", () => void commit("good"));
    badButton.addEventListener("click", () => void commit("bad"));
    actions.append(goodButton, badButton);

    // Blinding: the model's verdict exists in the lineage payload but is only
    // rendered once this rater has committed their own label.
    const verdictBox = el("div", { class: "verdict-box", "data-testid": "verdict-box" });
    if (state.committed) {
      const child = state.lineage?.children.find((c) => c.sample.id === sample.id);
      const verdict = child?.verdict?.verdict ?? "(not judged)";
      verdictBox.append(
        el("span", { "data-testid": "model-verdict", "data-verdict": verdict }, [
          `model verdict: ${verdict}`,
        ]),
        el("span", { class: "own" }, [` / your label: ${state.committed}`]),
      );
      const next = el("button", { "data-testid": "next-item" }, ["next"]);
      next.addEventListener("click", () => void advance());
      verdictBox.append(next);
    }

    card.append(pane, actions, verdictBox);
  }

  async function commit(label: "good" | "bad"): Promise<void> {
    const sample = currentSample();
    if (!sample || state.committed) return;
    try {
      await api.postLabel(sample.id, state.raterId, label);
    } catch (error) {
      toast(`label not saved: ${String(error)}`);
      return;
    }
    state.committed = label;
    state.labeled += 1;
    renderHeader();
    renderCard();
  }

  async function advance(): Promise<void> {
    state.index += 1;
    state.committed = null;
    await loadLineage();
    renderHeader();
    renderCard();
  }

  async function loadLineage(): Promise<void> {
    const sample = currentSample();
    state.lineage = null;
    if (!sample) return;
    try {
      state.lineage = await api.lineage(sample.id);
    } catch (error) {
      toast(`lineage unavailable: ${String(error)}`);
    }
  }

  async function boot(): Promise<void> {
    try {
      state.queue = await api.samples("rewritten", QUEUE_SIZE, 0);
    } catch (error) {
      toast(`could not load labeling queue: ${String(error)}`);
      state.queue = [];
    }
    await loadLineage();
    renderHeader();
    renderCard();
  }

  void boot();
  return { destroy: () => undefined };
}
