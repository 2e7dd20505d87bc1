/** Source screening: page through a seeded batch, assign A/B/C, confirm to persist. */

import type { Api } from "../api";
import { clear, el, mediaUrl, renderTurnText, toast } from "../dom";
import type { Group, SampleRecord, SourceRow } from "../types";

const GROUPS: Group[] = ["A", "B", "C"];
const BATCH_SIZE = 8;

interface ScreeningState {
  sources: SourceRow[];
  selected: string | null;
  staged: Group | null; // chosen but not yet confirmed; nothing is written until POST succeeds
  seed: number;
  batch: SampleRecord[];
  raterId: string;
}

export function screeningView(root: HTMLElement, api: Api): { destroy: () => void } {
  const state: ScreeningState = {
    sources: [],
    selected: null,
    staged: null,
    seed: 0,
    batch: [],
    raterId: "operator",
  };

  const sourceList = el("div", { class: "source-list", "data-testid": "source-list" });
  const batchPanel = el("div", { class: "batch-panel", "data-testid": "batch-panel" });
  const controls = el("div", { class: "screening-controls" });
  root.append(
    el("h2", {}, ["Source screening"]),
    el("p", { class: "hint" }, [
      "Keys: a / b / c stage a group for the selected source; Enter confirms.",
    ]),
    controls,
    sourceList,
    batchPanel,
  );

  function renderSources(): void {
    clear(sourceList);
    const table = el("table", { class: "sources" });
    table.append(
      el("tr", {}, [
        el("th", {}, ["source"]),
        el("th", {}, ["category"]),
        el("th", {}, ["group"]),
      ]),
    );
    for (const source of state.sources) {
      const row = el(
        "tr",
        {
          class: source.source_id === state.selected ? "selected" : "",
          "data-source": source.source_id,
        },
        [
          el("td", {}, [source.display_name]),
          el("td", {}, [source.category]),
          el("td", { class: "group-cell", "data-group": source.group ?? "" }, [
            source.group ?? "—",
          ]),
        ],
      );
      row.addEventListener("click", () => void selectSource(source.source_id));
      table.append(row);
    }
    sourceList.append(table);
  }

  function renderControls(): void {
    clear(controls);
    if (!state.selected) return;
    const groupButtons = GROUPS.map((group) => {
      const button = el(
        "button",
        {
          class: state.staged === group ? "staged" : "",
          "data-stage-group": group,
        },
        [`stage ${group}`],
      );
      button.addEventListener("click", () => {
        state.staged = group;
        renderControls();
      });
      return button;
    });
    const confirm = el("button", { "data-testid": "confirm-group", disabled: "" }, [
      state.staged ? `confirm ${state.staged}` : "confirm",
    ]);
    if (state.staged) confirm.removeAttribute("disabled");
    confirm.addEventListener("click", () => void confirmGroup());
    const reseed = el("button", { "data-testid": "reseed" }, ["reseed batch"]);
    reseed.addEventListener("click", () => {
      state.seed += 1;
      void loadBatch();
    });
    controls.append(...groupButtons, confirm, reseed);
  }

  function renderBatch(): void {
    clear(batchPanel);
    for (const sample of state.batch) {
      const card = el("div", { class: "card", "data-sample": sample.id });
      for (const ref of sample.media) {
        card.append(el("img", { src: mediaUrl(ref), alt: ref, loading: "lazy" }));
      }
      for (const turn of sample.turns) {
        const turnBox = el("div", { class: `turn ${turn.role}` });
        turnBox.append(el("span", { class: "role" }, [turn.role]), renderTurnText(turn.text));
        card.append(turnBox);
      }
      batchPanel.append(card);
    }
  }

  async function loadSources(): Promise<void> {
    try {
      state.sources = await api.sources();
      renderSources();
    } catch (error) {
      toast(`could not load sources: ${String(error)}`);
    }
  }

  async function loadBatch(): Promise<void> {
    if (!state.selected) return;
    try {
      state.batch = await api.screeningBatch(state.selected, BATCH_SIZE, state.seed);
      renderBatch();
    } catch (error) {
      toast(`could not load batch: ${String(error)}`);
    }
  }

  async function selectSource(sourceId: string): Promise<void> {
    state.selected = sourceId;
    state.staged = null;
    renderSources();
    renderControls();
    await loadBatch();
  }

  async function confirmGroup(): Promise<void> {
    if (!state.selected || !state.staged) return;
    try {
      await api.assignGroup(state.selected, state.staged, state.raterId);
    } catch (error) {
      // no optimistic write: the list keeps whatever the server last confirmed
      toast(`group not saved: ${String(error)}`);
      return;
    }
    state.staged = null;
    renderControls();
    await loadSources();
  }

  function onKey(event: KeyboardEvent): void {
    if (!state.selected) return;
    const key = event.key.toLowerCase();
    if (key === "a" || key === "b" || key === "c") {
      state.staged = key.toUpperCase() as Group;
      renderControls();
    } else if (key === "enter" && state.staged) {
      void confirmGroup();
    }
  }

  document.addEventListener("keydown", onKey);
  void loadSources();
  return { destroy: () => document.removeEventListener("keydown", onKey) };
}
