import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { screeningView } from "../src/views/screening";
import { api } from "../src/api";
import { flush, installFixtureServer } from "./fixtures";

function groupCell(sourceId: string): string {
  const row = document.querySelector(`tr[data-source="${sourceId}"] .group-cell`);
  return row?.textContent ?? "";
}

function selectSource(sourceId: string): void {
  (document.querySelector(`tr[data-source="${sourceId}"]`) as HTMLElement).click();
}

describe("screening view", () => {
  let server: ReturnType<typeof installFixtureServer>;
  let root: HTMLElement;
  let view: { destroy: () => void };

  beforeEach(async () => {
    server = installFixtureServer();
    document.body.innerHTML = '<main id="root"></main>';
    root = document.getElementById("root") as HTMLElement;
    view = screeningView(root, api);
    await flush();
  });

  afterEach(() => view.destroy());

  it("persists a staged group assignment on confirm and reflects it in the list", async () => {
    expect(groupCell("docs")).toBe("—");
    selectSource("docs");
    await flush();

    (document.querySelector('[data-stage-group="B"]') as HTMLElement).click();
    (document.querySelector('[data-testid="confirm-group"]') as HTMLElement).click();
    await flush();

    expect(server.writes).toEqual([
      { path: "/api/sources/docs/group", body: { group: "B", rater_id: "operator" } },
    ]);
    expect(groupCell("docs")).toBe("B");
  });

  it("supports keyboard staging (b then Enter)", async () => {
    selectSource("docs");
    await flush();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "b" }));
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "Enter" }));
    await flush();
    expect(server.writes.length).toBe(1);
    expect(groupCell("docs")).toBe("B");
  });

  it("surfaces write failures without an optimistic update", async () => {
    selectSource("docs");
    await flush();
    server.failNextWrite = true;
    (document.querySelector('[data-stage-group="C"]') as HTMLElement).click();
    (document.querySelector('[data-testid="confirm-group"]') as HTMLElement).click();
    await flush();

    expect(server.writes).toEqual([]); // nothing recorded server-side
    expect(groupCell("docs")).toBe("—"); // no optimistic write
    expect(document.getElementById("toast")?.textContent).toContain("group not saved");
  });

  it("reseeding changes displayed items but not stored groups", async () => {
    selectSource("charts");
    await flush();
    const firstIds = [...document.querySelectorAll("[data-sample]")].map((n) =>
      n.getAttribute("data-sample"),
    );
    (document.querySelector('[data-testid="reseed"]') as HTMLElement).click();
    await flush();
    const secondIds = [...document.querySelectorAll("[data-sample]")].map((n) =>
      n.getAttribute("data-sample"),
    );
    expect(secondIds).not.toEqual(firstIds);
    expect(server.writes).toEqual([]);
    expect(groupCell("charts")).toBe("B"); // unchanged
  });
});
