/** Dashboards: pairwise kappa matrix, substitution means, filter-rate bars. */

import type { Api } from "../api";
import { clear, el, toast } from "../dom";
import type { AgreementReport, FilterRateReport } from "../types";

function fmt(value: number | null | undefined, digits = 2): string {
  return value === null || value === undefined ? "—" : value.toFixed(digits);
}

export function renderAgreementMatrix(report: AgreementReport): HTMLElement {
  const box = el("div", { class: "panel", "data-testid": "agreement-matrix" });
  box.append(el("h3", {}, ["Pairwise agreement (Cohen's kappa)"]));
  const kappaOf = new Map<string, number>();
  for (const pair of report.pairs) {
    kappaOf.set(`${pair.rater_a}|${pair.rater_b}`, pair.kappa);
    kappaOf.set(`${pair.rater_b}|${pair.rater_a}`, pair.kappa);
  }
  const table = el("table", { class: "matrix" });
  table.append(
    el("tr", {}, [el("th", {}, [""]), ...report.raters.map((r) => el("th", {}, [r]))]),
  );
  for (const rowRater of report.raters) {
    const cells: HTMLElement[] = [el("th", {}, [rowRater])];
    for (const colRater of report.raters) {
      const value =
        rowRater === colRater ? null : kappaOf.get(`${rowRater}|${colRater}`) ?? null;
      cells.push(
        el("td", { "data-cell": `${rowRater}-${colRater}` }, [
          rowRater === colRater ? "—" : fmt(value),
        ]),
      );
    }
    table.append(el("tr", {}, cells));
  }
  box.append(table);
  return box;
}

export function renderSubstitutionMeans(report: AgreementReport): HTMLElement {
  const box = el("div", { class: "panel", "data-testid": "substitution-means" });
  box.append(el("h3", {}, ["Panel means"]));
  if (report.human_mean === null) {
    box.append(el("p", { class: "reason" }, [report.reason ?? "insufficient raters"]));
    return box;
  }
  box.append(
    el("p", {}, [
      el("span", { "data-testid": "human-mean" }, [
        `human-only mean: ${fmt(report.human_mean)}`,
      ]),
    ]),
    el("p", {}, [
      el("span", { "data-testid": "substituted-mean" }, [
        `model-substituted mean: ${fmt(report.substituted_mean)}`,
      ]),
    ]),
  );
  const combos = report.per_combination ?? {};
  const list = el("ul", {});
  for (const [dropped, value] of Object.entries(combos)) {
    list.append(el("li", {}, [`panel without ${dropped}: ${fmt(value)}`]));
  }
  box.append(list);
  return box;
}

export function renderFilterRates(report: FilterRateReport): HTMLElement {
  const box = el("div", { class: "panel", "data-testid": "filter-rates" });
  box.append(el("h3", {}, ["Filter rates by category"]));
  for (const row of report.rows) {
    const bar = el("div", { class: "bar-row", "data-category": row.category });
    const width = Math.max(1, Math.round(row.pct));
    bar.append(
      el("span", { class: "bar-label" }, [row.category]),
      el("div", { class: "bar-track" }, [
        el("div", { class: "bar-fill", style: `width:${width}%` }, []),
      ]),
      el("span", { class: "bar-value" }, [
        `${row.pct.toFixed(1)}% (${row.after.toLocaleString("en-US")} of ` +
          `${row.before.toLocaleString("en-US")} kept)`,
      ]),
    );
    box.append(bar);
  }
  return box;
}

export function dashboardView(root: HTMLElement, api: Api): { destroy: () => void } {
  root.append(el("h2", {}, ["Dashboard"]));
  const holder = el("div", { class: "dashboard" });
  root.append(holder);

  async function boot(): Promise<void> {
    try {
      const [agreement, rates] = await Promise.all([api.agreement(), api.filterRates()]);
      clear(holder);
      holder.append(
        renderAgreementMatrix(agreement),
        renderSubstitutionMeans(agreement),
        renderFilterRates(rates),
      );
    } catch (error) {
      toast(`dashboard unavailable: ${String(error)}`);
    }
  }

  void boot();
  return { destroy: () => undefined };
}
