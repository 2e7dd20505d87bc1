/** Hash-routed single-page app over the review API. No client-side state survives reload. */

import { api } from "./api";
import { clear, el } from "./dom";
import { dashboardView } from "./views/dashboard";
import { labelingView } from "./views/labeling";
import { screeningView } from "./views/screening";

type View = (root: HTMLElement, client: typeof api) => { destroy: () => void };

const ROUTES: Record<string, View> = {
  "#/screening": screeningView,
  "#/labeling": labelingView,
  "#/dashboard": dashboardView,
};

let active: { destroy: () => void } | null = null;

function mount(): void {
  const root = document.getElementById("view");
  if (!root) return;
  active?.destroy();
  clear(root);
  const view = ROUTES[window.location.hash] ?? screeningView;
  active = view(root, api);
  for (const link of document.querySelectorAll("nav a")) {
    link.classList.toggle("active", link.getAttribute("href") === window.location.hash);
  }
}

export function boot(): void {
  const nav = document.getElementById("nav");
  if (nav && !nav.hasChildNodes()) {
    nav.append(
      el("a", { href: "#/screening" }, ["screening"]),
      el("a", { href: "#/labeling" }, ["labeling"]),
      el("a", { href: "#/dashboard" }, ["dashboard"]),
    );
  }
  window.addEventListener("hashchange", mount);
  mount();
}

boot();
