/** Tiny DOM helpers: element builder, media URLs, markdown-lite, toasts. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function mediaUrl(ref: string): string {
  return `/api/media/${ref}`;
}

/** Markdown-lite for turn text: escape, then bold and inline code only. */
export function renderTurnText(text: string): HTMLElement {
  const holder = el("div", { class: "turn-text" });
  const escaped = text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
  const formatted = escaped
    .replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>")
    .replace(/`([^`]+)`/g, "<code>$1</code>")
    .replace(/\n/g, "<br>");
  holder.innerHTML = formatted;
  return holder;
}

let toastTimer: number | undefined;

/** Non-blocking error surface; never interrupts the operator's flow. */
export function toast(message: string): void {
  let node = document.getElementById("toast");
  if (!node) {
    node = el("div", { id: "toast", role: "status" });
    document.body.append(node);
  }
  node.textContent = message;
  node.classList.add("visible");
  if (toastTimer !== undefined) window.clearTimeout(toastTimer);
  toastTimer = window.setTimeout(() => node?.classList.remove("visible"), 4000);
}
