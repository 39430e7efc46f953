/** DOM builders for the queue, detail pane, badges and score bars. */

import type { Candidate, QueueItem, ResultDetail, Tag, Triad } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function tagBadge(tag: Tag): HTMLElement {
  const badge = el("span", `badge badge-${tag.toLowerCase()}`, tag);
  if (tag === "Reranked") badge.title = "ranking overridden by the compatibility scorer";
  if (tag === "Copy") badge.title = "exact match";
  return badge;
}

export function triadLine(triad: Triad, highlight?: Set<string>): HTMLElement {
  const line = el("span", "triad");
  const parts: Array<[string, string]> = [
    ["TEST", triad.test],
    ["SAMPLE", triad.sample || "—"],
    ["UNIT", triad.unit || "—"],
  ];
  for (const [label, value] of parts) {
    line.appendChild(el("span", "triad-label", label));
    const holder = el("span", "triad-value");
    for (const token of value.split(" ")) {
      const piece = el("span", highlight?.has(token) ? "tok tok-hit" : "tok", token);
      holder.appendChild(piece);
      holder.appendChild(document.createTextNode(" "));
    }
    line.appendChild(holder);
  }
  return line;
}

export function scoreBar(label: string, value: number | null): HTMLElement {
  const wrap = el("div", "bar-row");
  wrap.appendChild(el("span", "bar-label", label));
  const track = el("div", "bar-track");
  const fill = el("div", "bar-fill");
  const v = value === null ? 0 : Math.max(0, Math.min(1, value));
  fill.style.width = `${(v * 100).toFixed(0)}%`;
  track.appendChild(fill);
  wrap.appendChild(track);
  wrap.appendChild(el("span", "bar-value", value === null ? "–" : value.toFixed(3)));
  return wrap;
}

export interface QueueCallbacks {
  onSelect: (queryId: string) => void;
}

export function renderQueue(
  container: HTMLElement,
  items: QueueItem[],
  selected: string | null,
  callbacks: QueueCallbacks,
): void {
  container.replaceChildren();
  if (items.length === 0) {
    container.appendChild(el("p", "empty", "Queue is empty — nothing to review."));
    return;
  }
  for (const item of items) {
    const row = el("div", item.query_id === selected ? "row row-selected" : "row");
    row.dataset.queryId = item.query_id;
    const head = el("div", "row-head");
    head.appendChild(el("span", "qid", item.query_id));
    head.appendChild(tagBadge(item.tag));
    row.appendChild(head);
    row.appendChild(triadLine(item.query));
    const preview = item.top
      ? `top: ${item.top.id} (rank ${item.top.rank}) · ${item.candidate_count} candidates`
      : "no candidates";
    row.appendChild(el("div", "row-preview", preview));
    row.onclick = () => callbacks.onSelect(item.query_id);
    container.appendChild(row);
  }
}

export interface DetailCallbacks {
  onAccept: (candidateId: string) => void;
  onReject: () => void;
}

function queryTokens(triad: Triad): Set<string> {
  return new Set(
    [triad.test, triad.sample, triad.unit].flatMap((v) => v.split(" ")).filter(Boolean),
  );
}

export function renderDetail(
  container: HTMLElement,
  detail: ResultDetail | null,
  callbacks: DetailCallbacks,
): void {
  container.replaceChildren();
  if (detail === null) {
    container.appendChild(el("p", "empty", "Select a queue item to inspect."));
    return;
  }
  const head = el("div", "detail-head");
  head.appendChild(el("h2", undefined, detail.query_id));
  head.appendChild(tagBadge(detail.tag));
  container.appendChild(head);
  container.appendChild(triadLine(detail.query));

  if (detail.candidates.length === 0) {
    container.appendChild(el("p", "empty", "No candidates were retrieved."));
    const reject = el("button", "btn btn-reject", "Reject (no match)");
    reject.onclick = () => callbacks.onReject();
    container.appendChild(reject);
    return;
  }

  const shared = queryTokens(detail.query);
  for (const candidate of detail.candidates) {
    container.appendChild(renderCandidate(candidate, shared, detail, callbacks));
  }
  const reject = el("button", "btn btn-reject", "Reject top candidate (r)");
  reject.onclick = () => callbacks.onReject();
  container.appendChild(reject);
}

function renderCandidate(
  candidate: Candidate,
  queryTokenSet: Set<string>,
  detail: ResultDetail,
  callbacks: DetailCallbacks,
): HTMLElement {
  const card = el("div", candidate.id === detail.chosen ? "cand cand-chosen" : "cand");
  const head = el("div", "cand-head");
  head.appendChild(el("span", "cand-rank", `#${candidate.rank}`));
  head.appendChild(el("span", "cand-id", candidate.id));
  if (candidate.id === detail.chosen) {
    head.appendChild(el("span", "badge badge-chosen", "chosen"));
  }
  const accept = el("button", "btn btn-accept", "Accept");
  accept.onclick = () => callbacks.onAccept(candidate.id);
  head.appendChild(accept);
  card.appendChild(head);

  if (candidate.triad) {
    // Tokens shared with the query glow; a near-miss is visible at a glance.
    card.appendChild(triadLine(candidate.triad, queryTokenSet));
  }
  card.appendChild(scoreBar("retrieval", candidate.retrieval_norm));
  card.appendChild(scoreBar("compat p", candidate.rerank_p));
  card.appendChild(scoreBar("final", candidate.final_score));
  const raw = el(
    "div",
    "cand-raw",
    `lexical ${candidate.lexical_score.toFixed(3)} · semantic ${candidate.semantic_score.toFixed(3)}` +
      ` · fused ${candidate.fused_score.toFixed(3)}`,
  );
  card.appendChild(raw);
  return card;
}

export function renderBanner(container: HTMLElement, message: string | null): void {
  container.replaceChildren();
  if (message !== null) {
    container.appendChild(el("div", "banner", message));
  }
}

export function renderStats(container: HTMLElement, text: string): void {
  container.textContent = text;
}
