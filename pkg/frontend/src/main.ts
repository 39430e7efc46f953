/**
 * Review client entry point.
 *
 * The server is the single source of truth: this page only fetches,
 * displays, and posts verdicts. Verdict submissions update the view
 * optimistically and roll back on rejection; a 409 answer opens a
 * confirm-force dialog. Keyboard: `a` accepts the top candidate of the
 * selected item, `r` rejects it, `j`/`k` move the selection.
 */

import { ApiClient, ApiError } from "./api.js";
import { optimistic } from "./optimistic.js";
import { renderBanner, renderDetail, renderQueue, renderStats } from "./render.js";
import type { QueueItem, ResultDetail, Tag } from "./types.js";

const PAGE_SIZE = 25;
const RETRY_BASE_MS = 1000;

interface State {
  filter: Tag[];
  offset: number;
  items: QueueItem[];
  selected: string | null;
  detail: ResultDetail | null;
  reviewer: string;
  banner: string | null;
  retries: number;
}

const state: State = {
  filter: ["Pending", "Reranked"],
  offset: 0,
  items: [],
  selected: null,
  detail: null,
  reviewer: localStorage.getItem("reviewer") ?? "",
  banner: null,
  retries: 0,
};

const api = new ApiClient("");

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function draw(): void {
  renderBanner(byId("banner"), state.banner);
  renderQueue(byId("queue"), state.items, state.selected, { onSelect: select });
  renderDetail(byId("detail"), state.detail, {
    onAccept: (candidateId) => submit(candidateId, "accept"),
    onReject: () => submit(null, "reject"),
  });
  (byId("page-label") as HTMLElement).textContent =
    `${state.offset + 1}–${state.offset + state.items.length}`;
}

async function refreshStats(): Promise<void> {
  try {
    const stats = await api.stats();
    const tags = Object.entries(stats.tags)
      .filter(([, n]) => n > 0)
      .map(([tag, n]) => `${tag} ${n}`)
      .join(" · ");
    renderStats(byId("stats"), `${tags} · ${stats.feedback_events} verdicts`);
  } catch {
    renderStats(byId("stats"), "");
  }
}

async function loadQueue(): Promise<void> {
  try {
    const page = await api.queue(state.filter, PAGE_SIZE, state.offset);
    state.items = page.items;
    state.banner = null;
    state.retries = 0;
    if (state.selected && !page.items.some((i) => i.query_id === state.selected)) {
      state.selected = null;
      state.detail = null;
    }
    draw();
  } catch (error) {
    state.retries += 1;
    const delay = Math.min(RETRY_BASE_MS * 2 ** (state.retries - 1), 15_000);
    state.banner = `Cannot reach the review service (${describe(error)}); retrying in ${Math.round(delay / 1000)}s`;
    draw();
    setTimeout(loadQueue, delay);
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return error.detail || `HTTP ${error.status}`;
  return error instanceof Error ? error.message : String(error);
}

async function select(queryId: string): Promise<void> {
  state.selected = queryId;
  try {
    state.detail = await api.result(queryId);
    state.banner = null;
  } catch (error) {
    state.detail = null;
    state.banner =
      error instanceof ApiError && error.status === 404
        ? `No result for ${queryId} (404).`
        : `Failed to load ${queryId}: ${describe(error)}`;
  }
  draw();
}

async function submit(candidateId: string | null, verdict: "accept" | "reject",
                      force = false): Promise<void> {
  if (!state.detail) return;
  const reviewer = state.reviewer.trim();
  if (!reviewer) {
    state.banner = "Enter a reviewer id before submitting verdicts.";
    draw();
    return;
  }
  const queryId = state.detail.query_id;
  const kept = { items: state.items, detail: state.detail };

  await optimistic({
    apply: () => {
      // The row leaves the review queue immediately; the server echo
      // that follows is authoritative.
      state.items = state.items.filter((i) => i.query_id !== queryId);
      state.detail = null;
      draw();
      return kept;
    },
    remote: async () => {
      const updated = await api.submitVerdict({
        query_id: queryId,
        candidate_id: candidateId,
        verdict,
        reviewer,
        force,
      });
      state.detail = updated;
      state.selected = queryId;
      await refreshStats();
      draw();
    },
    revert: (snapshot) => {
      state.items = snapshot.items;
      state.detail = snapshot.detail;
    },
    onError: (error) => {
      if (error instanceof ApiError && error.status === 409) {
        const again = window.confirm(
          `${error.detail}\n\nSubmit anyway and overwrite the earlier decision?`,
        );
        if (again) {
          void submit(candidateId, verdict, true);
          return;
        }
      }
      state.banner = describe(error);
      draw();
    },
  });
}

function moveSelection(step: number): void {
  if (state.items.length === 0) return;
  const index = state.items.findIndex((i) => i.query_id === state.selected);
  const next = Math.min(Math.max(index + step, 0), state.items.length - 1);
  void select(state.items[next].query_id);
}

function bindControls(): void {
  const filter = byId("filter") as HTMLSelectElement;
  filter.onchange = () => {
    state.filter = filter.value.split(",") as Tag[];
    state.offset = 0;
    void loadQueue();
  };
  const reviewer = byId("reviewer") as HTMLInputElement;
  reviewer.value = state.reviewer;
  reviewer.oninput = () => {
    state.reviewer = reviewer.value;
    localStorage.setItem("reviewer", reviewer.value);
  };
  (byId("prev") as HTMLButtonElement).onclick = () => {
    state.offset = Math.max(0, state.offset - PAGE_SIZE);
    void loadQueue();
  };
  (byId("next") as HTMLButtonElement).onclick = () => {
    state.offset += PAGE_SIZE;
    void loadQueue();
  };
  (byId("reload") as HTMLButtonElement).onclick = () => void loadQueue();

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    if (event.key === "j") moveSelection(1);
    if (event.key === "k") moveSelection(-1);
    if (event.key === "a" && state.detail?.candidates.length) {
      void submit(state.detail.candidates[0].id, "accept");
    }
    if (event.key === "r" && state.detail) {
      void submit(null, "reject");
    }
  });
}

bindControls();
void loadQueue();
void refreshStats();
setInterval(refreshStats, 10_000);
