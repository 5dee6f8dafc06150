/**
 * Annotator-facing single-page flow: enter an id, answer each masked
 * sentence with one or more entity types, review the batch, submit.
 *
 * One batch at a time; drafts survive reloads via localStorage; gold labels
 * and item roles never reach this client.
 */
import { ApiClient, NetworkFailure } from "./api.js";
import {
  BatchPayload,
  BatchSession,
  KeyValueStore,
  Progress,
  optionLabel,
} from "./store.js";

export interface AppDeps {
  api: ApiClient;
  storage: KeyValueStore;
}

const ANNOTATOR_KEY = "tagscope-annotator";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

export class App {
  private readonly root: HTMLElement;
  private readonly deps: AppDeps;
  private session: BatchSession | null = null;
  private progress: Progress | null = null;

  constructor(root: HTMLElement, deps: AppDeps) {
    this.root = root;
    this.deps = deps;
  }

  start(): void {
    const stored = this.deps.storage.getItem(ANNOTATOR_KEY);
    if (stored) {
      void this.loadBatch(stored);
    } else {
      this.renderLogin();
    }
  }

  // -- screens ---------------------------------------------------------------

  private renderLogin(message = ""): void {
    this.root.replaceChildren();
    const box = el("div", { class: "login" });
    box.appendChild(el("h1", {}, "Entity annotation"));
    box.appendChild(
      el("p", {}, "Decide what kind of name fits each blank, using only the " +
        "surrounding words. You may pick more than one option."));
    const input = el("input", { id: "annotator-input", placeholder: "annotator id" });
    const button = el("button", { id: "annotator-start" }, "Start");
    button.onclick = () => {
      const annotator = input.value.trim();
      if (!annotator) {
        this.setBanner("Please enter an annotator id.", "error");
        return;
      }
      this.deps.storage.setItem(ANNOTATOR_KEY, annotator);
      void this.loadBatch(annotator);
    };
    box.append(input, button);
    if (message) box.appendChild(el("p", { class: "banner error" }, message));
    this.root.appendChild(box);
  }

  private async loadBatch(annotator: string): Promise<void> {
    try {
      const resp = await this.deps.api.fetchBatch(annotator);
      this.progress = resp.progress;
      if (resp.batch === null) {
        this.renderDone();
        return;
      }
      this.session = new BatchSession(annotator, resp.batch, this.deps.storage);
      this.renderBatch();
    } catch (err) {
      if (err instanceof NetworkFailure) {
        this.renderRetry(annotator, String(err.message));
      } else {
        throw err;
      }
    }
  }

  private renderRetry(annotator: string, detail: string): void {
    this.root.replaceChildren();
    const box = el("div", { class: "retry" });
    box.appendChild(el("p", { class: "banner error", id: "retry-banner" },
      `Could not reach the server (${detail}).`));
    const button = el("button", { id: "retry-button" }, "Retry");
    button.onclick = () => void this.loadBatch(annotator);
    box.appendChild(button);
    this.root.appendChild(box);
  }

  private renderDone(): void {
    this.root.replaceChildren();
    const done = this.progress?.completed ?? 0;
    this.root.appendChild(el("div", { class: "done", id: "all-done" },
      `All done - ${done} batch(es) completed. Thank you!`));
  }

  private renderBatch(): void {
    const session = this.session!;
    this.root.replaceChildren();
    const header = el("div", { class: "header" });
    header.appendChild(el("h1", {}, "Entity annotation"));
    header.appendChild(el("span", { id: "progress" }, this.progressText()));
    this.root.appendChild(header);
    this.root.appendChild(el("div", { id: "banner-slot" }));

    const list = el("div", { class: "items" });
    session.batch.items.forEach((item, index) => {
      const card = el("div", { class: "item", "data-item": item.item_id });
      card.appendChild(el("p", { class: "item-number" },
        `${index + 1} of ${session.batch.items.length}`));
      card.appendChild(el("p", { class: "sentence" }, item.text));
      const group = el("div", { class: "options" });
      for (const option of item.options) {
        const label = el("label", {});
        const box = el("input", {
          type: "checkbox",
          "data-item": item.item_id,
          "data-option": option,
        }) as HTMLInputElement;
        box.checked = session.isSelected(item.item_id, option);
        box.onchange = () => {
          session.toggle(item.item_id, option);
          this.refreshBatchControls();
        };
        label.append(box, document.createTextNode(" " + optionLabel(option)));
        group.appendChild(label);
      }
      card.appendChild(group);
      list.appendChild(card);
    });
    this.root.appendChild(list);

    const review = el("button", { id: "review-button" }, "Review answers");
    review.onclick = () => this.renderReview();
    this.root.appendChild(review);
    this.refreshBatchControls();
  }

  private refreshBatchControls(): void {
    const session = this.session!;
    const review = this.root.querySelector<HTMLButtonElement>("#review-button");
    if (review) review.disabled = !session.isComplete();
    const progress = this.root.querySelector("#progress");
    if (progress) progress.textContent = this.progressText();
  }

  private progressText(): string {
    const session = this.session;
    const answered = session
      ? `${session.completedCount()}/${session.batch.items.length} answered`
      : "";
    const batches = this.progress
      ? ` - batch ${this.progress.completed + 1} of ${this.progress.total_batches}`
      : "";
    return answered + batches;
  }

  private renderReview(): void {
    const session = this.session!;
    this.root.replaceChildren();
    this.root.appendChild(el("h1", {}, "Review your answers"));
    this.root.appendChild(el("div", { id: "banner-slot" }));
    const list = el("div", { class: "review", id: "review-list" });
    for (const item of session.batch.items) {
      const row = el("div", { class: "review-row", "data-item": item.item_id });
      row.appendChild(el("p", { class: "sentence" }, item.text));
      row.appendChild(el("p", { class: "picked" },
        session.selectedFor(item.item_id).map(optionLabel).join(", ")));
      list.appendChild(row);
    }
    this.root.appendChild(list);
    const back = el("button", { id: "back-button" }, "Go back");
    back.onclick = () => this.renderBatch();
    const submit = el("button", { id: "submit-button" }, "Submit batch");
    submit.onclick = () => void this.submit();
    this.root.append(back, submit);
  }

  private async submit(): Promise<void> {
    const session = this.session!;
    let result;
    try {
      result = await this.deps.api.submitAnswers(session.buildPayload());
    } catch (err) {
      if (err instanceof NetworkFailure) {
        this.setBanner(`Network failure: ${err.message}. Please try again.`, "error");
        return;
      }
      throw err;
    }
    if (result.ok) {
      session.clearDraft();
      this.session = null;
      void this.loadBatch(session.annotator);
      return;
    }
    if (result.status === 409) {
      // already submitted elsewhere: drop the draft and move on
      this.setBanner("This batch was already submitted; loading the next one.",
        "info");
      session.clearDraft();
      this.session = null;
      void this.loadBatch(session.annotator);
      return;
    }
    this.setBanner(`Submission rejected: ${result.detail}`, "error");
  }

  private setBanner(message: string, kind: "error" | "info"): void {
    const slot = this.root.querySelector("#banner-slot");
    const banner = el("p", { class: `banner ${kind}` }, message);
    if (slot) {
      slot.replaceChildren(banner);
    } else {
      this.root.appendChild(banner);
    }
  }
}

export function mountApp(root: HTMLElement, deps: AppDeps): App {
  const app = new App(root, deps);
  app.start();
  return app;
}

declare global {
  interface Window {
    __TAGSCOPE_TEST__?: boolean;
  }
}

if (typeof document !== "undefined" && !globalThis.window?.__TAGSCOPE_TEST__) {
  const root = document.getElementById("app");
  if (root) {
    mountApp(root, {
      api: new ApiClient((input, init) => fetch(input, init)),
      storage: window.localStorage,
    });
  }
}
