/**
 * Session state for one annotation batch: per-item multi-select answers,
 * draft persistence across reloads, and submission payload construction.
 *
 * The store never sees (or asks for) gold tags or item roles; the server
 * payload carries only item_id, text and options.
 */

export interface BatchItem {
  item_id: string;
  text: string;
  options: string[];
}

export interface BatchPayload {
  batch_id: string;
  items: BatchItem[];
}

export interface Progress {
  assigned: number;
  completed: number;
  total_batches: number;
}

export interface BatchResponse {
  batch: BatchPayload | null;
  done: boolean;
  progress: Progress;
}

export interface AnswerEntry {
  item_id: string;
  selected: string[];
}

export interface SubmissionPayload {
  annotator: string;
  batch_id: string;
  answers: AnswerEntry[];
}

/** Minimal Storage surface so tests can inject a fake. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/** Option O is phrased as "not a named entity" for annotators. */
export function optionLabel(option: string): string {
  return option === "O" ? "O (not a named entity)" : option;
}

export class BatchSession {
  readonly annotator: string;
  readonly batch: BatchPayload;
  private readonly storage: KeyValueStore;
  private readonly selections = new Map<string, Set<string>>();

  constructor(annotator: string, batch: BatchPayload, storage: KeyValueStore) {
    this.annotator = annotator;
    this.batch = batch;
    this.storage = storage;
    for (const item of batch.items) {
      this.selections.set(item.item_id, new Set());
    }
    this.loadDraft();
  }

  private draftKey(): string {
    return `tagscope-draft:${this.annotator}:${this.batch.batch_id}`;
  }

  item(itemId: string): BatchItem {
    const item = this.batch.items.find((it) => it.item_id === itemId);
    if (!item) throw new Error(`unknown item ${itemId}`);
    return item;
  }

  /** Toggle one option; selections stay within the item's option set. */
  toggle(itemId: string, option: string): void {
    const item = this.item(itemId);
    if (!item.options.includes(option)) {
      throw new Error(`option ${option} not offered for ${itemId}`);
    }
    const chosen = this.selections.get(itemId)!;
    if (chosen.has(option)) {
      chosen.delete(option);
    } else {
      chosen.add(option);
    }
    this.saveDraft();
  }

  selectedFor(itemId: string): string[] {
    const chosen = this.selections.get(itemId);
    return chosen ? [...chosen] : [];
  }

  isSelected(itemId: string, option: string): boolean {
    return this.selections.get(itemId)?.has(option) ?? false;
  }

  /** An item is answerable only once >= 1 option is picked. */
  itemComplete(itemId: string): boolean {
    return (this.selections.get(itemId)?.size ?? 0) > 0;
  }

  completedCount(): number {
    return this.batch.items.filter((it) => this.itemComplete(it.item_id)).length;
  }

  isComplete(): boolean {
    return this.completedCount() === this.batch.items.length;
  }

  /** Throws unless every item has at least one selection. */
  buildPayload(): SubmissionPayload {
    if (!this.isComplete()) {
      throw new Error(
        `batch incomplete: ${this.completedCount()}/${this.batch.items.length} answered`,
      );
    }
    return {
      annotator: this.annotator,
      batch_id: this.batch.batch_id,
      answers: this.batch.items.map((item) => ({
        item_id: item.item_id,
        selected: this.selectedFor(item.item_id),
      })),
    };
  }

  saveDraft(): void {
    const doc: Record<string, string[]> = {};
    for (const [itemId, chosen] of this.selections) {
      if (chosen.size > 0) doc[itemId] = [...chosen];
    }
    this.storage.setItem(this.draftKey(), JSON.stringify(doc));
  }

  loadDraft(): void {
    const raw = this.storage.getItem(this.draftKey());
    if (!raw) return;
    let doc: unknown;
    try {
      doc = JSON.parse(raw);
    } catch {
      return; // corrupt draft: start clean
    }
    if (typeof doc !== "object" || doc === null) return;
    for (const [itemId, picks] of Object.entries(doc as Record<string, unknown>)) {
      const chosen = this.selections.get(itemId);
      if (!chosen || !Array.isArray(picks)) continue;
      const options = this.item(itemId).options;
      for (const pick of picks) {
        if (typeof pick === "string" && options.includes(pick)) chosen.add(pick);
      }
    }
  }

  clearDraft(): void {
    this.storage.removeItem(this.draftKey());
  }
}
