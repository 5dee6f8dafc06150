import type { BatchPayload, BatchResponse, KeyValueStore } from "../src/store.js";

export class FakeStorage implements KeyValueStore {
  private readonly map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.has(key) ? this.map.get(key)! : null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }

  removeItem(key: string): void {
    this.map.delete(key);
  }
}

export const OPTIONS = ["PER", "ORG", "LOC", "MISC", "O"];

export function makeBatch(id = "batch-000", nItems = 10): BatchPayload {
  return {
    batch_id: id,
    items: Array.from({ length: nItems }, (_, i) => ({
      item_id: `${id}-it-${i}`,
      text: `Sentence ${i} hides ___ in context .`,
      options: [...OPTIONS],
    })),
  };
}

export function batchResponse(batch: BatchPayload | null,
                              completed = 0): BatchResponse {
  return {
    batch,
    done: batch === null,
    progress: { assigned: 1, completed, total_batches: 2 },
  };
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

/** Scripted fetch: shift one response per call, recording every request. */
export function scriptedFetch(script: Array<() => Response | Error>) {
  const requests: RecordedRequest[] = [];
  const fetchFn = async (input: string, init?: RequestInit): Promise<Response> => {
    requests.push({
      url: input,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : null,
    });
    const next = script.shift();
    if (!next) throw new Error(`unscripted request: ${input}`);
    const out = next();
    if (out instanceof Error) throw out;
    return out;
  };
  return { fetchFn, requests };
}

export function jsonResponse(doc: unknown, status = 200): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "content-type": "application/json" },
  });
}
