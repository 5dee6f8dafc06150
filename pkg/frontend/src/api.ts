/**
 * Typed client for the annotation service; the fetch function is injectable
 * so tests can script responses and inspect outgoing payloads.
 */
import type { BatchResponse, SubmissionPayload } from "./store.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export type SubmitResult =
  | { ok: true; accepted: number }
  | { ok: false; status: number; detail: string };

export class NetworkFailure extends Error {}

export class ApiClient {
  private readonly fetchFn: FetchLike;
  private readonly base: string;

  constructor(fetchFn: FetchLike, base = "") {
    this.fetchFn = fetchFn;
    this.base = base;
  }

  /** GET /api/batch — the next unfinished batch for this annotator. */
  async fetchBatch(annotator: string): Promise<BatchResponse> {
    let resp: Response;
    try {
      resp = await this.fetchFn(
        `${this.base}/api/batch?annotator=${encodeURIComponent(annotator)}`,
      );
    } catch (err) {
      throw new NetworkFailure(String(err));
    }
    if (!resp.ok) {
      throw new NetworkFailure(`batch request failed with ${resp.status}`);
    }
    return (await resp.json()) as BatchResponse;
  }

  /** POST /api/answers — one request per completed batch. */
  async submitAnswers(payload: SubmissionPayload): Promise<SubmitResult> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.base}/api/answers`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      });
    } catch (err) {
      throw new NetworkFailure(String(err));
    }
    if (resp.ok) {
      const doc = (await resp.json()) as { accepted: number };
      return { ok: true, accepted: doc.accepted };
    }
    let detail = `status ${resp.status}`;
    try {
      const doc = (await resp.json()) as { detail?: string };
      if (doc.detail) detail = doc.detail;
    } catch {
      // non-JSON error body: keep the status text
    }
    return { ok: false, status: resp.status, detail };
  }
}
