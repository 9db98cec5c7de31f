/** Typed client for the annotation service. Everything the UI knows about
 * documents and annotations flows through these endpoints; there is no
 * direct file access.
 */

import {
  AnnotationSetJson,
  DiffJson,
  DocumentJson,
  DocumentListItem,
  TimerAck,
  TimerKind,
  ViolationJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  /** Violation list from a 400 PUT rejection, if that is what this is. */
  violations(): ViolationJson[] | null {
    const d = this.detail as { violations?: ViolationJson[] } | null;
    if (d && typeof d === "object" && Array.isArray(d.violations)) return d.violations;
    return null;
  }
}

export interface ApiClientLike {
  listDocuments(): Promise<DocumentListItem[]>;
  getDocument(docId: string): Promise<DocumentJson>;
  getAnnotations(docId: string, source: string): Promise<AnnotationSetJson>;
  putRefined(docId: string, payload: AnnotationSetJson): Promise<AnnotationSetJson>;
  postTimer(docId: string, kind: TimerKind): Promise<TimerAck>;
  getDiff(docId: string, base: string): Promise<DiffJson>;
}

export class ApiClient implements ApiClientLike {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, null, `service unreachable: ${(err as Error).message}`);
    }
    if (!resp.ok) {
      let detail: unknown = null;
      try {
        detail = (await resp.json()).detail;
      } catch {
        // non-JSON error body; status alone will have to do
      }
      const summary = typeof detail === "string" ? detail : `${method} ${path} failed`;
      throw new ApiError(resp.status, detail, `${resp.status}: ${summary}`);
    }
    return (await resp.json()) as T;
  }

  listDocuments(): Promise<DocumentListItem[]> {
    return this.request("GET", "/documents");
  }

  getDocument(docId: string): Promise<DocumentJson> {
    return this.request("GET", `/documents/${encodeURIComponent(docId)}`);
  }

  getAnnotations(docId: string, source: string): Promise<AnnotationSetJson> {
    return this.request(
      "GET",
      `/documents/${encodeURIComponent(docId)}/annotations/${encodeURIComponent(source)}`,
    );
  }

  putRefined(docId: string, payload: AnnotationSetJson): Promise<AnnotationSetJson> {
    return this.request("PUT", `/documents/${encodeURIComponent(docId)}/annotations/refined`, payload);
  }

  postTimer(docId: string, kind: TimerKind): Promise<TimerAck> {
    return this.request("POST", `/documents/${encodeURIComponent(docId)}/timer`, { kind });
  }

  getDiff(docId: string, base: string): Promise<DiffJson> {
    return this.request(
      "GET",
      `/documents/${encodeURIComponent(docId)}/diff?base=${encodeURIComponent(base)}`,
    );
  }
}
