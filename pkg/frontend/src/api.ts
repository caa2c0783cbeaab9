import type {
  Annotation,
  ClustersResponse,
  DendrogramPayload,
  PathResponse,
  ScoresResponse,
  SweepResponse,
  WorkDetail,
  WorkSummary,
} from "./types.js";

/** Non-2xx response from the engine, with the parsed `detail` payload. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : `request failed with status ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

/** A commit raced another annotator; carries the revision to rebase onto. */
export class AnnotationConflictError extends ApiError {
  readonly currentRevision: number;

  constructor(detail: { message?: string; current_revision: number }) {
    super(409, detail.message ?? "annotation conflict");
    this.name = "AnnotationConflictError";
    this.currentRevision = detail.current_revision;
  }
}

export interface AnnotationRequest {
  threshold: number;
  annotator: string;
  base_revision: number | null;
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: typeof fetch;

  constructor(base = "", fetchImpl: typeof fetch = fetch) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.base}${path}`, init);
    let body: unknown = null;
    const text = await resp.text();
    if (text) {
      try {
        body = JSON.parse(text);
      } catch {
        body = text;
      }
    }
    if (!resp.ok) {
      const detail =
        body !== null && typeof body === "object" && "detail" in body
          ? (body as { detail: unknown }).detail
          : body;
      if (
        resp.status === 409 &&
        detail !== null &&
        typeof detail === "object" &&
        "current_revision" in detail
      ) {
        throw new AnnotationConflictError(
          detail as { message?: string; current_revision: number },
        );
      }
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }

  async listWorks(): Promise<WorkSummary[]> {
    const body = await this.request<{ works: WorkSummary[] }>("/api/works");
    return body.works;
  }

  getWork(workId: string): Promise<WorkDetail> {
    return this.request(`/api/works/${encodeURIComponent(workId)}`);
  }

  getScores(workId: string): Promise<ScoresResponse> {
    return this.request(`/api/works/${encodeURIComponent(workId)}/scores`);
  }

  getDendrogram(workId: string): Promise<DendrogramPayload> {
    return this.request(`/api/works/${encodeURIComponent(workId)}/dendrogram`);
  }

  /** Server-side cut at `threshold` in tree-height units. The slider
   * path never calls this; it exists for spot checks against the
   * client-side cut. */
  getClusters(workId: string, threshold: number): Promise<ClustersResponse> {
    const q = encodeURIComponent(String(threshold));
    return this.request(`/api/works/${encodeURIComponent(workId)}/clusters?threshold=${q}`);
  }

  /** Error-count curves for labeled works, or null when the work has
   * no usable labels (the readout is simply hidden then). */
  async getSweep(workId: string): Promise<SweepResponse | null> {
    try {
      return await this.request<SweepResponse>(
        `/api/works/${encodeURIComponent(workId)}/sweep`,
      );
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }

  /** Provenance chain for a rescued track. Resolves to null when the
   * engine recorded no path (direct match or isolated track); other
   * failures still throw. */
  async getPath(workId: string, trackId: string): Promise<PathResponse | null> {
    try {
      return await this.request<PathResponse>(
        `/api/works/${encodeURIComponent(workId)}/path/${encodeURIComponent(trackId)}`,
      );
    } catch (err) {
      if (
        err instanceof ApiError &&
        err.status === 404 &&
        typeof err.detail === "string" &&
        err.detail.startsWith("no path recorded")
      ) {
        return null;
      }
      throw err;
    }
  }

  /** Latest persisted annotation, or null when none exists yet. */
  async getAnnotation(workId: string): Promise<Annotation | null> {
    try {
      return await this.request<Annotation>(
        `/api/works/${encodeURIComponent(workId)}/annotation`,
      );
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }

  postAnnotation(workId: string, body: AnnotationRequest): Promise<Annotation> {
    return this.request(`/api/works/${encodeURIComponent(workId)}/annotation`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
