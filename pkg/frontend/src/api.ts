// Typed client for the engine's HTTP surface. Every console mutation goes
// through one of the three POSTs here; everything else is a read.

import type {
  ArtifactBody,
  CompareRow,
  CreateEngagementRequest,
  CreateEngagementResponse,
  DataSource,
  EngagementDetail,
  EngagementRecord,
  GapRow,
  GraphBody,
  HealthBody,
  MemoBody,
  PersonaPack,
  SkillsBody,
  ThemeView,
  WorkflowTemplate,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly base: string = "",
    fetchImpl?: FetchLike,
  ) {
    // bind lazily so a bare global fetch keeps its own receiver
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let code = `http-${response.status}`;
      let detail = response.statusText || code;
      try {
        const body = (await response.json()) as { error?: string; detail?: string };
        if (body.error) code = body.error;
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<HealthBody> {
    return this.request("/healthz");
  }

  listSkills(): Promise<SkillsBody> {
    return this.request("/skills");
  }

  async listPersonas(): Promise<PersonaPack[]> {
    const body = await this.request<{ personas: PersonaPack[] }>("/personas");
    return body.personas;
  }

  hirePersona(manifest: Record<string, unknown>): Promise<PersonaPack> {
    return this.post("/personas", manifest);
  }

  async listWorkflows(): Promise<WorkflowTemplate[]> {
    const body = await this.request<{ workflows: WorkflowTemplate[] }>("/workflows");
    return body.workflows;
  }

  async listDataSources(): Promise<DataSource[]> {
    const body = await this.request<{ sources: DataSource[] }>("/data-sources");
    return body.sources;
  }

  async listEngagements(): Promise<EngagementRecord[]> {
    const body = await this.request<{ engagements: EngagementRecord[] }>("/engagements");
    return body.engagements;
  }

  getEngagement(id: string): Promise<EngagementDetail> {
    return this.request(`/engagements/${encodeURIComponent(id)}`);
  }

  createEngagement(request: CreateEngagementRequest): Promise<CreateEngagementResponse> {
    return this.post("/engagements", request);
  }

  resumeEngagement(id: string): Promise<{ engagement_id: string; status: string }> {
    return this.post(`/engagements/${encodeURIComponent(id)}/resume`, {});
  }

  /** SSE endpoint for one engagement; consumed by EventFeed, not fetch-JSON. */
  eventsUrl(id: string): string {
    return `${this.base}/engagements/${encodeURIComponent(id)}/events`;
  }

  graph(): Promise<GraphBody> {
    return this.request("/graph");
  }

  async gaps(): Promise<GapRow[]> {
    const body = await this.request<{ gaps: GapRow[] }>("/graph/gaps");
    return body.gaps;
  }

  theme(key: string): Promise<ThemeView> {
    return this.request(`/graph/themes/${encodeURIComponent(key)}`);
  }

  async compare(ticker: string): Promise<CompareRow[]> {
    const body = await this.request<{ ticker: string; views: CompareRow[] }>(
      `/graph/tickers/${encodeURIComponent(ticker)}/compare`,
    );
    return body.views;
  }

  artifact(id: string): Promise<ArtifactBody> {
    return this.request(`/artifacts/${encodeURIComponent(id)}`);
  }

  memo(id: string): Promise<MemoBody> {
    return this.request(`/memos/${encodeURIComponent(id)}`);
  }
}
