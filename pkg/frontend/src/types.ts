// Mirrors of the API response bodies. The console renders exclusively from
// these shapes; nothing here is recomputed client-side.

export interface SkillSpec {
  id: string;
  name: string;
  phase: string;
  runner: string;
  needs: string[];
  produces: string[];
  body: string;
  model_config: Record<string, unknown>;
  limits: Record<string, unknown>;
  owner_persona: string | null;
}

export interface SkillsBody {
  skills: SkillSpec[];
  by_phase: Record<string, string[]>;
  by_runner: Record<string, string[]>;
}

export interface PersonaWorkflow {
  name: string;
  template: string;
  description: string;
}

export interface PersonaPack {
  id: string;
  name: string;
  title: string;
  sector_hint: string;
  voice: string;
  skills: string[];
  default_template: string;
  workflows: PersonaWorkflow[];
  references: string[];
  config: Record<string, unknown>;
}

export interface WorkflowTemplate {
  id: string;
  engagement_type: string;
  compose_skill: string;
  required_phases: string[];
  pinned_producers: Record<string, string>;
  params: Record<string, unknown>;
}

export interface DataSource {
  id: string;
  kind: string;
  enabled: boolean;
  description?: string;
  ticker?: string;
  filings?: number;
  news?: number;
  has_market?: boolean;
}

export interface TaskSummary {
  id: string;
  skill: string;
  phase: string;
  status: string;
  attempt_count: number;
}

export interface EngagementRecord {
  engagement_id: string;
  template: string;
  engagement_type: string;
  ticker: string;
  persona: string;
  params: Record<string, unknown>;
  status: string; // created | running | done | aborted | paused
  seed: number;
  as_of: string;
  created_at: string;
  updated_at: string;
}

export interface EngagementDetail extends EngagementRecord {
  tasks: TaskSummary[];
}

export interface CreateEngagementRequest {
  workflow_id: string;
  ticker: string;
  persona_id?: string;
  engagement_type?: string;
  params?: Record<string, unknown>;
  seed?: number;
}

export interface CreateEngagementResponse {
  engagement_id: string;
  status: string;
  tasks: TaskSummary[];
}

// SSE payload; the event name travels in the frame's `event:` field and the
// sequence number doubles as the frame id.
export interface TaskEvent {
  engagement_id: string;
  task_id: string | null;
  sequence_no: number;
  timestamp: string;
  detail: string | null;
}

export interface GraphNode {
  kind: string; // ticker | memo | analyst | theme
  key: string;
  attributes: Record<string, unknown>;
}

export interface GraphEdge {
  kind: string; // wrote | covers | explores | cites
  from: string;
  to: string;
}

// Node kinds plus an "edges" total; the graph view must show these numbers
// untouched.
export type GraphCounts = Record<string, number>;

export interface GraphBody {
  built_from: string;
  nodes: GraphNode[];
  edges: GraphEdge[];
  counts: GraphCounts;
  warnings: string[];
}

export interface GapRow {
  ticker: string;
  personas: string[];
}

export interface ThemeMemoRow {
  memo: string;
  ticker: string;
  persona: string;
  timestamp: string;
  verdict: string | null;
}

export interface ThemeView {
  theme: string;
  display: string;
  memos: ThemeMemoRow[];
  tickers: string[];
  analysts: string[];
}

export interface CompareRow {
  persona: string;
  memo: string;
  verdict: string | null;
  created_at: string;
}

export interface LineageRow {
  id: string;
  category: string;
  producer_skill: string;
}

export interface ArtifactBody {
  id: string;
  category: string;
  engagement_id: string;
  producer_skill: string;
  producer_task: string;
  parent_ids: string[];
  created_at: string;
  payload_kind: string;
  lineage: LineageRow[];
  payload?: Record<string, unknown>;
  text?: string;
}

export interface Citation {
  id: string;
  resolved: boolean;
  category?: string;
  producer_skill?: string;
}

export interface MemoBody {
  id: string;
  engagement_id: string;
  ticker: string | null;
  created_at: string;
  text: string;
  citations: Citation[];
  lineage: LineageRow[];
}

export interface HealthBody {
  ok: boolean;
  artifacts: number;
}

export interface ApiErrorBody {
  error: string;
  detail: string;
}
