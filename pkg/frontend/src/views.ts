// HTML builders for every screen. Pure functions: API bodies in, markup out.
// Interactivity happens through data-action attributes that app.ts delegates.

import { escapeHtml, eventChip, pluralize, shortId, statusChip, when } from "./format.js";
import type { LauncherState } from "./launcher.js";
import type { GraphModel, PlacedNode, Transform } from "./layout.js";
import { parseMemo, renderSectionBody } from "./memo.js";
import type { Timeline, TimelineEntry } from "./timeline.js";
import type {
  ArtifactBody,
  CompareRow,
  DataSource,
  EngagementDetail,
  EngagementRecord,
  GapRow,
  GraphNode,
  MemoBody,
  PersonaPack,
  SkillsBody,
  SkillSpec,
  ThemeView,
  WorkflowTemplate,
} from "./types.js";

export const NAV_ITEMS = [
  { route: "dashboard", label: "Dashboard" },
  { route: "talent", label: "Talent Pool" },
  { route: "library", label: "Library" },
  { route: "engagements", label: "Engagements" },
  { route: "master", label: "Master Agent" },
  { route: "memos", label: "Memos" },
] as const;

export type Route = (typeof NAV_ITEMS)[number]["route"];

export function renderNav(active: Route): string {
  const buttons = NAV_ITEMS.map(
    (item) =>
      `<button class="tab-btn${item.route === active ? " active" : ""}"` +
      ` data-action="navigate" data-route="${item.route}">${item.label}</button>`,
  );
  return `<nav class="tabs">${buttons.join("")}</nav>`;
}

function emptyState(message: string): string {
  return `<div class="empty-state">${escapeHtml(message)}</div>`;
}

function panel(title: string, body: string, extra = ""): string {
  return (
    `<section class="panel">` +
    `<div class="panel-head"><h2>${escapeHtml(title)}</h2>${extra}</div>` +
    body +
    `</section>`
  );
}

// ---------------------------------------------------------------------------
// Dashboard

export interface DashboardData {
  personas: PersonaPack[];
  engagements: EngagementRecord[];
  memoNodes: GraphNode[];
  timelines: Map<string, Timeline>;
}

export function renderDashboard(data: DashboardData): string {
  return (
    `<div class="grid-2">` +
    panel("Pod personas", personaSummaryList(data.personas)) +
    panel("Running engagements", runningCards(data.engagements, data.timelines)) +
    `</div>` +
    panel("Recent memos", recentMemoCards(data.memoNodes))
  );
}

function personaSummaryList(personas: PersonaPack[]): string {
  if (personas.length === 0) {
    return emptyState("No personas in the pod yet. Hire one from the Talent Pool.");
  }
  const rows = personas.map(
    (p) =>
      `<div class="row-line" data-action="navigate" data-route="talent">` +
      `<strong>${escapeHtml(p.name)}</strong>` +
      `<span class="muted">${escapeHtml(p.title)}</span>` +
      `<span class="pill">${escapeHtml(p.default_template)}</span>` +
      `<span class="muted">${pluralize(p.workflows.length, "workflow")}</span>` +
      `</div>`,
  );
  return `<div class="row-list">${rows.join("")}</div>`;
}

function runningCards(
  engagements: EngagementRecord[],
  timelines: Map<string, Timeline>,
): string {
  const active = engagements.filter(
    (e) => e.status === "running" || e.status === "created",
  );
  if (active.length === 0) {
    return emptyState("Nothing running. Launch an engagement to put the pod to work.");
  }
  return active.map((record) => runningCard(record, timelines.get(record.engagement_id))).join("");
}

function runningCard(record: EngagementRecord, timeline: Timeline | undefined): string {
  const states = timeline ? timeline.taskStates() : new Map<string, string>();
  const strip = [...states.entries()]
    .map(
      ([taskId, state]) =>
        `<span class="task-dot task-${state}" title="${escapeHtml(`${taskId}: ${state}`)}"></span>`,
    )
    .join("");
  const entries = timeline ? timeline.ordered() : [];
  const last = entries.length > 0 ? entries[entries.length - 1] : null;
  const lastLine = last
    ? `<div class="muted mono">#${last.sequenceNo} ${escapeHtml(last.name)}` +
      `${last.taskId ? " " + escapeHtml(last.taskId) : ""}</div>`
    : `<div class="muted">waiting for events</div>`;
  return (
    `<div class="card" data-action="open-engagement" data-id="${escapeHtml(record.engagement_id)}">` +
    `<div class="card-top"><strong>${escapeHtml(record.ticker)}</strong>` +
    `<span class="pill">${escapeHtml(record.template)}</span>` +
    statusChip(record.status) +
    `</div>` +
    `<div class="muted">persona: ${escapeHtml(record.persona)}</div>` +
    `<div class="task-strip">${strip}</div>` +
    lastLine +
    `</div>`
  );
}

function recentMemoCards(memoNodes: GraphNode[]): string {
  if (memoNodes.length === 0) {
    return emptyState("No memos yet. Finished engagements will file their memos here.");
  }
  const sorted = [...memoNodes].sort((a, b) =>
    String(b.attributes.timestamp ?? "").localeCompare(String(a.attributes.timestamp ?? "")),
  );
  const cards = sorted.slice(0, 6).map((node) => {
    const verdict = node.attributes.verdict;
    return (
      `<div class="card" data-action="open-memo" data-id="${escapeHtml(node.key)}">` +
      `<div class="card-top"><strong>${escapeHtml(node.attributes.ticker)}</strong>` +
      (verdict ? `<span class="pill pill-verdict">${escapeHtml(verdict)}</span>` : "") +
      `</div>` +
      `<div class="muted">by ${escapeHtml(node.attributes.persona)}</div>` +
      `<div class="muted">${escapeHtml(when(String(node.attributes.timestamp ?? "")))}</div>` +
      `<div class="mono muted">${shortId(node.key)}</div>` +
      `</div>`
    );
  });
  return `<div class="card-row">${cards.join("")}</div>`;
}

// ---------------------------------------------------------------------------
// Talent pool

export interface HireFormState {
  open: boolean;
  manifest: string;
  error: string | null;
  hired: string | null;
}

export function renderTalent(personas: PersonaPack[], hire: HireFormState): string {
  const cards =
    personas.length === 0
      ? emptyState("The pod is empty. Paste a persona pack manifest below to hire.")
      : `<div class="card-row">${personas.map(personaCard).join("")}</div>`;
  return (
    panel(
      "Talent pool",
      cards,
      `<button class="btn" data-action="toggle-hire">${hire.open ? "Close" : "Hire persona"}</button>`,
    ) + (hire.open ? hirePanel(hire) : hire.hired ? hiredNotice(hire.hired) : "")
  );
}

function personaCard(p: PersonaPack): string {
  const workflows = p.workflows
    .map(
      (w) =>
        `<li><strong>${escapeHtml(w.name)}</strong>` +
        ` <span class="mono muted">${escapeHtml(w.template)}</span>` +
        `<br><span class="muted">${escapeHtml(w.description)}</span></li>`,
    )
    .join("");
  const skills = p.skills.map((s) => `<span class="pill">${escapeHtml(s)}</span>`).join(" ");
  return (
    `<div class="card card-wide">` +
    `<div class="card-top"><strong>${escapeHtml(p.name)}</strong>` +
    `<span class="muted">${escapeHtml(p.title)}</span></div>` +
    `<blockquote class="voice">${escapeHtml(p.voice)}</blockquote>` +
    `<div class="muted">sector: ${escapeHtml(p.sector_hint)}</div>` +
    `<div>skills: ${skills || '<span class="muted">none</span>'}</div>` +
    `<div class="muted">default workflow: <span class="mono">${escapeHtml(p.default_template)}</span></div>` +
    `<ul class="workflow-list">${workflows}</ul>` +
    `<div class="muted">${pluralize(p.references.length, "reference note")}</div>` +
    `</div>`
  );
}

function hirePanel(hire: HireFormState): string {
  return panel(
    "Hire a persona",
    `<p class="muted">Paste a pack manifest (JSON). Optional "references" maps note names to text.</p>` +
      `<textarea id="hire-manifest" rows="10" class="mono" placeholder='{"id": "...", "name": "...", ...}'>` +
      escapeHtml(hire.manifest) +
      `</textarea>` +
      (hire.error ? `<div class="banner banner-bad">${escapeHtml(hire.error)}</div>` : "") +
      `<button class="btn btn-primary" data-action="hire">Onboard</button>`,
  );
}

function hiredNotice(id: string): string {
  return `<div class="banner banner-ok">Persona ${escapeHtml(id)} onboarded.</div>`;
}

// ---------------------------------------------------------------------------
// Library: skills / workflows / data sources

export type LibraryTab = "skills" | "workflows" | "data";

export function renderLibrary(
  tab: LibraryTab,
  skills: SkillsBody | null,
  workflows: WorkflowTemplate[] | null,
  sources: DataSource[] | null,
): string {
  const tabs = (["skills", "workflows", "data"] as const)
    .map(
      (t) =>
        `<button class="tab-btn${t === tab ? " active" : ""}"` +
        ` data-action="library-tab" data-tab="${t}">${t}</button>`,
    )
    .join("");
  let body = "";
  if (tab === "skills") body = skills ? skillCards(skills) : emptyState("Loading skills...");
  if (tab === "workflows") {
    body = workflows ? workflowTable(workflows) : emptyState("Loading workflows...");
  }
  if (tab === "data") body = sources ? sourceTable(sources) : emptyState("Loading data sources...");
  return `<div class="tabs sub-tabs">${tabs}</div>${body}`;
}

function skillCards(body: SkillsBody): string {
  if (body.skills.length === 0) return emptyState("No skills registered.");
  const phases = Object.keys(body.by_phase).sort();
  const summary = phases
    .map((phase) => `<span class="pill">${escapeHtml(phase)}: ${body.by_phase[phase].length}</span>`)
    .join(" ");
  const cards = body.skills.map(skillCard).join("");
  return panel("Skill registry", `<div class="muted">${summary}</div><div class="card-row">${cards}</div>`);
}

function skillCard(skill: SkillSpec): string {
  const needs = skill.needs.length
    ? skill.needs.map((n) => `<span class="pill">${escapeHtml(n)}</span>`).join(" ")
    : '<span class="muted">nothing</span>';
  const produces = skill.produces
    .map((p) => `<span class="pill pill-out">${escapeHtml(p)}</span>`)
    .join(" ");
  return (
    `<div class="card card-wide">` +
    `<div class="card-top"><strong class="mono">${escapeHtml(skill.id)}</strong>` +
    `<span class="pill">${escapeHtml(skill.phase)}</span>` +
    `<span class="pill pill-runner">${escapeHtml(skill.runner)}</span>` +
    (skill.owner_persona ? `<span class="pill pill-owner">${escapeHtml(skill.owner_persona)}</span>` : "") +
    `</div>` +
    `<div class="muted">${escapeHtml(skill.name)}</div>` +
    `<div class="contract">needs: ${needs}</div>` +
    `<div class="contract">produces: ${produces}</div>` +
    `<details><summary class="muted">prompt body</summary>` +
    `<p class="muted body-text">${escapeHtml(skill.body)}</p></details>` +
    `</div>`
  );
}

function workflowTable(workflows: WorkflowTemplate[]): string {
  if (workflows.length === 0) return emptyState("No workflow templates installed.");
  const rows = workflows
    .map((w) => {
      const sections = Array.isArray(w.params.required_sections)
        ? (w.params.required_sections as string[]).join(", ")
        : "";
      const pins = Object.entries(w.pinned_producers)
        .map(([category, skill]) => `${category} ← ${skill}`)
        .join("; ");
      return (
        `<tr><td class="mono">${escapeHtml(w.id)}</td>` +
        `<td>${escapeHtml(w.engagement_type)}</td>` +
        `<td>${escapeHtml(String(w.params.workflow_name ?? ""))}</td>` +
        `<td>${escapeHtml(w.required_phases.join(" > "))}</td>` +
        `<td class="mono">${escapeHtml(pins)}</td>` +
        `<td>${escapeHtml(sections)}</td></tr>`
      );
    })
    .join("");
  return panel(
    "Workflow templates",
    `<table><thead><tr><th>id</th><th>type</th><th>name</th><th>phases</th>` +
      `<th>pinned producers</th><th>required sections</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`,
  );
}

function sourceTable(sources: DataSource[]): string {
  if (sources.length === 0) return emptyState("No data sources registered.");
  const rows = sources
    .map((s) => {
      const detail =
        s.kind === "fixture"
          ? `filings=${s.filings ?? 0} news=${s.news ?? 0} market=${s.has_market ? "yes" : "no"}`
          : (s.description ?? "");
      return (
        `<tr><td class="mono">${escapeHtml(s.id)}</td>` +
        `<td>${escapeHtml(s.kind)}</td>` +
        `<td>${s.enabled ? '<span class="chip chip-ok">enabled</span>' : '<span class="chip chip-idle">disabled</span>'}</td>` +
        `<td>${escapeHtml(detail)}</td></tr>`
      );
    })
    .join("");
  return panel(
    "Data-source registry",
    `<table><thead><tr><th>id</th><th>kind</th><th>status</th><th>detail</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`,
  );
}

// ---------------------------------------------------------------------------
// Engagements: launcher, list, detail with live timeline

export interface LauncherViewData {
  state: LauncherState;
  personas: PersonaPack[];
  workflows: WorkflowTemplate[];
  problems: string[];
  submitError: string | null;
}

export function renderLauncher(data: LauncherViewData): string {
  const { state } = data;
  const personaOptions = [`<option value="">workflow default</option>`]
    .concat(
      data.personas.map(
        (p) =>
          `<option value="${escapeHtml(p.id)}"${p.id === state.personaId ? " selected" : ""}>` +
          `${escapeHtml(p.name)}</option>`,
      ),
    )
    .join("");
  const workflowOptions = data.workflows
    .map(
      (w) =>
        `<option value="${escapeHtml(w.id)}"${w.id === state.workflowId ? " selected" : ""}>` +
        `${escapeHtml(w.id)}</option>`,
    )
    .join("");
  const prefillNote = state.prefilledFrom
    ? `<div class="banner banner-info">Ticker pre-filled from coverage gap ` +
      `<strong>${escapeHtml(state.ticker)}</strong>.</div>`
    : "";
  const problems = data.problems.length
    ? `<div class="banner banner-bad">${data.problems.map(escapeHtml).join("; ")}</div>`
    : "";
  const submitError = data.submitError
    ? `<div class="banner banner-bad">${escapeHtml(data.submitError)}</div>`
    : "";
  return panel(
    "Launch engagement",
    prefillNote +
      `<form class="launcher" data-action-form="launch">` +
      `<label>ticker <input id="launch-ticker" value="${escapeHtml(state.ticker)}" placeholder="NVDA"></label>` +
      `<label>persona <select id="launch-persona">${personaOptions}</select></label>` +
      `<label>workflow <select id="launch-workflow">${workflowOptions}</select></label>` +
      `<label>seed <input id="launch-seed" type="number" min="0" value="${state.seed}"></label>` +
      `<button class="btn btn-primary" data-action="launch">Launch</button>` +
      `</form>` +
      problems +
      submitError,
  );
}

export function renderEngagementTable(engagements: EngagementRecord[], activeId: string | null): string {
  if (engagements.length === 0) {
    return panel("Engagements", emptyState("No engagements yet. Launch one above."));
  }
  const sorted = [...engagements].sort((a, b) => b.created_at.localeCompare(a.created_at));
  const rows = sorted
    .map(
      (e) =>
        `<tr class="${e.engagement_id === activeId ? "active-row" : ""}"` +
        ` data-action="open-engagement" data-id="${escapeHtml(e.engagement_id)}">` +
        `<td class="mono">${escapeHtml(e.engagement_id)}</td>` +
        `<td>${escapeHtml(e.ticker)}</td>` +
        `<td>${escapeHtml(e.persona)}</td>` +
        `<td class="mono">${escapeHtml(e.template)}</td>` +
        `<td>${statusChip(e.status)}</td>` +
        `<td class="muted">${escapeHtml(when(e.created_at))}</td></tr>`,
    )
    .join("");
  return panel(
    "Engagements",
    `<table><thead><tr><th>id</th><th>ticker</th><th>persona</th>` +
      `<th>workflow</th><th>status</th><th>created</th></tr></thead><tbody>${rows}</tbody></table>`,
  );
}

export interface EngagementViewData {
  detail: EngagementDetail;
  timeline: Timeline | null;
  resumeError: string | null;
}

export function renderEngagementDetail(data: EngagementViewData): string {
  const { detail, timeline } = data;
  const taskRows = detail.tasks
    .map(
      (t) =>
        `<tr><td class="mono">${escapeHtml(t.id)}</td>` +
        `<td>${escapeHtml(t.phase)}</td>` +
        `<td>${statusChip(t.status)}</td>` +
        `<td>${t.attempt_count}</td></tr>`,
    )
    .join("");
  const banners = engagementBanners(detail, timeline);
  const resume =
    detail.status === "aborted" || detail.status === "paused"
      ? `<button class="btn btn-primary" data-action="resume" data-id="${escapeHtml(detail.engagement_id)}">Resume</button>`
      : "";
  const resumeError = data.resumeError
    ? `<div class="banner banner-bad">${escapeHtml(data.resumeError)}</div>`
    : "";
  return panel(
    `Engagement ${detail.engagement_id}`,
    `<div class="row-line">` +
      `<strong>${escapeHtml(detail.ticker)}</strong>` +
      `<span class="pill">${escapeHtml(detail.template)}</span>` +
      `<span class="muted">persona: ${escapeHtml(detail.persona)}</span>` +
      `<span class="muted">seed: ${detail.seed}</span>` +
      statusChip(detail.status) +
      resume +
      `</div>` +
      resumeError +
      banners +
      `<div class="grid-2">` +
      `<div><h3>Tasks</h3><table><thead><tr><th>task</th><th>phase</th>` +
      `<th>status</th><th>attempts</th></tr></thead><tbody>${taskRows}</tbody></table></div>` +
      `<div><h3>Event timeline</h3>${renderTimeline(timeline)}</div>` +
      `</div>`,
    `<button class="btn" data-action="close-engagement">Back</button>`,
  );
}

function engagementBanners(detail: EngagementDetail, timeline: Timeline | null): string {
  const banners: string[] = [];
  const gate = timeline?.gateFailure();
  if (gate) {
    banners.push(
      `<div class="banner banner-warn">Quality gate failed: ` +
        `${escapeHtml(gate.detail ?? "insufficient sources")}. ` +
        `Composition was skipped.</div>`,
    );
  }
  const errors = timeline?.errors() ?? [];
  for (const entry of errors) {
    banners.push(
      `<div class="banner banner-bad">Task ${escapeHtml(entry.taskId ?? "?")} failed: ` +
        `${escapeHtml(entry.detail ?? "unknown error")}</div>`,
    );
  }
  if (detail.status === "aborted" && errors.length === 0) {
    banners.push(`<div class="banner banner-bad">Engagement aborted. Resume to retry.</div>`);
  }
  return banners.join("");
}

export function renderTimeline(timeline: Timeline | null): string {
  const entries = timeline?.ordered() ?? [];
  if (entries.length === 0) return emptyState("No events yet.");
  const rows = entries.map(timelineRow).join("");
  return `<ol class="timeline">${rows}</ol>`;
}

function timelineRow(entry: TimelineEntry): string {
  return (
    `<li class="timeline-row" data-seq="${entry.sequenceNo}">` +
    `<span class="mono seq">#${entry.sequenceNo}</span>` +
    eventChip(entry.name) +
    (entry.taskId ? `<span class="mono">${escapeHtml(entry.taskId)}</span>` : "") +
    (entry.detail ? `<span class="muted">${escapeHtml(entry.detail)}</span>` : "") +
    `</li>`
  );
}

// ---------------------------------------------------------------------------
// Master Agent: graph canvas, gaps, themes, compare, provenance drawer

const NODE_RADIUS: Record<string, number> = {
  ticker: 16,
  memo: 10,
  analyst: 14,
  theme: 12,
};

export function renderGraphStats(model: GraphModel): string {
  // numbers straight from the API counts; never recomputed here
  const counts = model.counts;
  const kinds = Object.keys(counts)
    .filter((k) => k !== "edges")
    .sort();
  const parts = kinds.map((k) => `${k} ${counts[k]}`).join(" / ");
  const warning = model.droppedEdges.length
    ? ` <span class="chip chip-bad">${model.droppedEdges.length} unresolved edges</span>`
    : "";
  return (
    `<div class="graph-stats mono" data-node-total="${model.nodes.length}"` +
    ` data-edge-total="${model.links.length}">` +
    `nodes: ${parts} | edges: ${counts.edges}${warning}</div>`
  );
}

export function renderGraphSvg(model: GraphModel, transform: Transform, selectedKey: string | null): string {
  const lines = model.links
    .map((link) => {
      const a = model.nodes[link.source];
      const b = model.nodes[link.target];
      return (
        `<line class="edge edge-${link.kind}" x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}"` +
        ` x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}"></line>`
      );
    })
    .join("");
  const circles = model.nodes.map((node) => graphNodeMarkup(node, selectedKey)).join("");
  return (
    `<svg id="graph-canvas" viewBox="0 0 900 600">` +
    `<g transform="translate(${transform.x} ${transform.y}) scale(${transform.k})">` +
    lines +
    circles +
    `</g></svg>`
  );
}

function graphNodeMarkup(node: PlacedNode, selectedKey: string | null): string {
  const r = NODE_RADIUS[node.kind] ?? 10;
  const label = node.kind === "memo" ? shortId(node.key) : node.key;
  const selected = node.key === selectedKey ? " selected" : "";
  return (
    `<g class="node node-${node.kind}${selected}" data-action="graph-node"` +
    ` data-kind="${escapeHtml(node.kind)}" data-key="${escapeHtml(node.key)}"` +
    ` transform="translate(${node.x.toFixed(1)} ${node.y.toFixed(1)})">` +
    `<circle r="${r}"></circle>` +
    `<text dy="${r + 12}">${escapeHtml(label)}</text>` +
    `</g>`
  );
}

export function renderGapPanel(gaps: GapRow[]): string {
  if (gaps.length === 0) {
    return panel("Coverage gaps", emptyState("No gaps: every ticker has at least two personas on it."));
  }
  const rows = gaps
    .map(
      (gap) =>
        `<tr class="gap-row" data-ticker="${escapeHtml(gap.ticker)}">` +
        `<td><strong>${escapeHtml(gap.ticker)}</strong></td>` +
        `<td class="muted">covered by ${gap.personas.map(escapeHtml).join(", ")}</td>` +
        `<td><button class="btn btn-small" data-action="launch-gap"` +
        ` data-ticker="${escapeHtml(gap.ticker)}">Assign</button></td></tr>`,
    )
    .join("");
  return panel(
    "Coverage gaps",
    `<p class="muted">Single-persona tickers. Assign opens the launcher with the ticker filled in.</p>` +
      `<table><tbody>${rows}</tbody></table>`,
  );
}

export function renderThemePanel(themes: GraphNode[], selected: ThemeView | null): string {
  if (themes.length === 0) return panel("Themes", emptyState("No themes explored yet."));
  const chips = themes
    .map(
      (t) =>
        `<button class="pill pill-click${selected?.theme === t.key ? " active" : ""}"` +
        ` data-action="open-theme" data-key="${escapeHtml(t.key)}">${escapeHtml(t.key)}</button>`,
    )
    .join(" ");
  let detail = "";
  if (selected) {
    const rows = selected.memos
      .map(
        (m) =>
          `<tr data-action="open-memo" data-id="${escapeHtml(m.memo)}">` +
          `<td>${escapeHtml(m.ticker)}</td><td>${escapeHtml(m.persona)}</td>` +
          `<td>${m.verdict ? escapeHtml(m.verdict) : '<span class="muted">-</span>'}</td>` +
          `<td class="muted">${escapeHtml(when(m.timestamp))}</td></tr>`,
      )
      .join("");
    detail =
      `<h3>${escapeHtml(selected.display)}</h3>` +
      `<div class="muted">${selected.tickers.length} tickers, ${selected.analysts.length} analysts</div>` +
      `<table><thead><tr><th>ticker</th><th>persona</th><th>verdict</th><th>when</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`;
  }
  return panel("Themes", `<div class="pill-row">${chips}</div>${detail}`);
}

export function renderComparePanel(
  tickers: string[],
  selectedTicker: string | null,
  rows: CompareRow[] | null,
): string {
  const options = [`<option value="">pick a ticker</option>`]
    .concat(
      tickers.map(
        (t) =>
          `<option value="${escapeHtml(t)}"${t === selectedTicker ? " selected" : ""}>${escapeHtml(t)}</option>`,
      ),
    )
    .join("");
  let body = `<label>ticker <select id="compare-ticker" data-action-change="compare-ticker">${options}</select></label>`;
  if (selectedTicker && rows) {
    if (rows.length === 0) {
      body += emptyState(`No memos cover ${selectedTicker} yet.`);
    } else {
      const lines = rows
        .map(
          (row) =>
            `<tr><td>${escapeHtml(row.persona)}</td>` +
            `<td>${row.verdict ? escapeHtml(row.verdict) : '<span class="muted">-</span>'}</td>` +
            `<td class="muted">${escapeHtml(when(row.created_at))}</td>` +
            `<td><button class="btn btn-small" data-action="open-memo" data-id="${escapeHtml(row.memo)}">read</button></td>` +
            `<td><button class="btn btn-small" data-action="compare-pick" data-id="${escapeHtml(row.memo)}">compare</button></td></tr>`,
        )
        .join("");
      body +=
        `<table><thead><tr><th>persona</th><th>verdict</th><th>when</th><th></th><th></th></tr></thead>` +
        `<tbody>${lines}</tbody></table>` +
        `<p class="muted">Pick two memos to read them side by side.</p>`;
    }
  }
  return panel("Compare coverage", body);
}

export function renderDrawerMemo(memo: MemoBody): string {
  const parsed = parseMemo(memo.text);
  const lineage = memo.lineage
    .map(
      (row) =>
        `<li><span class="pill">${escapeHtml(row.category)}</span> ` +
        `<a data-action="open-artifact" data-artifact="${escapeHtml(row.id)}" href="#artifact-${escapeHtml(row.id)}">` +
        `<span class="mono">${shortId(row.id)}</span></a>` +
        ` <span class="muted">${escapeHtml(row.producer_skill)}</span></li>`,
    )
    .join("");
  return (
    `<h3>Memo ${shortId(memo.id)}</h3>` +
    `<div class="row-line"><strong>${escapeHtml(memo.ticker ?? "")}</strong>` +
    `<span class="muted">${escapeHtml(when(memo.created_at))}</span></div>` +
    `<div class="muted">${pluralize(parsed.sections.length, "section")}, ` +
    `${pluralize(memo.citations.length, "citation")}</div>` +
    `<button class="btn" data-action="open-memo" data-id="${escapeHtml(memo.id)}">Open in reader</button>` +
    `<h4>Evidence trail</h4>` +
    (lineage ? `<ul class="lineage">${lineage}</ul>` : emptyState("No recorded parents."))
  );
}

export function renderDrawerArtifact(artifact: ArtifactBody): string {
  const parents = artifact.parent_ids
    .map(
      (id) =>
        `<li><a data-action="open-artifact" data-artifact="${escapeHtml(id)}" href="#artifact-${escapeHtml(id)}">` +
        `<span class="mono">${shortId(id)}</span></a></li>`,
    )
    .join("");
  const preview =
    artifact.payload_kind === "structured"
      ? `<pre class="mono body-text">${escapeHtml(JSON.stringify(artifact.payload, null, 1).slice(0, 2000))}</pre>`
      : `<pre class="body-text">${escapeHtml((artifact.text ?? "").slice(0, 2000))}</pre>`;
  return (
    `<h3><span class="pill">${escapeHtml(artifact.category)}</span> ${shortId(artifact.id)}</h3>` +
    `<div class="muted">produced by ${escapeHtml(artifact.producer_skill)}` +
    ` (task ${escapeHtml(artifact.producer_task)})</div>` +
    `<div class="muted">engagement <span class="mono">${escapeHtml(artifact.engagement_id)}</span></div>` +
    `<h4>Parents</h4>` +
    (parents ? `<ul class="lineage">${parents}</ul>` : emptyState("Raw source: no parents.")) +
    `<h4>Payload</h4>` +
    preview
  );
}

export function renderDrawerNode(node: GraphNode, model: GraphModel): string {
  // display-only subset of the export: edges touching this node
  const touching = model.links
    .map((link) => ({ link, a: model.nodes[link.source], b: model.nodes[link.target] }))
    .filter(({ a, b }) => a.key === node.key || b.key === node.key)
    .map(
      ({ link, a, b }) =>
        `<li><span class="pill">${escapeHtml(link.kind)}</span> ` +
        `<span class="mono">${escapeHtml(shortLabel(a))}</span> → ` +
        `<span class="mono">${escapeHtml(shortLabel(b))}</span></li>`,
    )
    .join("");
  const attrs = Object.entries(node.attributes)
    .map(
      ([key, value]) =>
        `<li><span class="muted">${escapeHtml(key)}:</span> ${escapeHtml(value === null ? "-" : value)}</li>`,
    )
    .join("");
  return (
    `<h3><span class="pill">${escapeHtml(node.kind)}</span> ${escapeHtml(node.key)}</h3>` +
    (attrs ? `<ul class="plain">${attrs}</ul>` : "") +
    `<h4>Edges</h4>` +
    (touching ? `<ul class="lineage">${touching}</ul>` : emptyState("No edges touch this node."))
  );
}

function shortLabel(node: PlacedNode): string {
  return node.kind === "memo" ? shortId(node.key) : node.key;
}

// ---------------------------------------------------------------------------
// Memo reader

export interface MemoReaderData {
  memo: MemoBody | null;
  compareWith: MemoBody | null;
  memoNodes: GraphNode[];
}

export function renderMemoList(memoNodes: GraphNode[], activeId: string | null): string {
  if (memoNodes.length === 0) {
    return panel("Memos", emptyState("No memos filed yet."));
  }
  const sorted = [...memoNodes].sort((a, b) =>
    String(b.attributes.timestamp ?? "").localeCompare(String(a.attributes.timestamp ?? "")),
  );
  const rows = sorted
    .map(
      (node) =>
        `<tr class="${node.key === activeId ? "active-row" : ""}"` +
        ` data-action="open-memo" data-id="${escapeHtml(node.key)}">` +
        `<td class="mono">${shortId(node.key)}</td>` +
        `<td>${escapeHtml(node.attributes.ticker)}</td>` +
        `<td>${escapeHtml(node.attributes.persona)}</td>` +
        `<td>${node.attributes.verdict ? escapeHtml(node.attributes.verdict) : '<span class="muted">-</span>'}</td>` +
        `<td class="muted">${escapeHtml(when(String(node.attributes.timestamp ?? "")))}</td></tr>`,
    )
    .join("");
  return panel(
    "Memos",
    `<table><thead><tr><th>id</th><th>ticker</th><th>persona</th><th>verdict</th><th>when</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`,
  );
}

export function renderMemoReader(data: MemoReaderData): string {
  if (!data.memo) return "";
  if (data.compareWith) {
    return (
      `<div class="compare-split">` +
      `<div class="compare-col">${memoDocument(data.memo)}</div>` +
      `<div class="compare-col">${memoDocument(data.compareWith)}</div>` +
      `</div>` +
      `<button class="btn" data-action="close-compare">Close comparison</button>`
    );
  }
  return memoDocument(data.memo);
}

function memoDocument(memo: MemoBody): string {
  const parsed = parseMemo(memo.text);
  const resolved = new Set(memo.citations.filter((c) => c.resolved).map((c) => c.id));
  const meta = parsed.meta;
  const themes = Array.isArray(meta.themes)
    ? (meta.themes as string[]).map((t) => `<span class="pill">${escapeHtml(t)}</span>`).join(" ")
    : "";
  const sections = parsed.sections
    .map(
      (section) =>
        `<section class="memo-section"><h4>${escapeHtml(section.heading)}</h4>` +
        `<p>${renderSectionBody(section.body, resolved)}</p></section>`,
    )
    .join("");
  const citations = memo.citations
    .map(
      (c) =>
        `<li>` +
        (c.resolved
          ? `<a data-action="open-artifact" data-artifact="${escapeHtml(c.id)}" href="#artifact-${escapeHtml(c.id)}">` +
            `<span class="mono">${shortId(c.id)}</span></a>` +
            ` <span class="pill">${escapeHtml(c.category ?? "")}</span>` +
            ` <span class="muted">${escapeHtml(c.producer_skill ?? "")}</span>`
          : `<span class="mono">${shortId(c.id)}</span> <span class="chip chip-bad">unresolved</span>`) +
        `</li>`,
    )
    .join("");
  const verdict = typeof meta.verdict === "string" && meta.verdict !== "null" ? meta.verdict : null;
  return (
    `<article class="memo">` +
    `<header class="memo-head">` +
    `<div class="row-line"><strong>${escapeHtml(memo.ticker ?? String(meta.ticker ?? ""))}</strong>` +
    `<span class="muted">by ${escapeHtml(String(meta.persona ?? ""))}</span>` +
    `<span class="pill">${escapeHtml(String(meta.workflow ?? ""))}</span>` +
    (verdict ? `<span class="pill pill-verdict">${escapeHtml(verdict)}</span>` : "") +
    `</div>` +
    `<div class="muted">${escapeHtml(when(memo.created_at))} &middot; <span class="mono">${shortId(memo.id)}</span></div>` +
    (themes ? `<div class="pill-row">${themes}</div>` : "") +
    `</header>` +
    sections +
    `<footer class="memo-foot"><h4>Citations</h4>` +
    (citations ? `<ul class="lineage">${citations}</ul>` : emptyState("This memo cites nothing.")) +
    `</footer>` +
    `</article>`
  );
}
