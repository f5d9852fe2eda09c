// Application shell: holds the view state, talks to the API client, keeps
// one SSE feed per visible engagement, and re-renders on change. Views are
// pure HTML builders; all wiring lives here.

import { ApiClient, ApiError } from "./api.js";
import { escapeHtml } from "./format.js";
import {
  buildCreateRequest,
  emptyLauncher,
  LauncherState,
  prefillFromGap,
  validateLauncher,
} from "./launcher.js";
import {
  buildModel,
  GraphModel,
  identityTransform,
  panBy,
  runLayout,
  Transform,
  zoomAt,
} from "./layout.js";
import { EventFeed } from "./sse.js";
import { Timeline } from "./timeline.js";
import type {
  CompareRow,
  DataSource,
  EngagementDetail,
  EngagementRecord,
  GapRow,
  GraphBody,
  GraphNode,
  MemoBody,
  PersonaPack,
  SkillsBody,
  TaskEvent,
  ThemeView,
  WorkflowTemplate,
} from "./types.js";
import {
  HireFormState,
  LibraryTab,
  renderComparePanel,
  renderDashboard,
  renderDrawerArtifact,
  renderDrawerMemo,
  renderDrawerNode,
  renderEngagementDetail,
  renderEngagementTable,
  renderGapPanel,
  renderGraphStats,
  renderGraphSvg,
  renderLauncher,
  renderLibrary,
  renderMemoList,
  renderMemoReader,
  renderNav,
  renderTalent,
  renderThemePanel,
  Route,
} from "./views.js";

interface AppState {
  route: Route;
  libraryTab: LibraryTab;
  personas: PersonaPack[];
  skills: SkillsBody | null;
  workflows: WorkflowTemplate[];
  sources: DataSource[] | null;
  engagements: EngagementRecord[];
  activeEngagement: EngagementDetail | null;
  graph: GraphBody | null;
  model: GraphModel | null;
  transform: Transform;
  selectedNodeKey: string | null;
  drawerHtml: string | null;
  gaps: GapRow[];
  theme: ThemeView | null;
  compareTicker: string | null;
  compareRows: CompareRow[] | null;
  comparePick: string | null;
  memo: MemoBody | null;
  compareWith: MemoBody | null;
  activeMemoId: string | null;
  launcher: LauncherState;
  launcherProblems: string[];
  submitError: string | null;
  resumeError: string | null;
  hire: HireFormState;
  lastError: string | null;
}

export class App {
  private readonly state: AppState;
  private readonly feeds = new Map<string, EventFeed>();
  private readonly timelines = new Map<string, Timeline>();
  private renderQueued = false;
  private panAnchor: { x: number; y: number } | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {
    this.state = {
      route: "dashboard",
      libraryTab: "skills",
      personas: [],
      skills: null,
      workflows: [],
      sources: null,
      engagements: [],
      activeEngagement: null,
      graph: null,
      model: null,
      transform: identityTransform(),
      selectedNodeKey: null,
      drawerHtml: null,
      gaps: [],
      theme: null,
      compareTicker: null,
      compareRows: null,
      comparePick: null,
      memo: null,
      compareWith: null,
      activeMemoId: null,
      launcher: emptyLauncher(),
      launcherProblems: [],
      submitError: null,
      resumeError: null,
      hire: { open: false, manifest: "", error: null, hired: null },
      lastError: null,
    };
  }

  async start(): Promise<void> {
    this.bind();
    await this.navigate("dashboard");
  }

  // -------------------------------------------------------------------
  // Routing and data loading

  async navigate(route: Route): Promise<void> {
    this.state.route = route;
    this.state.lastError = null;
    try {
      if (route === "dashboard") {
        const [personas, engagements, graph] = await Promise.all([
          this.api.listPersonas(),
          this.api.listEngagements(),
          this.api.graph(),
        ]);
        this.state.personas = personas;
        this.state.engagements = engagements;
        this.adoptGraph(graph);
        this.syncFeeds(engagements.filter((e) => e.status === "running").map((e) => e.engagement_id));
      } else if (route === "talent") {
        this.state.personas = await this.api.listPersonas();
      } else if (route === "library") {
        await this.loadLibraryTab();
      } else if (route === "engagements") {
        const [personas, workflows, engagements] = await Promise.all([
          this.api.listPersonas(),
          this.api.listWorkflows(),
          this.api.listEngagements(),
        ]);
        this.state.personas = personas;
        this.state.workflows = workflows;
        this.state.engagements = engagements;
        this.syncFeeds(this.state.activeEngagement ? [this.state.activeEngagement.engagement_id] : []);
      } else if (route === "master") {
        const [graph, gaps] = await Promise.all([this.api.graph(), this.api.gaps()]);
        this.adoptGraph(graph);
        this.state.gaps = gaps;
      } else if (route === "memos") {
        if (!this.state.graph) this.adoptGraph(await this.api.graph());
      }
    } catch (error) {
      this.state.lastError = describe(error);
    }
    this.render();
  }

  private async loadLibraryTab(): Promise<void> {
    const tab = this.state.libraryTab;
    if (tab === "skills" && !this.state.skills) this.state.skills = await this.api.listSkills();
    if (tab === "workflows" && this.state.workflows.length === 0) {
      this.state.workflows = await this.api.listWorkflows();
    }
    if (tab === "data" && !this.state.sources) this.state.sources = await this.api.listDataSources();
  }

  private adoptGraph(graph: GraphBody): void {
    this.state.graph = graph;
    const model = buildModel(graph);
    runLayout(model);
    this.state.model = model;
  }

  private memoNodes(): GraphNode[] {
    return this.state.graph?.nodes.filter((n) => n.kind === "memo") ?? [];
  }

  private themeNodes(): GraphNode[] {
    return this.state.graph?.nodes.filter((n) => n.kind === "theme") ?? [];
  }

  private tickerKeys(): string[] {
    return (this.state.graph?.nodes ?? [])
      .filter((n) => n.kind === "ticker")
      .map((n) => n.key)
      .sort();
  }

  // -------------------------------------------------------------------
  // SSE feeds: one per visible engagement

  private syncFeeds(visible: string[]): void {
    const keep = new Set(visible);
    for (const [id, feed] of this.feeds) {
      if (!keep.has(id)) {
        feed.stop();
        this.feeds.delete(id);
      }
    }
    for (const id of visible) this.ensureFeed(id);
  }

  private ensureFeed(id: string): void {
    if (this.feeds.has(id)) return;
    const timeline = this.timelines.get(id) ?? new Timeline();
    this.timelines.set(id, timeline);
    const feed = new EventFeed(this.api.eventsUrl(id), (name, event) => {
      this.onEngagementEvent(id, timeline, name, event);
    });
    this.feeds.set(id, feed);
    void feed.start().finally(() => {
      this.feeds.delete(id);
    });
  }

  private onEngagementEvent(id: string, timeline: Timeline, name: string, event: TaskEvent): void {
    if (!timeline.ingest(name, event)) return;
    if (name === "engagement_done" || name === "engagement_aborted") {
      void this.onEngagementFinished(id);
      return;
    }
    this.scheduleRender();
  }

  private async onEngagementFinished(id: string): Promise<void> {
    try {
      this.state.engagements = await this.api.listEngagements();
      if (this.state.activeEngagement?.engagement_id === id) {
        this.state.activeEngagement = await this.api.getEngagement(id);
      }
      // a finished run may have filed a memo; keep graph-backed panels fresh
      this.adoptGraph(await this.api.graph());
    } catch (error) {
      this.state.lastError = describe(error);
    }
    this.scheduleRender();
  }

  private scheduleRender(): void {
    if (this.renderQueued) return;
    this.renderQueued = true;
    queueMicrotask(() => {
      this.renderQueued = false;
      this.render();
    });
  }

  // -------------------------------------------------------------------
  // Actions

  private async openEngagement(id: string): Promise<void> {
    try {
      this.state.activeEngagement = await this.api.getEngagement(id);
      this.state.resumeError = null;
      this.state.route = "engagements";
      if (this.state.workflows.length === 0) this.state.workflows = await this.api.listWorkflows();
      if (this.state.personas.length === 0) this.state.personas = await this.api.listPersonas();
      this.syncFeeds([id]);
    } catch (error) {
      this.state.lastError = describe(error);
    }
    this.render();
  }

  private async launch(): Promise<void> {
    this.readLauncherInputs();
    const problems = validateLauncher(this.state.launcher);
    this.state.launcherProblems = problems;
    this.state.submitError = null;
    if (problems.length > 0) {
      this.render();
      return;
    }
    try {
      const response = await this.api.createEngagement(buildCreateRequest(this.state.launcher));
      this.state.launcher = emptyLauncher(this.state.launcher.workflowId);
      this.state.engagements = await this.api.listEngagements();
      await this.openEngagement(response.engagement_id);
      return;
    } catch (error) {
      this.state.submitError = describe(error);
    }
    this.render();
  }

  private launchFromGap(ticker: string): void {
    const gap = this.state.gaps.find((g) => g.ticker === ticker) ?? { ticker, personas: [] };
    this.state.launcher = prefillFromGap(this.state.launcher, gap);
    this.state.launcherProblems = [];
    this.state.submitError = null;
    void this.navigate("engagements");
  }

  private async resume(id: string): Promise<void> {
    try {
      this.state.resumeError = null;
      await this.api.resumeEngagement(id);
      this.timelines.delete(id); // fresh bus: replay arrives from seq 1
      this.syncFeeds([id]);
      this.state.activeEngagement = await this.api.getEngagement(id);
    } catch (error) {
      this.state.resumeError = describe(error);
    }
    this.render();
  }

  private async hire(): Promise<void> {
    const field = this.root.querySelector<HTMLTextAreaElement>("#hire-manifest");
    const raw = field ? field.value : this.state.hire.manifest;
    this.state.hire.manifest = raw;
    let manifest: Record<string, unknown>;
    try {
      manifest = JSON.parse(raw) as Record<string, unknown>;
    } catch {
      this.state.hire.error = "manifest is not valid JSON";
      this.render();
      return;
    }
    try {
      const pack = await this.api.hirePersona(manifest);
      this.state.hire = { open: false, manifest: "", error: null, hired: pack.id };
      this.state.personas = await this.api.listPersonas();
    } catch (error) {
      this.state.hire.error = describe(error);
    }
    this.render();
  }

  private async openMemo(id: string): Promise<void> {
    try {
      this.state.memo = await this.api.memo(id);
      this.state.activeMemoId = id;
      this.state.compareWith = null;
      this.state.route = "memos";
      if (!this.state.graph) this.adoptGraph(await this.api.graph());
    } catch (error) {
      this.state.lastError = describe(error);
    }
    this.render();
  }

  private async openArtifact(id: string): Promise<void> {
    try {
      const artifact = await this.api.artifact(id);
      this.state.drawerHtml = renderDrawerArtifact(artifact);
    } catch (error) {
      this.state.drawerHtml = `<div class="banner banner-bad">${escapeHtml(describe(error))}</div>`;
    }
    this.render();
  }

  private async selectGraphNode(kind: string, key: string): Promise<void> {
    this.state.selectedNodeKey = key;
    const node = this.state.graph?.nodes.find((n) => n.kind === kind && n.key === key);
    if (!node || !this.state.model) return;
    if (kind === "memo") {
      try {
        const memo = await this.api.memo(key);
        this.state.drawerHtml = renderDrawerMemo(memo);
      } catch (error) {
        this.state.drawerHtml = `<div class="banner banner-bad">${escapeHtml(describe(error))}</div>`;
      }
    } else {
      this.state.drawerHtml = renderDrawerNode(node, this.state.model);
    }
    this.render();
  }

  private async openTheme(key: string): Promise<void> {
    try {
      this.state.theme = await this.api.theme(key);
    } catch (error) {
      this.state.lastError = describe(error);
    }
    this.render();
  }

  private async pickCompareTicker(ticker: string): Promise<void> {
    this.state.compareTicker = ticker || null;
    this.state.compareRows = null;
    this.state.comparePick = null;
    if (ticker) {
      try {
        this.state.compareRows = await this.api.compare(ticker);
      } catch (error) {
        this.state.lastError = describe(error);
      }
    }
    this.render();
  }

  private async pickCompareMemo(id: string): Promise<void> {
    if (!this.state.comparePick || this.state.comparePick === id) {
      this.state.comparePick = id;
      this.render();
      return;
    }
    try {
      const [first, second] = await Promise.all([
        this.api.memo(this.state.comparePick),
        this.api.memo(id),
      ]);
      this.state.memo = first;
      this.state.compareWith = second;
      this.state.activeMemoId = first.id;
      this.state.comparePick = null;
      this.state.route = "memos";
    } catch (error) {
      this.state.lastError = describe(error);
    }
    this.render();
  }

  // -------------------------------------------------------------------
  // Event wiring

  private bind(): void {
    this.root.addEventListener("click", (raw) => {
      const target = (raw.target as HTMLElement).closest<HTMLElement>("[data-action]");
      if (!target) return;
      const action = target.dataset.action ?? "";
      if (action === "launch") raw.preventDefault();
      this.dispatch(action, target);
    });
    this.root.addEventListener("input", (raw) => {
      this.syncField(raw.target as HTMLElement);
    });
    this.root.addEventListener("change", (raw) => {
      const target = raw.target as HTMLElement;
      if (target.id === "compare-ticker") {
        void this.pickCompareTicker((target as HTMLSelectElement).value);
      } else {
        this.syncField(target);
      }
    });
    this.root.addEventListener("wheel", (raw) => this.onWheel(raw), { passive: false });
    this.root.addEventListener("mousedown", (raw) => this.onPanStart(raw));
    this.root.addEventListener("mousemove", (raw) => this.onPanMove(raw));
    window.addEventListener("mouseup", () => {
      this.panAnchor = null;
    });
  }

  private dispatch(action: string, target: HTMLElement): void {
    const id = target.dataset.id ?? "";
    switch (action) {
      case "navigate":
        void this.navigate((target.dataset.route ?? "dashboard") as Route);
        break;
      case "library-tab":
        this.state.libraryTab = (target.dataset.tab ?? "skills") as LibraryTab;
        void this.loadLibraryTab().then(() => this.render());
        break;
      case "open-engagement":
        void this.openEngagement(id);
        break;
      case "close-engagement":
        this.state.activeEngagement = null;
        this.render();
        break;
      case "launch":
        void this.launch();
        break;
      case "launch-gap":
        this.launchFromGap(target.dataset.ticker ?? "");
        break;
      case "resume":
        void this.resume(id);
        break;
      case "toggle-hire":
        this.state.hire.open = !this.state.hire.open;
        this.state.hire.error = null;
        this.render();
        break;
      case "hire":
        void this.hire();
        break;
      case "open-memo":
        void this.openMemo(id);
        break;
      case "open-artifact":
        void this.openArtifact(target.dataset.artifact ?? "");
        break;
      case "graph-node":
        void this.selectGraphNode(target.dataset.kind ?? "", target.dataset.key ?? "");
        break;
      case "open-theme":
        void this.openTheme(target.dataset.key ?? "");
        break;
      case "compare-pick":
        void this.pickCompareMemo(id);
        break;
      case "close-compare":
        this.state.compareWith = null;
        this.render();
        break;
      case "close-drawer":
        this.state.drawerHtml = null;
        this.render();
        break;
      case "zoom-in":
        this.state.transform = zoomAt(this.state.transform, 450, 300, 1.25);
        this.render();
        break;
      case "zoom-out":
        this.state.transform = zoomAt(this.state.transform, 450, 300, 0.8);
        this.render();
        break;
      case "zoom-reset":
        this.state.transform = identityTransform();
        this.render();
        break;
      default:
        break;
    }
  }

  /** Keep launcher/hire fields in state so re-renders never eat typed text. */
  private syncField(target: HTMLElement): void {
    if (
      !(target instanceof HTMLInputElement) &&
      !(target instanceof HTMLSelectElement) &&
      !(target instanceof HTMLTextAreaElement)
    ) {
      return;
    }
    const value = target.value;
    switch (target.id) {
      case "launch-ticker":
        this.state.launcher.ticker = value;
        break;
      case "launch-persona":
        this.state.launcher.personaId = value;
        break;
      case "launch-workflow":
        this.state.launcher.workflowId = value;
        break;
      case "launch-seed":
        this.state.launcher.seed = Number.parseInt(value, 10) || 0;
        break;
      case "hire-manifest":
        this.state.hire.manifest = value;
        break;
      default:
        break;
    }
  }

  private readLauncherInputs(): void {
    for (const id of ["launch-ticker", "launch-persona", "launch-workflow", "launch-seed"]) {
      const field = this.root.querySelector<HTMLElement>(`#${id}`);
      if (field) this.syncField(field);
    }
  }

  // -------------------------------------------------------------------
  // Graph pan/zoom

  private canvasPoint(raw: MouseEvent): { x: number; y: number } | null {
    const canvas = this.root.querySelector<SVGSVGElement>("#graph-canvas");
    if (!canvas || !(raw.target instanceof Node) || !canvas.contains(raw.target)) return null;
    const box = canvas.getBoundingClientRect();
    return { x: raw.clientX - box.left, y: raw.clientY - box.top };
  }

  private onWheel(raw: WheelEvent): void {
    const point = this.canvasPoint(raw);
    if (!point) return;
    raw.preventDefault();
    const factor = raw.deltaY < 0 ? 1.12 : 0.89;
    this.state.transform = zoomAt(this.state.transform, point.x, point.y, factor);
    this.patchGraphTransform();
  }

  private onPanStart(raw: MouseEvent): void {
    const point = this.canvasPoint(raw);
    if (!point) return;
    this.panAnchor = point;
  }

  private onPanMove(raw: MouseEvent): void {
    if (!this.panAnchor) return;
    const point = this.canvasPoint(raw);
    if (!point) return;
    this.state.transform = panBy(
      this.state.transform,
      point.x - this.panAnchor.x,
      point.y - this.panAnchor.y,
    );
    this.panAnchor = point;
    this.patchGraphTransform();
  }

  /** Move the svg group in place; full re-render would fight the drag. */
  private patchGraphTransform(): void {
    const group = this.root.querySelector<SVGGElement>("#graph-canvas > g");
    if (!group) return;
    const t = this.state.transform;
    group.setAttribute("transform", `translate(${t.x} ${t.y}) scale(${t.k})`);
  }

  // -------------------------------------------------------------------
  // Rendering

  render(): void {
    const focused = document.activeElement instanceof HTMLElement ? document.activeElement.id : "";
    this.root.innerHTML = this.viewHtml();
    if (focused) {
      const again = this.root.querySelector<HTMLElement>(`#${focused}`);
      again?.focus();
    }
  }

  private viewHtml(): string {
    const s = this.state;
    const errorBar = s.lastError
      ? `<div class="banner banner-bad">${escapeHtml(s.lastError)}</div>`
      : "";
    let body = "";
    if (s.route === "dashboard") {
      body = renderDashboard({
        personas: s.personas,
        engagements: s.engagements,
        memoNodes: this.memoNodes(),
        timelines: this.timelines,
      });
    } else if (s.route === "talent") {
      body = renderTalent(s.personas, s.hire);
    } else if (s.route === "library") {
      body = renderLibrary(s.libraryTab, s.skills, s.workflows, s.sources);
    } else if (s.route === "engagements") {
      body =
        renderLauncher({
          state: s.launcher,
          personas: s.personas,
          workflows: s.workflows,
          problems: s.launcherProblems,
          submitError: s.submitError,
        }) +
        (s.activeEngagement
          ? renderEngagementDetail({
              detail: s.activeEngagement,
              timeline: this.timelines.get(s.activeEngagement.engagement_id) ?? null,
              resumeError: s.resumeError,
            })
          : "") +
        renderEngagementTable(s.engagements, s.activeEngagement?.engagement_id ?? null);
    } else if (s.route === "master") {
      body = this.masterHtml();
    } else if (s.route === "memos") {
      body =
        renderMemoReader({ memo: s.memo, compareWith: s.compareWith, memoNodes: this.memoNodes() }) +
        renderMemoList(this.memoNodes(), s.activeMemoId);
    }
    const drawer = s.drawerHtml
      ? `<aside class="drawer open"><button class="btn drawer-close" data-action="close-drawer">close</button>` +
        s.drawerHtml +
        `</aside>`
      : "";
    return renderNav(s.route) + errorBar + `<main>${body}</main>` + drawer;
  }

  private masterHtml(): string {
    const s = this.state;
    if (!s.model) return `<div class="empty-state">Loading graph...</div>`;
    const controls =
      `<div class="graph-controls">` +
      `<button class="btn btn-small" data-action="zoom-in">+</button>` +
      `<button class="btn btn-small" data-action="zoom-out">-</button>` +
      `<button class="btn btn-small" data-action="zoom-reset">reset</button>` +
      `</div>`;
    return (
      renderGraphStats(s.model) +
      `<div class="master-split">` +
      `<div class="graph-pane">${controls}${renderGraphSvg(s.model, s.transform, s.selectedNodeKey)}</div>` +
      `<div class="side-pane">` +
      renderGapPanel(s.gaps) +
      renderThemePanel(this.themeNodes(), s.theme) +
      renderComparePanel(this.tickerKeys(), s.compareTicker, s.compareRows) +
      `</div></div>`
    );
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  if (error instanceof Error) return error.message;
  return String(error);
}
