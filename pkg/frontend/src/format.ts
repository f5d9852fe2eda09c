// Small presentation helpers shared by every view.

export function escapeHtml(value: unknown): string {
  return String(value ?? "")
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** First eight hex chars; enough to tell artifacts apart on screen. */
export function shortId(id: string): string {
  return id.length > 8 ? id.slice(0, 8) : id;
}

/** ISO timestamp -> "2026-03-01 12:00" (UTC, no locale surprises). */
export function when(iso: string | null | undefined): string {
  if (!iso) return "";
  const m = iso.match(/^(\d{4}-\d{2}-\d{2})T(\d{2}:\d{2})/);
  return m ? `${m[1]} ${m[2]}` : iso;
}

const CHIP_BY_STATUS: Record<string, string> = {
  created: "chip-idle",
  running: "chip-live",
  done: "chip-ok",
  paused: "chip-warn",
  aborted: "chip-bad",
};

export function statusChip(status: string): string {
  const cls = CHIP_BY_STATUS[status] ?? "chip-idle";
  return `<span class="chip ${cls}">${escapeHtml(status)}</span>`;
}

const CHIP_BY_EVENT: Record<string, string> = {
  task_started: "chip-live",
  task_done: "chip-ok",
  task_skipped: "chip-warn",
  task_error: "chip-bad",
  engagement_done: "chip-ok",
  engagement_aborted: "chip-bad",
};

export function eventChip(name: string): string {
  const cls = CHIP_BY_EVENT[name] ?? "chip-idle";
  return `<span class="chip ${cls}">${escapeHtml(name)}</span>`;
}

export function pluralize(n: number, word: string): string {
  return `${n} ${word}${n === 1 ? "" : "s"}`;
}
