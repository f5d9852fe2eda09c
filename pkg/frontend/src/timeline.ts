// Event timeline for one engagement. Entries are keyed by sequence_no, so
// replayed frames after a reconnect dedupe naturally and display order is
// the persisted order, never arrival order.

import type { TaskEvent } from "./types.js";
import { TERMINAL_EVENTS } from "./sse.js";

export interface TimelineEntry {
  sequenceNo: number;
  name: string;
  taskId: string | null;
  detail: string | null;
  timestamp: string;
}

export class Timeline {
  private readonly bySeq = new Map<number, TimelineEntry>();

  /** Returns true when the event was new, false for a replayed duplicate. */
  ingest(name: string, event: TaskEvent): boolean {
    if (this.bySeq.has(event.sequence_no)) return false;
    this.bySeq.set(event.sequence_no, {
      sequenceNo: event.sequence_no,
      name,
      taskId: event.task_id,
      detail: event.detail,
      timestamp: event.timestamp,
    });
    return true;
  }

  get size(): number {
    return this.bySeq.size;
  }

  /** Strictly ascending by sequence_no. */
  ordered(): TimelineEntry[] {
    return [...this.bySeq.values()].sort((a, b) => a.sequenceNo - b.sequenceNo);
  }

  lastSeq(): number | null {
    let last: number | null = null;
    for (const seq of this.bySeq.keys()) {
      if (last === null || seq > last) last = seq;
    }
    return last;
  }

  terminal(): TimelineEntry | null {
    for (const entry of this.bySeq.values()) {
      if (TERMINAL_EVENTS.has(entry.name)) return entry;
    }
    return null;
  }

  /** Entries for tasks that failed outright. */
  errors(): TimelineEntry[] {
    return this.ordered().filter((e) => e.name === "task_error");
  }

  /**
   * A failed quality gate surfaces as skips reading "gate ... reported
   * insufficient sources" and a terminal detail with the assessment id.
   * Other skips (upstream producer failures) are not gate verdicts.
   */
  gateFailure(): TimelineEntry | null {
    for (const entry of this.ordered()) {
      if (
        (entry.name === "task_skipped" || entry.name === "engagement_done") &&
        entry.detail?.includes("insufficient sources")
      ) {
        return entry;
      }
    }
    return null;
  }

  /** Latest status per task id, for the running-card task strip. */
  taskStates(): Map<string, string> {
    const states = new Map<string, string>();
    for (const entry of this.ordered()) {
      if (!entry.taskId) continue;
      if (entry.name === "task_started") states.set(entry.taskId, "running");
      else if (entry.name === "task_done") states.set(entry.taskId, "done");
      else if (entry.name === "task_skipped") states.set(entry.taskId, "skipped");
      else if (entry.name === "task_error") states.set(entry.taskId, "error");
    }
    return states;
  }
}
