// Streaming SSE client. fetch + manual parsing instead of EventSource so the
// reconnect request can carry Last-Event-ID explicitly (and so the whole
// thing is testable without a browser).

import type { FetchLike } from "./api.js";
import type { TaskEvent } from "./types.js";

export interface SSEFrame {
  id: number | null;
  event: string;
  data: string;
}

/** Incremental parser; feed it chunks, get back completed frames. */
export class SSEParser {
  private buffer = "";

  push(chunk: string): SSEFrame[] {
    this.buffer += chunk.replace(/\r\n/g, "\n");
    const frames: SSEFrame[] = [];
    let cut: number;
    while ((cut = this.buffer.indexOf("\n\n")) !== -1) {
      const block = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const frame = this.parseBlock(block);
      if (frame) frames.push(frame);
    }
    return frames;
  }

  private parseBlock(block: string): SSEFrame | null {
    let id: number | null = null;
    let event = "message";
    const data: string[] = [];
    for (const line of block.split("\n")) {
      if (!line || line.startsWith(":")) continue;
      const sep = line.indexOf(":");
      const field = sep === -1 ? line : line.slice(0, sep);
      let value = sep === -1 ? "" : line.slice(sep + 1);
      if (value.startsWith(" ")) value = value.slice(1);
      if (field === "id") {
        const parsed = Number.parseInt(value, 10);
        if (!Number.isNaN(parsed)) id = parsed;
      } else if (field === "event") {
        event = value;
      } else if (field === "data") {
        data.push(value);
      }
    }
    if (data.length === 0 && event === "message") return null;
    return { id, event, data: data.join("\n") };
  }
}

export const TERMINAL_EVENTS = new Set(["engagement_done", "engagement_aborted"]);

export interface FeedOptions {
  fetchImpl?: FetchLike;
  /** Delay between reconnect attempts. */
  retryMs?: number;
  /** Give up after this many failed connects; 0 means keep trying. */
  maxRetries?: number;
}

export type FeedListener = (name: string, event: TaskEvent) => void;

/**
 * One live connection per engagement. Reconnects with Last-Event-ID after a
 * drop, stops on its own once a terminal event arrives.
 */
export class EventFeed {
  lastEventId: number | null = null;
  private stopped = false;
  private sawTerminal = false;
  private readonly fetchImpl: FetchLike;
  private readonly retryMs: number;
  private readonly maxRetries: number;

  constructor(
    private readonly url: string,
    private readonly listener: FeedListener,
    options: FeedOptions = {},
  ) {
    this.fetchImpl = options.fetchImpl ?? ((u, init) => fetch(u, init));
    this.retryMs = options.retryMs ?? 1000;
    this.maxRetries = options.maxRetries ?? 0;
  }

  headers(): Record<string, string> {
    const headers: Record<string, string> = { Accept: "text/event-stream" };
    if (this.lastEventId !== null) {
      headers["Last-Event-ID"] = String(this.lastEventId);
    }
    return headers;
  }

  get done(): boolean {
    return this.sawTerminal;
  }

  async start(): Promise<void> {
    let attempts = 0;
    while (!this.stopped && !this.sawTerminal) {
      try {
        await this.consumeOnce();
        attempts = 0;
      } catch {
        attempts += 1;
        if (this.maxRetries > 0 && attempts >= this.maxRetries) return;
      }
      if (this.stopped || this.sawTerminal) return;
      // server closes the stream at the terminal event, so a clean end
      // without one means we should resume from where we left off
      await this.sleep(this.retryMs);
    }
  }

  stop(): void {
    this.stopped = true;
  }

  private async consumeOnce(): Promise<void> {
    const response = await this.fetchImpl(this.url, { headers: this.headers() });
    if (!response.ok || !response.body) {
      throw new Error(`event stream failed: ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SSEParser();
    try {
      while (!this.stopped) {
        const { done, value } = await reader.read();
        if (done) break;
        for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
          this.dispatch(frame);
        }
      }
    } finally {
      try {
        await reader.cancel();
      } catch {
        // already closed
      }
    }
  }

  private dispatch(frame: SSEFrame): void {
    if (frame.id !== null) this.lastEventId = frame.id;
    let event: TaskEvent;
    try {
      event = JSON.parse(frame.data) as TaskEvent;
    } catch {
      return; // not our payload; skip
    }
    if (TERMINAL_EVENTS.has(frame.event)) this.sawTerminal = true;
    this.listener(frame.event, event);
  }

  private sleep(ms: number): Promise<void> {
    return new Promise((resolve) => setTimeout(resolve, ms));
  }
}
