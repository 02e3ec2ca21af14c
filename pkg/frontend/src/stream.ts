import type { StreamLine } from "./types.js";

export interface FeedHandlers {
  /** Every stream line carries the server's log head; fired for all lines. */
  onHead(head: number): void;
  /** Fired once per notification event line. */
  onEvent(line: Required<StreamLine>): void;
  /** Fired on each polling tick while the push stream is down. */
  onPoll?(): void | Promise<void>;
}

/** Incremental NDJSON splitter: feed it chunks, it emits complete lines.
 *  The trailing partial line stays buffered until the next chunk. */
export function makeLineSplitter(onLine: (line: string) => void): (chunk: string) => void {
  let buffer = "";
  return (chunk: string) => {
    buffer += chunk;
    const lines = buffer.split("\n");
    buffer = lines.pop() ?? "";
    for (const line of lines) {
      if (line.trim() !== "") onLine(line);
    }
  };
}

/** Parse one stream line and route it. Malformed lines are dropped: the
 *  polling fallback will repair any missed state. */
export function dispatchLine(line: string, handlers: FeedHandlers): void {
  let parsed: StreamLine;
  try {
    parsed = JSON.parse(line) as StreamLine;
  } catch {
    return;
  }
  if (typeof parsed.log_head === "number") handlers.onHead(parsed.log_head);
  if (parsed.type === "event" && parsed.event) {
    handlers.onEvent(parsed as Required<StreamLine>);
  }
}

export interface FeedOptions {
  /** Poll cadence while disconnected. */
  pollIntervalMs?: number;
  /** Delay before a reconnect attempt. */
  retryDelayMs?: number;
  fetchImpl?: (input: string, init?: RequestInit) => Promise<Response>;
  sleep?: (ms: number) => Promise<void>;
}

export interface LiveFeed {
  stop(): void;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/** Keep a connection to the notification stream, falling back to polling
 *  every `pollIntervalMs` (default 5 s) whenever the stream is down. The
 *  feed never throws; it retries until stopped. */
export function startLiveFeed(
  baseUrl: string,
  token: string,
  handlers: FeedHandlers,
  options: FeedOptions = {},
): LiveFeed {
  const pollIntervalMs = options.pollIntervalMs ?? 5000;
  const retryDelayMs = options.retryDelayMs ?? 1000;
  const fetchImpl = options.fetchImpl ?? ((input: string, init?: RequestInit) => fetch(input, init));
  const sleep = options.sleep ?? defaultSleep;

  let active = true;
  const controller = new AbortController();

  async function fallbackTick(): Promise<void> {
    await handlers.onPoll?.();
    await sleep(pollIntervalMs);
  }

  async function run(): Promise<void> {
    while (active) {
      try {
        const response = await fetchImpl(`${baseUrl}/stream`, {
          headers: { Authorization: `Bearer ${token}` },
          signal: controller.signal,
        });
        if (!response.ok || !response.body) {
          await fallbackTick();
          continue;
        }
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const feed = makeLineSplitter((line) => dispatchLine(line, handlers));
        while (active) {
          const { done, value } = await reader.read();
          if (done) break;
          feed(decoder.decode(value, { stream: true }));
        }
        // server closed cleanly; brief pause avoids a tight reconnect loop
        if (active) await sleep(retryDelayMs);
      } catch {
        if (!active) break;
        await fallbackTick();
      }
    }
  }

  void run();

  return {
    stop() {
      active = false;
      controller.abort();
    },
  };
}
