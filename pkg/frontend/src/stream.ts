/** WebSocket frame stream with one in-flight render, stale-frame
 * dropping by sequence number, and reconnect with exponential backoff.
 *
 * The socket constructor and timer are injectable so the behavior is
 * testable without a browser or a live service.
 */

import type { RenderRequestJson, StreamFrame } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export interface StreamOptions {
  socketFactory: (url: string) => SocketLike;
  /** reconnect delays in ms; the last entry repeats */
  backoffMs?: number[];
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export type StreamStatus = "connecting" | "ready" | "reconnecting" | "closed";

export class FrameStream {
  private socket: SocketLike | null = null;
  private seq = 0;
  private lastDelivered = 0;
  private inFlight = false;
  private pending: RenderRequestJson | null = null;
  private attempts = 0;
  private closed = false;
  private status: StreamStatus = "connecting";
  private readonly backoff: number[];
  private readonly setTimer: (fn: () => void, ms: number) => unknown;

  onFrame: ((frame: StreamFrame) => void) | null = null;
  onStatus: ((status: StreamStatus) => void) | null = null;

  constructor(private url: string, private opts: StreamOptions) {
    this.backoff = opts.backoffMs ?? [250, 500, 1000, 2000, 4000];
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.connect();
  }

  private setStatus(s: StreamStatus): void {
    this.status = s;
    this.onStatus?.(s);
  }

  private connect(): void {
    const sock = this.opts.socketFactory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.attempts = 0;
      this.inFlight = false;
      this.setStatus("ready");
      this.flush();
    };
    sock.onmessage = (ev) => {
      const frame = JSON.parse(ev.data) as StreamFrame;
      this.inFlight = false;
      // drop frames older than the newest one already shown
      if (frame.seq > this.lastDelivered) {
        this.lastDelivered = frame.seq;
        this.onFrame?.(frame);
      }
      this.flush();
    };
    sock.onclose = () => this.handleDrop();
    sock.onerror = () => this.handleDrop();
  }

  private handleDrop(): void {
    if (this.closed || this.socket === null) return;
    this.socket = null;
    this.inFlight = false;
    this.setStatus("reconnecting");
    const delay = this.backoff[Math.min(this.attempts, this.backoff.length - 1)];
    this.attempts += 1;
    this.setTimer(() => {
      if (!this.closed) this.connect();
    }, delay);
  }

  /** Queue a render; only the newest request survives coalescing, and
   * at most one is on the wire at a time. */
  request(req: RenderRequestJson): void {
    this.pending = req;
    this.flush();
  }

  private flush(): void {
    if (this.inFlight || this.pending === null) return;
    if (this.socket === null || this.status !== "ready") return;
    this.seq += 1;
    const msg = { seq: this.seq, ...this.pending };
    this.pending = null;
    this.inFlight = true;
    this.socket.send(JSON.stringify(msg));
  }

  currentStatus(): StreamStatus {
    return this.status;
  }

  close(): void {
    this.closed = true;
    this.setStatus("closed");
    this.socket?.close();
    this.socket = null;
  }
}
