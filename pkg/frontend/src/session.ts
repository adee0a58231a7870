// Connection lifecycle: role negotiation, command throttling and
// auto-reconnect with backoff. The WebSocket constructor is injected so
// the same code runs against the browser API and the `ws` package in
// tests.

import { SessionModel } from "./model.js";
import { buildCmd, parseServerFrame } from "./protocol.js";

export const COMMAND_RATE_HZ = 20;
const COMMAND_PERIOD_MS = 1000 / COMMAND_RATE_HZ;
const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 5000;

interface WsLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;

export interface SessionOptions {
  wsFactory?: WsFactory;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
  reconnect?: boolean;
}

export class TeleopSession {
  readonly model: SessionModel;
  private ws: WsLike | null = null;
  private forward = 0;
  private lateral = 0;
  private pose: string | null = null;
  private poseDirty = false;
  private lastSentAt = -Infinity;
  private sendTimer: unknown = null;
  private backoffMs = BACKOFF_START_MS;
  private closed = false;

  private readonly wsFactory: WsFactory;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;
  private readonly reconnect: boolean;

  constructor(private url: string, options: SessionOptions = {}) {
    this.wsFactory =
      options.wsFactory ?? ((u: string) => new WebSocket(u) as unknown as WsLike);
    this.now = options.now ?? (() => Date.now());
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = options.clearTimer ?? ((h) => clearTimeout(h as number));
    this.reconnect = options.reconnect ?? true;
    this.model = new SessionModel(this.now);
  }

  connect(): void {
    this.model.status = "connecting";
    const ws = this.wsFactory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = BACKOFF_START_MS;
      this.model.onConnect();
    };
    ws.onmessage = (ev) => {
      this.model.applyFrame(parseServerFrame(String(ev.data)));
    };
    ws.onerror = () => {
      /* close follows; handled there */
    };
    ws.onclose = () => {
      this.model.onDisconnect();
      this.ws = null;
      if (!this.closed && this.reconnect) {
        const wait = this.backoffMs;
        this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
        this.setTimer(() => this.connect(), wait);
      }
    };
  }

  close(): void {
    this.closed = true;
    if (this.sendTimer !== null) {
      this.clearTimer(this.sendTimer);
      this.sendTimer = null;
    }
    this.ws?.close();
  }

  get isCommander(): boolean {
    return this.model.role === "commander";
  }

  /** Update the joystick deflection; frames go out at most at 20 Hz. */
  setJoystick(forward: number, lateral: number): void {
    this.forward = forward;
    this.lateral = lateral;
    this.scheduleSend();
  }

  setPose(pose: string | null): void {
    this.pose = pose;
    this.poseDirty = true;
    this.scheduleSend();
  }

  private scheduleSend(): void {
    if (!this.isCommander || this.ws === null || this.model.status !== "connected") {
      return;
    }
    const since = this.now() - this.lastSentAt;
    if (since >= COMMAND_PERIOD_MS) {
      this.sendNow();
    } else if (this.sendTimer === null) {
      this.sendTimer = this.setTimer(() => {
        this.sendTimer = null;
        this.sendNow();
      }, COMMAND_PERIOD_MS - since);
    }
  }

  private sendNow(): void {
    if (this.ws === null) return;
    this.lastSentAt = this.now();
    const cmd = buildCmd(this.forward, this.lateral, this.poseDirty ? this.pose : null);
    this.poseDirty = false;
    this.ws.send(JSON.stringify(cmd));
  }
}
