// Session state behind the UI: everything the renderer shows comes from
// here, and everything here comes from server frames. The model never
// simulates anything locally.

import { ServerFrame, StateFrame } from "./protocol.js";

export const HISTORY_SECONDS = 10;
export const FRAME_RATE_HZ = 50;
export const STALE_AFTER_MS = 500;

const CAPACITY = HISTORY_SECONDS * FRAME_RATE_HZ;

/** Fixed-capacity rolling series of (t, value) points. */
export class HistoryBuffer {
  private ts: number[] = [];
  private vs: number[] = [];

  push(t: number, v: number): void {
    this.ts.push(t);
    this.vs.push(v);
    if (this.ts.length > CAPACITY) {
      this.ts.shift();
      this.vs.shift();
    }
  }

  get length(): number {
    return this.ts.length;
  }

  times(): readonly number[] {
    return this.ts;
  }

  values(): readonly number[] {
    return this.vs;
  }

  latest(): number | undefined {
    return this.vs[this.vs.length - 1];
  }

  clear(): void {
    this.ts = [];
    this.vs = [];
  }
}

export type ConnectionStatus = "connecting" | "connected" | "disconnected";
export type Role = "commander" | "observer" | "unknown";

export class SessionModel {
  status: ConnectionStatus = "connecting";
  role: Role = "unknown";
  latest: StateFrame | null = null;
  lastFrameAt = 0; // ms clock of the last accepted state frame
  malformedCount = 0;
  lastError: string | null = null;
  readonly tilt = new HistoryBuffer();
  readonly speed = new HistoryBuffer();
  readonly torque = new HistoryBuffer();

  constructor(private now: () => number = () => Date.now()) {}

  applyFrame(frame: ServerFrame | null): void {
    if (frame === null) {
      this.malformedCount += 1;
      return;
    }
    switch (frame.type) {
      case "role":
        this.role = frame.role;
        break;
      case "error":
        this.lastError = frame.code;
        break;
      case "state":
        this.latest = frame;
        this.lastFrameAt = this.now();
        this.tilt.push(frame.t, frame.theta);
        this.speed.push(frame.t, frame.xdot);
        this.torque.push(frame.t, frame.torque);
        break;
    }
  }

  /** True when no state frame arrived within the freshness window. */
  isStale(): boolean {
    if (this.latest === null) return true;
    return this.now() - this.lastFrameAt > STALE_AFTER_MS;
  }

  onDisconnect(): void {
    this.status = "disconnected";
    this.role = "unknown";
  }

  onConnect(): void {
    this.status = "connected";
    this.lastError = null;
  }
}
