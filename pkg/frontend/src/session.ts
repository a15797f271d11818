/** Operator session state machine, socket-agnostic for testability.
 *
 * Holds the latest server frame (the robot view renders only
 * server-confirmed state), the optimistic local leader pose driven by the
 * input widgets, the pedal latch (disabled blocks sends), and a client-side
 * send rate limit at or below the link rate.
 */

import type { ClientMessage, HelloMessage, ServerMessage, StateMessage } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
}

export interface SessionEvents {
  onHello?: (hello: HelloMessage) => void;
  onState?: (state: StateMessage) => void;
  onError?: (reason: string) => void;
}

const N_JOINTS = 6;

export class UiSession {
  hello: HelloMessage | null = null;
  lastState: StateMessage | null = null;
  enabled = true;
  /** local leader pose per arm (sliders/drag), seeded from the first frame */
  localQ: number[][] = [[], []];
  localG: number[] = [1.0, 1.0];
  latencyEstimateMs = 0;

  private socket: SocketLike;
  private events: SessionEvents;
  private minSendIntervalMs: number;
  private lastSendMs: number[] = [-Infinity, -Infinity];
  private lastFrameAtMs: number | null = null;
  private now: () => number;

  constructor(socket: SocketLike, events: SessionEvents = {}, opts: { sendRateHz?: number; now?: () => number } = {}) {
    this.socket = socket;
    this.events = events;
    this.minSendIntervalMs = 1000 / (opts.sendRateHz ?? 30);
    this.now = opts.now ?? (() => Date.now());
  }

  handleMessage(raw: string): void {
    let msg: ServerMessage;
    try {
      msg = JSON.parse(raw) as ServerMessage;
    } catch {
      this.events.onError?.("bad JSON from server");
      return;
    }
    if (msg.type === "hello") {
      this.hello = msg;
      this.events.onHello?.(msg);
    } else if (msg.type === "state") {
      this.ingestState(msg);
    } else if (msg.type === "error") {
      this.events.onError?.(msg.reason);
    }
  }

  private ingestState(state: StateMessage): void {
    const arrived = this.now();
    if (this.lastFrameAtMs !== null && this.hello) {
      const expected = 1000 / this.hello.state_rate_hz;
      const gap = arrived - this.lastFrameAtMs;
      this.latencyEstimateMs = 0.9 * this.latencyEstimateMs + 0.1 * Math.max(0, gap - expected);
    }
    this.lastFrameAtMs = arrived;
    if (this.lastState === null) {
      for (let arm = 0; arm < state.arms.length; arm++) {
        this.localQ[arm] = [...state.arms[arm].q];
        this.localG[arm] = state.arms[arm].g;
      }
    }
    this.lastState = state;
    this.events.onState?.(state);
  }

  /** Glove bars mirror server values exactly; no client-side remapping. */
  gloveBars(arm: number): number[] {
    return this.lastState ? [...this.lastState.arms[arm].glove] : new Array(6).fill(0);
  }

  estopActive(arm: number): boolean {
    return this.lastState?.arms[arm].estop ?? false;
  }

  modeRatio(arm: number): number {
    return this.lastState?.arms[arm].mode_ratio ?? 0;
  }

  setLocalJoint(arm: number, joint: number, value: number): void {
    if (this.localQ[arm].length !== N_JOINTS) return;
    this.localQ[arm][joint] = value;
    this.publishLeader(arm);
  }

  nudgeLocalJoints(arm: number, deltas: number[]): void {
    if (this.localQ[arm].length !== N_JOINTS) return;
    for (let j = 0; j < N_JOINTS; j++) this.localQ[arm][j] += deltas[j];
    this.publishLeader(arm);
  }

  setLocalGripper(arm: number, value: number): void {
    this.localG[arm] = Math.min(1, Math.max(0, value));
    this.publishLeader(arm);
  }

  /** Send the local leader pose; rate-limited, blocked while disabled. */
  publishLeader(arm: number): boolean {
    if (!this.enabled || this.localQ[arm].length !== N_JOINTS) return false;
    const t = this.now();
    if (t - this.lastSendMs[arm] < this.minSendIntervalMs) return false;
    this.lastSendMs[arm] = t;
    this.sendRaw({ type: "leader", arm, q: [...this.localQ[arm]], g: this.localG[arm] });
    return true;
  }

  setPedal(enabled: boolean): void {
    this.enabled = enabled;
    this.sendRaw({ type: enabled ? "enable" : "disable" });
    if (enabled && this.lastState) {
      // resume from the follower's confirmed pose, not the stale local one
      for (let arm = 0; arm < this.lastState.arms.length; arm++) {
        this.localQ[arm] = [...this.lastState.arms[arm].q];
        this.localG[arm] = this.lastState.arms[arm].g;
      }
    }
  }

  resetEstop(arm: number): void {
    this.sendRaw({ type: "estop_reset", arm });
  }

  private sendRaw(msg: ClientMessage): void {
    this.socket.send(JSON.stringify(msg));
  }
}
