// All console state lives here, DOM-free, so the rendering layer stays
// a dumb painter and the logic is testable in node. Everything shown to
// the operator comes verbatim from server messages; the only local
// contributions are slider intents and transient toasts.

import { Ring } from "./ring.js";
import {
  Command,
  NUM_CHANNELS,
  NUM_FE,
  ServerMessage,
  SessionInfo,
  StateMessage,
} from "./protocol.js";

// 10 s of history at the 20 Hz broadcast rate.
export const TRACE_CAPACITY = 200;
export const STALE_AFTER_MS = 1_000;
const TOAST_TTL_MS = 4_000;

export type ConnectionStatus = "connecting" | "online" | "offline";
export type Role = "viewer" | "controller";

export interface Toast {
  text: string;
  atMs: number;
}

export class ConsoleViewModel {
  connection: ConnectionStatus = "connecting";
  role: Role = "viewer";
  session: SessionInfo | null = null;

  sliders: number[] = new Array(NUM_CHANNELS).fill(0);
  qOperator: Ring<number>[] = [];
  uActual: Ring<number>[] = [];
  tau: Ring<number>[] = [];
  contact: boolean[] = new Array(NUM_FE).fill(false);
  gainMode: string[] = new Array(NUM_FE).fill("contact");
  blocks: (number | null)[] = new Array(NUM_FE).fill(null);
  recording = false;
  episodes: string[] = [];
  toasts: Toast[] = [];
  cycle = 0;
  lastStateAtMs = -1;

  constructor() {
    for (let ch = 0; ch < NUM_CHANNELS; ch++) this.qOperator.push(new Ring(TRACE_CAPACITY));
    for (let ch = 0; ch < NUM_FE; ch++) {
      this.uActual.push(new Ring(TRACE_CAPACITY));
      this.tau.push(new Ring(TRACE_CAPACITY));
    }
  }

  // -- socket lifecycle ------------------------------------------------------

  onOpen(): void {
    this.connection = "online";
  }

  onClose(): void {
    this.connection = "offline";
    this.role = "viewer"; // a reconnect re-claims from scratch
  }

  onMessage(msg: ServerMessage, nowMs: number): void {
    switch (msg.type) {
      case "welcome": {
        const { type: _t, role, ...info } = msg;
        this.session = info;
        this.role = role;
        break;
      }
      case "claim_result":
        this.role = msg.role;
        break;
      case "state":
        this.applyState(msg, nowMs);
        break;
      case "ack":
        if (msg.cmd === "record_stop" && msg.path) this.episodes.push(msg.path);
        break;
      case "error":
        this.pushToast(msg.message, nowMs);
        break;
    }
    this.pruneToasts(nowMs);
  }

  private applyState(msg: StateMessage, nowMs: number): void {
    this.lastStateAtMs = nowMs;
    this.cycle = msg.cycle;
    for (let ch = 0; ch < NUM_CHANNELS; ch++) this.qOperator[ch].push(msg.q_operator[ch]);
    for (let ch = 0; ch < NUM_FE; ch++) {
      this.uActual[ch].push(msg.u_actual[ch]);
      this.tau[ch].push(msg.tau[ch]);
    }
    this.contact = msg.contact;
    this.gainMode = msg.gain_mode;
    this.blocks = msg.blocks;
    this.recording = msg.recording;
  }

  // -- operator intents ------------------------------------------------------
  // Each returns the command to send, or null when the intent is not
  // currently allowed (viewer role, not connected). The caller puts it
  // on the wire; the UI shows the intent immediately and reconciles
  // with whatever the next state broadcast says.

  get canControl(): boolean {
    return this.role === "controller" && this.connection === "online";
  }

  setSlider(channel: number, value: number): Command | null {
    if (channel < 0 || channel >= NUM_CHANNELS) return null;
    const v = Math.min(1, Math.max(0, value));
    this.sliders[channel] = v;
    if (!this.canControl) return null;
    return { type: "set_input", channel, value: v, normalized: true };
  }

  toggleBlock(channel: number): Command | null {
    if (!this.canControl || channel < 0 || channel >= NUM_FE) return null;
    if (this.blocks[channel] !== null) {
      return { type: "set_block", channel, value: null };
    }
    // Drop the wall where the hand is right now; 0.5 before any data.
    const here = this.uActual[channel].last();
    const value = here === undefined ? 0.5 : Math.round(here * 100) / 100;
    return { type: "set_block", channel, value };
  }

  record(task: string): Command | null {
    if (!this.canControl || this.recording) return null;
    return { type: "record_start", task: task || "console" };
  }

  stopRecord(success: boolean): Command | null {
    if (!this.canControl || !this.recording) return null;
    return { type: "record_stop", success };
  }

  // -- derived display state -------------------------------------------------

  isStale(nowMs: number): boolean {
    if (this.connection !== "online" || this.lastStateAtMs < 0) return false;
    return nowMs - this.lastStateAtMs > STALE_AFTER_MS;
  }

  pushToast(text: string, nowMs: number): void {
    this.toasts.push({ text, atMs: nowMs });
  }

  pruneToasts(nowMs: number): void {
    this.toasts = this.toasts.filter((t) => nowMs - t.atMs < TOAST_TTL_MS);
  }
}
