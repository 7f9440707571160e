// Message schemas for the session WebSocket API (see docs/api-protocol.md
// in the repo root). The console speaks exactly these and nothing else.

export const NUM_CHANNELS = 6; // five flexion + thumb abduction
export const NUM_FE = 5;

export interface SessionInfo {
  session_id: string;
  profile: string;
  scenario: string;
  joint_ids: string[];
  channels: number;
  loop_hz: number;
  state_broadcast_hz: number;
  params: Record<string, number>;
  ranges: { q_min: number; q_max: number; flexion_decreases: boolean }[];
}

export interface WelcomeMessage extends SessionInfo {
  type: "welcome";
  role: "viewer" | "controller";
}

export interface StateMessage {
  type: "state";
  t: number;
  cycle: number;
  q_operator: number[];
  gain_mode: string[];
  tau: number[];
  u_actual: number[];
  contact: boolean[];
  blocks: (number | null)[];
  robot_targets: number[];
  pose: number[];
  recording: boolean;
}

export interface ClaimResultMessage {
  type: "claim_result";
  role: "viewer" | "controller";
}

export interface AckMessage {
  type: "ack";
  cmd: string;
  path?: string;
  params?: Record<string, number>;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage =
  | WelcomeMessage
  | StateMessage
  | ClaimResultMessage
  | AckMessage
  | ErrorMessage;

export type Command =
  | { type: "claim" }
  | { type: "release" }
  | { type: "set_input"; channel: number; value: number; normalized: boolean }
  | { type: "set_block"; channel: number; value: number | null }
  | { type: "record_start"; task: string }
  | { type: "record_stop"; success: boolean }
  | { type: "stop" };

const KNOWN_TYPES = new Set(["welcome", "state", "claim_result", "ack", "error"]);

// Returns null for anything that isn't a well-formed server message;
// the caller drops those rather than letting one bad packet wedge the UI.
export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const type = (data as { type?: unknown }).type;
  if (typeof type !== "string" || !KNOWN_TYPES.has(type)) return null;
  return data as ServerMessage;
}
