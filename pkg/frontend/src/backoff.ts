// Reconnect pacing. The cap guarantees a dropped server is retried at
// least every 5 s, so a restart is picked up within one attempt window.

export const RECONNECT_BASE_MS = 250;
export const RECONNECT_MAX_MS = 5_000;

export function reconnectDelay(attempt: number): number {
  const n = Math.max(0, attempt);
  return Math.min(RECONNECT_BASE_MS * 2 ** n, RECONNECT_MAX_MS);
}
