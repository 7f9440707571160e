// Socket lifecycle around the view model: connect, claim control,
// reconnect with capped backoff after any drop. Injectable socket
// factory and clock so tests can run it against a real server (node
// "ws") or a scripted fake.

import { reconnectDelay } from "./backoff.js";
import { Command, parseServerMessage } from "./protocol.js";
import { ConsoleViewModel } from "./viewmodel.js";

// The sliver of the WebSocket surface we use; both the browser's
// WebSocket and the node "ws" client satisfy it. Handler params stay
// loose (any) so either event shape fits.
export interface SocketLike {
  /* eslint-disable @typescript-eslint/no-explicit-any */
  onopen: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  send(data: string): void;
  close(): void;
}

export interface ClientOptions {
  socketFactory: (url: string) => SocketLike;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export class ConsoleClient {
  readonly vm: ConsoleViewModel;
  private socket: SocketLike | null = null;
  private attempt = 0;
  private stopped = false;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;

  constructor(
    readonly url: string,
    vm: ConsoleViewModel,
    private readonly opts: ClientOptions,
  ) {
    this.vm = vm;
    this.now = opts.now ?? (() => Date.now());
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    if (this.stopped) return;
    const ws = this.opts.socketFactory(this.url);
    this.socket = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.vm.onOpen();
      ws.send(JSON.stringify({ type: "claim" })); // controller if free, viewer otherwise
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg) this.vm.onMessage(msg, this.now());
    };
    ws.onerror = () => {
      // the close handler owns reconnection; nothing to do here
    };
    ws.onclose = () => {
      if (this.socket !== ws) return; // superseded
      this.socket = null;
      this.vm.onClose();
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const delay = reconnectDelay(this.attempt++);
    this.setTimer(() => this.connect(), delay);
  }

  send(cmd: Command | null): boolean {
    if (!cmd || !this.socket || this.vm.connection !== "online") return false;
    this.socket.send(JSON.stringify(cmd));
    return true;
  }

  stop(): void {
    this.stopped = true;
    const ws = this.socket;
    this.socket = null;
    if (ws) {
      ws.onclose = null;
      ws.close();
    }
    this.vm.onClose();
  }
}
