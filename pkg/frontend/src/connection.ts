// Session connection: consumes server messages, keeps only the latest state
// (one-slot buffer, old frames dropped), and exposes a validated send path.
// The WebSocket constructor is injected so tests and the node driver can
// substitute implementations.

import {
  encodeClientMessage,
  parseServerMessage,
  type ClientMessage,
  type ConfigMessage,
  type StateMessage,
} from "./protocol.js";

export type SocketLike = {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
};

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus = "connecting" | "open" | "closed" | "error";

export class SessionConnection {
  status: ConnectionStatus = "connecting";
  config: ConfigMessage | null = null;
  statesReceived = 0;
  droppedMessages = 0;
  lastError: string | null = null;
  onSaved: ((path: string, steps: number) => void) | null = null;
  onStatus: ((status: ConnectionStatus) => void) | null = null;

  private socket: SocketLike | null = null;
  private latestState: StateMessage | null = null;

  constructor(private readonly factory: SocketFactory) {}

  connect(url: string): void {
    this.status = "connecting";
    this.config = null;
    this.latestState = null;
    const socket = this.factory(url);
    this.socket = socket;
    socket.onopen = () => this.setStatus("open");
    socket.onclose = () => this.setStatus("closed");
    socket.onerror = () => {
      this.lastError = "connection error";
      this.setStatus("error");
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
  }

  private setStatus(status: ConnectionStatus) {
    this.status = status;
    this.onStatus?.(status);
  }

  private handleMessage(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) {
      this.droppedMessages += 1; // malformed: dropped, never rendered
      return;
    }
    switch (msg.type) {
      case "config":
        this.config = msg;
        this.latestState = null; // stale frames from a previous episode
        break;
      case "state":
        this.latestState = msg; // one-slot: older unrendered frames dropped
        this.statesReceived += 1;
        break;
      case "saved":
        this.onSaved?.(msg.path, msg.steps);
        break;
      case "error":
        this.lastError = msg.message;
        break;
    }
  }

  /** Returns the newest unconsumed state exactly once, else null. */
  takeState(): StateMessage | null {
    const s = this.latestState;
    this.latestState = null;
    return s;
  }

  send(msg: ClientMessage): void {
    if (this.status !== "open" || !this.socket) {
      return; // input disabled when disconnected
    }
    this.socket.send(encodeClientMessage(msg));
  }

  close(): void {
    this.socket?.close();
  }
}
