// Thin wrapper over a WebSocket-shaped object: sends the hello on open,
// parses frames, and forwards daemon messages in arrival order.

import { ClientMessage, DaemonMessage, PROTOCOL_VERSION, parseDaemonMessage } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  // property-style handlers, loose enough to accept a browser WebSocket
  onopen: ((ev: any) => any) | null;
  onmessage: ((ev: any) => any) | null;
  onclose: ((ev: any) => any) | null;
}

export class Connection {
  private socket: SocketLike;
  private handler: (msg: DaemonMessage) => void;
  sent: ClientMessage[] = []; // kept for tests and debugging

  constructor(socket: SocketLike, handler: (msg: DaemonMessage) => void) {
    this.socket = socket;
    this.handler = handler;
    socket.onopen = () => this.send({ type: "hello", protocol_version: PROTOCOL_VERSION });
    socket.onmessage = (ev) => this.handler(parseDaemonMessage(String(ev.data)));
  }

  send(msg: ClientMessage): void {
    this.sent.push(msg);
    this.socket.send(JSON.stringify(msg));
  }

  analyze(trigger: "save" | "manual" = "manual"): void {
    this.send({ type: "analyze", trigger });
  }

  setBatchSize(batch: number): void {
    this.send({ type: "set_batch_size", batch_size: Math.round(batch) });
  }

  getBreakdown(path: number[], sortKey: "run_time" | "memory"): void {
    this.send({ type: "get_breakdown", path, sort_key: sortKey });
  }
}
