import type { SocketLike } from "../src/connection.js";

export class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev: any) => any) | null = null;
  onmessage: ((ev: any) => any) | null = null;
  onclose: ((ev: any) => any) | null = null;

  open(): void {
    this.onopen?.({});
  }

  deliver(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }

  sentOfType(type: string): any[] {
    return this.sent.map((raw) => JSON.parse(raw)).filter((msg) => msg.type === type);
  }
}
