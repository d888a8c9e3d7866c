// Socket client with an offline queue. The engine is the source of truth;
// nothing here updates the scene optimistically.

import { encode, type ClientMessage, type Envelope } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  readyState: number;
  onopen: ((ev?: any) => void) | null;
  onclose: ((ev?: any) => void) | null;
  onmessage: ((ev: { data: any }) => void) | null;
}

const OPEN = 1;

export class StudioSocket {
  private queue: ClientMessage[] = [];
  private socket: SocketLike | null = null;
  connected = false;

  onEnvelope: (env: Envelope) => void = () => {};
  onStatus: (connected: boolean) => void = () => {};

  constructor(private makeSocket: () => SocketLike) {}

  connect(): void {
    const socket = this.makeSocket();
    this.socket = socket;
    socket.onopen = () => {
      this.connected = true;
      this.onStatus(true);
      this.sendNow({ kind: "Hello" });
      for (const queued of this.queue.splice(0)) this.sendNow(queued);
    };
    socket.onclose = () => {
      this.connected = false;
      this.onStatus(false);
    };
    socket.onmessage = (ev) => {
      this.onEnvelope(JSON.parse(String(ev.data)));
    };
  }

  send(message: ClientMessage): void {
    if (this.connected && this.socket && this.socket.readyState === OPEN) {
      this.sendNow(message);
    } else {
      this.queue.push(message); // offline: queued, surfaced via onStatus
    }
  }

  get queuedCount(): number {
    return this.queue.length;
  }

  resync(): void {
    this.send({ kind: "Resync" });
  }

  private sendNow(message: ClientMessage): void {
    this.socket!.send(encode(message));
  }

  close(): void {
    this.socket?.close();
  }
}
