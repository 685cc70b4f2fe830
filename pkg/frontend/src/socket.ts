// Thin websocket wrapper with reconnect; all parsing goes through the
// protocol module so the rest of the app never touches raw frames.

import { parseServerMessage, type ClientMessage, type ServerMessage } from "./protocol";

export class TeleopSocket {
  private ws: WebSocket | null = null;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly onMessage: (msg: ServerMessage) => void,
    private readonly onStatus: (open: boolean) => void,
  ) {}

  connect(): void {
    this.closed = false;
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => this.onStatus(true);
    this.ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg) this.onMessage(msg);
    };
    this.ws.onclose = () => {
      this.onStatus(false);
      this.ws = null;
      if (!this.closed) setTimeout(() => this.connect(), 1000);
    };
    this.ws.onerror = () => this.ws?.close();
  }

  send(msg: ClientMessage): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(msg));
      return true;
    }
    return false;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
