// Persistent socket to the engine's control channel, with reconnection.
// The socket constructor is injectable so node tests can pass the "ws"
// client while the browser uses the native WebSocket.

import type { Command, EngineMessage } from "./types.js";

// Handler parameters are deliberately `any`: the browser WebSocket and the
// node "ws" client disagree on event types, and this adapter accepts both.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const RECONNECT_DELAY_MS = 1000;

export class EngineConnection {
  private socket: SocketLike | null = null;
  private closed = false;
  private listeners: Array<(m: EngineMessage) => void> = [];
  private statusListeners: Array<(connected: boolean) => void> = [];

  constructor(
    private url: string,
    private factory: SocketFactory,
    private reconnectDelayMs: number = RECONNECT_DELAY_MS,
  ) {}

  onMessage(listener: (m: EngineMessage) => void): void {
    this.listeners.push(listener);
  }

  onStatus(listener: (connected: boolean) => void): void {
    this.statusListeners.push(listener);
  }

  connect(): void {
    if (this.closed) {
      return;
    }
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      for (const cb of this.statusListeners) {
        cb(true);
      }
    };
    socket.onmessage = (event: { data: unknown }) => {
      let parsed: EngineMessage;
      try {
        parsed = JSON.parse(String(event.data)) as EngineMessage;
      } catch {
        return; // tolerate malformed frames
      }
      for (const cb of this.listeners) {
        cb(parsed);
      }
    };
    socket.onclose = () => {
      for (const cb of this.statusListeners) {
        cb(false);
      }
      if (!this.closed) {
        setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
    socket.onerror = () => {
      // onclose follows; nothing else to do
    };
  }

  send(command: Command): void {
    if (this.socket) {
      this.socket.send(JSON.stringify(command));
    }
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
