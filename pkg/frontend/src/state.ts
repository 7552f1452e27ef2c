// Console state store. The console never computes synchrony or levels
// itself: it renders exactly what the engine published, keyed by epoch
// start so reconnect snapshots cannot duplicate history.

import type { EngineMessage, IbsUpdate, SessionState } from "./types.js";

export const HISTORY_LIMIT = 300;
export const STALE_AFTER_MS = 5000;

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export class ConsoleState {
  status: ConnectionStatus = "connecting";
  latest: IbsUpdate | null = null;
  history: IbsUpdate[] = [];
  session: SessionState | null = null;
  banner: string | null = null;
  couplingSlider = 0;
  private lastUpdateAt = 0;
  private seen = new Set<number>();

  absorb(message: EngineMessage, now: number = Date.now()): void {
    if (message.type === "hello") {
      this.session = message.state;
      if (typeof message.state.coupling === "number") {
        this.couplingSlider = message.state.coupling;
      }
      return;
    }
    if (message.type === "ack") {
      // Engine acknowledgment is the only thing allowed to flip UI state.
      this.session = message.state;
      this.banner = message.ok ? null : message.error ?? "rejected";
      if (message.ok && message.cmd === "set_synth_coupling" &&
          typeof message.state.coupling === "number") {
        this.couplingSlider = message.state.coupling;
      }
      return;
    }
    if (this.seen.has(message.epoch_start_us)) {
      return; // reconnect snapshot replay
    }
    this.seen.add(message.epoch_start_us);
    this.latest = message;
    this.lastUpdateAt = now;
    this.history.push(message);
    if (this.history.length > HISTORY_LIMIT) {
      const dropped = this.history.splice(0, this.history.length - HISTORY_LIMIT);
      for (const update of dropped) {
        this.seen.delete(update.epoch_start_us);
      }
    }
  }

  isStale(now: number = Date.now()): boolean {
    return this.latest !== null && now - this.lastUpdateAt > STALE_AFTER_MS;
  }

  traceValues(): number[] {
    return this.history.filter((u) => u.valid).map((u) => u.value);
  }

  traceMean(lastN?: number): number | null {
    let values = this.traceValues();
    if (lastN !== undefined) {
      values = values.slice(-lastN);
    }
    if (values.length === 0) {
      return null;
    }
    return values.reduce((a, b) => a + b, 0) / values.length;
  }
}
