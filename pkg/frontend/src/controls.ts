// Session controls. Commands go to the engine; the UI state only flips when
// the engine acknowledges (the ack handler lives in ConsoleState.absorb),
// and rejections surface verbatim in the banner.

import type { EngineConnection } from "./connection.js";
import type { ConsoleState } from "./state.js";

export class SessionControls {
  constructor(
    private connection: EngineConnection,
    private state: ConsoleState,
  ) {}

  setCondition(condition: string): void {
    this.connection.send({ cmd: "set_condition", condition });
  }

  markTrial(action: "start" | "stop"): void {
    this.connection.send({ cmd: "mark_trial", action });
  }

  setModality(modality: string): void {
    this.connection.send({ cmd: "set_modality", modality });
  }

  setCoupling(value: number): void {
    this.connection.send({ cmd: "set_synth_coupling", value });
  }

  /** What the operator sees: engine-acked state only. */
  displayedCondition(): string {
    return this.state.session?.condition ?? "-";
  }

  trialOpen(): boolean {
    return this.state.session?.trial_open ?? false;
  }
}
