// Control-channel protocol types (mirrors the engine's JSON messages).

export interface RingSpec {
  base_radius: number;
  wave_amplitude: number;
  spike_count: number;
  color: string;
}

export interface ChordSpec {
  root_hz: number;
  middle_hz: number;
  fifth_hz: number;
}

export interface HapticPattern {
  bpm: number;
  intensity: number;
  pulse_ms: number;
}

export interface IbsUpdate {
  type: "update";
  epoch_start_us: number;
  value: number;
  valid: boolean;
  held: boolean;
  level: number;
  ring: RingSpec | null;
  chord: ChordSpec | null;
  haptic: HapticPattern | null;
  condition: string;
  trial_id: number | null;
  compute_latency_ms: number;
}

export interface SessionState {
  condition: string;
  modality: string;
  trial_open: boolean;
  trial_id: number | null;
  coupling?: number;
}

export interface HelloMessage {
  type: "hello";
  state: SessionState;
}

export interface AckMessage {
  type: "ack";
  cmd: string;
  ok: boolean;
  error: string | null;
  state: SessionState;
}

export type EngineMessage = IbsUpdate | HelloMessage | AckMessage;

export type Command =
  | { cmd: "set_condition"; condition: string }
  | { cmd: "mark_trial"; action: "start" | "stop" }
  | { cmd: "set_modality"; modality: string }
  | { cmd: "set_synth_coupling"; value: number };

export const CONDITIONS = ["Non-sync", "No Feedback", "Visual", "Auditory", "Haptic"] as const;
