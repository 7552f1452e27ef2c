// Chord synthesis. The sample math is a pure function so tests can FFT the
// buffer; ChordPlayer wraps it for WebAudio playback in the browser.

import type { ChordSpec } from "./types.js";

export const CHORD_DURATION_S = 1.0;

/** Equal-amplitude triad with a smooth attack/release envelope. */
export function synthesizeChord(
  spec: ChordSpec,
  sampleRate = 48000,
  durationS: number = CHORD_DURATION_S,
): Float32Array {
  const n = Math.round(sampleRate * durationS);
  const out = new Float32Array(n);
  const attack = Math.round(0.02 * sampleRate);
  const release = Math.round(0.3 * sampleRate);
  const freqs = [spec.root_hz, spec.middle_hz, spec.fifth_hz];
  for (let i = 0; i < n; i++) {
    const t = i / sampleRate;
    let sample = 0;
    for (const f of freqs) {
      sample += Math.sin(2 * Math.PI * f * t);
    }
    let envelope = 1.0;
    if (i < attack) {
      envelope = i / attack;
    } else if (i > n - release) {
      envelope = Math.max(0, (n - i) / release);
    }
    out[i] = (sample / freqs.length) * envelope * 0.8;
  }
  return out;
}

interface AudioContextLike {
  createBuffer(channels: number, length: number, sampleRate: number): AudioBuffer;
  createBufferSource(): AudioBufferSourceNode;
  destination: AudioDestinationNode;
  sampleRate: number;
}

/** Retriggers the triad on every engine update; stops when updates go stale. */
export class ChordPlayer {
  private ctx: AudioContextLike | null = null;
  enabled = false;
  unavailable = false;

  enable(): void {
    if (this.ctx === null) {
      const Ctor = (globalThis as Record<string, unknown>)["AudioContext"] as
        | (new () => AudioContextLike)
        | undefined;
      if (!Ctor) {
        this.unavailable = true; // visual-only mode
        return;
      }
      this.ctx = new Ctor();
    }
    this.enabled = true;
  }

  disable(): void {
    this.enabled = false;
  }

  play(spec: ChordSpec): void {
    if (!this.enabled || this.ctx === null) {
      return;
    }
    const samples = synthesizeChord(spec, this.ctx.sampleRate);
    const buffer = this.ctx.createBuffer(1, samples.length, this.ctx.sampleRate);
    buffer.copyToChannel(new Float32Array(samples), 0);
    const source = this.ctx.createBufferSource();
    source.buffer = buffer;
    source.connect(this.ctx.destination);
    source.start();
  }
}

/** Magnitude of one frequency component (Goertzel-style correlation). */
export function toneMagnitude(buffer: Float32Array, sampleRate: number, freq: number): number {
  let re = 0;
  let im = 0;
  for (let i = 0; i < buffer.length; i++) {
    const angle = (2 * Math.PI * freq * i) / sampleRate;
    re += buffer[i] * Math.cos(angle);
    im -= buffer[i] * Math.sin(angle);
  }
  return (2 * Math.hypot(re, im)) / buffer.length;
}

/** Frequency of the strongest component within +/- span of a guess, on a fine grid. */
export function peakFrequencyNear(
  buffer: Float32Array,
  sampleRate: number,
  guess: number,
  spanHz = 10,
  stepHz = 0.5,
): number {
  let best = guess;
  let bestMag = -1;
  for (let f = guess - spanHz; f <= guess + spanHz; f += stepHz) {
    const mag = toneMagnitude(buffer, sampleRate, f);
    if (mag > bestMag) {
      bestMag = mag;
      best = f;
    }
  }
  return best;
}
