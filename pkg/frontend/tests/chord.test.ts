import { describe, expect, it } from "vitest";

import { peakFrequencyNear, synthesizeChord, toneMagnitude } from "../src/chord.js";
import type { ChordSpec } from "../src/types.js";

const LEVEL5: ChordSpec = { root_hz: 527.2, middle_hz: 659.0, fifth_hz: 790.8 };
const LEVEL1: ChordSpec = { root_hz: 527.2, middle_hz: 547.0, fifth_hz: 790.8 };

describe("chord synthesis", () => {
  it("level-5 buffer peaks at 527.2 / 659 / 790.8 Hz within 2 Hz", () => {
    const buffer = synthesizeChord(LEVEL5, 48000, 1.0);
    for (const target of [527.2, 659.0, 790.8]) {
      const peak = peakFrequencyNear(buffer, 48000, target);
      expect(Math.abs(peak - target)).toBeLessThanOrEqual(2.0);
    }
  });

  it("level-1 middle tone sits at 547 Hz", () => {
    const buffer = synthesizeChord(LEVEL1, 48000, 1.0);
    const peak = peakFrequencyNear(buffer, 48000, 547.0);
    expect(Math.abs(peak - 547.0)).toBeLessThanOrEqual(2.0);
    // and there is no energy left at the level-5 middle note
    const at659 = toneMagnitude(buffer, 48000, 659.0);
    const at547 = toneMagnitude(buffer, 48000, 547.0);
    expect(at547).toBeGreaterThan(5 * at659);
  });

  it("all three notes carry comparable energy", () => {
    const buffer = synthesizeChord(LEVEL5, 48000, 1.0);
    const mags = [527.2, 659.0, 790.8].map((f) => toneMagnitude(buffer, 48000, f));
    const [lo, hi] = [Math.min(...mags), Math.max(...mags)];
    expect(hi / lo).toBeLessThan(1.5);
  });

  it("envelope starts and ends near silence", () => {
    const buffer = synthesizeChord(LEVEL5, 8000, 0.5);
    expect(Math.abs(buffer[0])).toBeLessThan(1e-6);
    expect(Math.abs(buffer[buffer.length - 1])).toBeLessThan(0.02);
  });

  it("buffer length follows duration", () => {
    expect(synthesizeChord(LEVEL5, 8000, 0.25).length).toBe(2000);
  });
});
