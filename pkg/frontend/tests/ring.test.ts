import { describe, expect, it } from "vitest";

import { radialDeviation, ringPoints, ringRadius } from "../src/ring.js";
import type { RingSpec } from "../src/types.js";

// Ring specs exactly as the engine publishes them per level (amplitude
// 0.25 * (5 - level) / 4 of base radius, 24 spikes, orange).
function publishedSpec(level: number): RingSpec {
  return {
    base_radius: 0.8,
    wave_amplitude: (0.25 * (5 - level)) / 4,
    spike_count: 24,
    color: "orange",
  };
}

describe("ring rendering", () => {
  it("draws a perfect circle at level 5", () => {
    const deviation = radialDeviation(publishedSpec(5), 0.37);
    expect(deviation).toBeCloseTo(0, 12);
  });

  it("radial deviation strictly decreases with level", () => {
    const deviations = [1, 2, 3, 4, 5].map((level) =>
      radialDeviation(publishedSpec(level), 1.23),
    );
    for (let i = 1; i < deviations.length; i++) {
      expect(deviations[i]).toBeLessThan(deviations[i - 1]);
    }
  });

  it("level-1 deviation is the engine's published peak-to-peak span", () => {
    // amplitude 0.25 of base radius -> max-min radius = 2 * 0.25 * base
    const deviation = radialDeviation(publishedSpec(1), 0, 4096);
    expect(deviation).toBeCloseTo(2 * 0.25 * 0.8, 3);
  });

  it("is a pure function of spec and clock", () => {
    const spec = publishedSpec(2);
    const a = ringPoints(spec, 0.5, 128);
    const b = ringPoints(spec, 0.5, 128);
    expect(a).toEqual(b);
  });

  it("oscillates over time when amplitude is nonzero", () => {
    const spec = publishedSpec(1);
    const r0 = ringRadius(spec, 0.1, 0);
    const r1 = ringRadius(spec, 0.1, 0.25);
    expect(r0).not.toBeCloseTo(r1, 6);
  });

  it("stays still over time at level 5", () => {
    const spec = publishedSpec(5);
    expect(ringRadius(spec, 0.1, 0)).toBeCloseTo(ringRadius(spec, 0.1, 9.7), 12);
  });
});
