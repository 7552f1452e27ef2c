// Oscillating-ring renderer. Pure geometry first (testable without a DOM),
// thin canvas wrapper below.

import type { RingSpec } from "./types.js";

export const RING_OMEGA = 2 * Math.PI * 1.0; // rad/s temporal oscillation

export interface Point {
  x: number;
  y: number;
}

export function ringRadius(spec: RingSpec, theta: number, timeS: number): number {
  return (
    spec.base_radius *
    (1 + spec.wave_amplitude * Math.sin(spec.spike_count * theta + RING_OMEGA * timeS))
  );
}

export function ringPoints(spec: RingSpec, timeS: number, n = 720): Point[] {
  const points: Point[] = [];
  for (let i = 0; i < n; i++) {
    const theta = (2 * Math.PI * i) / n;
    const r = ringRadius(spec, theta, timeS);
    points.push({ x: r * Math.cos(theta), y: r * Math.sin(theta) });
  }
  return points;
}

/** Peak-to-peak radial deviation of the rendered outline. */
export function radialDeviation(spec: RingSpec, timeS: number, n = 720): number {
  let min = Infinity;
  let max = -Infinity;
  for (const p of ringPoints(spec, timeS, n)) {
    const r = Math.hypot(p.x, p.y);
    min = Math.min(min, r);
    max = Math.max(max, r);
  }
  return max - min;
}

export function drawRing(
  ctx: CanvasRenderingContext2D,
  spec: RingSpec,
  timeS: number,
  width: number,
  height: number,
  stale: boolean,
): void {
  ctx.clearRect(0, 0, width, height);
  const scale = 0.45 * Math.min(width, height);
  const cx = width / 2;
  const cy = height / 2;
  ctx.beginPath();
  const points = ringPoints(spec, timeS);
  points.forEach((p, i) => {
    const x = cx + scale * p.x;
    const y = cy + scale * p.y;
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.closePath();
  ctx.strokeStyle = spec.color;
  ctx.lineWidth = 3;
  ctx.globalAlpha = stale ? 0.4 : 1.0;
  ctx.stroke();
  ctx.globalAlpha = 1.0;
}
