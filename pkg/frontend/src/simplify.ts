import type { Pt } from "./types.js";

function perpendicularDistance(p: Pt, a: Pt, b: Pt): number {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const len2 = dx * dx + dy * dy;
  if (len2 === 0) return Math.hypot(p.x - a.x, p.y - a.y);
  const t = Math.max(0, Math.min(1, ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2));
  return Math.hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

/**
 * Douglas-Peucker polyline simplification. Keeps endpoints; drops interior
 * points closer than epsilon to the local chord.
 */
export function simplify(points: Pt[], epsilon: number): Pt[] {
  if (points.length <= 2) return points.slice();
  let maxDist = -1;
  let maxIdx = 0;
  const last = points.length - 1;
  for (let i = 1; i < last; i++) {
    const d = perpendicularDistance(points[i], points[0], points[last]);
    if (d > maxDist) {
      maxDist = d;
      maxIdx = i;
    }
  }
  if (maxDist <= epsilon) {
    return [points[0], points[last]];
  }
  const left = simplify(points.slice(0, maxIdx + 1), epsilon);
  const right = simplify(points.slice(maxIdx), epsilon);
  return left.slice(0, -1).concat(right);
}

/** Max distance from any original point to the simplified polyline. */
export function simplificationError(original: Pt[], simplified: Pt[]): number {
  let worst = 0;
  for (const p of original) {
    let best = Infinity;
    for (let i = 0; i + 1 < simplified.length; i++) {
      best = Math.min(best, perpendicularDistance(p, simplified[i], simplified[i + 1]));
    }
    worst = Math.max(worst, best);
  }
  return worst;
}
