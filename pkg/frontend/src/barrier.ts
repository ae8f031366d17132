/** Client-side evaluation of the height-field barrier for display: a nominal
 *  clearance plane with Gaussian funnels over the transmitted rope points.
 *  The h readout itself always comes from the server; this is only used to
 *  draw the cross-section under the active gripper.
 */
import type { BarrierParamsWire } from "./messages.js";

export function barrierHeight(
  x: number,
  y: number,
  pointsXY: number[][],
  p: BarrierParamsWire,
): number {
  if (pointsXY.length === 0) return p.z0;
  let best = Infinity;
  for (const q of pointsXY) {
    const dx = x - q[0];
    const dy = y - q[1];
    const d2 = dx * dx + dy * dy;
    if (d2 < best) best = d2;
  }
  return p.z0 - p.zeta * Math.exp(-best / (2 * p.sigma * p.sigma));
}

/** Sample z_b along a line through (xc, yc) with direction (dx, dy). */
export function crossSection(
  xc: number,
  yc: number,
  dx: number,
  dy: number,
  halfWidth: number,
  samples: number,
  pointsXY: number[][],
  p: BarrierParamsWire,
): Array<[number, number, number]> {
  const n = Math.hypot(dx, dy) || 1;
  const ux = dx / n;
  const uy = dy / n;
  const out: Array<[number, number, number]> = [];
  for (let i = 0; i < samples; i++) {
    const s = -halfWidth + (2 * halfWidth * i) / (samples - 1);
    const x = xc + s * ux;
    const y = yc + s * uy;
    out.push([x, y, barrierHeight(x, y, pointsXY, p)]);
  }
  return out;
}
