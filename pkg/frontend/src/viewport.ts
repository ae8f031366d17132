/** Mapping between task-space coordinates and canvas pixels for the two
 *  orthographic views. Top-down shows (x, y); side shows (x, z).
 */

export interface Workspace {
  x: [number, number];
  y: [number, number];
  z: [number, number];
}

export const WORKSPACE: Workspace = {
  x: [-0.45, 0.45],
  y: [-0.35, 0.35],
  z: [0.0, 0.35],
};

export const Z_SCROLL_STEP = 0.005; // meters per wheel notch

export const clamp = (v: number, lo: number, hi: number): number =>
  Math.min(hi, Math.max(lo, v));

export type ViewKind = "top" | "side";

/** Linear map from a workspace rectangle onto a pixel rectangle (y flipped so
 *  +y task / +z task point up on screen). */
export class ViewMapping {
  constructor(
    readonly kind: ViewKind,
    readonly widthPx: number,
    readonly heightPx: number,
    readonly ws: Workspace = WORKSPACE,
  ) {}

  private axes(): [[number, number], [number, number]] {
    return this.kind === "top" ? [this.ws.x, this.ws.y] : [this.ws.x, this.ws.z];
  }

  /** Task point -> canvas pixel. Takes the full 3-vector. */
  toCanvas(p: number[]): [number, number] {
    const [hx, vy] = this.axes();
    const h = this.kind === "top" ? p[0] : p[0];
    const v = this.kind === "top" ? p[1] : p[2];
    const u = ((h - hx[0]) / (hx[1] - hx[0])) * this.widthPx;
    const w = (1 - (v - vy[0]) / (vy[1] - vy[0])) * this.heightPx;
    return [u, w];
  }

  /** Canvas pixel -> the two task coordinates this view controls, clamped to
   *  the workspace. */
  fromCanvas(u: number, w: number): [number, number] {
    const [hx, vy] = this.axes();
    const h = hx[0] + (u / this.widthPx) * (hx[1] - hx[0]);
    const v = vy[0] + (1 - w / this.heightPx) * (vy[1] - vy[0]);
    return [clamp(h, hx[0], hx[1]), clamp(v, vy[0], vy[1])];
  }

  metersToPx(m: number): number {
    const [hx] = this.axes();
    return (m / (hx[1] - hx[0])) * this.widthPx;
  }
}

/** Apply a drag in one view to a task-space position. */
export function dragToPosition(
  view: ViewMapping,
  current: [number, number, number],
  u: number,
  w: number,
): [number, number, number] {
  const [a, b] = view.fromCanvas(u, w);
  if (view.kind === "top") {
    return [a, b, clamp(current[2], view.ws.z[0], view.ws.z[1])];
  }
  return [a, clamp(current[1], view.ws.y[0], view.ws.y[1]), b];
}

/** Apply scroll-wheel notches to the z coordinate (negative notch = down). */
export function scrollToZ(current: number, notches: number, ws: Workspace = WORKSPACE): number {
  return clamp(current + notches * Z_SCROLL_STEP, ws.z[0], ws.z[1]);
}
