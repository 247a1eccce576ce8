/**
 * Canvas rendering of the working plane: chain polyline, rig marker,
 * telemetry sparkline. Geometry helpers are pure so they can be unit
 * tested without a DOM.
 */

import type { SnapshotPayload } from "./protocol.js";
import type { SeriesPoint } from "./history.js";

export interface Point2 {
  x: number;
  y: number;
}

/** Nominal link length used for the schematic chain view, meters. */
export const LINK_LENGTH = 0.0125;

/**
 * Chain joints projected onto the working plane.
 *
 * Links advance along the base frame x axis and each hinge turns the
 * heading within the plane, so the polyline tracks the simulated shape up
 * to the fixed nominal link length.
 */
export function chainPolyline(
  snap: SnapshotPayload,
  linkLength: number = LINK_LENGTH,
): Point2[] {
  const pose = snap.config.base_pose;
  const hx = pose.rotation[0][0];
  const hy = pose.rotation[1][0];
  let heading = Math.atan2(hy, hx);
  let x = pose.position[0];
  let y = pose.position[1];
  const pts: Point2[] = [{ x, y }];
  const hinges = snap.config.hinge_angles;
  for (let i = 0; i <= hinges.length; i++) {
    x += linkLength * Math.cos(heading);
    y += linkLength * Math.sin(heading);
    pts.push({ x, y });
    if (i < hinges.length) {
      heading += hinges[i];
    }
  }
  return pts;
}

export interface Viewport {
  /** Pixels per meter. */
  scale: number;
  /** World coordinate at the canvas center. */
  centerX: number;
  centerY: number;
  width: number;
  height: number;
}

export function worldToScreen(p: Point2, vp: Viewport): Point2 {
  return {
    x: vp.width / 2 + (p.x - vp.centerX) * vp.scale,
    y: vp.height / 2 - (p.y - vp.centerY) * vp.scale,
  };
}

export const STATE_COLORS: Record<string, string> = {
  alpha: "#d97706",
  beta: "#2563eb",
  gamma: "#16a34a",
  transitional: "#9ca3af",
};

export function drawScene(
  ctx: CanvasRenderingContext2D,
  snap: SnapshotPayload,
  vp: Viewport,
): void {
  ctx.clearRect(0, 0, vp.width, vp.height);

  // rig marker: position plus its field axis (body y)
  const rig = snap.epm_pose;
  const rigAt = worldToScreen({ x: rig.position[0], y: rig.position[1] }, vp);
  const ax = rig.rotation[0][1];
  const ay = rig.rotation[1][1];
  ctx.strokeStyle = "#7c3aed";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(rigAt.x, rigAt.y, 8, 0, 2 * Math.PI);
  ctx.moveTo(rigAt.x, rigAt.y);
  ctx.lineTo(rigAt.x + ax * 20, rigAt.y - ay * 20);
  ctx.stroke();

  // chain polyline colored by state
  const pts = chainPolyline(snap).map((p) => worldToScreen(p, vp));
  ctx.strokeStyle = STATE_COLORS[snap.label] ?? "#111827";
  ctx.lineWidth = 4;
  ctx.lineJoin = "round";
  ctx.beginPath();
  ctx.moveTo(pts[0].x, pts[0].y);
  for (const p of pts.slice(1)) {
    ctx.lineTo(p.x, p.y);
  }
  ctx.stroke();

  // end magnets
  ctx.fillStyle = "#dc2626";
  for (const p of [pts[0], pts[pts.length - 1]]) {
    ctx.beginPath();
    ctx.arc(p.x, p.y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export function drawSparkline(
  ctx: CanvasRenderingContext2D,
  series: SeriesPoint[],
  width: number,
  height: number,
  color: string,
): void {
  ctx.clearRect(0, 0, width, height);
  if (series.length < 2) {
    return;
  }
  const t0 = series[0].t;
  const t1 = series[series.length - 1].t;
  let lo = Infinity;
  let hi = -Infinity;
  for (const p of series) {
    lo = Math.min(lo, p.value);
    hi = Math.max(hi, p.value);
  }
  const span = hi - lo || 1;
  const tSpan = t1 - t0 || 1;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  series.forEach((p, i) => {
    const x = ((p.t - t0) / tSpan) * width;
    const y = height - ((p.value - lo) / span) * (height - 4) - 2;
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.stroke();
}
