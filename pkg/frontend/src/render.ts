/** Canvas rendering: arms as FK polylines, table, props, glove bars. */

import { jointPositions } from "./fk.js";
import type { HelloMessage, StateMessage } from "./protocol.js";

export interface ViewSpec {
  axes: [number, number]; // world axis index -> (horizontal, vertical)
  label: string;
  range: { h: [number, number]; v: [number, number] };
}

export const SIDE_VIEW: ViewSpec = { axes: [0, 2], label: "side (x-z)", range: { h: [-1.25, 1.25], v: [-0.15, 1.1] } };
export const TOP_VIEW: ViewSpec = { axes: [0, 1], label: "top (x-y)", range: { h: [-1.25, 1.25], v: [-0.9, 0.9] } };

const ARM_COLORS = ["#3a86ff", "#fb5607"];

function project(view: ViewSpec, w: number, h: number, p: number[]): [number, number] {
  const [ha, va] = view.axes;
  const x = ((p[ha] - view.range.h[0]) / (view.range.h[1] - view.range.h[0])) * w;
  const y = h - ((p[va] - view.range.v[0]) / (view.range.v[1] - view.range.v[0])) * h;
  return [x, y];
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  view: ViewSpec,
  hello: HelloMessage,
  state: StateMessage,
): void {
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, w, h);

  if (view.axes[1] === 2) {
    const table = hello.world_config.contact.table_height;
    const [, y] = project(view, w, h, [0, 0, table]);
    ctx.strokeStyle = "#5c6670";
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(w, y);
    ctx.stroke();
  }

  for (let arm = 0; arm < state.arms.length; arm++) {
    const base = hello.world_config.base_poses[arm];
    const pts = jointPositions(hello.dh_table, state.arms[arm].q, base);
    ctx.strokeStyle = ARM_COLORS[arm % ARM_COLORS.length];
    ctx.lineWidth = 3;
    ctx.beginPath();
    pts.forEach((p, i) => {
      const [x, y] = project(view, w, h, p);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    const ee = project(view, w, h, pts[pts.length - 1]);
    ctx.fillStyle = state.arms[arm].estop ? "#e63946" : ARM_COLORS[arm % ARM_COLORS.length];
    ctx.beginPath();
    ctx.arc(ee[0], ee[1], 7, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.fillStyle = "#ffd166";
  for (const prop of state.props) {
    const [x, y] = project(view, w, h, [prop[0], prop[1], prop[2]]);
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.fillStyle = "#9aa4af";
  ctx.font = "11px monospace";
  ctx.fillText(view.label, 8, 14);
}

/** Pixel displacement -> world-space move vector in this view's plane. */
export function viewMoveVector(view: ViewSpec, w: number, h: number, dx: number, dy: number): [number, number, number] {
  const move: [number, number, number] = [0, 0, 0];
  move[view.axes[0]] = (dx / w) * (view.range.h[1] - view.range.h[0]);
  move[view.axes[1]] = (-dy / h) * (view.range.v[1] - view.range.v[0]);
  return move;
}

export const GLOVE_LABELS = ["x+", "x-", "y+", "y-", "z+", "z-"];
