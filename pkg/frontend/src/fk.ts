/** Client-side DH forward kinematics for rendering the arms.
 *
 * Mirrors the server's kinematic chain: standard DH transforms chained in
 * joint order, with link lengths scaled uniformly and the base pose applied
 * last. Positions agree with the server to double precision; the server
 * remains the authority for physics.
 */

import type { BasePoseDoc, DhTableDoc } from "./protocol.js";

export type Mat4 = number[]; // row-major 16
export type Vec3 = [number, number, number];

export function identity4(): Mat4 {
  return [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1];
}

export function matmul4(a: Mat4, b: Mat4): Mat4 {
  const out = new Array<number>(16).fill(0);
  for (let i = 0; i < 4; i++) {
    for (let j = 0; j < 4; j++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[i * 4 + k] * b[k * 4 + j];
      out[i * 4 + j] = s;
    }
  }
  return out;
}

export function dhMatrix(row: number[], theta: number, scale: number): Mat4 {
  const [offset, a0, d0, alpha] = row;
  const a = a0 * scale;
  const d = d0 * scale;
  const ct = Math.cos(offset + theta);
  const st = Math.sin(offset + theta);
  const ca = Math.cos(alpha);
  const sa = Math.sin(alpha);
  return [
    ct, -st * ca, st * sa, a * ct,
    st, ct * ca, -ct * sa, a * st,
    0, sa, ca, d,
    0, 0, 0, 1,
  ];
}

export function basePoseMatrix(base: BasePoseDoc): Mat4 {
  const c = Math.cos(base.yaw);
  const s = Math.sin(base.yaw);
  const [x, y, z] = base.position;
  return [c, -s, 0, x, s, c, 0, y, 0, 0, 1, z, 0, 0, 0, 1];
}

/** World positions of the base and every joint frame origin, base first. */
export function jointPositions(table: DhTableDoc, q: number[], base: BasePoseDoc): Vec3[] {
  let T = basePoseMatrix(base);
  const points: Vec3[] = [[T[3], T[7], T[11]]];
  for (let j = 0; j < table.rows.length; j++) {
    T = matmul4(T, dhMatrix(table.rows[j], q[j], table.scale));
    points.push([T[3], T[7], T[11]]);
  }
  return points;
}

export function eePosition(table: DhTableDoc, q: number[], base: BasePoseDoc): Vec3 {
  const pts = jointPositions(table, q, base);
  return pts[pts.length - 1];
}

/** Linear block of the geometric Jacobian (3x6), world frame. */
export function linearJacobian(table: DhTableDoc, q: number[], base: BasePoseDoc): number[][] {
  let T = basePoseMatrix(base);
  const origins: Vec3[] = [[T[3], T[7], T[11]]];
  const axes: Vec3[] = [[T[2], T[6], T[10]]];
  for (let j = 0; j < table.rows.length; j++) {
    T = matmul4(T, dhMatrix(table.rows[j], q[j], table.scale));
    origins.push([T[3], T[7], T[11]]);
    axes.push([T[2], T[6], T[10]]);
  }
  const pe = origins[origins.length - 1];
  const J: number[][] = [[], [], []];
  for (let j = 0; j < table.rows.length; j++) {
    const z = axes[j];
    const r: Vec3 = [pe[0] - origins[j][0], pe[1] - origins[j][1], pe[2] - origins[j][2]];
    J[0].push(z[1] * r[2] - z[2] * r[1]);
    J[1].push(z[2] * r[0] - z[0] * r[2]);
    J[2].push(z[0] * r[1] - z[1] * r[0]);
  }
  return J;
}

/** Joint deltas moving the EE along a small world-space displacement,
 * transposed-Jacobian style (no inverse kinematics). */
export function dragDeltas(
  table: DhTableDoc,
  q: number[],
  base: BasePoseDoc,
  move: Vec3,
  gain = 1.0,
): number[] {
  const J = linearJacobian(table, q, base);
  const out: number[] = [];
  for (let j = 0; j < q.length; j++) {
    out.push(gain * (J[0][j] * move[0] + J[1][j] * move[1] + J[2][j] * move[2]));
  }
  return out;
}
