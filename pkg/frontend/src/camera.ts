// Pinhole projection mirroring the server renderer's contract: camera +z is
// the view direction, +x right, +y down; focal = height / (2 tan(fov/2)).

import type { CameraSpec } from "./protocol.js";

export type Vec3 = [number, number, number];

export interface Projected {
  u: number;
  v: number;
  depth: number;
}

function rotateByConjugate(q: [number, number, number, number], v: Vec3): Vec3 {
  // q* v q : rotate v by the inverse of quaternion q (w, x, y, z)
  const [w, x, y, z] = [q[0], -q[1], -q[2], -q[3]];
  const ux = x, uy = y, uz = z;
  const dotUV = ux * v[0] + uy * v[1] + uz * v[2];
  const dotUU = ux * ux + uy * uy + uz * uz;
  const crossX = uy * v[2] - uz * v[1];
  const crossY = uz * v[0] - ux * v[2];
  const crossZ = ux * v[1] - uy * v[0];
  const s = w * w - dotUU;
  return [
    2 * dotUV * ux + s * v[0] + 2 * w * crossX,
    2 * dotUV * uy + s * v[1] + 2 * w * crossY,
    2 * dotUV * uz + s * v[2] + 2 * w * crossZ,
  ];
}

export function focalLength(camera: CameraSpec): number {
  return camera.height / (2 * Math.tan(camera.fov_y / 2));
}

export function projectPoint(camera: CameraSpec, point: Vec3): Projected | null {
  const rel: Vec3 = [
    point[0] - camera.position[0],
    point[1] - camera.position[1],
    point[2] - camera.position[2],
  ];
  const pc = rotateByConjugate(camera.orientation, rel);
  if (pc[2] <= 1e-9) return null; // behind the camera
  const f = focalLength(camera);
  return {
    u: camera.width / 2 + (f * pc[0]) / pc[2],
    v: camera.height / 2 + (f * pc[1]) / pc[2],
    depth: pc[2],
  };
}
