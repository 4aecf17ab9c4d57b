/**
 * Pose math mirroring the server's rotation semantics: unit quaternions
 * (w, x, y, z), Hamilton product, and Euler angles as azimuth about
 * camera-up (-y), then elevation about +x, then roll about +z.
 *
 * Agreement with the server is pinned by tests/fixtures/rotation_vectors.json.
 */

export type Quat = [number, number, number, number];
export type Vec3 = [number, number, number];

export const IDENTITY: Quat = [1, 0, 0, 0];

export function normalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (!(n > 0)) throw new Error("zero quaternion");
  if (Math.abs(n * n - 1) < 1e-12) return [...q];
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

/** Hamilton product a*b (apply b first, then a), renormalized. */
export function compose(a: Quat, b: Quat): Quat {
  const [w1, x1, y1, z1] = a;
  const [w2, x2, y2, z2] = b;
  return normalize([
    w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
    w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
    w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
    w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
  ]);
}

export function axisAngle(axis: Vec3, angle: number): Quat {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  if (!(n > 0)) throw new Error("zero axis");
  const half = angle / 2;
  const s = Math.sin(half) / n;
  return normalize([Math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s]);
}

export function matrix(q: Quat): number[][] {
  const [w, x, y, z] = q;
  return [
    [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
    [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
    [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
  ];
}

export function rotate(q: Quat, v: Vec3): Vec3 {
  const m = matrix(q);
  return [
    m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
    m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
    m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
  ];
}

export function fromEuler(azimuth: number, elevation: number, roll: number): Quat {
  const qa = axisAngle([0, -1, 0], azimuth);
  const qe = axisAngle([1, 0, 0], elevation);
  const qr = axisAngle([0, 0, 1], roll);
  return compose(compose(qa, qe), qr);
}

/** (azimuth, elevation, roll); see fromEuler for the axis convention. */
export function toEuler(q: Quat): [number, number, number] {
  const m = matrix(q);
  const elevation = Math.asin(Math.max(-1, Math.min(1, -m[1][2])));
  const roll = Math.atan2(m[1][0], m[1][1]);
  const azimuth = Math.atan2(-m[0][2], m[2][2]);
  return [azimuth, elevation, roll];
}

/** Quaternion distance that treats q and -q as the same rotation. */
export function quatDistance(a: Quat, b: Quat): number {
  let dPlus = 0;
  let dMinus = 0;
  for (let i = 0; i < 4; i++) {
    dPlus = Math.max(dPlus, Math.abs(a[i] - b[i]));
    dMinus = Math.max(dMinus, Math.abs(a[i] + b[i]));
  }
  return Math.min(dPlus, dMinus);
}
