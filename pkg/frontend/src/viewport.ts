/**
 * Wireframe overlay geometry: project box edges and gizmo axes into the
 * image so the canvas can draw outlines and indices on top of the
 * server-rendered preview. Projection here is display-only; all map math
 * stays on the server.
 */

import { matrix, Quat, rotate, Vec3 } from "./math.js";
import { boxCorners, CameraDoc, ObjectDoc, projectPoint, SceneDoc } from "./scene.js";

export type Segment = [[number, number], [number, number]];

// corner indexing from boxCorners: bit 2 = +x, bit 1 = +y, bit 0 = +z
const EDGES: [number, number][] = [
  [0, 1], [2, 3], [4, 5], [6, 7],
  [0, 2], [1, 3], [4, 6], [5, 7],
  [0, 4], [1, 5], [2, 6], [3, 7],
];

export interface BoxOutline {
  index: number;
  label: string;
  segments: Segment[];
  anchor: [number, number] | null; // label anchor (projected center)
}

export function outlineBox(camera: CameraDoc, obj: ObjectDoc, index: number): BoxOutline {
  const corners = boxCorners(obj, matrix(obj.rotation.quat));
  const projected = corners.map((c) => projectPoint(camera, c));
  const segments: Segment[] = [];
  for (const [a, b] of EDGES) {
    const pa = projected[a];
    const pb = projected[b];
    if (pa && pb) segments.push([pa, pb]);
  }
  return {
    index,
    label: obj.label,
    segments,
    anchor: projectPoint(camera, obj.center),
  };
}

export function outlineScene(scene: SceneDoc): BoxOutline[] {
  return scene.objects.map((obj, i) => outlineBox(scene.camera, obj, i));
}

export interface GizmoAxis {
  axis: 0 | 1 | 2;
  from: [number, number];
  to: [number, number];
}

/** Screen-space handles for the selected object's local axes. */
export function gizmoAxes(camera: CameraDoc, obj: ObjectDoc, length = 1.0): GizmoAxis[] {
  const q: Quat = obj.rotation.quat;
  const out: GizmoAxis[] = [];
  const center = projectPoint(camera, obj.center);
  if (!center) return out;
  const units: Vec3[] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
  ];
  units.forEach((unit, axis) => {
    const dir = rotate(q, unit);
    const tip: Vec3 = [
      obj.center[0] + dir[0] * length,
      obj.center[1] + dir[1] * length,
      obj.center[2] + dir[2] * length,
    ];
    const projected = projectPoint(camera, tip);
    if (projected) out.push({ axis: axis as 0 | 1 | 2, from: center, to: projected });
  });
  return out;
}

/** Nearest object whose outline passes within `radius` of the pointer. */
export function pickObject(scene: SceneDoc, x: number, y: number, radius = 6): number | null {
  let best: number | null = null;
  let bestDist = radius;
  outlineScene(scene).forEach((outline) => {
    for (const [[ax, ay], [bx, by]] of outline.segments) {
      const d = pointSegmentDistance(x, y, ax, ay, bx, by);
      if (d < bestDist) {
        bestDist = d;
        best = outline.index;
      }
    }
  });
  return best;
}

function pointSegmentDistance(px: number, py: number, ax: number, ay: number,
                              bx: number, by: number): number {
  const dx = bx - ax;
  const dy = by - ay;
  const len2 = dx * dx + dy * dy;
  const t = len2 > 0 ? Math.max(0, Math.min(1, ((px - ax) * dx + (py - ay) * dy) / len2)) : 0;
  return Math.hypot(px - (ax + t * dx), py - (ay + t * dy));
}
