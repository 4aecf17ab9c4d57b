/**
 * Scene document types and validation, matching the service's JSON schema
 * and its field-path error convention (e.g. "objects[0].size[1]").
 * Documents are validated client-side before every server write.
 */

import { Quat, Vec3 } from "./math.js";

export interface CameraDoc {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export interface ObjectDoc {
  label: string;
  center: Vec3;
  size: Vec3;
  rotation: { quat: Quat };
}

export interface SceneDoc {
  camera: CameraDoc;
  objects: ObjectDoc[];
  prompt: string;
  object_prompts?: string[];
}

export class SceneValidationError extends Error {
  constructor(public path: string, message: string) {
    super(`${path}: ${message}`);
  }
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function checkNumber(v: unknown, path: string): number {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new SceneValidationError(path, "expected a finite number");
  }
  return v;
}

function checkVec(v: unknown, n: number, path: string): number[] {
  if (!Array.isArray(v) || v.length !== n) {
    throw new SceneValidationError(path, `expected a list of ${n} numbers`);
  }
  return v.map((x, i) => checkNumber(x, `${path}[${i}]`));
}

function field(doc: Record<string, unknown>, key: string, path: string): unknown {
  if (!(key in doc)) {
    throw new SceneValidationError(path ? `${path}.${key}` : key, "missing field");
  }
  return doc[key];
}

/** Throws SceneValidationError naming the offending path. */
export function validateScene(doc: unknown): SceneDoc {
  if (!isRecord(doc)) throw new SceneValidationError(".", "expected an object");
  const cam = field(doc, "camera", "");
  if (!isRecord(cam)) throw new SceneValidationError("camera", "expected an object");
  const fx = checkNumber(field(cam, "fx", "camera"), "camera.fx");
  const fy = checkNumber(field(cam, "fy", "camera"), "camera.fy");
  const cx = checkNumber(field(cam, "cx", "camera"), "camera.cx");
  const cy = checkNumber(field(cam, "cy", "camera"), "camera.cy");
  const width = field(cam, "width", "camera");
  const height = field(cam, "height", "camera");
  if (!Number.isInteger(width) || (width as number) < 1) {
    throw new SceneValidationError("camera.width", "expected a positive integer");
  }
  if (!Number.isInteger(height) || (height as number) < 1) {
    throw new SceneValidationError("camera.height", "expected a positive integer");
  }
  if (fx <= 0) throw new SceneValidationError("camera.fx", "must be positive");
  if (fy <= 0) throw new SceneValidationError("camera.fy", "must be positive");

  const objects = field(doc, "objects", "");
  if (!Array.isArray(objects)) throw new SceneValidationError("objects", "expected a list");
  const parsed: ObjectDoc[] = objects.map((obj, i) => {
    const p = `objects[${i}]`;
    if (!isRecord(obj)) throw new SceneValidationError(p, "expected an object");
    const label = obj.label ?? "";
    if (typeof label !== "string") {
      throw new SceneValidationError(`${p}.label`, "expected a string");
    }
    const center = checkVec(field(obj, "center", p), 3, `${p}.center`);
    const size = checkVec(field(obj, "size", p), 3, `${p}.size`);
    size.forEach((s, k) => {
      if (s <= 0) throw new SceneValidationError(`${p}.size[${k}]`, "must be strictly positive");
    });
    const rot = field(obj, "rotation", p);
    if (!isRecord(rot)) throw new SceneValidationError(`${p}.rotation`, "expected an object");
    const quat = checkVec(field(rot, "quat", `${p}.rotation`), 4, `${p}.rotation.quat`);
    if (quat.every((q) => q === 0)) {
      throw new SceneValidationError(`${p}.rotation.quat`, "must be non-zero");
    }
    return {
      label,
      center: center as Vec3,
      size: size as Vec3,
      rotation: { quat: quat as Quat },
    };
  });

  const prompt = doc.prompt ?? "";
  if (typeof prompt !== "string") throw new SceneValidationError("prompt", "expected a string");
  let objectPrompts: string[] | undefined;
  if (doc.object_prompts !== undefined) {
    const op = doc.object_prompts;
    if (!Array.isArray(op) || !op.every((s) => typeof s === "string")) {
      throw new SceneValidationError("object_prompts", "expected a list of strings");
    }
    if (op.length !== parsed.length) {
      throw new SceneValidationError("object_prompts", "must align with objects");
    }
    objectPrompts = op as string[];
  }

  const out: SceneDoc = { camera: { fx, fy, cx, cy, width: width as number, height: height as number }, objects: parsed, prompt };
  if (objectPrompts) out.object_prompts = objectPrompts;
  return out;
}

export function cloneScene(scene: SceneDoc): SceneDoc {
  return structuredClone(scene);
}

export function defaultCamera(width = 512, height = 512): CameraDoc {
  const f = Math.max(width, height);
  return { fx: f, fy: f, cx: width / 2, cy: height / 2, width, height };
}

export function emptyScene(width = 512, height = 512): SceneDoc {
  return { camera: defaultCamera(width, height), objects: [], prompt: "" };
}

let boxCounter = 0;

export function newBox(label?: string): ObjectDoc {
  boxCounter += 1;
  return {
    label: label ?? `box${boxCounter}`,
    center: [0, 0, 5],
    size: [1, 1, 1],
    rotation: { quat: [1, 0, 0, 0] },
  };
}

/** 8 corners in camera space: center + R (+-size/2). */
export function boxCorners(obj: ObjectDoc, m: number[][]): Vec3[] {
  const half = obj.size.map((s) => s / 2);
  const out: Vec3[] = [];
  for (const sx of [-1, 1]) {
    for (const sy of [-1, 1]) {
      for (const sz of [-1, 1]) {
        const q = [sx * half[0], sy * half[1], sz * half[2]];
        out.push([
          obj.center[0] + m[0][0] * q[0] + m[0][1] * q[1] + m[0][2] * q[2],
          obj.center[1] + m[1][0] * q[0] + m[1][1] * q[1] + m[1][2] * q[2],
          obj.center[2] + m[2][0] * q[0] + m[2][1] * q[1] + m[2][2] * q[2],
        ]);
      }
    }
  }
  return out;
}

/** Pinhole projection for overlay drawing; null marks behind-camera points. */
export function projectPoint(camera: CameraDoc, p: Vec3): [number, number] | null {
  if (p[2] <= 0) return null;
  return [
    (camera.fx * p[0]) / p[2] + camera.cx,
    (camera.fy * p[1]) / p[2] + camera.cy,
  ];
}
