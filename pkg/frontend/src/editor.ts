/**
 * Editor state and gesture handling. Every edit touches only the selected
 * object, flags the document dirty, and lands on an undo stack of at
 * least 50 steps. Invalid gestures (no selection, unknown axis) are
 * ignored rather than raised: viewport input is best-effort.
 */

import { axisAngle, compose, fromEuler, Quat, Vec3 } from "./math.js";
import { cloneScene, SceneDoc } from "./scene.js";

export type GizmoMode = "translate" | "scale" | "rotate";
export type Axis = 0 | 1 | 2;

export interface EncodingSettings {
  variant: "constant" | "identity" | "spherical";
  degree: number;
  includeRadius: boolean;
}

export interface EditorState {
  scene: SceneDoc;
  selected: number | null;
  mode: GizmoMode;
  encoding: EncodingSettings;
  dirty: boolean;
  sceneId: string | null;
  revision: number | null; // last revision seen from the server
  undoStack: SceneDoc[];
}

export const UNDO_LIMIT = 50;

export type Gesture =
  | { kind: "translate"; axis: Axis; amount: number }
  | { kind: "scale"; axis: Axis; amount: number }
  | { kind: "rotate"; axis: Axis; angle: number }
  | { kind: "set-euler"; azimuth: number; elevation: number; roll: number }
  | { kind: "set-center"; center: Vec3 }
  | { kind: "set-size"; size: Vec3 }
  | { kind: "set-label"; label: string };

const AXES: Vec3[] = [
  [1, 0, 0],
  [0, 1, 0],
  [0, 0, 1],
];

export const SIZE_FLOOR = 1e-3;

export function initialState(scene: SceneDoc): EditorState {
  return {
    scene,
    selected: scene.objects.length > 0 ? 0 : null,
    mode: "translate",
    encoding: { variant: "identity", degree: 2, includeRadius: false },
    dirty: false,
    sceneId: null,
    revision: null,
    undoStack: [],
  };
}

function pushUndo(state: EditorState): SceneDoc[] {
  const stack = [...state.undoStack, cloneScene(state.scene)];
  return stack.length > UNDO_LIMIT ? stack.slice(stack.length - UNDO_LIMIT) : stack;
}

/** Apply a gesture to the selected object; ignored when nothing is selected. */
export function applyGesture(state: EditorState, gesture: Gesture): EditorState {
  if (state.selected === null || state.selected >= state.scene.objects.length) {
    return state;
  }
  const undoStack = pushUndo(state);
  const scene = cloneScene(state.scene);
  const obj = scene.objects[state.selected];
  switch (gesture.kind) {
    case "translate":
      obj.center[gesture.axis] += gesture.amount;
      break;
    case "scale":
      obj.size[gesture.axis] = Math.max(SIZE_FLOOR, obj.size[gesture.axis] + gesture.amount);
      break;
    case "rotate":
      obj.rotation.quat = compose(axisAngle(AXES[gesture.axis], gesture.angle), obj.rotation.quat);
      break;
    case "set-euler":
      obj.rotation.quat = fromEuler(gesture.azimuth, gesture.elevation, gesture.roll);
      break;
    case "set-center":
      obj.center = [...gesture.center];
      break;
    case "set-size":
      obj.size = gesture.size.map((s) => Math.max(SIZE_FLOOR, s)) as Vec3;
      break;
    case "set-label":
      obj.label = gesture.label;
      break;
  }
  return { ...state, scene, dirty: true, undoStack };
}

export function undo(state: EditorState): EditorState {
  if (state.undoStack.length === 0) return state;
  const undoStack = [...state.undoStack];
  const scene = undoStack.pop()!;
  return { ...state, scene, dirty: true, undoStack };
}

export function selectObject(state: EditorState, index: number | null): EditorState {
  if (index !== null && (index < 0 || index >= state.scene.objects.length)) {
    return state;
  }
  return { ...state, selected: index };
}

export function setMode(state: EditorState, mode: GizmoMode): EditorState {
  return { ...state, mode };
}

export function addObject(state: EditorState, obj: SceneDoc["objects"][number]): EditorState {
  const undoStack = pushUndo(state);
  const scene = cloneScene(state.scene);
  scene.objects.push(obj);
  return { ...state, scene, selected: scene.objects.length - 1, dirty: true, undoStack };
}

export function removeSelected(state: EditorState): EditorState {
  if (state.selected === null) return state;
  const undoStack = pushUndo(state);
  const scene = cloneScene(state.scene);
  scene.objects.splice(state.selected, 1);
  const selected = scene.objects.length > 0 ? Math.min(state.selected, scene.objects.length - 1) : null;
  return { ...state, scene, selected, dirty: true, undoStack };
}

export function markSaved(state: EditorState, sceneId: string, revision: number): EditorState {
  return { ...state, sceneId, revision, dirty: false };
}

export function loadScene(state: EditorState, scene: SceneDoc, sceneId: string | null,
                          revision: number | null): EditorState {
  return {
    ...state,
    scene,
    selected: scene.objects.length > 0 ? 0 : null,
    dirty: false,
    sceneId,
    revision,
    undoStack: [],
  };
}
