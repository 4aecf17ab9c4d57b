/**
 * Save/load/run controllers: optimistic-revision saves with a
 * reload-or-overwrite conflict prompt, and sampling runs with status
 * polling. DOM-free so the flows are directly testable.
 */

import { ApiClient, ConflictError, RunStatus } from "./api.js";
import { EditorState, loadScene, markSaved } from "./editor.js";
import { SceneDoc, validateScene } from "./scene.js";

export type ConflictChoice = "reload" | "overwrite" | "cancel";

export interface SaveResult {
  state: EditorState;
  outcome: "created" | "updated" | "reloaded" | "cancelled";
}

/**
 * Persist the current scene. New documents POST; existing ones PUT with
 * the last seen revision. On a 409 the `onConflict` prompt decides:
 * reload (discard local, load server copy), overwrite (retry at the
 * server's revision), or cancel.
 */
export async function saveScene(
  state: EditorState,
  client: ApiClient,
  onConflict: () => Promise<ConflictChoice> | ConflictChoice,
): Promise<SaveResult> {
  validateScene(state.scene); // never ship an invalid document
  if (state.sceneId === null || state.revision === null) {
    const record = await client.createScene(state.scene);
    return { state: markSaved(state, record.id, record.revision), outcome: "created" };
  }
  try {
    const record = await client.updateScene(state.sceneId, state.scene, state.revision);
    return { state: markSaved(state, record.id, record.revision), outcome: "updated" };
  } catch (err) {
    if (!(err instanceof ConflictError)) throw err;
  }
  const choice = await onConflict();
  if (choice === "cancel") {
    return { state, outcome: "cancelled" };
  }
  const server = await client.getScene(state.sceneId);
  if (choice === "reload") {
    const scene = validateScene(server.scene);
    return {
      state: loadScene(state, scene, server.id, server.revision),
      outcome: "reloaded",
    };
  }
  const record = await client.updateScene(state.sceneId, state.scene, server.revision);
  return { state: markSaved(state, record.id, record.revision), outcome: "updated" };
}

export async function openScene(
  state: EditorState,
  client: ApiClient,
  sceneId: string,
): Promise<EditorState> {
  const record = await client.getScene(sceneId);
  return loadScene(state, validateScene(record.scene), record.id, record.revision);
}

export interface RunPanelState {
  runId: string | null;
  status: RunStatus["status"] | null;
  error: string | null;
  preview: ArrayBuffer | null;
}

export interface RunOptions {
  field: Record<string, unknown> | string;
  seed: number;
  steps: number;
  injectionSteps: number;
  latentChannels?: number;
  latentDownsample?: number;
  pollMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/** Submit a sampling run for the scene and poll until it settles. */
export async function runSample(
  scene: SceneDoc,
  editor: EditorState,
  client: ApiClient,
  options: RunOptions,
  onUpdate: (state: RunPanelState) => void = () => {},
): Promise<RunPanelState> {
  validateScene(scene);
  const manifest: Record<string, unknown> = {
    scene,
    encoding: {
      variant: editor.encoding.variant,
      degree: editor.encoding.degree,
      include_radius: editor.encoding.includeRadius,
    },
    T: options.steps,
    injection_steps: options.injectionSteps,
    field: options.field,
    seed: options.seed,
  };
  if (options.latentChannels) manifest.latent_channels = options.latentChannels;
  if (options.latentDownsample) manifest.latent_downsample = options.latentDownsample;

  const panel: RunPanelState = { runId: null, status: null, error: null, preview: null };
  panel.runId = await client.submitRun(manifest);
  panel.status = "queued";
  onUpdate({ ...panel });

  const sleep = options.sleep ?? defaultSleep;
  for (;;) {
    const status = await client.runStatus(panel.runId);
    if (status.status !== panel.status) {
      panel.status = status.status;
      onUpdate({ ...panel });
    }
    if (status.status === "failed") {
      panel.error = status.error ?? "run failed";
      onUpdate({ ...panel });
      return panel;
    }
    if (status.status === "done") {
      panel.preview = await client.runPreview(panel.runId);
      onUpdate({ ...panel });
      return panel;
    }
    await sleep(options.pollMs ?? 250);
  }
}
