/**
 * Typed client for the pose-conditioning service. All scene traffic uses
 * the shared scene JSON document; binary render responses come back as
 * ArrayBuffers untouched.
 */

import { EncodingSettings } from "./editor.js";
import { SceneDoc } from "./scene.js";

export interface SceneRecord {
  id: string;
  scene: SceneDoc;
  revision: number;
  created: number;
  updated: number;
}

export interface RunStatus {
  id: string;
  status: "queued" | "running" | "done" | "failed";
  error?: string;
  artifacts?: { latent: string; preview: string };
}

export class ApiError extends Error {
  constructor(public status: number, message: string, public path?: string) {
    super(message);
  }
}

export class ConflictError extends ApiError {
  constructor(message: string) {
    super(409, message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raise(response: Response): Promise<never> {
  let message = `HTTP ${response.status}`;
  let path: string | undefined;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") message = body.error;
    if (body && typeof body.path === "string") path = body.path;
  } catch {
    // non-JSON error body; keep the status text
  }
  if (response.status === 409) throw new ConflictError(message);
  throw new ApiError(response.status, message, path);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async postJson(route: string, body: unknown): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${route}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await raise(response);
    return response;
  }

  async renderPreview(scene: SceneDoc, encoding: EncodingSettings): Promise<ArrayBuffer> {
    const response = await this.postJson("/v1/render", {
      scene,
      variant: encoding.variant,
      degree: encoding.degree,
      include_radius: encoding.includeRadius,
      preview: true,
    });
    return response.arrayBuffer();
  }

  async renderMap(scene: SceneDoc, encoding: EncodingSettings): Promise<ArrayBuffer> {
    const response = await this.postJson("/v1/render", {
      scene,
      variant: encoding.variant,
      degree: encoding.degree,
      include_radius: encoding.includeRadius,
    });
    return response.arrayBuffer();
  }

  async createScene(scene: SceneDoc): Promise<SceneRecord> {
    return (await this.postJson("/v1/scenes", scene)).json();
  }

  async getScene(id: string): Promise<SceneRecord> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/scenes/${id}`);
    if (!response.ok) await raise(response);
    return response.json();
  }

  async listScenes(offset = 0, limit = 100): Promise<{ total: number; scenes: SceneRecord[] }> {
    const response = await this.fetchFn(
      `${this.baseUrl}/v1/scenes?offset=${offset}&limit=${limit}`,
    );
    if (!response.ok) await raise(response);
    return response.json();
  }

  /** Optimistic write: throws ConflictError when the revision is stale. */
  async updateScene(id: string, scene: SceneDoc, revision: number): Promise<SceneRecord> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/scenes/${id}`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ scene, revision }),
    });
    if (!response.ok) await raise(response);
    return response.json();
  }

  async deleteScene(id: string): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/scenes/${id}`, {
      method: "DELETE",
    });
    if (!response.ok && response.status !== 404) await raise(response);
  }

  async submitRun(manifest: Record<string, unknown>): Promise<string> {
    const body = await (await this.postJson("/v1/sample", manifest)).json();
    return body.id;
  }

  async runStatus(id: string): Promise<RunStatus> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/sample/${id}`);
    if (!response.ok) await raise(response);
    return response.json();
  }

  async runPreview(id: string): Promise<ArrayBuffer> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/sample/${id}/preview`);
    if (!response.ok) await raise(response);
    return response.arrayBuffer();
  }

  async runLatent(id: string): Promise<ArrayBuffer> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/sample/${id}/latent`);
    if (!response.ok) await raise(response);
    return response.arrayBuffer();
  }
}
