/**
 * Live preview pipeline: throttled so at most one render request goes out
 * per debounce window with at most one in flight, stale responses are
 * dropped by sequence number, and the last good preview survives any
 * failure (errors surface as a banner, never as a blank viewport).
 */

import { ApiClient, ApiError } from "./api.js";
import { EncodingSettings } from "./editor.js";
import { SceneDoc } from "./scene.js";

export interface PreviewState {
  image: ArrayBuffer | null; // last good preview
  banner: string | null; // non-blocking error message
  pending: boolean;
  requestCount: number; // total requests actually sent
}

export const DEBOUNCE_MS = 150;

interface Timers {
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
  now(): number;
}

const realTimers: Timers = {
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
  now: () => Date.now(),
};

export class LivePreview {
  readonly state: PreviewState = {
    image: null,
    banner: null,
    pending: false,
    requestCount: 0,
  };

  private seq = 0;
  private latestDone = 0;
  private lastSentAt = -Infinity;
  private timerHandle: unknown = null;
  private queued: { scene: SceneDoc; encoding: EncodingSettings } | null = null;
  private inFlight = false;

  constructor(
    private client: ApiClient,
    private onChange: (state: PreviewState) => void = () => {},
    private debounceMs: number = DEBOUNCE_MS,
    private timers: Timers = realTimers,
  ) {}

  /** Request a preview for the given scene; bursts coalesce. */
  update(scene: SceneDoc, encoding: EncodingSettings): void {
    this.queued = { scene, encoding };
    this.state.pending = true;
    this.schedule();
  }

  private schedule(): void {
    if (this.timerHandle !== null || this.inFlight) return;
    const wait = Math.max(0, this.lastSentAt + this.debounceMs - this.timers.now());
    this.timerHandle = this.timers.setTimeout(() => {
      this.timerHandle = null;
      void this.fire();
    }, wait);
  }

  private async fire(): Promise<void> {
    if (!this.queued) return;
    const { scene, encoding } = this.queued;
    this.queued = null;
    this.inFlight = true;
    this.lastSentAt = this.timers.now();
    const seq = ++this.seq;
    this.state.requestCount += 1;
    try {
      const image = await this.client.renderPreview(scene, encoding);
      if (seq > this.latestDone) {
        this.latestDone = seq;
        this.state.image = image;
        this.state.banner = null;
      }
    } catch (err) {
      if (seq > this.latestDone) {
        this.latestDone = seq;
        // keep the last good image; only the banner changes
        if (err instanceof ApiError) {
          this.state.banner = err.path ? `${err.message} (${err.path})` : err.message;
        } else {
          this.state.banner = String(err);
        }
      }
    } finally {
      this.inFlight = false;
      this.state.pending = this.queued !== null;
      if (this.queued) this.schedule();
      this.onChange({ ...this.state });
    }
  }
}
