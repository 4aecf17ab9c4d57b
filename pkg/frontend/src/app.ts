/**
 * DOM bootstrap for the studio: canvas viewport with drag gizmos, object
 * and pose panels, live server-side preview, scene persistence, and
 * sampling runs. All heavy lifting lives in the DOM-free modules.
 */

import { ApiClient } from "./api.js";
import {
  applyGesture,
  Axis,
  EditorState,
  GizmoMode,
  addObject,
  initialState,
  removeSelected,
  selectObject,
  setMode,
  undo,
} from "./editor.js";
import { toEuler } from "./math.js";
import { LivePreview } from "./preview.js";
import { ConflictChoice, openScene, runSample, saveScene } from "./panel.js";
import { emptyScene, newBox, validateScene } from "./scene.js";
import { gizmoAxes, outlineScene, pickObject } from "./viewport.js";

const AXIS_COLORS = ["#e74c3c", "#2ecc71", "#4da6ff"];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class StudioApp {
  private state: EditorState;
  private client: ApiClient;
  private preview: LivePreview;
  private canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D;
  private previewBitmap: ImageBitmap | null = null;
  private drag: { axis: Axis; lastX: number; lastY: number } | null = null;

  constructor(baseUrl: string) {
    this.client = new ApiClient(baseUrl);
    this.state = initialState(emptyScene(384, 384));
    this.canvas = el<HTMLCanvasElement>("viewport");
    this.ctx = this.canvas.getContext("2d")!;
    this.preview = new LivePreview(this.client, (previewState) => {
      el<HTMLDivElement>("banner").textContent = previewState.banner ?? "";
      el<HTMLDivElement>("banner").style.display = previewState.banner ? "block" : "none";
      if (previewState.image) void this.showPreview(previewState.image);
    });
    this.bind();
    this.refresh();
  }

  private async showPreview(buffer: ArrayBuffer): Promise<void> {
    const blob = new Blob([buffer], { type: "image/png" });
    this.previewBitmap = await createImageBitmap(blob);
    this.draw();
  }

  private setState(next: EditorState): void {
    const sceneChanged = next.scene !== this.state.scene
      || next.encoding !== this.state.encoding;
    this.state = next;
    if (sceneChanged) this.preview.update(next.scene, next.encoding);
    this.refresh();
  }

  private refresh(): void {
    this.renderObjectList();
    this.renderPoseFields();
    el<HTMLSpanElement>("dirty").textContent = this.state.dirty ? "unsaved changes" : "";
    (["translate", "scale", "rotate"] as GizmoMode[]).forEach((mode) => {
      el<HTMLButtonElement>(`mode-${mode}`).classList.toggle("active", this.state.mode === mode);
    });
    this.draw();
  }

  private draw(): void {
    const { width, height } = this.state.scene.camera;
    if (this.canvas.width !== width) this.canvas.width = width;
    if (this.canvas.height !== height) this.canvas.height = height;
    this.ctx.fillStyle = "#000";
    this.ctx.fillRect(0, 0, width, height);
    if (this.previewBitmap) this.ctx.drawImage(this.previewBitmap, 0, 0, width, height);

    outlineScene(this.state.scene).forEach((outline) => {
      const selected = outline.index === this.state.selected;
      this.ctx.strokeStyle = selected ? "#ffd34d" : "#8fb6ff";
      this.ctx.lineWidth = selected ? 2 : 1;
      this.ctx.beginPath();
      for (const [[ax, ay], [bx, by]] of outline.segments) {
        this.ctx.moveTo(ax, ay);
        this.ctx.lineTo(bx, by);
      }
      this.ctx.stroke();
      if (outline.anchor) {
        this.ctx.fillStyle = selected ? "#ffd34d" : "#8fb6ff";
        this.ctx.font = "12px monospace";
        this.ctx.fillText(`${outline.index}:${outline.label}`,
                          outline.anchor[0] + 4, outline.anchor[1] - 4);
      }
    });

    const sel = this.selectedObject();
    if (sel) {
      gizmoAxes(this.state.scene.camera, sel).forEach(({ axis, from, to }) => {
        this.ctx.strokeStyle = AXIS_COLORS[axis];
        this.ctx.lineWidth = 2;
        this.ctx.beginPath();
        this.ctx.moveTo(from[0], from[1]);
        this.ctx.lineTo(to[0], to[1]);
        this.ctx.stroke();
      });
    }
  }

  private selectedObject() {
    return this.state.selected === null
      ? null
      : this.state.scene.objects[this.state.selected] ?? null;
  }

  private renderObjectList(): void {
    const list = el<HTMLUListElement>("objects");
    list.innerHTML = "";
    this.state.scene.objects.forEach((obj, i) => {
      const item = document.createElement("li");
      item.textContent = `${i}: ${obj.label}`;
      item.classList.toggle("selected", i === this.state.selected);
      item.onclick = () => this.setState(selectObject(this.state, i));
      list.appendChild(item);
    });
  }

  private renderPoseFields(): void {
    const obj = this.selectedObject();
    const pose = el<HTMLDivElement>("pose");
    pose.style.display = obj ? "block" : "none";
    if (!obj) return;
    (el<HTMLInputElement>("label")).value = obj.label;
    ["x", "y", "z"].forEach((name, axis) => {
      el<HTMLInputElement>(`center-${name}`).value = obj.center[axis].toFixed(3);
      el<HTMLInputElement>(`size-${name}`).value = obj.size[axis].toFixed(3);
    });
    const [az, elev, roll] = toEuler(obj.rotation.quat);
    el<HTMLInputElement>("azimuth").value = ((az * 180) / Math.PI).toFixed(1);
    el<HTMLInputElement>("elevation").value = ((elev * 180) / Math.PI).toFixed(1);
    el<HTMLInputElement>("roll").value = ((roll * 180) / Math.PI).toFixed(1);
  }

  private bind(): void {
    el<HTMLButtonElement>("add-box").onclick = () =>
      this.setState(addObject(this.state, newBox()));
    el<HTMLButtonElement>("remove-box").onclick = () =>
      this.setState(removeSelected(this.state));
    el<HTMLButtonElement>("undo").onclick = () => this.setState(undo(this.state));
    (["translate", "scale", "rotate"] as GizmoMode[]).forEach((mode) => {
      el<HTMLButtonElement>(`mode-${mode}`).onclick = () =>
        this.setState(setMode(this.state, mode));
    });

    el<HTMLInputElement>("label").onchange = (e) =>
      this.setState(applyGesture(this.state, {
        kind: "set-label", label: (e.target as HTMLInputElement).value,
      }));
    const poseField = (id: string, apply: (value: number) => void) => {
      el<HTMLInputElement>(id).onchange = (e) => {
        const value = Number((e.target as HTMLInputElement).value);
        if (Number.isFinite(value)) apply(value);
      };
    };
    ["x", "y", "z"].forEach((name, axis) => {
      poseField(`center-${name}`, (value) => {
        const obj = this.selectedObject();
        if (!obj) return;
        const center = [...obj.center] as [number, number, number];
        center[axis] = value;
        this.setState(applyGesture(this.state, { kind: "set-center", center }));
      });
      poseField(`size-${name}`, (value) => {
        const obj = this.selectedObject();
        if (!obj) return;
        const size = [...obj.size] as [number, number, number];
        size[axis] = value;
        this.setState(applyGesture(this.state, { kind: "set-size", size }));
      });
    });
    const eulerField = () => {
      const deg = (id: string) => (Number(el<HTMLInputElement>(id).value) * Math.PI) / 180;
      this.setState(applyGesture(this.state, {
        kind: "set-euler",
        azimuth: deg("azimuth"),
        elevation: deg("elevation"),
        roll: deg("roll"),
      }));
    };
    ["azimuth", "elevation", "roll"].forEach((id) => {
      el<HTMLInputElement>(id).onchange = eulerField;
    });

    el<HTMLSelectElement>("variant").onchange = (e) => {
      const variant = (e.target as HTMLSelectElement).value as
        "constant" | "identity" | "spherical";
      this.setState({ ...this.state, encoding: { ...this.state.encoding, variant } });
    };
    el<HTMLInputElement>("degree").onchange = (e) => {
      const degree = Number((e.target as HTMLInputElement).value);
      if (Number.isInteger(degree) && degree >= 0) {
        this.setState({ ...this.state, encoding: { ...this.state.encoding, degree } });
      }
    };
    el<HTMLInputElement>("include-radius").onchange = (e) => {
      const includeRadius = (e.target as HTMLInputElement).checked;
      this.setState({ ...this.state, encoding: { ...this.state.encoding, includeRadius } });
    };

    this.canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    window.addEventListener("pointerup", () => (this.drag = null));

    el<HTMLButtonElement>("save").onclick = () => void this.save();
    el<HTMLButtonElement>("open").onclick = () => void this.open();
    el<HTMLButtonElement>("export").onclick = () => this.exportScene();
    el<HTMLButtonElement>("run").onclick = () => void this.run();
  }

  private canvasPoint(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [
      ((e.clientX - rect.left) / rect.width) * this.canvas.width,
      ((e.clientY - rect.top) / rect.height) * this.canvas.height,
    ];
  }

  private pointerDown(e: PointerEvent): void {
    const [x, y] = this.canvasPoint(e);
    const obj = this.selectedObject();
    if (obj) {
      // grab the closest gizmo axis handle first
      for (const { axis, to } of gizmoAxes(this.state.scene.camera, obj)) {
        if (Math.hypot(to[0] - x, to[1] - y) < 10) {
          this.drag = { axis, lastX: x, lastY: y };
          return;
        }
      }
    }
    const picked = pickObject(this.state.scene, x, y);
    if (picked !== null) this.setState(selectObject(this.state, picked));
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.drag) return;
    const [x, y] = this.canvasPoint(e);
    const dx = x - this.drag.lastX;
    const dy = y - this.drag.lastY;
    this.drag.lastX = x;
    this.drag.lastY = y;
    const obj = this.selectedObject();
    if (!obj) return;
    const pixels = Math.abs(dx) > Math.abs(dy) ? dx : -dy;
    const depthScale = obj.center[2] / this.state.scene.camera.fx;
    switch (this.state.mode) {
      case "translate":
        this.setState(applyGesture(this.state, {
          kind: "translate", axis: this.drag.axis, amount: pixels * depthScale,
        }));
        break;
      case "scale":
        this.setState(applyGesture(this.state, {
          kind: "scale", axis: this.drag.axis, amount: pixels * depthScale,
        }));
        break;
      case "rotate":
        this.setState(applyGesture(this.state, {
          kind: "rotate", axis: this.drag.axis, angle: pixels * 0.01,
        }));
        break;
    }
  }

  private async save(): Promise<void> {
    try {
      validateScene(this.state.scene);
      const result = await saveScene(this.state, this.client, (): ConflictChoice => {
        const reload = window.confirm(
          "This scene changed on the server. OK = reload server copy, Cancel = overwrite.",
        );
        return reload ? "reload" : "overwrite";
      });
      this.setState(result.state);
      el<HTMLSpanElement>("scene-id").textContent = result.state.sceneId ?? "";
    } catch (err) {
      this.showBanner(String(err));
    }
  }

  private async open(): Promise<void> {
    const id = window.prompt("Scene id to open:");
    if (!id) return;
    try {
      this.setState(await openScene(this.state, this.client, id));
      el<HTMLSpanElement>("scene-id").textContent = id;
      this.preview.update(this.state.scene, this.state.encoding);
    } catch (err) {
      this.showBanner(String(err));
    }
  }

  private exportScene(): void {
    const blob = new Blob([JSON.stringify(this.state.scene, null, 2)],
                          { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "scene.json";
    link.click();
    URL.revokeObjectURL(link.href);
  }

  private async run(): Promise<void> {
    const seed = Number(el<HTMLInputElement>("run-seed").value) || 0;
    const field = el<HTMLSelectElement>("run-field").value;
    const status = el<HTMLDivElement>("run-status");
    try {
      const result = await runSample(this.state.scene, this.state, this.client, {
        field, seed, steps: 20, injectionSteps: 15,
      }, (panel) => {
        status.textContent = panel.status ?? "";
      });
      if (result.error) {
        status.textContent = `failed: ${result.error}`;
      } else if (result.preview) {
        const img = el<HTMLImageElement>("run-preview");
        img.src = URL.createObjectURL(new Blob([result.preview], { type: "image/png" }));
        img.style.display = "block";
      }
    } catch (err) {
      this.showBanner(String(err));
    }
  }

  private showBanner(message: string): void {
    const banner = el<HTMLDivElement>("banner");
    banner.textContent = message;
    banner.style.display = "block";
  }
}

const base = new URLSearchParams(window.location.search).get("api")
  ?? "http://127.0.0.1:8787";
new StudioApp(base);
