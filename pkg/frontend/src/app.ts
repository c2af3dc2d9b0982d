// DOM wiring. All state changes flow through the reducer in store.ts; the
// DOM is re-rendered from the state after every event, so the page is a
// pure function of the gateway's responses.

import { ApiClient, GatewayError } from "./api.js";
import { defaultCamera, orbit, OrbitCamera, zoom } from "./camera.js";
import { EMPTY_PLACEHOLDER, scoreTable, SortOrder } from "./inspector.js";
import { canSubmit, initialState, reduce, UIEvent, UISessionState } from "./store.js";
import { renderScene } from "./viewer.js";

export class StudioApp {
  private state: UISessionState = initialState();
  private camera: OrbitCamera = defaultCamera();
  private sortOrder: SortOrder = "score-desc";
  private client: ApiClient;
  private root: HTMLElement;
  private pollHandle: number | null = null;

  constructor(baseUrl: string, root: HTMLElement) {
    this.client = new ApiClient(baseUrl);
    this.root = root;
  }

  private dispatch(event: UIEvent): void {
    this.state = reduce(this.state, event);
    this.render();
  }

  async start(): Promise<void> {
    const { session_id } = await this.client.createSession();
    this.dispatch({ kind: "session-created", sessionId: session_id });
    // Turns are request/response; a slow poll keeps the memory panel fresh
    // if the session is driven from elsewhere too.
    this.pollHandle = window.setInterval(() => void this.refreshMemory(), 5000);
  }

  stop(): void {
    if (this.pollHandle !== null) {
      window.clearInterval(this.pollHandle);
      this.pollHandle = null;
    }
  }

  private async refreshMemory(): Promise<void> {
    if (!this.state.sessionId || this.state.pending) return;
    try {
      const memory = await this.client.getMemory(this.state.sessionId);
      this.dispatch({ kind: "memory-loaded", turns: memory.turns });
    } catch {
      // Poll failures are non-fatal; the next tick retries.
    }
  }

  async submit(text: string): Promise<void> {
    if (!canSubmit(this.state) || !text.trim()) return;
    const sessionId = this.state.sessionId!;
    this.dispatch({ kind: "turn-requested" });
    try {
      const record = await this.client.submitTurn(sessionId, text);
      this.dispatch({ kind: "turn-succeeded", record });
      if (record.scene_revision >= 0) {
        const scene = await this.client.getScene(sessionId, record.scene_revision);
        this.dispatch({ kind: "scene-loaded", scene });
      }
    } catch (err) {
      const body =
        err instanceof GatewayError
          ? err.body
          : { stage: "transport", message: String(err), retriable: true };
      this.dispatch({ kind: "turn-failed", error: body });
    }
  }

  async selectRevision(revision: number): Promise<void> {
    if (!this.state.sessionId) return;
    this.dispatch({ kind: "revision-selected", revision });
    try {
      const scene = await this.client.getScene(this.state.sessionId, revision);
      this.dispatch({ kind: "scene-loaded", scene });
    } catch (err) {
      if (err instanceof GatewayError) {
        this.dispatch({ kind: "turn-failed", error: err.body });
      }
    }
  }

  orbitBy(dYaw: number, dPitch: number): void {
    this.camera = orbit(this.camera, dYaw, dPitch);
    this.render();
  }

  zoomBy(factor: number): void {
    this.camera = zoom(this.camera, factor);
    this.render();
  }

  private render(): void {
    this.renderChat();
    this.renderError();
    this.renderInspector();
    this.renderViewport();
    this.renderRevisionSelector();
    const input = this.root.querySelector<HTMLButtonElement>("#send");
    if (input) input.disabled = !canSubmit(this.state);
  }

  private renderChat(): void {
    const log = this.root.querySelector("#chat-log");
    if (!log) return;
    log.textContent = "";
    for (const turn of this.state.turns) {
      const user = document.createElement("div");
      user.className = "msg user";
      user.textContent = turn.user_text;
      log.appendChild(user);
      const reply = document.createElement("div");
      reply.className = turn.status === "ok" ? "msg agent" : "msg agent failed";
      if (turn.status === "ok") {
        const qa = turn.qa ? ` [Q: ${turn.qa.question} A: ${turn.qa.answer}]` : "";
        reply.textContent = `${turn.enhanced_text}${qa} (scene rev ${turn.scene_revision})`;
      } else {
        reply.textContent = `turn failed at stage: ${turn.stage}`;
      }
      log.appendChild(reply);
    }
  }

  private renderError(): void {
    const banner = this.root.querySelector<HTMLElement>("#error-banner");
    if (!banner) return;
    if (this.state.error) {
      banner.hidden = false;
      banner.textContent = `${this.state.error.stage}: ${this.state.error.message}`;
    } else {
      banner.hidden = true;
    }
  }

  private renderInspector(): void {
    const table = this.root.querySelector("#knowledge-table");
    if (!table) return;
    table.textContent = "";
    const latest = this.state.turns[this.state.turns.length - 1];
    const retrieved = latest ? latest.retrieved_knowledge : [];
    if (retrieved.length === 0) {
      const row = document.createElement("tr");
      const cell = document.createElement("td");
      cell.colSpan = 2;
      cell.textContent = EMPTY_PLACEHOLDER;
      row.appendChild(cell);
      table.appendChild(row);
      return;
    }
    for (const row of scoreTable(retrieved, this.sortOrder)) {
      const tr = document.createElement("tr");
      const idCell = document.createElement("td");
      idCell.textContent = row.id;
      const scoreCell = document.createElement("td");
      scoreCell.textContent = row.display;
      tr.append(idCell, scoreCell);
      table.appendChild(tr);
    }
  }

  private renderViewport(): void {
    const canvas = this.root.querySelector<HTMLCanvasElement>("#viewport");
    if (!canvas) return;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const commands = renderScene(this.state.scene, this.camera, canvas.width, canvas.height);
    ctx.strokeStyle = "#4a4a4a";
    ctx.fillStyle = "#1a1a1a";
    ctx.font = "12px sans-serif";
    for (const command of commands) {
      if (command.kind === "line") {
        ctx.beginPath();
        ctx.moveTo(command.x1, command.y1);
        ctx.lineTo(command.x2, command.y2);
        ctx.stroke();
      } else if (command.kind === "label") {
        ctx.fillText(command.text, command.x + 4, command.y - 4);
      } else {
        ctx.fillText(command.message, 12, 20);
      }
    }
  }

  private renderRevisionSelector(): void {
    const select = this.root.querySelector<HTMLSelectElement>("#revision");
    if (!select) return;
    const revisions = this.state.turns
      .filter((t) => t.scene_revision >= 0)
      .map((t) => t.scene_revision);
    select.textContent = "";
    for (const rev of revisions) {
      const option = document.createElement("option");
      option.value = String(rev);
      option.textContent = `revision ${rev}`;
      option.selected = rev === this.state.selectedRevision;
      select.appendChild(option);
    }
  }
}

export function mount(baseUrl: string, root: HTMLElement): StudioApp {
  const app = new StudioApp(baseUrl, root);
  const form = root.querySelector<HTMLFormElement>("#chat-form");
  const input = root.querySelector<HTMLInputElement>("#chat-input");
  form?.addEventListener("submit", (e) => {
    e.preventDefault();
    if (input) {
      void app.submit(input.value);
      input.value = "";
    }
  });
  root.querySelector<HTMLSelectElement>("#revision")?.addEventListener("change", (e) => {
    void app.selectRevision(Number((e.target as HTMLSelectElement).value));
  });
  const canvas = root.querySelector<HTMLCanvasElement>("#viewport");
  let dragging = false;
  canvas?.addEventListener("mousedown", () => (dragging = true));
  window.addEventListener("mouseup", () => (dragging = false));
  canvas?.addEventListener("mousemove", (e) => {
    if (dragging) app.orbitBy(e.movementX * 0.01, e.movementY * 0.01);
  });
  canvas?.addEventListener("wheel", (e) => {
    e.preventDefault();
    app.zoomBy(e.deltaY > 0 ? 1.1 : 0.9);
  });
  void app.start();
  return app;
}
