// Instructor studio: canvas with analytics and slide nodes, binding edges,
// sketch capture, command bar, review panel, slide panel, toasts.
//
// Rendering is a pure function of the SceneStore; every user action goes to
// the engine and the UI only changes when envelopes come back.

import type { SuggestionInfo } from "./protocol.js";
import { SceneStore } from "./store.js";
import { StrokeRecorder, sceneFromRegistry, type SceneElementGeom } from "./sketch.js";
import { StudioSocket } from "./ws.js";

export interface StudioOptions {
  /** Synchronous rendering (tests); default defers to animation frames. */
  immediateRender?: boolean;
  now?: () => number;
}

export class Studio {
  store = new SceneStore();
  recorder = new StrokeRecorder();
  sketchMode = false;
  reviewSuggestionId: string | null = null;
  private registry = new Map<
    string,
    { kind: SceneElementGeom["kind"]; el: HTMLElement; chart_point?: string; chart_dimension?: string }
  >();
  private renderQueued = false;
  private dragSlideId: string | null = null;
  private lastViewport = "";

  readonly panels: Record<string, HTMLElement>;

  constructor(
    readonly root: HTMLElement,
    readonly socket: StudioSocket,
    readonly options: StudioOptions = {},
  ) {
    root.innerHTML = `
      <header class="topbar">
        <section id="transcription-panel" aria-label="live speech"></section>
        <section id="command-bar">
          <input id="voice-input" placeholder="Speak or type a command" />
          <button id="send-command">Send</button>
          <button id="sketch-toggle" aria-pressed="false">Sketch</button>
        </section>
        <button id="undo">Undo</button>
        <button id="redo">Redo</button>
        <span id="offline-indicator" hidden>offline, queued</span>
      </header>
      <main>
        <div id="canvas">
          <svg id="edge-layer"></svg>
          <div id="chart-nodes"></div>
          <div id="slide-nodes"></div>
        </div>
        <aside id="slide-panel" aria-label="slides"></aside>
      </main>
      <footer id="playback-controls">
        <button id="playback-pause">Pause</button>
        <button id="playback-resume">Resume</button>
        <span id="session-clock"></span>
      </footer>
      <div id="review-panel" hidden></div>
      <div id="toast-tray"></div>
    `;
    this.panels = {
      transcription: this.must("#transcription-panel"),
      commandBar: this.must("#command-bar"),
      canvas: this.must("#canvas"),
      slidePanel: this.must("#slide-panel"),
      playback: this.must("#playback-controls"),
      review: this.must("#review-panel"),
      toasts: this.must("#toast-tray"),
    };
    this.wireControls();
    socket.onEnvelope = (env) => {
      this.store.apply(env);
      if (this.store.needsResync) {
        socket.resync();
        this.store.needsResync = false;
        return;
      }
      this.scheduleRender();
    };
    socket.onStatus = (connected) => {
      this.must("#offline-indicator").hidden = connected;
    };
  }

  private must(selector: string): HTMLElement {
    const el = this.root.querySelector(selector);
    if (!el) throw new Error(`missing ${selector}`);
    return el as HTMLElement;
  }

  private wireControls(): void {
    this.must("#send-command").addEventListener("click", () => this.submitCommand());
    const input = this.must("#voice-input") as HTMLInputElement;
    input.addEventListener("keydown", (ev) => {
      if ((ev as KeyboardEvent).key === "Enter") this.submitCommand();
    });
    this.must("#undo").addEventListener("click", () =>
      this.socket.send({ kind: "History", payload: { direction: "undo" } }),
    );
    this.must("#redo").addEventListener("click", () =>
      this.socket.send({ kind: "History", payload: { direction: "redo" } }),
    );
    this.must("#playback-pause").addEventListener("click", () =>
      this.socket.send({ kind: "Playback", payload: { action: "pause" } }),
    );
    this.must("#playback-resume").addEventListener("click", () =>
      this.socket.send({ kind: "Playback", payload: { action: "resume" } }),
    );
    const toggle = this.must("#sketch-toggle");
    toggle.addEventListener("click", () => {
      this.sketchMode = !this.sketchMode;
      toggle.setAttribute("aria-pressed", String(this.sketchMode));
    });
    const canvas = this.panels.canvas;
    canvas.addEventListener("pointerdown", (ev) => this.onPointer("down", ev as PointerEvent));
    canvas.addEventListener("pointermove", (ev) => this.onPointer("move", ev as PointerEvent));
    canvas.addEventListener("pointerup", (ev) => this.onPointer("up", ev as PointerEvent));
  }

  private now(): number {
    return this.options.now ? this.options.now() : Date.now();
  }

  private onPointer(phase: "down" | "move" | "up", ev: PointerEvent): void {
    if (!this.sketchMode) return;
    const t = this.now();
    if (phase === "down") this.recorder.pointerDown(ev.clientX, ev.clientY, t);
    if (phase === "move") this.recorder.pointerMove(ev.clientX, ev.clientY, t);
    if (phase === "up") this.recorder.pointerUp(ev.clientX, ev.clientY, t);
  }

  /** Strokes (and the current scene geometry) plus optional voice text go
   *  out as one Command; the engine fuses modalities. */
  submitCommand(voiceOverride?: string): void {
    const input = this.must("#voice-input") as HTMLInputElement;
    const voice = voiceOverride ?? input.value.trim();
    const strokes = this.recorder.take();
    if (!voice && strokes.length === 0) return; // empty submit: no-op
    const payload: any = { req_id: `ui-${this.now()}`, point: this.focusPoint() };
    if (voice) payload.voice = voice;
    if (strokes.length) {
      payload.strokes = strokes;
      payload.scene = sceneFromRegistry(this.registry);
    }
    this.socket.send({ kind: "Command", payload });
    input.value = "";
  }

  reviewAction(action: "apply" | "ignore" | "refresh" | "modify", editedText = ""): void {
    if (!this.reviewSuggestionId) return;
    this.socket.send({
      kind: "ResolveSuggestion",
      payload: {
        suggestion_id: this.reviewSuggestionId,
        action,
        edited_text: editedText || undefined,
      },
    });
    if (action !== "refresh") this.closeReview();
  }

  openReview(suggestion: SuggestionInfo): void {
    this.reviewSuggestionId = suggestion.suggestion_id;
    this.renderReview();
  }

  closeReview(): void {
    this.reviewSuggestionId = null;
    this.panels.review.hidden = true;
  }

  focusPoint(): string {
    const points = [...this.store.charts.values()].map((c) => c.discussion_point);
    return points.length ? points.sort()[points.length - 1] : "Q1";
  }

  reportViewport(visible?: string[]): void {
    const ids = visible ?? this.store.slides.map((s) => s.slide_id);
    const key = JSON.stringify(ids);
    if (key === this.lastViewport) return;
    this.lastViewport = key;
    this.socket.send({ kind: "Viewport", payload: { visible: ids } });
  }

  // --- rendering --------------------------------------------------------------

  scheduleRender(): void {
    if (this.options.immediateRender) {
      this.render();
      return;
    }
    if (this.renderQueued) return;
    this.renderQueued = true;
    requestAnimationFrame(() => {
      this.renderQueued = false;
      this.render();
    });
  }

  render(): void {
    this.registry.clear();
    this.renderTranscript();
    this.renderCharts();
    this.renderSlides();
    this.renderEdges();
    this.renderSlidePanel();
    this.renderToasts();
    this.renderReview();
    this.must("#session-clock").textContent = `${Math.floor(this.store.nowMs / 1000)}s`;
    this.reportViewport();
  }

  private renderTranscript(): void {
    const panel = this.panels.transcription;
    panel.innerHTML = "";
    for (const line of this.store.transcript.slice(-10)) {
      const div = document.createElement("div");
      div.className = "transcript-line";
      div.textContent = line;
      panel.appendChild(div);
    }
  }

  private renderCharts(): void {
    const host = this.must("#chart-nodes");
    host.innerHTML = "";
    const keys = [...this.store.charts.keys()].sort();
    for (const key of keys) {
      const chart = this.store.charts.get(key)!;
      const node = document.createElement("div");
      node.className = "chart-node";
      node.dataset.chartKey = key;
      if (!chart.visible_by_default) node.classList.add("hidden-by-default");
      const title = document.createElement("h3");
      title.textContent = `${chart.discussion_point} · ${chart.dimension} (v${chart.version})`;
      node.appendChild(title);
      const maxFreq = Math.max(1, ...chart.entries.map(([, , f]) => f));
      for (const [label, recordId, freq] of chart.entries) {
        const bar = document.createElement("div");
        bar.className = "bar";
        bar.dataset.recordId = recordId;
        bar.style.width = `${(freq / maxFreq) * 100}%`;
        bar.textContent = `${label} (${freq})`;
        node.appendChild(bar);
        this.registry.set(recordId, {
          kind: "chart_element",
          el: bar,
          chart_point: chart.discussion_point,
          chart_dimension: chart.dimension,
        });
      }
      host.appendChild(node);
    }
  }

  private renderSlides(): void {
    const host = this.must("#slide-nodes");
    host.innerHTML = "";
    for (const slide of this.store.slides) {
      const node = document.createElement("article");
      node.className = `slide-node layout-${slide.layout}`;
      node.dataset.slideId = slide.slide_id;
      this.registry.set(slide.slide_id, { kind: "slide", el: node });

      const suggestion = this.store.visibleSuggestion(slide.slide_id);
      if (suggestion) {
        const btn = document.createElement("button");
        btn.className = "suggested-change";
        btn.textContent = `Suggested Change [${suggestion.metric}]`;
        btn.addEventListener("click", () => this.openReview(suggestion));
        node.appendChild(btn);
        const hidden = this.store.hiddenSuggestions(slide.slide_id);
        if (hidden.length) {
          const more = document.createElement("button");
          more.className = "more-suggestions";
          more.textContent = `+${hidden.length}`;
          more.addEventListener("click", () => {
            const list = document.createElement("ul");
            list.className = "hidden-suggestions";
            for (const s of hidden) {
              const li = document.createElement("li");
              li.textContent = `[${s.metric}] ${s.proposed_block.text}`;
              li.addEventListener("click", () => this.openReview(s));
              list.appendChild(li);
            }
            node.appendChild(list);
          });
          node.appendChild(more);
        }
      }

      const head = document.createElement("h4");
      head.textContent = `${slide.discussion_point} · ${slide.layout}`;
      node.appendChild(head);
      for (const region of slide.regions) {
        const div = document.createElement("div");
        div.className = `region column-${region.column}`;
        div.dataset.regionId = region.region_id;
        div.textContent = region.block ? region.block.text : "(empty)";
        if (region.binding_id) div.dataset.bindingId = region.binding_id;
        node.appendChild(div);
        this.registry.set(region.region_id, { kind: "block", el: div });
      }
      host.appendChild(node);
    }
  }

  private renderEdges(): void {
    const svg = this.must("#edge-layer");
    svg.innerHTML = "";
    for (const [id, edge] of this.store.edges) {
      const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
      line.setAttribute("data-binding-id", id);
      line.setAttribute("class", `edge kind-${edge.kind.type} pulse-${edge.badge_pulse}`);
      const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
      title.textContent = this.store.edgeHoverLabel(id); // hover shows resolved topic
      line.appendChild(title);
      const toggle = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      toggle.setAttribute("class", "edge-toggle");
      toggle.addEventListener("click", () =>
        this.socket.send({ kind: "ToggleBinding", payload: { binding_id: id } }),
      );
      svg.appendChild(line);
      svg.appendChild(toggle);
    }
  }

  private renderSlidePanel(): void {
    const panel = this.panels.slidePanel;
    panel.innerHTML = "";
    for (const slide of this.store.slides) {
      const item = document.createElement("div");
      item.className = "slide-panel-item";
      item.draggable = true;
      item.dataset.slideId = slide.slide_id;
      item.textContent = `${slide.position_in_deck + 1}. ${slide.discussion_point} (${slide.layout})`;
      item.addEventListener("dragstart", () => (this.dragSlideId = slide.slide_id));
      item.addEventListener("dragover", (ev) => ev.preventDefault());
      item.addEventListener("drop", () => this.dropOn(slide.slide_id));
      panel.appendChild(item);
    }
  }

  /** Drag-and-drop reorder: moving a slide onto another's position. */
  dropOn(targetSlideId: string): void {
    if (!this.dragSlideId || this.dragSlideId === targetSlideId) return;
    const order = this.store.slides.map((s) => s.slide_id);
    const from = order.indexOf(this.dragSlideId);
    const to = order.indexOf(targetSlideId);
    if (from < 0 || to < 0) return;
    order.splice(to, 0, ...order.splice(from, 1));
    this.socket.send({
      kind: "Edit",
      payload: { edit: "reorder_slides", order, req_id: `dnd-${this.now()}` },
    });
    this.dragSlideId = null;
  }

  private renderToasts(): void {
    const tray = this.panels.toasts;
    tray.innerHTML = "";
    for (const toast of this.store.toasts.slice(-3)) {
      const div = document.createElement("div");
      div.className = "toast";
      div.dataset.suggestionId = toast.suggestion_id;
      div.textContent = toast.message;
      tray.appendChild(div);
    }
  }

  private renderReview(): void {
    const panel = this.panels.review;
    if (!this.reviewSuggestionId) {
      panel.hidden = true;
      return;
    }
    const suggestion = this.store.suggestions.get(this.reviewSuggestionId);
    if (!suggestion) {
      this.closeReview();
      return;
    }
    panel.hidden = false;
    panel.innerHTML = `
      <h3>Suggested change · ${suggestion.metric}</h3>
      <div id="review-diff"></div>
      <textarea id="review-edit">${suggestion.proposed_block.text}</textarea>
      <button id="review-apply">Apply</button>
      <button id="review-ignore">Ignore</button>
      <button id="review-refresh">Refresh</button>
      <button id="review-modify">Modify</button>
    `;
    const diffHost = panel.querySelector("#review-diff") as HTMLElement;
    for (const [op, oldWords, newWords] of suggestion.diff) {
      if (op === "equal") {
        diffHost.appendChild(span("diff-equal", newWords));
      } else {
        if (oldWords) diffHost.appendChild(span("diff-del", oldWords));
        if (newWords) diffHost.appendChild(span("diff-ins", newWords));
      }
    }
    panel.querySelector("#review-apply")!.addEventListener("click", () => this.reviewAction("apply"));
    panel.querySelector("#review-ignore")!.addEventListener("click", () => this.reviewAction("ignore"));
    panel.querySelector("#review-refresh")!.addEventListener("click", () => this.reviewAction("refresh"));
    panel.querySelector("#review-modify")!.addEventListener("click", () => {
      const edited = (panel.querySelector("#review-edit") as HTMLTextAreaElement).value;
      this.reviewAction("modify", edited);
    });
  }
}

function span(cls: string, text: string): HTMLSpanElement {
  const el = document.createElement("span");
  el.className = cls;
  el.textContent = text + " ";
  return el;
}

export function buildStudio(
  root: HTMLElement,
  socket: StudioSocket,
  options: StudioOptions = {},
): Studio {
  return new Studio(root, socket, options);
}
