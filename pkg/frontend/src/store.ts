// Scene state as a pure fold over (SnapshotSync, envelope prefix).
// The renderer reads this store and nothing else, so replaying a recorded
// envelope stream reproduces the exact same scene.

import type {
  BindingInfo,
  ChartSnapshot,
  Envelope,
  SlideInfo,
  Snapshot,
  SuggestionInfo,
  Surfaced,
} from "./protocol.js";

export interface ToastInfo {
  suggestion_id: string;
  slide_id: string;
  metric: string;
  message: string;
}

export interface BindingEdge extends BindingInfo {
  badge_pulse: number; // bumps on every rebind so the UI can animate
}

export class SceneStore {
  sessionId = "";
  nowMs = 0;
  lastSeq = 0;
  needsResync = false;

  charts = new Map<string, ChartSnapshot>();
  slides: SlideInfo[] = [];
  edges = new Map<string, BindingEdge>();
  suggestions = new Map<string, SuggestionInfo>();
  surfaced: Surfaced = {};
  toasts: ToastInfo[] = [];
  transcript: string[] = []; // rolling instructor voice inputs
  errors: { code: string; message: string; req_id?: string }[] = [];

  reset(snapshot: Snapshot): void {
    this.sessionId = snapshot.session_id;
    this.nowMs = snapshot.now_ms;
    this.lastSeq = snapshot.seq;
    this.needsResync = false;
    this.charts = new Map(Object.entries(snapshot.charts));
    this.slides = snapshot.deck.slides.map(cloneSlide);
    this.edges = new Map(
      Object.entries(snapshot.bindings).map(([id, b]) => [id, { ...b, badge_pulse: 0 }]),
    );
    this.suggestions = new Map(
      Object.entries(snapshot.suggestions).map(([id, s]) => [id, { ...s }]),
    );
    this.surfaced = snapshot.surfaced ?? {};
    this.toasts = [];
    this.transcript = [];
    this.errors = [];
  }

  apply(env: Envelope): void {
    if (env.kind === "Error") {
      this.errors.push(env.payload);
      return; // errors carry seq 0; not part of the state stream
    }
    if (env.kind === "SnapshotSync") {
      this.reset(env.payload as Snapshot);
      return;
    }
    if (env.seq !== this.lastSeq + 1) {
      this.needsResync = true;
      return;
    }
    this.lastSeq = env.seq;
    this.nowMs = Math.max(this.nowMs, env.t_ms);
    switch (env.kind) {
      case "ChartUpdate":
        this.applyChart(env.payload.snapshot as ChartSnapshot);
        break;
      case "BindingEvent":
        this.applyBinding(env.payload);
        break;
      case "DeckDelta":
        for (const op of env.payload.ops as any[]) this.applyDeckOp(op);
        this.renumber();
        break;
      case "SuggestionAvailable":
        for (const s of env.payload.suggestions as SuggestionInfo[]) {
          this.suggestions.set(s.suggestion_id, { ...s });
        }
        this.surfaced = env.payload.surfaced ?? this.surfaced;
        break;
      case "SuggestionResolved": {
        const p = env.payload;
        const existing = this.suggestions.get(p.suggestion_id);
        if (p.suggestion) {
          this.suggestions.set(p.suggestion_id, { ...p.suggestion });
        } else if (existing) {
          existing.state = p.state;
        }
        this.surfaced = p.surfaced ?? this.surfaced;
        break;
      }
      case "Toast":
        this.toasts.push(env.payload as ToastInfo);
        break;
      case "CommandResult":
        if (env.payload.voice_text) {
          this.transcript.push(env.payload.voice_text);
          if (this.transcript.length > 10) this.transcript.shift();
        }
        break;
      default:
        break; // unknown envelopes are ignorable by design
    }
  }

  // --- per-kind folds ------------------------------------------------------

  private applyChart(snapshot: ChartSnapshot): void {
    this.charts.set(`${snapshot.discussion_point}/${snapshot.dimension}`, snapshot);
  }

  private applyBinding(payload: any): void {
    const existing = this.edges.get(payload.binding_id);
    if (payload.kind === "created" || payload.kind === "toggled") {
      const info = payload.binding as BindingInfo;
      this.edges.set(payload.binding_id, {
        ...info,
        topic_label: payload.topic_label,
        badge_pulse: existing?.badge_pulse ?? 0,
      });
      return;
    }
    if (!existing) return;
    if (payload.kind === "rebound") {
      existing.last_resolved = [payload.new_record_id, existing.last_resolved[1]];
      existing.topic_label = payload.topic_label;
      existing.badge_pulse += 1;
    }
  }

  private applyDeckOp(op: any): void {
    switch (op.op) {
      case "create_slide":
        this.slides.push(cloneSlide(op.slide));
        break;
      case "remove_slide":
        this.slides = this.slides.filter((s) => s.slide_id !== op.slide.slide_id);
        break;
      case "set_layout": {
        const slide = this.slide(op.slide_id);
        if (!slide) return;
        slide.layout = op.new_layout;
        op.new_columns.forEach((col: number, i: number) => {
          if (slide.regions[i]) slide.regions[i].column = col;
        });
        break;
      }
      case "set_block": {
        const region = this.region(op.region_id);
        if (region) region.block = op.new_block ? { ...op.new_block } : null;
        break;
      }
      case "reorder": {
        const byId = new Map(this.slides.map((s) => [s.slide_id, s]));
        this.slides = (op.new_order as string[]).map((id) => byId.get(id)!).filter(Boolean);
        break;
      }
      case "add_region": {
        const slide = this.slide(op.slide_id);
        if (slide) slide.regions.push({ ...op.region, block: op.region.block ?? null });
        break;
      }
      case "remove_region": {
        const slide = this.slide(op.slide_id);
        if (slide) {
          slide.regions = slide.regions.filter((r) => r.region_id !== op.region.region_id);
        }
        break;
      }
    }
  }

  private renumber(): void {
    this.slides.forEach((s, i) => (s.position_in_deck = i));
  }

  // --- queries the renderer uses --------------------------------------------

  slide(slideId: string): SlideInfo | undefined {
    return this.slides.find((s) => s.slide_id === slideId);
  }

  region(regionId: string) {
    for (const slide of this.slides) {
      const region = slide.regions.find((r) => r.region_id === regionId);
      if (region) return region;
    }
    return undefined;
  }

  slideOfRegion(regionId: string): SlideInfo | undefined {
    return this.slides.find((s) => s.regions.some((r) => r.region_id === regionId));
  }

  edgeHoverLabel(bindingId: string): string {
    return this.edges.get(bindingId)?.topic_label ?? "";
  }

  visibleSuggestion(slideId: string): SuggestionInfo | undefined {
    const entry = this.surfaced[slideId];
    if (!entry) return undefined;
    const suggestion = this.suggestions.get(entry.visible);
    return suggestion && (suggestion.state === "pending" || suggestion.state === "refreshed")
      ? suggestion
      : undefined;
  }

  hiddenSuggestions(slideId: string): SuggestionInfo[] {
    const entry = this.surfaced[slideId];
    if (!entry) return [];
    return entry.hidden
      .map((id) => this.suggestions.get(id))
      .filter((s): s is SuggestionInfo => !!s);
  }

  /** Canonical JSON of everything the renderer draws; test hook for
   *  "same envelope prefix => same scene". */
  digest(): string {
    return JSON.stringify({
      charts: [...this.charts.entries()].sort((a, b) => a[0].localeCompare(b[0])),
      slides: this.slides,
      edges: [...this.edges.entries()].sort((a, b) => a[0].localeCompare(b[0])),
      suggestions: [...this.suggestions.entries()].sort((a, b) => a[0].localeCompare(b[0])),
      surfaced: this.surfaced,
      toasts: this.toasts,
      transcript: this.transcript,
    });
  }
}

function cloneSlide(slide: SlideInfo): SlideInfo {
  return {
    ...slide,
    regions: slide.regions.map((r) => ({ ...r, block: r.block ? { ...r.block } : null })),
  };
}
