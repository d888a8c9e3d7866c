// Wire protocol types (version 1). Mirrors docs/protocol.md in the engine repo.

export interface Envelope {
  seq: number;
  kind: string;
  t_ms: number;
  payload: any;
}

export interface ChartSnapshot {
  discussion_point: string;
  dimension: string;
  version: number;
  entries: [string, string, number][]; // [topic_label, record_id, frequency]
  generated_at_ms: number;
  visible_by_default: boolean;
}

export interface BindingInfo {
  binding_id: string;
  region_id: string;
  chart_key: [string, string];
  kind:
    | { type: "content"; record_id: string }
    | { type: "frequency"; rank_spec: { origin: string; index: number } };
  last_resolved: [string | null, number];
  topic_label?: string | null;
}

export interface BlockInfo {
  block_id: string;
  source_record_ids: string[];
  content_type: string;
  text: string;
  metric_tag: string | null;
  provenance: string;
}

export interface RegionInfo {
  region_id: string;
  column: number;
  block: BlockInfo | null;
  binding_id: string | null;
}

export interface SlideInfo {
  slide_id: string;
  discussion_point: string;
  layout: string;
  regions: RegionInfo[];
  position_in_deck: number;
}

export interface SuggestionInfo {
  suggestion_id: string;
  discussion_point: string;
  target_slide: string;
  target_region: string | null;
  metric: string;
  proposed_block: BlockInfo;
  base_text: string;
  diff: [string, string, string][]; // [op, old_words, new_words]
  rank: number;
  deficit: number;
  state: string;
}

export interface Surfaced {
  [slideId: string]: { visible: string; hidden: string[] };
}

export interface Snapshot {
  session_id: string;
  now_ms: number;
  seq: number;
  charts: Record<string, ChartSnapshot>;
  deck: { slides: SlideInfo[] };
  bindings: Record<string, BindingInfo>;
  suggestions: Record<string, SuggestionInfo>;
  surfaced: Surfaced;
}

export type ClientMessage =
  | { kind: "Hello" }
  | { kind: "Resync" }
  | { kind: "Command"; payload: any }
  | { kind: "Edit"; payload: any }
  | { kind: "History"; payload: { direction: "undo" | "redo" } }
  | {
      kind: "ResolveSuggestion";
      payload: { suggestion_id: string; action: string; edited_text?: string };
    }
  | { kind: "ToggleBinding"; payload: { binding_id: string } }
  | { kind: "Viewport"; payload: { visible: string[] } }
  | { kind: "Playback"; payload: { action: "pause" | "resume" } };

export function encode(message: ClientMessage): string {
  return JSON.stringify(message);
}

export function decode(raw: string): Envelope {
  return JSON.parse(raw) as Envelope;
}
