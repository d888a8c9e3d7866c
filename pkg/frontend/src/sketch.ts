// Stroke capture: raw pointer points in, Command payload out. The client
// does no interpretation; the engine owns gesture recognition.

export type Point = [number, number, number]; // x, y, t_ms

export interface SceneElementGeom {
  kind: "chart_element" | "slide" | "block";
  ref: string;
  bbox: [number, number, number, number];
  chart_point?: string;
  chart_dimension?: string;
}

const GROUP_GAP_MS = 900; // a pause longer than this starts a new group

export class StrokeRecorder {
  private strokes: Point[][] = [];
  private current: Point[] | null = null;
  private lastPointAt = 0;

  pointerDown(x: number, y: number, t: number): void {
    if (this.strokes.length && t - this.lastPointAt > GROUP_GAP_MS) {
      this.strokes = []; // stale group
    }
    this.current = [[x, y, t]];
    this.lastPointAt = t;
  }

  pointerMove(x: number, y: number, t: number): void {
    if (!this.current) return;
    this.current.push([x, y, t]);
    this.lastPointAt = t;
  }

  pointerUp(x: number, y: number, t: number): void {
    if (!this.current) return;
    this.current.push([x, y, t]);
    this.strokes.push(this.current);
    this.current = null;
    this.lastPointAt = t;
  }

  /** Take the finished stroke group, clearing the recorder. */
  take(): Point[][] {
    const group = this.strokes;
    this.strokes = [];
    this.current = null;
    return group;
  }

  get isEmpty(): boolean {
    return this.strokes.length === 0 && this.current === null;
  }
}

/** Collect bounding boxes of registered scene nodes, in page coordinates. */
export function sceneFromRegistry(
  registry: Map<string, { kind: SceneElementGeom["kind"]; el: HTMLElement; chart_point?: string; chart_dimension?: string }>,
): { elements: SceneElementGeom[] } {
  const elements: SceneElementGeom[] = [];
  for (const [ref, node] of registry) {
    const rect = node.el.getBoundingClientRect();
    elements.push({
      kind: node.kind,
      ref,
      bbox: [rect.x, rect.y, rect.width, rect.height],
      chart_point: node.chart_point,
      chart_dimension: node.chart_dimension,
    });
  }
  return { elements };
}
