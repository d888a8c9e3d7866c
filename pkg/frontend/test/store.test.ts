import { describe, expect, it } from "vitest";

import type { Envelope, Snapshot } from "../src/protocol.js";
import { SceneStore } from "../src/store.js";

function emptySnapshot(): Snapshot {
  return {
    session_id: "s",
    now_ms: 0,
    seq: 0,
    charts: {},
    deck: { slides: [] },
    bindings: {},
    suggestions: {},
    surfaced: {},
  };
}

let seq = 0;
function env(kind: string, payload: any): Envelope {
  seq += 1;
  return { seq, kind, payload, t_ms: seq * 100 };
}

function chartUpdate(version: number, entries: [string, string, number][]): Envelope {
  return env("ChartUpdate", {
    delta: {},
    snapshot: {
      discussion_point: "Q1",
      dimension: "KeyDiscussionThemes",
      version,
      entries,
      generated_at_ms: 0,
      visible_by_default: true,
    },
  });
}

function slideOps(slideId: string): Envelope {
  return env("DeckDelta", {
    user: true,
    ops: [
      {
        op: "create_slide",
        slide: {
          slide_id: slideId,
          discussion_point: "Q1",
          layout: "bullets",
          position_in_deck: 0,
          regions: [
            { region_id: `${slideId}-r1`, column: 0, block: null, binding_id: null },
          ],
        },
      },
    ],
  });
}

describe("SceneStore", () => {
  it("folds chart updates into ranked bars", () => {
    seq = 0;
    const store = new SceneStore();
    store.reset(emptySnapshot());
    store.apply(chartUpdate(1, [["privacy", "r1", 1]]));
    store.apply(chartUpdate(2, [["privacy", "r1", 2], ["consent", "r2", 1]]));
    const chart = store.charts.get("Q1/KeyDiscussionThemes")!;
    expect(chart.version).toBe(2);
    expect(chart.entries.map(([label]) => label)).toEqual(["privacy", "consent"]);
  });

  it("applies deck ops: create, place, reorder, layout", () => {
    seq = 0;
    const store = new SceneStore();
    store.reset(emptySnapshot());
    store.apply(slideOps("s1"));
    store.apply(slideOps("s2"));
    store.apply(
      env("DeckDelta", {
        user: true,
        ops: [
          {
            op: "set_block",
            slide_id: "s1",
            region_id: "s1-r1",
            old_block: null,
            new_block: {
              block_id: "b1",
              source_record_ids: ["r1"],
              content_type: "commentary",
              text: "hello",
              metric_tag: null,
              provenance: "user_command",
            },
          },
        ],
      }),
    );
    store.apply(env("DeckDelta", { user: true, ops: [
      { op: "reorder", old_order: ["s1", "s2"], new_order: ["s2", "s1"] },
    ]}));
    expect(store.slides.map((s) => s.slide_id)).toEqual(["s2", "s1"]);
    expect(store.slides[1].regions[0].block?.text).toBe("hello");
    expect(store.slides.map((s) => s.position_in_deck)).toEqual([0, 1]);
  });

  it("rebound events retarget the edge and bump the badge", () => {
    seq = 0;
    const store = new SceneStore();
    const snapshot = emptySnapshot();
    snapshot.bindings = {
      bind1: {
        binding_id: "bind1",
        region_id: "s1-r1",
        chart_key: ["Q1", "KeyDiscussionThemes"],
        kind: { type: "frequency", rank_spec: { origin: "top", index: 1 } },
        last_resolved: ["r1", 3],
        topic_label: "privacy",
      },
    };
    store.reset(snapshot);
    store.apply(
      env("BindingEvent", {
        kind: "rebound",
        binding_id: "bind1",
        old_record_id: "r1",
        new_record_id: "r2",
        region_id: "s1-r1",
        swapped_from_cache: true,
        topic_label: "consent",
        badge_slide: "s1",
      }),
    );
    const edge = store.edges.get("bind1")!;
    expect(edge.last_resolved[0]).toBe("r2");
    expect(store.edgeHoverLabel("bind1")).toBe("consent");
    expect(edge.badge_pulse).toBe(1);
  });

  it("surfaces only the top suggestion; the rest hide behind plus", () => {
    seq = 0;
    const store = new SceneStore();
    store.reset(emptySnapshot());
    store.apply(slideOps("s1"));
    const mk = (id: string, rank: number) => ({
      suggestion_id: id,
      discussion_point: "Q1",
      target_slide: "s1",
      target_region: null,
      metric: "OD",
      proposed_block: {
        block_id: `pb-${id}`,
        source_record_ids: ["r1"],
        content_type: "commentary",
        text: `text ${id}`,
        metric_tag: "OD",
        provenance: "suggestion",
      },
      base_text: "",
      diff: [["insert", "", `text ${id}`]],
      rank,
      deficit: 0.5,
      state: "pending",
    });
    store.apply(
      env("SuggestionAvailable", {
        discussion_point: "Q1",
        suggestions: [mk("sug1", 1), mk("sug2", 2)],
        surfaced: { s1: { visible: "sug1", hidden: ["sug2"] } },
      }),
    );
    expect(store.visibleSuggestion("s1")?.suggestion_id).toBe("sug1");
    expect(store.hiddenSuggestions("s1").map((s) => s.suggestion_id)).toEqual(["sug2"]);
  });

  it("flags a resync on any seq gap", () => {
    seq = 0;
    const store = new SceneStore();
    store.reset(emptySnapshot());
    store.apply(chartUpdate(1, [["privacy", "r1", 1]]));
    store.apply({ seq: 5, kind: "ChartUpdate", t_ms: 0, payload: { snapshot: {} } });
    expect(store.needsResync).toBe(true);
  });

  it("is a pure function of the envelope prefix", () => {
    seq = 0;
    const stream: Envelope[] = [
      chartUpdate(1, [["privacy", "r1", 1]]),
      slideOps("s1"),
      chartUpdate(2, [["privacy", "r1", 2]]),
      env("Toast", { suggestion_id: "sugX", slide_id: "s1", metric: "CT", message: "look" }),
      env("CommandResult", { req_id: "c1", ok: true, voice_text: "Generate a slide" }),
    ];
    const a = new SceneStore();
    const b = new SceneStore();
    for (const store of [a, b]) {
      store.reset(emptySnapshot());
      for (const e of stream) store.apply(e);
    }
    expect(a.digest()).toBe(b.digest());
    expect(a.transcript).toEqual(["Generate a slide"]);
  });
});
