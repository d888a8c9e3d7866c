import { beforeEach, describe, expect, it } from "vitest";

import { buildStudio, Studio } from "../src/app.js";
import type { ClientMessage } from "../src/protocol.js";
import { StudioSocket, type SocketLike } from "../src/ws.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  readyState = 0;
  onopen: ((ev?: any) => void) | null = null;
  onclose: ((ev?: any) => void) | null = null;
  onmessage: ((ev: { data: any }) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {}

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  push(envelope: any): void {
    this.onmessage?.({ data: JSON.stringify(envelope) });
  }
}

function snapshotEnvelope(extra: Partial<any> = {}) {
  return {
    seq: 0,
    kind: "SnapshotSync",
    t_ms: 0,
    payload: {
      session_id: "smoke",
      now_ms: 0,
      seq: 0,
      charts: {},
      deck: { slides: [] },
      bindings: {},
      suggestions: {},
      surfaced: {},
      ...extra,
    },
  };
}

describe("studio shell", () => {
  let fake: FakeSocket;
  let studio: Studio;

  beforeEach(() => {
    document.body.innerHTML = '<div id="root"></div>';
    fake = new FakeSocket();
    const socket = new StudioSocket(() => fake);
    studio = buildStudio(document.getElementById("root")!, socket, {
      immediateRender: true,
      now: () => 1234,
    });
    socket.connect();
    fake.open();
    fake.push(snapshotEnvelope());
  });

  function sentMessages(): ClientMessage[] {
    return fake.sent.map((raw) => JSON.parse(raw));
  }

  it("presents all five workspace affordances", () => {
    expect(document.querySelector("#transcription-panel")).toBeTruthy();
    expect(document.querySelector("#command-bar #voice-input")).toBeTruthy();
    expect(document.querySelector("#undo")).toBeTruthy();
    expect(document.querySelector("#redo")).toBeTruthy();
    expect(document.querySelector("#playback-controls #playback-pause")).toBeTruthy();
    const panel = document.querySelector("#slide-panel");
    expect(panel).toBeTruthy();
  });

  it("renders chart bars from updates without client-side math", () => {
    fake.push({
      seq: 1,
      kind: "ChartUpdate",
      t_ms: 100,
      payload: {
        delta: {},
        snapshot: {
          discussion_point: "Q1",
          dimension: "KeyDiscussionThemes",
          version: 1,
          entries: [["privacy", "r1", 3], ["consent", "r2", 1]],
          generated_at_ms: 100,
          visible_by_default: true,
        },
      },
    });
    const bars = [...document.querySelectorAll(".chart-node .bar")];
    expect(bars.map((b) => b.textContent)).toEqual(["privacy (3)", "consent (1)"]);
  });

  it("sends typed commands and echoes them into the transcription panel", () => {
    const input = document.querySelector("#voice-input") as HTMLInputElement;
    input.value = "Generate a slide for the top three Key Discussion Themes";
    (document.querySelector("#send-command") as HTMLButtonElement).click();
    const commands = sentMessages().filter((m) => m.kind === "Command");
    expect(commands).toHaveLength(1);
    fake.push({
      seq: 1,
      kind: "CommandResult",
      t_ms: 100,
      payload: { req_id: "x", ok: true, voice_text: "Generate a slide for the top three Key Discussion Themes" },
    });
    const lines = [...document.querySelectorAll(".transcript-line")];
    expect(lines.at(-1)?.textContent).toContain("top three Key Discussion Themes");
  });

  it("ignores empty command submissions", () => {
    const before = fake.sent.length;
    (document.querySelector("#send-command") as HTMLButtonElement).click();
    expect(fake.sent.length).toBe(before);
  });

  it("review panel walks apply and plus reveals hidden ranks", () => {
    fake.push({
      seq: 1,
      kind: "DeckDelta",
      t_ms: 100,
      payload: {
        user: true,
        ops: [{
          op: "create_slide",
          slide: {
            slide_id: "s1", discussion_point: "Q1", layout: "bullets",
            position_in_deck: 0,
            regions: [{ region_id: "g1", column: 0, block: null, binding_id: null }],
          },
        }],
      },
    });
    const suggestion = (id: string) => ({
      suggestion_id: id,
      discussion_point: "Q1",
      target_slide: "s1",
      target_region: "g1",
      metric: "OD",
      proposed_block: {
        block_id: `pb-${id}`, source_record_ids: ["r9"], content_type: "commentary",
        text: `proposal ${id}`, metric_tag: "OD", provenance: "suggestion",
      },
      base_text: "",
      diff: [["insert", "", `proposal ${id}`]],
      rank: id === "sug1" ? 1 : 2,
      deficit: 0.75,
      state: "pending",
    });
    fake.push({
      seq: 2,
      kind: "SuggestionAvailable",
      t_ms: 200,
      payload: {
        discussion_point: "Q1",
        suggestions: [suggestion("sug1"), suggestion("sug2")],
        surfaced: { s1: { visible: "sug1", hidden: ["sug2"] } },
      },
    });

    const button = document.querySelector(".suggested-change") as HTMLButtonElement;
    expect(button?.textContent).toContain("OD");
    button.click();
    const review = document.querySelector("#review-panel") as HTMLElement;
    expect(review.hidden).toBe(false);
    expect(review.querySelector("#review-diff")?.textContent).toContain("proposal sug1");

    (review.querySelector("#review-apply") as HTMLButtonElement).click();
    const resolves = sentMessages().filter((m) => m.kind === "ResolveSuggestion") as any[];
    expect(resolves.at(-1).payload).toMatchObject({ suggestion_id: "sug1", action: "apply" });

    const more = document.querySelector(".more-suggestions") as HTMLButtonElement;
    expect(more.textContent).toBe("+1");
    more.click();
    const hidden = [...document.querySelectorAll(".hidden-suggestions li")];
    expect(hidden.map((li) => li.textContent)).toEqual(["[OD] proposal sug2"]);
  });

  it("drag and drop reorders through the engine, not locally", () => {
    for (const id of ["s1", "s2"]) {
      fake.push({
        seq: id === "s1" ? 1 : 2,
        kind: "DeckDelta",
        t_ms: 100,
        payload: {
          user: true,
          ops: [{
            op: "create_slide",
            slide: {
              slide_id: id, discussion_point: "Q1", layout: "bullets",
              position_in_deck: 0,
              regions: [{ region_id: `${id}-r`, column: 0, block: null, binding_id: null }],
            },
          }],
        },
      });
    }
    const items = [...document.querySelectorAll(".slide-panel-item")] as HTMLElement[];
    expect(items).toHaveLength(2);
    items[1].dispatchEvent(new Event("dragstart"));
    items[0].dispatchEvent(new Event("drop"));
    const edits = sentMessages().filter((m) => m.kind === "Edit") as any[];
    expect(edits.at(-1).payload).toMatchObject({
      edit: "reorder_slides",
      order: ["s2", "s1"],
    });
    // local order unchanged until the engine confirms
    expect(studio.store.slides.map((s) => s.slide_id)).toEqual(["s1", "s2"]);
  });

  it("queues messages while offline and shows the indicator", () => {
    const indicator = document.querySelector("#offline-indicator") as HTMLElement;
    expect(indicator.hidden).toBe(true);
    fake.readyState = 3;
    fake.onclose?.();
    expect(indicator.hidden).toBe(false);
    studio.socket.send({ kind: "History", payload: { direction: "undo" } });
    expect(studio.socket.queuedCount).toBe(1);
  });

  it("requests a resync when envelopes skip a seq", () => {
    fake.push({ seq: 7, kind: "ChartUpdate", t_ms: 0, payload: { snapshot: {
      discussion_point: "Q1", dimension: "TechTopics", version: 1,
      entries: [], generated_at_ms: 0, visible_by_default: true,
    } } });
    const kinds = sentMessages().map((m) => m.kind);
    expect(kinds).toContain("Resync");
  });
});
