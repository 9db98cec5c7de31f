import { beforeEach, describe, expect, it } from "vitest";

import { ApiClientLike, ApiError } from "../src/api.js";
import { EditSession, trimBounds } from "../src/session.js";
import {
  AnnotationSetJson,
  DocumentJson,
  DocumentListItem,
  FieldSpan,
  FieldType,
  TimerKind,
} from "../src/types.js";

const TEXT = "Take Aspirin 81 mg twice daily for two weeks to prevent clots.";

function at(needle: string): [number, number] {
  const start = TEXT.indexOf(needle);
  if (start < 0) throw new Error(`needle not in text: ${needle}`);
  return [start, start + needle.length];
}

function span(ft: FieldType, needle: string): FieldSpan {
  const [start, end] = at(needle);
  return { field_type: ft, start, end, text: needle };
}

function goldSet(): AnnotationSetJson {
  return {
    doc_id: "note-1",
    source: "gold",
    entries: [
      {
        entry_id: "e1",
        fields: [span("name", "Aspirin"), span("dose", "81 mg"), span("frequency", "twice daily")],
      },
    ],
    orphans: [span("reason", "prevent clots")],
  };
}

class FakeApi implements ApiClientLike {
  timerPosts: TimerKind[] = [];
  lastPut: AnnotationSetJson | null = null;
  failTimer = false;
  putFailure: "network" | "violations" | null = null;
  serverSeconds = 42.5;

  constructor(
    private readonly doc: DocumentJson,
    private readonly sets: Record<string, AnnotationSetJson>,
  ) {}

  async listDocuments(): Promise<DocumentListItem[]> {
    return [{ doc_id: this.doc.doc_id, length: this.doc.text.length, sources: Object.keys(this.sets) }];
  }

  async getDocument(docId: string): Promise<DocumentJson> {
    if (docId !== this.doc.doc_id) throw new ApiError(404, `unknown document '${docId}'`, "404");
    return this.doc;
  }

  async getAnnotations(docId: string, source: string): Promise<AnnotationSetJson> {
    const found = this.sets[source];
    if (docId !== this.doc.doc_id || !found) {
      throw new ApiError(404, `no '${source}' annotations`, "404");
    }
    return found;
  }

  async putRefined(docId: string, payload: AnnotationSetJson): Promise<AnnotationSetJson> {
    if (this.putFailure === "network") throw new ApiError(0, null, "service unreachable");
    if (this.putFailure === "violations") {
      throw new ApiError(
        400,
        {
          violations: [
            {
              kind: "text-mismatch",
              detail: "name [0,4) carries 'XXXX' but document reads 'Take'",
              entry_id: null,
              field_type: "name",
              start: 0,
              end: 4,
            },
          ],
        },
        "400: rejected",
      );
    }
    this.lastPut = { ...payload, doc_id: docId, source: "refined" };
    return this.lastPut;
  }

  async postTimer(docId: string, kind: TimerKind): Promise<{ seconds_active: number; events: number }> {
    if (this.failTimer) throw new ApiError(0, null, "service unreachable");
    this.timerPosts.push(kind);
    return { seconds_active: this.serverSeconds, events: this.timerPosts.length };
  }

  async getDiff(): Promise<never> {
    throw new Error("not used by the session");
  }
}

function makeClock(start = 1000): { clock: () => number; advance: (dt: number) => void } {
  let now = start;
  return { clock: () => now, advance: (dt) => (now += dt) };
}

describe("trimBounds", () => {
  it("strips edge punctuation and whitespace only", () => {
    const text = "  (81 mg)  ";
    const [s, e] = trimBounds(text, 0, text.length);
    expect(text.slice(s, e)).toBe("81 mg");
  });

  it("leaves interior characters alone", () => {
    const text = "twice-daily";
    const [s, e] = trimBounds(text, 0, text.length);
    expect(text.slice(s, e)).toBe("twice-daily");
  });

  it("collapses an all-punctuation selection", () => {
    const [s, e] = trimBounds("...", 0, 3);
    expect(s).toBe(e);
  });
});

describe("EditSession.load", () => {
  let api: FakeApi;

  beforeEach(() => {
    api = new FakeApi({ doc_id: "note-1", text: TEXT }, { gold: goldSet() });
  });

  it("builds one highlight item per unique span and starts both clocks", async () => {
    const { clock } = makeClock();
    const s = await EditSession.load(api, "note-1", "gold", clock);
    expect(s.items).toHaveLength(4);
    expect(s.entryOrder).toEqual(["e1"]);
    expect(s.items.filter((i) => i.entryIds.length === 0)).toHaveLength(1);
    expect(s.timer.running).toBe(true);
    expect(api.timerPosts).toEqual(["start"]);
    expect(s.dirty).toBe(false);
    expect(s.error).toBeNull();
  });

  it("keeps a span shared by two entries as a single item", async () => {
    const shared = span("reason", "prevent clots");
    api = new FakeApi(
      { doc_id: "note-1", text: TEXT },
      {
        gold: {
          doc_id: "note-1",
          source: "gold",
          entries: [
            { entry_id: "e1", fields: [span("name", "Aspirin"), shared] },
            { entry_id: "e2", fields: [span("dose", "81 mg"), shared] },
          ],
          orphans: [],
        },
      },
    );
    const s = await EditSession.load(api, "note-1", "gold");
    expect(s.items).toHaveLength(3);
    const sharedItem = s.items.find((i) => i.span.field_type === "reason")!;
    expect(sharedItem.entryIds).toEqual(["e1", "e2"]);
  });

  it("rejects without building state when the source is missing", async () => {
    await expect(EditSession.load(api, "note-1", "refined")).rejects.toMatchObject({
      status: 404,
    });
  });

  it("survives a timer endpoint failure with a warning", async () => {
    api.failTimer = true;
    const s = await EditSession.load(api, "note-1", "gold");
    expect(s.timerWarning).toContain("timer");
    expect(s.timer.running).toBe(true);
  });

  it("loadEmpty opens a bare document diffing against nothing", async () => {
    const s = await EditSession.loadEmpty(api, "note-1");
    expect(s.items).toHaveLength(0);
    expect(s.baseInventory()).toEqual([]);
  });
});

describe("EditSession editing", () => {
  let api: FakeApi;
  let clockBox: ReturnType<typeof makeClock>;
  let s: EditSession;

  beforeEach(async () => {
    api = new FakeApi({ doc_id: "note-1", text: TEXT }, { gold: goldSet() });
    clockBox = makeClock();
    s = await EditSession.load(api, "note-1", "gold", clockBox.clock);
  });

  it("adds a trimmed span and logs it with a timestamp", async () => {
    const [start, end] = at("two weeks");
    clockBox.advance(30);
    expect(s.addSpan(start - 1, end + 1, "duration", "e1")).toBe(true); // sloppy drag
    const added = s.items.find((i) => i.span.field_type === "duration")!;
    expect(added.span.text).toBe("two weeks");
    expect(added.entryIds).toEqual(["e1"]);
    expect(s.dirty).toBe(true);
    expect(s.log).toHaveLength(1);
    expect(s.log[0]).toMatchObject({ action: "add", at: 1030 });
  });

  it("rejects adding a duplicate of an existing span", () => {
    const [start, end] = at("81 mg");
    expect(s.addSpan(start, end, "dose", null)).toBe(false);
    expect(s.error!.violations[0]!.kind).toBe("duplicate-span");
    expect(s.items).toHaveLength(4);
    expect(s.log).toHaveLength(0);
  });

  it("rejects an empty-after-trim selection", () => {
    const dot = TEXT.indexOf(".");
    expect(s.addSpan(dot, dot + 1, "name", null)).toBe(false);
    expect(s.error!.message).toContain("add rejected");
  });

  it("modifies bounds and records before and after", () => {
    const dose = s.items.find((i) => i.span.field_type === "dose")!;
    const [start] = at("81 mg");
    expect(s.modifyBounds(dose.id, start, start + 2)).toBe(true);
    expect(dose.span.text).toBe("81");
    expect(s.log[0]).toMatchObject({ action: "modify-bounds" });
    expect(s.log[0]!.before!.text).toBe("81 mg");
    expect(s.log[0]!.after!.text).toBe("81");
  });

  it("treats a no-move resize as a no-op", () => {
    const dose = s.items.find((i) => i.span.field_type === "dose")!;
    expect(s.modifyBounds(dose.id, dose.span.start, dose.span.end)).toBe(true);
    expect(s.dirty).toBe(false);
    expect(s.log).toHaveLength(0);
  });

  it("rejects a resize that collides with another span", () => {
    const [nameStart, nameEnd] = at("Aspirin");
    s.addSpan(nameStart, nameEnd, "dose", null); // same offsets, other type: fine
    const dose = s.items.find((i) => i.span.text === "81 mg")!;
    expect(s.modifyBounds(dose.id, nameStart, nameEnd)).toBe(false);
    expect(s.error!.violations[0]!.kind).toBe("duplicate-span");
    expect(dose.span.text).toBe("81 mg");
  });

  it("deletes a span and logs it", () => {
    const freq = s.items.find((i) => i.span.field_type === "frequency")!;
    expect(s.deleteSpan(freq.id)).toBe(true);
    expect(s.items).toHaveLength(3);
    expect(s.log[0]).toMatchObject({ action: "delete" });
    expect(s.log[0]!.before!.text).toBe("twice daily");
  });

  it("changes a field type in place", () => {
    const reason = s.items.find((i) => i.span.field_type === "reason")!;
    expect(s.setFieldType(reason.id, "duration")).toBe(true);
    expect(reason.span.field_type).toBe("duration");
    expect(s.log[0]).toMatchObject({ action: "set-field-type" });
  });

  it("reassigns entry membership by click-assign", () => {
    const reason = s.items.find((i) => i.span.field_type === "reason")!;
    const e2 = s.newEntry();
    expect(e2).toBe("e2");
    expect(s.assignEntry(reason.id, e2)).toBe(true);
    expect(reason.entryIds).toEqual(["e2"]);
    expect(s.log[0]).toMatchObject({ action: "assign-entry" });
    expect(s.assignEntry(reason.id, null)).toBe(true);
    expect(reason.entryIds).toEqual([]);
  });

  it("allocates fresh entry ids past the loaded ones", () => {
    expect(s.newEntry()).toBe("e2");
    expect(s.newEntry()).toBe("e3");
  });

  it("drops emptied entries from the payload and keeps orphans", () => {
    for (const item of [...s.items]) {
      if (item.entryIds.includes("e1")) s.deleteSpan(item.id);
    }
    const payload = s.toPayload();
    expect(payload.entries).toEqual([]);
    expect(payload.orphans.map((o) => o.text)).toEqual(["prevent clots"]);
    expect(payload.source).toBe("refined");
    expect(payload).not.toHaveProperty("timing");
  });

  it("keeps an error posted until the next accepted action clears it", () => {
    const [start, end] = at("81 mg");
    s.addSpan(start, end, "dose", null);
    expect(s.error).not.toBeNull();
    const [ds, de] = at("two weeks");
    s.addSpan(ds, de, "duration", null);
    expect(s.error).toBeNull();
  });
});

describe("EditSession.save", () => {
  let api: FakeApi;
  let clockBox: ReturnType<typeof makeClock>;
  let s: EditSession;

  beforeEach(async () => {
    api = new FakeApi({ doc_id: "note-1", text: TEXT }, { gold: goldSet() });
    clockBox = makeClock();
    s = await EditSession.load(api, "note-1", "gold", clockBox.clock);
    const [ds, de] = at("two weeks");
    s.addSpan(ds, de, "duration", "e1");
    const [cs, ce] = at("clots");
    s.addSpan(cs, ce, "name", s.newEntry());
    const dose = s.items.find((i) => i.span.text === "81 mg")!;
    s.modifyBounds(dose.id, dose.span.start, dose.span.start + 2);
    const freq = s.items.find((i) => i.span.field_type === "frequency")!;
    s.deleteSpan(freq.id);
  });

  it("counts the scripted session as two adds, one modify, one delete", () => {
    const diff = s.pendingDiff();
    expect([diff.added, diff.modified, diff.deleted]).toEqual([2, 1, 1]);
  });

  it("stops the clock, uploads, and reports counts on success", async () => {
    clockBox.advance(90);
    const outcome = await s.save();
    expect(outcome.ok).toBe(true);
    expect(outcome.counts).toEqual({ added: 2, modified: 1, deleted: 1 });
    expect(outcome.serverSecondsActive).toBe(42.5);
    expect(api.timerPosts).toEqual(["start", "stop"]);
    expect(api.lastPut!.source).toBe("refined");
    expect(s.dirty).toBe(false);
    expect(s.timer.running).toBe(false);
    expect(s.timer.secondsActive()).toBe(90);
  });

  it("renders server violations and restarts the clock on a 400", async () => {
    api.putFailure = "violations";
    const outcome = await s.save();
    expect(outcome.ok).toBe(false);
    expect(s.error!.violations[0]).toMatchObject({ kind: "text-mismatch" });
    expect(s.dirty).toBe(true);
    expect(s.timer.running).toBe(true);
    expect(api.timerPosts).toEqual(["start", "stop", "resume"]);
  });

  it("keeps local state for a manual retry when the service drops", async () => {
    api.putFailure = "network";
    const first = await s.save();
    expect(first.ok).toBe(false);
    expect(s.dirty).toBe(true);
    expect(s.items.some((i) => i.span.field_type === "duration")).toBe(true);
    api.putFailure = null;
    const second = await s.save();
    expect(second.ok).toBe(true);
    expect(second.counts).toEqual({ added: 2, modified: 1, deleted: 1 });
  });

  it("refuses to save while a validation error is displayed", async () => {
    const [start, end] = at("Aspirin");
    s.addSpan(start, end, "name", null); // duplicate -> error
    expect(s.error).not.toBeNull();
    const outcome = await s.save();
    expect(outcome.ok).toBe(false);
    expect(outcome.message).toContain("validation error");
    expect(api.lastPut).toBeNull();
  });

  it("pauses on blur and resumes on focus, reporting both", async () => {
    clockBox.advance(10);
    await s.pauseTimer();
    clockBox.advance(100); // away from the tab: not counted
    await s.resumeTimer();
    clockBox.advance(5);
    await s.save();
    expect(s.timer.secondsActive()).toBe(15);
    expect(api.timerPosts).toEqual(["start", "pause", "resume", "stop"]);
  });

  it("ignores a duplicate blur", async () => {
    await s.pauseTimer();
    await s.pauseTimer();
    expect(api.timerPosts).toEqual(["start", "pause"]);
  });
});
