import { describe, expect, it } from "vitest";

import { computeView } from "../src/render.js";
import { SpanItem } from "../src/session.js";
import { FieldType } from "../src/types.js";

const TEXT = "Take Aspirin 81 mg twice daily, then ibuprofen 200 mg as needed for pain.";

let nextId = 1;
function item(ft: FieldType, needle: string, entryIds: string[]): SpanItem {
  const start = TEXT.indexOf(needle);
  if (start < 0) throw new Error(`needle not in text: ${needle}`);
  return {
    id: nextId++,
    span: { field_type: ft, start, end: start + needle.length, text: needle },
    entryIds,
  };
}

describe("computeView", () => {
  it("renders two entries as two underline groups and six highlights", () => {
    const items = [
      item("name", "Aspirin", ["e1"]),
      item("dose", "81 mg", ["e1"]),
      item("frequency", "twice daily", ["e1"]),
      item("name", "ibuprofen", ["e2"]),
      item("dose", "200 mg", ["e2"]),
      item("frequency", "as needed", ["e2"]),
    ];
    const view = computeView(TEXT, items, ["e1", "e2"]);
    expect(view.highlightCount).toBe(6);
    expect(view.underlineGroups).toEqual(["e1", "e2"]);
    const highlighted = view.segments.filter((s) => s.itemIds.length > 0);
    expect(highlighted).toHaveLength(6);
  });

  it("reassembles the document text exactly", () => {
    const items = [item("name", "Aspirin", ["e1"]), item("reason", "pain", [])];
    const view = computeView(TEXT, items, ["e1"]);
    expect(view.segments.map((s) => s.text).join("")).toBe(TEXT);
    for (const seg of view.segments) {
      expect(seg.text).toBe(TEXT.slice(seg.start, seg.end));
    }
  });

  it("renders plain text when nothing is annotated", () => {
    const view = computeView(TEXT, [], []);
    expect(view.highlightCount).toBe(0);
    expect(view.underlineGroups).toEqual([]);
    expect(view.segments).toHaveLength(1);
    expect(view.segments[0]!.itemIds).toEqual([]);
  });

  it("lists the innermost highlight first where spans nest", () => {
    const outer = item("frequency", "twice daily", ["e1"]);
    const inner = item("mode", "twice", ["e1"]);
    const view = computeView(TEXT, [outer, inner], ["e1"]);
    const innerSeg = view.segments.find((s) => s.text === "twice")!;
    expect(innerSeg.itemIds).toEqual([inner.id, outer.id]);
    expect(innerSeg.fieldTypes).toEqual(["mode", "frequency"]);
  });

  it("merges underline slots where a shared span belongs to two entries", () => {
    const shared = item("reason", "pain", ["e1", "e2"]);
    const view = computeView(TEXT, [shared], ["e1", "e2"]);
    const seg = view.segments.find((s) => s.text === "pain")!;
    expect(seg.underlineSlots).toEqual([0, 1]);
  });

  it("drops entries with no remaining spans from the underline groups", () => {
    const items = [item("name", "Aspirin", ["e1"])];
    const view = computeView(TEXT, items, ["e1", "e2"]);
    expect(view.underlineGroups).toEqual(["e1"]);
  });

  it("clamps out-of-range offsets instead of crashing", () => {
    const bad: SpanItem = {
      id: 99,
      span: { field_type: "name", start: -5, end: TEXT.length + 40, text: "x" },
      entryIds: [],
    };
    const view = computeView(TEXT, [bad], []);
    expect(view.segments.map((s) => s.text).join("")).toBe(TEXT);
  });
});
