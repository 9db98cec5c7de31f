import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { diffCorrections } from "../src/diff.js";
import { AnnotationSetJson, DiffJson, setInventory } from "../src/types.js";

interface Case {
  label: string;
  base: AnnotationSetJson;
  refined: AnnotationSetJson;
  expected: DiffJson;
}

const fixture = JSON.parse(
  readFileSync(new URL("./fixtures/diff_cases.json", import.meta.url), "utf-8"),
) as { text: string; cases: Case[] };

describe("diffCorrections mirrors the service", () => {
  it("loads a meaningful corpus", () => {
    expect(fixture.cases.length).toBeGreaterThanOrEqual(300);
  });

  for (const c of fixture.cases.slice(0, 5)) {
    it(`matches counts and items on ${c.label}`, () => {
      const got = diffCorrections(setInventory(c.base), setInventory(c.refined));
      expect({
        added: got.added,
        modified: got.modified,
        deleted: got.deleted,
        items: got.items,
      }).toEqual({
        added: c.expected.added,
        modified: c.expected.modified,
        deleted: c.expected.deleted,
        items: c.expected.items,
      });
    });
  }

  it("matches counts and items on every frozen case", () => {
    for (const c of fixture.cases) {
      const got = diffCorrections(setInventory(c.base), setInventory(c.refined));
      expect(got.items, c.label).toEqual(c.expected.items);
      expect(
        { added: got.added, modified: got.modified, deleted: got.deleted },
        c.label,
      ).toEqual({
        added: c.expected.added,
        modified: c.expected.modified,
        deleted: c.expected.deleted,
      });
    }
  });

  it("treats a pure regroup as zero corrections", () => {
    const c = fixture.cases.find((x) => x.label === "regroup-only")!;
    const got = diffCorrections(setInventory(c.base), setInventory(c.refined));
    expect(got.added + got.modified + got.deleted).toBe(0);
  });

  it("reports a field type change as delete plus add", () => {
    const c = fixture.cases.find((x) => x.label === "type-change")!;
    const got = diffCorrections(setInventory(c.base), setInventory(c.refined));
    expect([got.added, got.modified, got.deleted]).toEqual([1, 0, 1]);
  });
});
