/** Client-side structural validation, mirroring what the service enforces
 * on PUT before committing a refined set. Running the same checks locally
 * lets the editor reject a bad action immediately instead of waiting for a
 * 400, and keeps the save button disabled while a violation is displayed.
 */

import { FieldSpan, spanKey } from "./types.js";

export interface Violation {
  kind: "offset" | "text-mismatch" | "duplicate-span";
  detail: string;
  field_type: FieldSpan["field_type"];
  start: number;
  end: number;
}

export function validateSpans(docText: string, spans: Iterable<FieldSpan>): Violation[] {
  const violations: Violation[] = [];
  const n = docText.length;
  const list = [...spans];
  for (const span of list) {
    if (!(0 <= span.start && span.start < span.end && span.end <= n)) {
      violations.push({
        kind: "offset",
        detail: `${span.field_type} [${span.start},${span.end}) outside document of length ${n}`,
        field_type: span.field_type,
        start: span.start,
        end: span.end,
      });
      continue;
    }
    const actual = docText.slice(span.start, span.end);
    if (actual !== span.text) {
      violations.push({
        kind: "text-mismatch",
        detail:
          `${span.field_type} [${span.start},${span.end}) carries ` +
          `"${span.text}" but document reads "${actual}"`,
        field_type: span.field_type,
        start: span.start,
        end: span.end,
      });
    }
  }
  // Duplicate detection keys on (type, offsets) only: two highlights on the
  // same characters with the same type would collapse into one span on save.
  const seen = new Set<string>();
  for (const span of list) {
    const key = spanKey({ ...span, text: "" });
    if (seen.has(key)) {
      violations.push({
        kind: "duplicate-span",
        detail: `${span.field_type} [${span.start},${span.end}) appears more than once`,
        field_type: span.field_type,
        start: span.start,
        end: span.end,
      });
    } else {
      seen.add(key);
    }
  }
  return violations;
}
