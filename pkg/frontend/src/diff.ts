/** Client-side mirror of the service's correction diff.
 *
 * The save dialog shows add/modify/delete totals computed here; they must be
 * identical to what GET /documents/{id}/diff reports for the same pair, so
 * the pairing rules below follow the service exactly: per field type, spans
 * pair greedily by maximal character overlap (ties broken by base offsets,
 * refined offsets, then inventory position), one pairing per span. Identical
 * offsets are no-ops, moved pairs are modifications, leftover base spans are
 * deletions, leftover refined spans are additions. Grouping changes are
 * invisible.
 */

import { DiffItemJson, FIELD_ORDER, FieldSpan, overlap } from "./types.js";

export interface CorrectionDiff {
  added: number;
  modified: number;
  deleted: number;
  items: DiffItemJson[];
}

export function diffCorrections(base: FieldSpan[], refined: FieldSpan[]): CorrectionDiff {
  const items: DiffItemJson[] = [];
  for (const ft of FIELD_ORDER) {
    const bSpans = base.filter((s) => s.field_type === ft);
    const rSpans = refined.filter((s) => s.field_type === ft);
    const candidates: number[][] = [];
    bSpans.forEach((bs, bi) => {
      rSpans.forEach((rs, ri) => {
        const ov = overlap(bs, rs);
        if (ov > 0) candidates.push([-ov, bs.start, bs.end, rs.start, rs.end, bi, ri]);
      });
    });
    candidates.sort((a, b) => {
      for (let i = 0; i < a.length; i++) {
        if (a[i]! !== b[i]!) return a[i]! - b[i]!;
      }
      return 0;
    });
    const usedB = new Set<number>();
    const usedR = new Set<number>();
    for (const cand of candidates) {
      const bi = cand[5]!;
      const ri = cand[6]!;
      if (usedB.has(bi) || usedR.has(ri)) continue;
      usedB.add(bi);
      usedR.add(ri);
      const bs = bSpans[bi]!;
      const rs = rSpans[ri]!;
      if (bs.start !== rs.start || bs.end !== rs.end) {
        items.push({ kind: "modified", field_type: ft, base: bs, refined: rs });
      }
    }
    bSpans.forEach((bs, bi) => {
      if (!usedB.has(bi)) items.push({ kind: "deleted", field_type: ft, base: bs, refined: null });
    });
    rSpans.forEach((rs, ri) => {
      if (!usedR.has(ri)) items.push({ kind: "added", field_type: ft, base: null, refined: rs });
    });
  }
  return {
    added: items.filter((i) => i.kind === "added").length,
    modified: items.filter((i) => i.kind === "modified").length,
    deleted: items.filter((i) => i.kind === "deleted").length,
    items,
  };
}

export function describeItem(item: DiffItemJson): string {
  const show = (s: FieldSpan | null) => (s ? `[${s.start},${s.end}) "${s.text}"` : "");
  if (item.kind === "modified") {
    return `${item.field_type}: ${show(item.base)} → ${show(item.refined)}`;
  }
  const span = item.kind === "added" ? item.refined : item.base;
  return `${item.field_type}: ${show(span)}`;
}
