/** Pure view computation: document text segmented into runs so that each
 * run carries the highlights covering it (color-coded by field type) and
 * the underline slots of the entries those highlights belong to. The DOM
 * layer only has to paint segments; all geometry happens here.
 */

import { SpanItem } from "./session.js";

export const UNDERLINE_SLOTS = 6;

export interface Segment {
  start: number;
  end: number;
  text: string;
  /** Highlight items covering this run, innermost (shortest) first. */
  itemIds: number[];
  fieldTypes: string[];
  /** Underline slot per entry covering this run (entry order index mod slots). */
  underlineSlots: number[];
}

export interface ViewModel {
  segments: Segment[];
  highlightCount: number;
  /** Entries that currently own at least one span, in display order. */
  underlineGroups: string[];
}

export function computeView(docText: string, items: SpanItem[], entryOrder: string[]): ViewModel {
  const bounds = new Set<number>([0, docText.length]);
  for (const item of items) {
    bounds.add(Math.max(0, Math.min(item.span.start, docText.length)));
    bounds.add(Math.max(0, Math.min(item.span.end, docText.length)));
  }
  const cuts = [...bounds].sort((a, b) => a - b);
  const segments: Segment[] = [];
  for (let i = 0; i + 1 < cuts.length; i++) {
    const start = cuts[i]!;
    const end = cuts[i + 1]!;
    if (start >= end) continue;
    const covering = items
      .filter((it) => it.span.start <= start && end <= it.span.end)
      .sort((a, b) => a.span.end - a.span.start - (b.span.end - b.span.start));
    const slotSet = new Set<number>();
    for (const it of covering) {
      for (const eid of it.entryIds) {
        const idx = entryOrder.indexOf(eid);
        if (idx >= 0) slotSet.add(idx % UNDERLINE_SLOTS);
      }
    }
    segments.push({
      start,
      end,
      text: docText.slice(start, end),
      itemIds: covering.map((it) => it.id),
      fieldTypes: covering.map((it) => it.span.field_type),
      underlineSlots: [...slotSet].sort((a, b) => a - b),
    });
  }
  const underlineGroups = entryOrder.filter((eid) =>
    items.some((it) => it.entryIds.includes(eid)),
  );
  return { segments, highlightCount: items.length, underlineGroups };
}
