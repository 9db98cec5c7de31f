/** Editing session for one document: load, edit spans, save refined.
 *
 * State is a flat list of highlight items, each owning exactly one span
 * value plus its entry memberships (empty = orphan, several = shared span).
 * Every edit action is validated against the same structural rules the
 * service enforces on PUT; a rejected action leaves state untouched and
 * parks the violation where the view can render it, which also disables
 * saving until it is cleared.
 *
 * Selection bounds are edge-trimmed of punctuation and whitespace before a
 * span is created or resized, the same trimming every stored span already
 * went through upstream.
 */

import { ApiClientLike, ApiError } from "./api.js";
import { CorrectionDiff, diffCorrections } from "./diff.js";
import { SessionTimer, Clock, wallClock } from "./timer.js";
import {
  AnnotationSetJson,
  DocumentJson,
  FieldSpan,
  FieldType,
  inventoryOf,
  sameSpan,
  setInventory,
  spanKey,
  ViolationJson,
} from "./types.js";
import { validateSpans, Violation } from "./validate.js";

export const STRIP_CHARS = " \t.,;:!?'\"()[]-";

export function trimBounds(text: string, start: number, end: number): [number, number] {
  while (start < end && STRIP_CHARS.includes(text[start]!)) start++;
  while (end > start && STRIP_CHARS.includes(text[end - 1]!)) end--;
  return [start, end];
}

export interface SpanItem {
  id: number;
  span: FieldSpan;
  entryIds: string[];
}

export type EditAction = "add" | "modify-bounds" | "delete" | "set-field-type" | "assign-entry";

export interface CorrectionLogEntry {
  at: number; // epoch seconds
  action: EditAction;
  detail: string;
  before: FieldSpan | null;
  after: FieldSpan | null;
}

export interface EditError {
  message: string;
  violations: (Violation | ViolationJson)[];
}

export interface SaveOutcome {
  ok: boolean;
  message: string;
  counts?: { added: number; modified: number; deleted: number };
  serverSecondsActive?: number;
}

export class EditSession {
  readonly items: SpanItem[] = [];
  readonly entryOrder: string[] = [];
  readonly log: CorrectionLogEntry[] = [];
  readonly timer: SessionTimer;

  selection: { start: number; end: number } | null = null;
  selectedItemId: number | null = null;
  activeEntryId: string | null = null;
  dirty = false;
  error: EditError | null = null;
  timerWarning: string | null = null;
  lastSave: SaveOutcome | null = null;

  private nextId = 1;

  private constructor(
    private readonly api: ApiClientLike,
    readonly doc: DocumentJson,
    readonly baseSet: AnnotationSetJson,
    private readonly clock: Clock,
  ) {
    this.timer = new SessionTimer(clock);
    const byKey = new Map<string, SpanItem>();
    for (const entry of baseSet.entries) {
      if (!this.entryOrder.includes(entry.entry_id)) this.entryOrder.push(entry.entry_id);
      for (const span of entry.fields) {
        const key = spanKey(span);
        let item = byKey.get(key);
        if (!item) {
          item = { id: this.nextId++, span, entryIds: [] };
          byKey.set(key, item);
          this.items.push(item);
        }
        if (!item.entryIds.includes(entry.entry_id)) item.entryIds.push(entry.entry_id);
      }
    }
    for (const span of baseSet.orphans) {
      const key = spanKey(span);
      if (!byKey.has(key)) {
        const item = { id: this.nextId++, span, entryIds: [] };
        byKey.set(key, item);
        this.items.push(item);
      }
    }
    this.activeEntryId = this.entryOrder[0] ?? null;
  }

  /** Fetch document and base annotations, then start the clock (locally and
   * on the service, so both ends time the same session). Throws ApiError on
   * unknown doc/source or unreachable service; no state is built then.
   */
  static async load(
    api: ApiClientLike,
    docId: string,
    source: string,
    clock: Clock = wallClock,
  ): Promise<EditSession> {
    const doc = await api.getDocument(docId);
    const baseSet = await api.getAnnotations(docId, source);
    const session = new EditSession(api, doc, baseSet, clock);
    session.timer.start();
    try {
      await api.postTimer(docId, "start");
    } catch (err) {
      session.timerWarning = `timer not reported to service: ${(err as Error).message}`;
    }
    return session;
  }

  /** Open a document that has no annotations yet: everything added from
   * scratch diffs against an empty base.
   */
  static async loadEmpty(
    api: ApiClientLike,
    docId: string,
    clock: Clock = wallClock,
  ): Promise<EditSession> {
    const doc = await api.getDocument(docId);
    const empty: AnnotationSetJson = { doc_id: docId, source: "gold", entries: [], orphans: [] };
    const session = new EditSession(api, doc, empty, clock);
    session.timer.start();
    try {
      await api.postTimer(docId, "start");
    } catch (err) {
      session.timerWarning = `timer not reported to service: ${(err as Error).message}`;
    }
    return session;
  }

  item(itemId: number): SpanItem | undefined {
    return this.items.find((i) => i.id === itemId);
  }

  /** Unique span values in canonical order; what a save would persist. */
  currentInventory(): FieldSpan[] {
    return inventoryOf(this.items.map((i) => i.span));
  }

  baseInventory(): FieldSpan[] {
    return setInventory(this.baseSet);
  }

  /** Live add/modify/delete totals against the loaded base. */
  pendingDiff(): CorrectionDiff {
    return diffCorrections(this.baseInventory(), this.currentInventory());
  }

  private reject(action: EditAction, violations: Violation[]): false {
    this.error = {
      message: `${action} rejected: ${violations[0]?.detail ?? "invalid span"}`,
      violations,
    };
    return false;
  }

  private accept(entry: Omit<CorrectionLogEntry, "at">): true {
    this.log.push({ at: this.clock(), ...entry });
    this.dirty = true;
    this.error = null;
    return true;
  }

  clearError(): void {
    this.error = null;
  }

  addSpan(start: number, end: number, fieldType: FieldType, entryId: string | null): boolean {
    const [s, e] = trimBounds(this.doc.text, start, end);
    if (s >= e) {
      return this.reject("add", [
        {
          kind: "offset",
          detail: `selection [${start},${end}) is empty after trimming`,
          field_type: fieldType,
          start,
          end,
        },
      ]);
    }
    const span: FieldSpan = { field_type: fieldType, start: s, end: e, text: this.doc.text.slice(s, e) };
    const violations = validateSpans(this.doc.text, [...this.items.map((i) => i.span), span]);
    if (violations.length > 0) return this.reject("add", violations);
    const item: SpanItem = { id: this.nextId++, span, entryIds: entryId === null ? [] : [entryId] };
    if (entryId !== null && !this.entryOrder.includes(entryId)) this.entryOrder.push(entryId);
    this.items.push(item);
    this.selectedItemId = item.id;
    return this.accept({
      action: "add",
      detail: `${fieldType} [${s},${e}) "${span.text}"${entryId ? ` in ${entryId}` : ""}`,
      before: null,
      after: span,
    });
  }

  modifyBounds(itemId: number, start: number, end: number): boolean {
    const item = this.item(itemId);
    if (!item) return false;
    const [s, e] = trimBounds(this.doc.text, start, end);
    if (s >= e) {
      return this.reject("modify-bounds", [
        {
          kind: "offset",
          detail: `selection [${start},${end}) is empty after trimming`,
          field_type: item.span.field_type,
          start,
          end,
        },
      ]);
    }
    const next: FieldSpan = {
      field_type: item.span.field_type,
      start: s,
      end: e,
      text: this.doc.text.slice(s, e),
    };
    if (sameSpan(next, item.span)) return true; // nothing moved
    const others = this.items.filter((i) => i.id !== itemId).map((i) => i.span);
    const violations = validateSpans(this.doc.text, [...others, next]);
    if (violations.length > 0) return this.reject("modify-bounds", violations);
    const before = item.span;
    item.span = next;
    return this.accept({
      action: "modify-bounds",
      detail: `${before.field_type} [${before.start},${before.end}) → [${s},${e}) "${next.text}"`,
      before,
      after: next,
    });
  }

  deleteSpan(itemId: number): boolean {
    const idx = this.items.findIndex((i) => i.id === itemId);
    if (idx < 0) return false;
    const [removed] = this.items.splice(idx, 1);
    if (this.selectedItemId === itemId) this.selectedItemId = null;
    return this.accept({
      action: "delete",
      detail: `${removed!.span.field_type} [${removed!.span.start},${removed!.span.end}) "${removed!.span.text}"`,
      before: removed!.span,
      after: null,
    });
  }

  setFieldType(itemId: number, fieldType: FieldType): boolean {
    const item = this.item(itemId);
    if (!item || item.span.field_type === fieldType) return item !== undefined;
    const next: FieldSpan = { ...item.span, field_type: fieldType };
    const others = this.items.filter((i) => i.id !== itemId).map((i) => i.span);
    const violations = validateSpans(this.doc.text, [...others, next]);
    if (violations.length > 0) return this.reject("set-field-type", violations);
    const before = item.span;
    item.span = next;
    return this.accept({
      action: "set-field-type",
      detail: `[${next.start},${next.end}) ${before.field_type} → ${fieldType}`,
      before,
      after: next,
    });
  }

  /** Click-assign: move the item to one entry, or to no entry (orphan). */
  assignEntry(itemId: number, entryId: string | null): boolean {
    const item = this.item(itemId);
    if (!item) return false;
    const fromDetail = item.entryIds.length > 0 ? item.entryIds.join("|") : "orphans";
    if (entryId === null) {
      if (item.entryIds.length === 0) return true;
      item.entryIds = [];
    } else {
      if (item.entryIds.length === 1 && item.entryIds[0] === entryId) return true;
      if (!this.entryOrder.includes(entryId)) this.entryOrder.push(entryId);
      item.entryIds = [entryId];
    }
    return this.accept({
      action: "assign-entry",
      detail: `${item.span.field_type} [${item.span.start},${item.span.end}) ${fromDetail} → ${entryId ?? "orphans"}`,
      before: item.span,
      after: item.span,
    });
  }

  /** Allocate a fresh entry id that cannot collide with loaded ones. */
  newEntry(): string {
    let n = this.entryOrder.length + 1;
    let id = `e${n}`;
    while (this.entryOrder.includes(id)) id = `e${++n}`;
    this.entryOrder.push(id);
    this.activeEntryId = id;
    return id;
  }

  toPayload(): AnnotationSetJson {
    const entries = this.entryOrder
      .map((eid) => ({
        entry_id: eid,
        fields: this.items.filter((i) => i.entryIds.includes(eid)).map((i) => i.span),
      }))
      .filter((e) => e.fields.length > 0);
    const orphans = this.items.filter((i) => i.entryIds.length === 0).map((i) => i.span);
    return { doc_id: this.doc.doc_id, source: "refined", entries, orphans };
  }

  async pauseTimer(): Promise<void> {
    if (!this.timer.pause()) return;
    try {
      await this.api.postTimer(this.doc.doc_id, "pause");
    } catch {
      this.timerWarning = "timer pause not reported to service";
    }
  }

  async resumeTimer(): Promise<void> {
    if (!this.timer.resume()) return;
    try {
      await this.api.postTimer(this.doc.doc_id, "resume");
    } catch {
      this.timerWarning = "timer resume not reported to service";
    }
  }

  /** Stop the clock and PUT the refined set (without a timing block: the
   * service attaches its own record, which now ends with the stop it just
   * received). On rejection or network failure the clock restarts and local
   * state is kept for a manual retry.
   */
  async save(): Promise<SaveOutcome> {
    if (this.error) {
      return (this.lastSave = { ok: false, message: "resolve the validation error first" });
    }
    const violations = validateSpans(this.doc.text, this.currentInventory());
    if (violations.length > 0) {
      this.error = { message: "invalid annotation state", violations };
      return (this.lastSave = { ok: false, message: "invalid annotation state" });
    }
    const counts = this.pendingDiff();
    const wasRunning = this.timer.running;
    this.timer.stop();
    let serverSeconds: number | undefined;
    try {
      const ack = await this.api.postTimer(this.doc.doc_id, "stop");
      serverSeconds = ack.seconds_active;
    } catch (err) {
      if (wasRunning) await this.restartAfterFailedSave();
      return (this.lastSave = {
        ok: false,
        message: `timer stop failed, nothing saved: ${(err as Error).message}`,
      });
    }
    try {
      await this.api.putRefined(this.doc.doc_id, this.toPayload());
    } catch (err) {
      if (wasRunning) await this.restartAfterFailedSave();
      if (err instanceof ApiError) {
        const violations = err.violations();
        if (violations) {
          this.error = { message: "service rejected the refined set", violations };
          return (this.lastSave = { ok: false, message: "service rejected the refined set" });
        }
        return (this.lastSave = { ok: false, message: `save failed: ${err.message}` });
      }
      throw err;
    }
    this.dirty = false;
    return (this.lastSave = {
      ok: true,
      message: `saved: ${counts.added} added, ${counts.modified} modified, ${counts.deleted} deleted`,
      counts: { added: counts.added, modified: counts.modified, deleted: counts.deleted },
      serverSecondsActive: serverSeconds,
    });
  }

  private async restartAfterFailedSave(): Promise<void> {
    this.timer.resume();
    try {
      await this.api.postTimer(this.doc.doc_id, "resume");
    } catch {
      this.timerWarning = "timer resume not reported to service";
    }
  }
}
