/** DOM wiring for the refinement workbench. All state lives in EditSession;
 * this layer renders it and translates browser events into session actions.
 * Served at /ui by the annotation service, same origin as the API.
 */

import { ApiClient, ApiError } from "./api.js";
import { describeItem } from "./diff.js";
import { computeView } from "./render.js";
import { EditSession } from "./session.js";
import { formatSeconds } from "./timer.js";
import { FIELD_ORDER, FieldType } from "./types.js";

const api = new ApiClient("");
let session: EditSession | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const docPicker = el<HTMLSelectElement>("doc-picker");
const sourcePicker = el<HTMLSelectElement>("source-picker");
const loadBtn = el<HTMLButtonElement>("load-btn");
const banner = el<HTMLDivElement>("banner");
const textPanel = el<HTMLPreElement>("text-panel");
const entryChips = el<HTMLDivElement>("entry-chips");
const fieldPicker = el<HTMLSelectElement>("field-picker");
const addBtn = el<HTMLButtonElement>("add-btn");
const resizeBtn = el<HTMLButtonElement>("resize-btn");
const deleteBtn = el<HTMLButtonElement>("delete-btn");
const retypeBtn = el<HTMLButtonElement>("retype-btn");
const orphanBtn = el<HTMLButtonElement>("orphan-btn");
const newEntryBtn = el<HTMLButtonElement>("new-entry-btn");
const saveBtn = el<HTMLButtonElement>("save-btn");
const timerLabel = el<HTMLSpanElement>("timer-label");
const violationsPanel = el<HTMLDivElement>("violations");
const logPanel = el<HTMLOListElement>("correction-log");
const statusLine = el<HTMLDivElement>("status-line");
const selectionLabel = el<HTMLSpanElement>("selection-label");

function showBanner(message: string, kind: "error" | "ok" | "none"): void {
  banner.textContent = message;
  banner.className = kind === "none" ? "banner hidden" : `banner ${kind}`;
}

function selectionOffsets(): { start: number; end: number } | null {
  const sel = window.getSelection();
  if (!sel || sel.rangeCount === 0 || sel.isCollapsed) return null;
  const range = sel.getRangeAt(0);
  const toOffset = (node: Node, off: number): number | null => {
    const span = node instanceof Element ? node : node.parentElement;
    const holder = span?.closest("[data-start]");
    if (!holder || !textPanel.contains(holder)) return null;
    return Number(holder.getAttribute("data-start")) + off;
  };
  const start = toOffset(range.startContainer, range.startOffset);
  const end = toOffset(range.endContainer, range.endOffset);
  if (start === null || end === null || start === end) return null;
  return { start: Math.min(start, end), end: Math.max(start, end) };
}

function render(): void {
  const s = session;
  saveBtn.disabled = !s || !s.dirty || s.error !== null;
  addBtn.disabled = !s;
  resizeBtn.disabled = !s || s.selectedItemId === null;
  deleteBtn.disabled = !s || s.selectedItemId === null;
  retypeBtn.disabled = !s || s.selectedItemId === null;
  orphanBtn.disabled = !s || s.selectedItemId === null;
  newEntryBtn.disabled = !s;
  if (!s) {
    textPanel.textContent = "Load a document to begin.";
    entryChips.textContent = "";
    violationsPanel.textContent = "";
    logPanel.textContent = "";
    return;
  }

  const view = computeView(s.doc.text, s.items, s.entryOrder);
  textPanel.textContent = "";
  for (const seg of view.segments) {
    const node = document.createElement("span");
    node.textContent = seg.text;
    node.setAttribute("data-start", String(seg.start));
    const classes: string[] = [];
    const innermost = seg.fieldTypes[0];
    if (innermost) classes.push("hl", `ft-${innermost}`);
    for (const slot of seg.underlineSlots) classes.push(`ug-${slot}`);
    const top = seg.itemIds[0];
    if (top !== undefined) {
      node.setAttribute("data-item", String(top));
      if (top === s.selectedItemId) classes.push("selected");
    }
    node.className = classes.join(" ");
    textPanel.appendChild(node);
  }

  entryChips.textContent = "";
  const orphanChip = document.createElement("button");
  orphanChip.textContent = "orphans";
  orphanChip.className = "chip" + (s.activeEntryId === null ? " active" : "");
  orphanChip.addEventListener("click", () => {
    if (s.selectedItemId !== null) s.assignEntry(s.selectedItemId, null);
    s.activeEntryId = null;
    render();
  });
  entryChips.appendChild(orphanChip);
  s.entryOrder.forEach((eid, idx) => {
    const chip = document.createElement("button");
    chip.textContent = eid;
    chip.className =
      `chip ug-${idx % 6}` + (s.activeEntryId === eid ? " active" : "");
    chip.addEventListener("click", () => {
      if (s.selectedItemId !== null) s.assignEntry(s.selectedItemId, eid);
      s.activeEntryId = eid;
      render();
    });
    entryChips.appendChild(chip);
  });

  violationsPanel.textContent = "";
  if (s.error) {
    const head = document.createElement("div");
    head.className = "violation-head";
    head.textContent = s.error.message;
    violationsPanel.appendChild(head);
    for (const v of s.error.violations) {
      const li = document.createElement("div");
      li.className = "violation";
      li.textContent = `${v.kind}: ${v.detail}`;
      violationsPanel.appendChild(li);
    }
  }

  logPanel.textContent = "";
  for (const entry of s.log) {
    const li = document.createElement("li");
    const at = new Date(entry.at * 1000).toISOString().slice(11, 19);
    li.textContent = `${at} ${entry.action}: ${entry.detail}`;
    logPanel.appendChild(li);
  }

  const pending = s.pendingDiff();
  statusLine.textContent =
    `${view.highlightCount} highlights, ${view.underlineGroups.length} entries | ` +
    `pending: +${pending.added} ~${pending.modified} -${pending.deleted}` +
    (s.dirty ? " (unsaved)" : "") +
    (pending.items.length > 0 ? ` | last: ${describeItem(pending.items[pending.items.length - 1]!)}` : "");
}

async function loadSelected(): Promise<void> {
  const docId = docPicker.value;
  const source = sourcePicker.value;
  if (!docId) return;
  try {
    session =
      source === "(none)"
        ? await EditSession.loadEmpty(api, docId)
        : await EditSession.load(api, docId, source);
    showBanner(
      session.timerWarning ? session.timerWarning : `loaded ${docId} (${source})`,
      session.timerWarning ? "error" : "ok",
    );
  } catch (err) {
    // Unknown doc/source or unreachable service: keep whatever was loaded.
    showBanner(err instanceof ApiError ? err.message : String(err), "error");
    return;
  }
  render();
}

async function refreshDocuments(): Promise<void> {
  try {
    const docs = await api.listDocuments();
    docPicker.textContent = "";
    for (const d of docs) {
      const opt = document.createElement("option");
      opt.value = d.doc_id;
      opt.textContent = `${d.doc_id} (${d.length} chars)`;
      docPicker.appendChild(opt);
    }
    docPicker.addEventListener("change", () => refreshSources());
    await refreshSources();
    showBanner("", "none");
  } catch (err) {
    showBanner(err instanceof ApiError ? err.message : String(err), "error");
  }
}

async function refreshSources(): Promise<void> {
  const docId = docPicker.value;
  sourcePicker.textContent = "";
  if (!docId) return;
  const docs = await api.listDocuments();
  const info = docs.find((d) => d.doc_id === docId);
  const sources = info && info.sources.length > 0 ? info.sources : ["(none)"];
  for (const srcName of sources) {
    const opt = document.createElement("option");
    opt.value = srcName;
    opt.textContent = srcName;
    sourcePicker.appendChild(opt);
  }
}

function init(): void {
  for (const ft of FIELD_ORDER) {
    const opt = document.createElement("option");
    opt.value = ft;
    opt.textContent = ft;
    fieldPicker.appendChild(opt);
  }

  loadBtn.addEventListener("click", () => void loadSelected());

  document.addEventListener("selectionchange", () => {
    if (!session) return;
    const offs = selectionOffsets();
    session.selection = offs;
    selectionLabel.textContent = offs
      ? `[${offs.start},${offs.end}) "${session.doc.text.slice(offs.start, offs.end)}"`
      : "";
  });

  textPanel.addEventListener("click", (ev) => {
    if (!session) return;
    const target = (ev.target as Element).closest("[data-item]");
    if (target) {
      session.selectedItemId = Number(target.getAttribute("data-item"));
    } else if (!selectionOffsets()) {
      session.selectedItemId = null;
    }
    render();
  });

  addBtn.addEventListener("click", () => {
    if (!session || !session.selection) {
      showBanner("select text to add a span", "error");
      return;
    }
    const ft = fieldPicker.value as FieldType;
    session.addSpan(session.selection.start, session.selection.end, ft, session.activeEntryId);
    render();
  });

  resizeBtn.addEventListener("click", () => {
    if (!session || session.selectedItemId === null || !session.selection) {
      showBanner("select a highlight, then select its new extent", "error");
      return;
    }
    session.modifyBounds(session.selectedItemId, session.selection.start, session.selection.end);
    render();
  });

  deleteBtn.addEventListener("click", () => {
    if (!session || session.selectedItemId === null) return;
    session.deleteSpan(session.selectedItemId);
    render();
  });

  retypeBtn.addEventListener("click", () => {
    if (!session || session.selectedItemId === null) return;
    session.setFieldType(session.selectedItemId, fieldPicker.value as FieldType);
    render();
  });

  orphanBtn.addEventListener("click", () => {
    if (!session || session.selectedItemId === null) return;
    session.assignEntry(session.selectedItemId, null);
    render();
  });

  newEntryBtn.addEventListener("click", () => {
    if (!session) return;
    session.newEntry();
    render();
  });

  saveBtn.addEventListener("click", () => {
    if (!session) return;
    void session.save().then((outcome) => {
      showBanner(outcome.message, outcome.ok ? "ok" : "error");
      render();
    });
  });

  // Only time spent with the tab in front of the rater counts.
  window.addEventListener("blur", () => void session?.pauseTimer());
  window.addEventListener("focus", () => void session?.resumeTimer());

  window.setInterval(() => {
    if (session) timerLabel.textContent = formatSeconds(session.timer.secondsActive());
  }, 500);

  void refreshDocuments();
  render();
}

init();
