"""Turn raw model completions into document-anchored annotations.

Two completion shapes are supported: comma-delimited token tagging and
fenced YAML entity blocks. Both feed the same alignment ladder, and nothing
in this module ever raises on model output; unusable pieces are logged and
skipped.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

import yaml

from .chunker import Chunk
from .model import (
    AnnotationSet,
    DocMismatch,
    Document,
    EmptyAfterStrip,
    FieldSpan,
    FieldType,
    MedicationEntry,
    make_annotation_set,
    make_entry,
    normalize_span,
)

log = logging.getLogger(__name__)

LOG_MALFORMED = "malformed-line"
LOG_YAML = "yaml-error"
LOG_UNMATCHED = "unmatched-entity"
LOG_DUPLICATE = "duplicate-field"
LOG_EMPTY = "empty-after-strip"

FUZZY_MAX_NORMALIZED = 0.2
FUZZY_WINDOW_SLACK = 2

# Tag/key names used by the prompt schemas; the name field travels as
# MEDICATION on the wire.
_FIELD_NAMES = {
    "MEDICATION": FieldType.NAME,
    "NAME": FieldType.NAME,
    "DOSE": FieldType.DOSE,
    "MODE": FieldType.MODE,
    "FREQUENCY": FieldType.FREQUENCY,
    "DURATION": FieldType.DURATION,
    "REASON": FieldType.REASON,
}

_NO_GROUP = {"<none>", "none", ""}


@dataclass
class LogEntry:
    kind: str
    detail: str
    chunk_base: Optional[int] = None


class ResolveLog:
    """Accumulates skip/repair events while resolving one or more completions."""

    def __init__(self):
        self.entries: list[LogEntry] = []

    def add(self, kind: str, detail: str, chunk_base: Optional[int] = None) -> None:
        self.entries.append(LogEntry(kind=kind, detail=detail, chunk_base=chunk_base))

    def extend(self, other: "ResolveLog", chunk_base: Optional[int] = None) -> None:
        for e in other.entries:
            self.entries.append(
                LogEntry(kind=e.kind, detail=e.detail, chunk_base=e.chunk_base if e.chunk_base is not None else chunk_base)
            )

    def count(self, kind: str) -> int:
        return sum(1 for e in self.entries if e.kind == kind)

    def kinds(self) -> set[str]:
        return {e.kind for e in self.entries}

    def to_jsonl_lines(self, doc_id: str) -> list[str]:
        return [
            json.dumps(
                {"doc_id": doc_id, "chunk_base": e.chunk_base, "kind": e.kind, "detail": e.detail},
                ensure_ascii=False,
            )
            for e in self.entries
        ]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TokenTag:
    token: str
    prefix: str  # O | B | I
    field_type: Optional[FieldType]  # None iff prefix == O
    groups: tuple[str, ...]  # empty iff prefix == O


@dataclass(frozen=True)
class FieldClaim:
    text: str
    claimed_start: Optional[int] = None
    claimed_end: Optional[int] = None


@dataclass
class ChunkEntity:
    """One entity group exactly as the completion described it (chunk-local)."""

    group: str
    fields: dict[FieldType, FieldClaim] = field(default_factory=dict)


def _split_outside_quotes(line: str) -> list[str]:
    parts = []
    buf = []
    in_quote = False
    for ch in line:
        if ch == "'":
            in_quote = not in_quote
            buf.append(ch)
        elif ch == "," and not in_quote:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return parts


def _unquote(part: str) -> Optional[str]:
    part = part.strip()
    if len(part) >= 2 and part[0] == "'" and part[-1] == "'":
        return part[1:-1]
    return None


def parse_iob_output(text: str) -> tuple[list[TokenTag], ResolveLog]:
    """Parse 'token', TAG, 'group' lines; anything that does not fit is
    logged as malformed and skipped."""
    tags: list[TokenTag] = []
    rlog = ResolveLog()
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = _split_outside_quotes(line)
        if len(parts) != 3:
            rlog.add(LOG_MALFORMED, f"expected 3 comma-separated parts: {line.strip()!r}")
            continue
        token = _unquote(parts[0])
        if token is None:
            rlog.add(LOG_MALFORMED, f"token is not single-quoted: {line.strip()!r}")
            continue
        tag = parts[1].strip().upper()
        group_raw = _unquote(parts[2])
        if group_raw is None:
            group_raw = parts[2].strip()
        groups = tuple(
            dict.fromkeys(g.strip() for g in group_raw.split("|") if g.strip())
        )
        if group_raw.strip().lower() in _NO_GROUP:
            groups = ()
        if tag == "O":
            tags.append(TokenTag(token=token, prefix="O", field_type=None, groups=()))
            continue
        if len(tag) > 2 and tag[0] in "BI" and tag[1] == "-" and tag[2:] in _FIELD_NAMES:
            if not groups:
                rlog.add(LOG_MALFORMED, f"{tag} tag without a group label: {line.strip()!r}")
                continue
            tags.append(
                TokenTag(token=token, prefix=tag[0], field_type=_FIELD_NAMES[tag[2:]], groups=groups)
            )
        else:
            rlog.add(LOG_MALFORMED, f"unknown tag {parts[1].strip()!r}: {line.strip()!r}")
    return tags, rlog


def assemble_iob_entities(tags: Iterable[TokenTag], rlog: Optional[ResolveLog] = None) -> list[ChunkEntity]:
    """Group tagged tokens into entities.

    A field occurrence is a B-X token plus the consecutive I-X tokens carrying
    the identical group set. An I-X with no open matching occurrence starts a
    new one (lenient repair, logged). Occurrences fan out to every group they
    name; within one group the first occurrence of a field type wins.
    """
    rlog = rlog if rlog is not None else ResolveLog()
    occurrences: list[tuple[FieldType, tuple[str, ...], str]] = []
    cur_ft: Optional[FieldType] = None
    cur_groups: tuple[str, ...] = ()
    cur_tokens: list[str] = []

    def close():
        nonlocal cur_ft, cur_groups, cur_tokens
        if cur_ft is not None and cur_tokens:
            occurrences.append((cur_ft, cur_groups, " ".join(cur_tokens)))
        cur_ft, cur_groups, cur_tokens = None, (), []

    for tag in tags:
        if tag.prefix == "O":
            close()
        elif tag.prefix == "B":
            close()
            cur_ft, cur_groups, cur_tokens = tag.field_type, tag.groups, [tag.token]
        else:  # I
            if cur_ft == tag.field_type and set(cur_groups) == set(tag.groups):
                cur_tokens.append(tag.token)
            else:
                rlog.add(
                    LOG_MALFORMED,
                    f"I-{tag.field_type.value if tag.field_type else '?'} without matching open occurrence "
                    f"at {tag.token!r}; repaired as a new occurrence",
                )
                close()
                cur_ft, cur_groups, cur_tokens = tag.field_type, tag.groups, [tag.token]
    close()

    entities: dict[str, ChunkEntity] = {}
    for ft, groups, text in occurrences:
        for label in groups:
            ent = entities.setdefault(label, ChunkEntity(group=label))
            if ft in ent.fields:
                rlog.add(
                    LOG_DUPLICATE,
                    f"group {label!r} already has {ft.value} {ent.fields[ft].text!r}; dropping {text!r}",
                )
                continue
            ent.fields[ft] = FieldClaim(text=text)
    return list(entities.values())


_FENCE = re.compile(r"```[^\n]*\n?")


def _extract_fenced(text: str) -> str:
    m = _FENCE.search(text)
    if m is None:
        return text
    rest = text[m.end() :]
    closing = rest.find("```")
    return rest if closing < 0 else rest[:closing]


def _coerce_claim(value) -> Optional[int]:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            return None
    return None


def parse_direct_output(text: str) -> tuple[list[ChunkEntity], ResolveLog]:
    """Parse a fenced YAML entity block (or the whole text when unfenced)."""
    rlog = ResolveLog()
    payload = _extract_fenced(text)
    try:
        data = yaml.safe_load(payload)
    except Exception as exc:  # completions produce every YAML failure mode there is
        rlog.add(LOG_YAML, f"unparseable block: {exc}")
        return [], rlog
    if data is None:
        rlog.add(LOG_YAML, "block is empty")
        return [], rlog
    if isinstance(data, list):
        items = data
    elif isinstance(data, dict):
        raw = data.get("entities", data)
        if isinstance(raw, list):
            items = raw
        elif isinstance(raw, dict):
            # tolerate a mapping of group label -> entity
            items = []
            for k, v in raw.items():
                if isinstance(v, dict):
                    v.setdefault("group", k)
                    items.append(v)
                else:
                    rlog.add(LOG_MALFORMED, f"entity under {k!r} is not a mapping")
        else:
            rlog.add(LOG_YAML, f"entities is {type(raw).__name__}, expected a list")
            return [], rlog
    else:
        rlog.add(LOG_YAML, f"top level is {type(data).__name__}, expected a mapping")
        return [], rlog

    entities: dict[str, ChunkEntity] = {}
    for idx, item in enumerate(items):
        if not isinstance(item, dict):
            rlog.add(LOG_MALFORMED, f"entity {idx} is {type(item).__name__}, expected a mapping")
            continue
        group = item.get("group")
        if group is None:
            group = str(idx + 1)
            rlog.add(LOG_MALFORMED, f"entity {idx} has no group label; assigned {group!r}")
        label = str(group)
        ent = entities.setdefault(label, ChunkEntity(group=label))
        for key, value in item.items():
            if not isinstance(key, str):
                continue
            ft = _FIELD_NAMES.get(key.strip().upper())
            if ft is None:
                continue
            claim = _value_to_claim(value)
            if claim is None:
                continue
            if ft in ent.fields:
                rlog.add(
                    LOG_DUPLICATE,
                    f"group {label!r} already has {ft.value} {ent.fields[ft].text!r}; dropping {claim.text!r}",
                )
                continue
            ent.fields[ft] = claim
    return [e for e in entities.values() if e.fields], rlog


def _value_to_claim(value) -> Optional[FieldClaim]:
    if isinstance(value, dict):
        text = value.get("text")
        if text is None or str(text) == "":
            return None
        return FieldClaim(
            text=str(text),
            claimed_start=_coerce_claim(value.get("start_pos")),
            claimed_end=_coerce_claim(value.get("end_pos")),
        )
    if value is None or str(value) == "":
        return None
    if isinstance(value, (list, tuple)):
        return None
    return FieldClaim(text=str(value))


def levenshtein(a: str, b: str, limit: Optional[int] = None) -> int:
    """Edit distance; with limit set, returns limit+1 as soon as the distance
    provably exceeds it."""
    if a == b:
        return 0
    if len(a) > len(b):
        a, b = b, a
    if not a:
        return len(b)
    if limit is not None and len(b) - len(a) > limit:
        return limit + 1
    prev = list(range(len(a) + 1))
    for j, cb in enumerate(b, start=1):
        cur = [j]
        for i, ca in enumerate(a, start=1):
            cur.append(min(prev[i] + 1, cur[i - 1] + 1, prev[i - 1] + (ca != cb)))
        if limit is not None and min(cur) > limit:
            return limit + 1
        prev = cur
    return prev[-1]


def align_entity(
    entity_text: str,
    claimed: Optional[tuple[int, int]],
    chunk: Chunk,
    max_normalized: float = FUZZY_MAX_NORMALIZED,
    window_slack: int = FUZZY_WINDOW_SLACK,
) -> Optional[tuple[int, int]]:
    """Locate entity_text inside the chunk, most trusted evidence first.

    1. the claimed offsets, when they reproduce the text exactly;
    2. an exact substring occurrence, the one nearest the claimed start
       (first occurrence when nothing was claimed);
    3. the sliding window (length within +/- window_slack) minimizing edit
       distance, accepted when distance / max(len) <= max_normalized,
       leftmost on ties.

    Returns chunk-local offsets, or None when every rung misses.
    """
    hay = chunk.text
    if not entity_text:
        return None
    if claimed is not None:
        cs, ce = claimed
        if cs is not None and ce is not None and 0 <= cs < ce <= len(hay) and hay[cs:ce] == entity_text:
            return cs, ce

    starts = []
    pos = hay.find(entity_text)
    while pos >= 0:
        starts.append(pos)
        pos = hay.find(entity_text, pos + 1)
    if starts:
        if claimed is not None and claimed[0] is not None:
            anchor = claimed[0]
            best = min(starts, key=lambda s: (abs(s - anchor), s))
        else:
            best = starts[0]
        return best, best + len(entity_text)

    n = len(entity_text)
    best_hit: Optional[tuple[int, int, int]] = None  # (dist, start, wlen)
    for wlen in range(max(1, n - window_slack), n + window_slack + 1):
        if wlen > len(hay):
            break
        for start in range(len(hay) - wlen + 1):
            cutoff = best_hit[0] if best_hit is not None else None
            d = levenshtein(entity_text, hay[start : start + wlen], limit=cutoff)
            if best_hit is None or (d, start, wlen) < best_hit:
                best_hit = (d, start, wlen)
    if best_hit is not None:
        d, start, wlen = best_hit
        if d / max(n, wlen) <= max_normalized:
            return start, start + wlen
    return None


def to_document_annotations(
    per_chunk: Iterable[tuple[Chunk, Iterable[ChunkEntity]]],
    doc: Document,
    source: str,
    rlog: Optional[ResolveLog] = None,
    max_normalized: float = FUZZY_MAX_NORMALIZED,
    window_slack: int = FUZZY_WINDOW_SLACK,
    meta: Optional[dict] = None,
) -> AnnotationSet:
    """Lift chunk-local entities into one validated document annotation set.

    Fields that fail alignment or vanish under edge normalization are dropped
    and logged; entries keep their remaining fields. Entry ids are
    "<chunk base>-<group label>".
    """
    rlog = rlog if rlog is not None else ResolveLog()
    entries: list[MedicationEntry] = []
    for chunk, entities in per_chunk:
        if chunk.doc_id != doc.doc_id:
            raise DocMismatch(f"chunk belongs to {chunk.doc_id!r}, not {doc.doc_id!r}")
        if doc.text[chunk.base : chunk.base + len(chunk.text)] != chunk.text:
            raise DocMismatch(f"chunk at base {chunk.base} does not match the document text")
        for ent in entities:
            spans = []
            for ft, claim in ent.fields.items():
                claimed = None
                if claim.claimed_start is not None and claim.claimed_end is not None:
                    claimed = (claim.claimed_start, claim.claimed_end)
                hit = align_entity(
                    claim.text, claimed, chunk, max_normalized=max_normalized, window_slack=window_slack
                )
                if hit is None:
                    rlog.add(
                        LOG_UNMATCHED,
                        f"{ft.value} {claim.text!r} aligns nowhere in the chunk",
                        chunk_base=chunk.base,
                    )
                    continue
                start, end = chunk.base + hit[0], chunk.base + hit[1]
                raw = FieldSpan(field_type=ft, start=start, end=end, text=doc.text[start:end])
                try:
                    spans.append(normalize_span(doc, raw))
                except EmptyAfterStrip:
                    rlog.add(
                        LOG_EMPTY,
                        f"{ft.value} {claim.text!r} at [{start},{end}) is empty after stripping",
                        chunk_base=chunk.base,
                    )
            if spans:
                entries.append(make_entry(f"{chunk.base}-{ent.group}", spans))
    return make_annotation_set(doc.doc_id, source, entries, meta=meta)
