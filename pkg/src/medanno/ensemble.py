"""Union ensembling of two annotation sets for the same document."""

from .model import (
    AnnotationSet,
    DocMismatch,
    FieldType,
    MedicationEntry,
    make_annotation_set,
    make_entry,
)

ENSEMBLE_SOURCE = "llm-ensemble"


def _name_spans(entry: MedicationEntry):
    return [s for s in entry.fields if s.field_type == FieldType.NAME]


def ensemble_union(a: AnnotationSet, b: AnnotationSet) -> AnnotationSet:
    """Recall-oriented union of two sets.

    The output span inventory is the exact-duplicate-collapsed union of both
    inputs, so overlapping-but-unequal variants all survive. Entries whose
    Name spans overlap by at least one character are merged (transitively)
    into one entry holding the union of their fields; everything else passes
    through. Output entries are renamed ens-1, ens-2, ... in document order,
    which makes the operation commutative up to naming.
    """
    if a.doc_id != b.doc_id:
        raise DocMismatch(f"cannot ensemble {a.doc_id!r} with {b.doc_id!r}")

    members = [("a", i, e) for i, e in enumerate(a.entries)] + [
        ("b", i, e) for i, e in enumerate(b.entries)
    ]
    parent = list(range(len(members)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: int, y: int) -> None:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    n_a = len(a.entries)
    for i, ea in enumerate(a.entries):
        names_a = _name_spans(ea)
        if not names_a:
            continue
        for j, eb in enumerate(b.entries):
            names_b = _name_spans(eb)
            if any(sa.overlap(sb) >= 1 for sa in names_a for sb in names_b):
                union(i, n_a + j)

    groups: dict[int, list[MedicationEntry]] = {}
    for idx, (_, _, entry) in enumerate(members):
        groups.setdefault(find(idx), []).append(entry)

    merged = []
    for root in groups:
        fields = [s for e in groups[root] for s in e.fields]
        if fields:
            merged.append(fields)
    merged.sort(key=lambda fields: sorted(s.sort_key() for s in fields))
    entries = [make_entry(f"ens-{i + 1}", fields) for i, fields in enumerate(merged)]

    orphans = list(a.spans) + list(b.spans)
    meta = {"members": sorted([a.source, b.source])}
    return make_annotation_set(a.doc_id, ENSEMBLE_SOURCE, entries, orphans, meta=meta)
