"""Serialization round-trips and the gold corpus importers."""

import json

import pytest
from hypothesis import given, strategies as st

from medanno.io import (
    annotation_set_from_json,
    annotation_set_to_json,
    export_corpus,
    import_gold_corpus,
    read_annotation_sets_jsonl,
    read_corpus_jsonl,
    write_annotation_sets_jsonl,
    write_corpus_jsonl,
)
from medanno.model import (
    Document,
    FieldSpan,
    FieldType,
    FormatError,
    OffsetError,
    make_annotation_set,
    make_entry,
    make_timing,
)

FTYPES = list(FieldType)


@st.composite
def annotation_sets(draw):
    text_len = draw(st.integers(min_value=8, max_value=60))
    spans = []
    for _ in range(draw(st.integers(min_value=0, max_value=6))):
        start = draw(st.integers(min_value=0, max_value=text_len - 2))
        end = draw(st.integers(min_value=start + 1, max_value=text_len))
        ft = draw(st.sampled_from(FTYPES))
        spans.append(FieldSpan(field_type=ft, start=start, end=end, text="x" * (end - start)))
    n_entries = draw(st.integers(min_value=0, max_value=3))
    entries = []
    for i in range(n_entries):
        take = draw(st.lists(st.sampled_from(spans), max_size=4)) if spans else []
        if take:
            entries.append(make_entry(f"e{i}", take))
    timing = make_timing([(0.0, "start"), (12.5, "stop")]) if draw(st.booleans()) else None
    return make_annotation_set("d1", "gold", entries, orphans=spans, timing=timing, meta={"k": "v"})


class TestJsonRoundTrip:
    @given(annotation_sets())
    def test_annotation_set_round_trip(self, aset):
        back = annotation_set_from_json(annotation_set_to_json(aset))
        assert back.doc_id == aset.doc_id
        assert back.source == aset.source
        assert back.spans == aset.spans
        assert back.entries == aset.entries
        assert sorted(s.sort_key() for s in back.orphans) == sorted(
            s.sort_key() for s in aset.orphans
        )
        assert back.meta == aset.meta
        if aset.timing is None:
            assert back.timing is None
        else:
            assert back.timing.seconds_active == aset.timing.seconds_active
            assert back.timing.events == aset.timing.events

    def test_json_is_stable_bytes(self):
        n = FieldSpan(field_type=FieldType.NAME, start=0, end=6, text="Prozac")
        aset = make_annotation_set("d1", "gold", [make_entry("e1", [n])], meta={"b": 1, "a": 2})
        one = json.dumps(annotation_set_to_json(aset), sort_keys=True)
        two = json.dumps(annotation_set_to_json(aset), sort_keys=True)
        assert one == two

    def test_corpus_jsonl_round_trip(self, tmp_path):
        docs = [Document(doc_id="a", text="alpha"), Document(doc_id="b", text="beta\nlines")]
        p = tmp_path / "corpus.jsonl"
        write_corpus_jsonl(docs, p)
        assert read_corpus_jsonl(p) == docs

    def test_annotation_jsonl_round_trip(self, tmp_path):
        n = FieldSpan(field_type=FieldType.NAME, start=0, end=5, text="alpha")
        sets = [make_annotation_set("a", "gold", [make_entry("e1", [n])])]
        p = tmp_path / "ann.jsonl"
        write_annotation_sets_jsonl(sets, p)
        assert read_annotation_sets_jsonl(p) == sets

    def test_bad_jsonl_line_reports_line_number(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"doc_id": "a", "text": "ok"}\nnot json\n')
        with pytest.raises(FormatError) as exc:
            read_corpus_jsonl(p)
        assert "2" in str(exc.value)


class TestJsonlImport:
    def test_import_directory(self, tmp_path):
        docs = [Document(doc_id="a", text="Prozac 20 mg. More text here")]
        n = FieldSpan(field_type=FieldType.NAME, start=0, end=6, text="Prozac")
        # trailing period: importer must normalize it away
        d = FieldSpan(field_type=FieldType.DOSE, start=7, end=13, text="20 mg.")
        sets = [make_annotation_set("a", "gold", [make_entry("e1", [n, d])])]
        export_corpus(docs, sets, tmp_path)
        got_docs, got_sets = import_gold_corpus(tmp_path, format="jsonl")
        assert got_docs == docs
        (aset,) = got_sets
        dose = [s for s in aset.spans if s.field_type == FieldType.DOSE]
        assert [(s.start, s.end, s.text) for s in dose] == [(7, 12, "20 mg")]

    def test_import_rejects_text_mismatch(self, tmp_path):
        (tmp_path / "documents.jsonl").write_text('{"doc_id": "a", "text": "Prozac 20 mg"}\n')
        bad = {
            "doc_id": "a",
            "source": "gold",
            "entries": [
                {
                    "entry_id": "e1",
                    "fields": [{"field_type": "name", "start": 0, "end": 6, "text": "Zoloft"}],
                }
            ],
        }
        (tmp_path / "annotations.jsonl").write_text(json.dumps(bad) + "\n")
        with pytest.raises(OffsetError):
            import_gold_corpus(tmp_path, format="jsonl")


SYNTHETIC_NOTE = """Record #1
CURRENT MEDICATIONS:
Ibuprofen 800 mg po tid as needed
Diclofenac gel topical daily
"""


class TestStandoffImport:
    def write_note(self, tmp_path, standoff_lines):
        # one flat directory: the note plus its .m label file
        (tmp_path / "note1.txt").write_text(SYNTHETIC_NOTE)
        (tmp_path / "note1.m").write_text("\n".join(standoff_lines) + "\n")
        return tmp_path

    def test_token_offsets_convert_to_characters(self, tmp_path):
        # line 3, tokens 0..5: Ibuprofen 800 mg po tid "as needed"
        root = self.write_note(
            tmp_path,
            [
                'm="ibuprofen" 3:0 3:0||do="800 mg" 3:1 3:2||mo="po" 3:3 3:3'
                '||f="tid" 3:4 3:4||du="nm"||r="nm"||ln="list"',
            ],
        )
        docs, sets = import_gold_corpus(root, format="i2b2")
        (doc,) = docs
        (aset,) = sets
        by_type = {s.field_type: s for s in aset.spans}
        name = by_type[FieldType.NAME]
        assert doc.text[name.start : name.end] == "Ibuprofen"
        dose = by_type[FieldType.DOSE]
        assert doc.text[dose.start : dose.end] == "800 mg"
        assert by_type[FieldType.MODE].text == "po"
        assert by_type[FieldType.FREQUENCY].text == "tid"
        assert FieldType.DURATION not in by_type  # nm means absent
        (entry,) = aset.entries
        assert entry.entry_id == "note1-m1"

    def test_value_slice_disagreement_raises(self, tmp_path):
        root = self.write_note(tmp_path, ['m="naproxen" 3:0 3:0||do="nm"||mo="nm"||f="nm"||du="nm"||r="nm"'])
        with pytest.raises(OffsetError):
            import_gold_corpus(root, format="i2b2")

    def test_discontinuous_span_dropped_not_fatal(self, tmp_path):
        root = self.write_note(
            tmp_path,
            [
                'm="ibuprofen" 3:0 3:0||do="nm"||mo="nm"||f="nm"||du="nm"||r="nm"',
                'm="diclofenac gel" 4:0 4:0,4:1 4:1||do="nm"||mo="nm"||f="nm"||du="nm"||r="nm"',
            ],
        )
        docs, sets = import_gold_corpus(root, format="i2b2")
        (aset,) = sets
        # only the continuous mention survives
        assert len(aset.entries) == 1
        assert aset.entries[0].fields[0].text == "Ibuprofen"

    def test_case_and_spacing_compare_loosely(self, tmp_path):
        # value is lowercased in the file while the note is capitalized
        root = self.write_note(tmp_path, ['m="IBUPROFEN" 3:0 3:0||do="nm"||mo="nm"||f="nm"||du="nm"||r="nm"'])
        docs, sets = import_gold_corpus(root, format="i2b2")
        assert sets[0].entries[0].fields[0].text == "Ibuprofen"
