"""Shared fixtures: the worked example document and replay-fixture helpers."""

import json
from pathlib import Path

import pytest

from medanno.model import Document

DATA_DIR = Path(__file__).parent / "data"

# One-sentence medication list used throughout the golden tests. Offsets are
# stable: "Ibuprofen" starts at 21, "diclofenac" at 46.
EXAMPLE_TEXT = (
    "CURRENT MEDICATIONS: Ibuprofen as needed, and diclofenac for one month "
    "as needed, for abdominal discomfort."
)


@pytest.fixture
def example_doc() -> Document:
    return Document(doc_id="ex-1", text=EXAMPLE_TEXT)


@pytest.fixture(scope="session")
def iob_answer() -> str:
    return (DATA_DIR / "iob_golden_answer.txt").read_text()


@pytest.fixture(scope="session")
def direct_answer() -> str:
    return (DATA_DIR / "direct_golden_answer.txt").read_text()


def write_replay_fixtures(path: Path, completions: dict[str, str]) -> None:
    """completions maps fingerprint -> completion text."""
    lines = [
        json.dumps({"fingerprint": fp, "text": text}, ensure_ascii=False)
        for fp, text in completions.items()
    ]
    path.write_text("\n".join(lines) + "\n")


# Three-document replay corpus shared by the batch-run tests: the worked
# example above plus one short positive and one negative note, with
# hand-written completions for both prompt schemas.

NOTE_B = "She takes Aspirin 81 mg daily."
NOTE_C = "No meds today."

IOB_ANSWER_B = "\n".join(
    [
        "'She', O, '<None>'",
        "'takes', O, '<None>'",
        "'Aspirin', B-MEDICATION, 'entity_1'",
        "'81', B-DOSE, 'entity_1'",
        "'mg', I-DOSE, 'entity_1'",
        "'daily', B-FREQUENCY, 'entity_1'",
    ]
)

DIRECT_ANSWER_B = """```yaml
entities:
  - group: 1
    MEDICATION:
      text: Aspirin
      start_pos: 10
      end_pos: 17
    DOSE:
      text: 81 mg
      start_pos: 18
      end_pos: 23
    FREQUENCY:
      text: daily
      start_pos: 24
      end_pos: 29
```"""

IOB_ANSWER_C = "\n".join(
    ["'No', O, '<None>'", "'meds', O, '<None>'", "'today', O, '<None>'"]
)

DIRECT_ANSWER_C = "```yaml\nentities: []\n```"


def corpus_documents() -> list[Document]:
    return [
        Document(doc_id="note-a", text=EXAMPLE_TEXT),
        Document(doc_id="note-b", text=NOTE_B),
        Document(doc_id="note-c", text=NOTE_C),
    ]


@pytest.fixture()
def standard_answers(iob_answer, direct_answer) -> dict:
    from medanno.prompting import SCHEMA_DIRECT, SCHEMA_IOB

    return {
        ("note-a", SCHEMA_IOB): iob_answer,
        ("note-a", SCHEMA_DIRECT): direct_answer,
        ("note-b", SCHEMA_IOB): IOB_ANSWER_B,
        ("note-b", SCHEMA_DIRECT): DIRECT_ANSWER_B,
        ("note-c", SCHEMA_IOB): IOB_ANSWER_C,
        ("note-c", SCHEMA_DIRECT): DIRECT_ANSWER_C,
    }
