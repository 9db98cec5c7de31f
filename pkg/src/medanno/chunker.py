"""Deterministic document chunking so prompts stay within a length budget."""

from dataclasses import dataclass

from .model import Document

# Defaults tuned per prompt schema: token-tagging answers are long relative
# to their input, so that schema gets the larger input budget.
DEFAULT_CHUNK_IOB = 250
DEFAULT_CHUNK_DIRECT = 180

_SENTENCE_ENDERS = ".!?"


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    base: int  # offset of chunk text within the document
    text: str


def _segments(text: str) -> list[str]:
    """Split into break-delimited segments; break characters stay with the
    preceding segment, so concatenation is lossless."""
    segments = []
    start = 0
    for i, ch in enumerate(text):
        if ch == "\n":
            segments.append(text[start : i + 1])
            start = i + 1
        elif ch in _SENTENCE_ENDERS and i + 1 < len(text) and text[i + 1].isspace():
            segments.append(text[start : i + 1])
            start = i + 1
    if start < len(text):
        segments.append(text[start:])
    return segments


def chunk_document(doc: Document, max_len: int) -> list[Chunk]:
    """Greedily pack whole segments up to max_len characters per chunk.

    A single segment longer than max_len is hard-split at max_len boundaries.
    Chunk texts concatenate back to the exact document text.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    pieces: list[str] = []
    for seg in _segments(doc.text):
        while len(seg) > max_len:
            pieces.append(seg[:max_len])
            seg = seg[max_len:]
        if seg:
            pieces.append(seg)

    chunks: list[Chunk] = []
    buf = ""
    base = 0
    for piece in pieces:
        if buf and len(buf) + len(piece) > max_len:
            chunks.append(Chunk(doc_id=doc.doc_id, base=base, text=buf))
            base += len(buf)
            buf = ""
        buf += piece
    if buf:
        chunks.append(Chunk(doc_id=doc.doc_id, base=base, text=buf))
    return chunks
