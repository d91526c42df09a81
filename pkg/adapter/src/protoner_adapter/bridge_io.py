"""Bridge wire emission (format version 1).

Header, then one tab-separated record per subword piece; scores are
space-joined shortest round-trip float literals. Piece indices restart
at 0 per sentence and stay contiguous across chunk re-joins.
"""
from __future__ import annotations

from typing import Sequence, TextIO

VERSION = 1


def write_header(sink: TextIO, alphabet: Sequence[str], vocab_id: str, budget: int) -> None:
    sink.write(f"#version {VERSION}\n")
    sink.write("#alphabet " + "\t".join(alphabet) + "\n")
    sink.write(f"#vocab {vocab_id}\n")
    sink.write(f"#budget {budget}\n")


def write_record(
    sink: TextIO,
    doc_id: str,
    sentence_index: int,
    piece_index: int,
    surface: str,
    word_index: int,
    scores: Sequence[float],
) -> None:
    joined = " ".join(repr(float(v)) for v in scores)
    sink.write(
        f"{doc_id}\t{sentence_index}\t{piece_index}\t{surface}\t{word_index}\t{joined}\n"
    )
