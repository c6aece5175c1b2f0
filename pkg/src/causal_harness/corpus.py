"""Reading, validating and summarizing semicolon-delimited span corpora.

The on-disk format is one record per line, header ``Index; Text; Cause; Effect``
(gold columns absent for unlabeled corpora), delimiter ``;`` with one optional
space after it, ``"`` quoting for fields that contain the delimiter or a quote.
Text fields are never trimmed or normalized at parse time.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple, Optional, Sequence, Union


class CorpusError(Exception):
    """Unrecoverable defect in a corpus stream."""


class MissingHeaderError(CorpusError):
    pass


class EmptyCorpusError(CorpusError):
    pass


class NoGoldError(CorpusError):
    """Operation requires gold annotations and the segment has none."""


class Gold(NamedTuple):
    cause: str
    effect: str


@dataclass(frozen=True)
class Segment:
    """One corpus row: opaque id, source text, optional gold cause/effect."""

    id: str
    text: str
    gold: Optional[Gold] = None


@dataclass(frozen=True)
class ParseWarning:
    row: int  # 1-based data-row number (header excluded)
    kind: str  # "wrong-column-count" | "empty-text" | "empty-gold-field"
    message: str

    def __str__(self) -> str:
        return f"row {self.row}: {self.message}"


@dataclass(frozen=True)
class ValidationRecord:
    cause_is_substring: bool
    effect_is_substring: bool


@dataclass(frozen=True)
class DatasetStats:
    n_documents: int
    n_duplicates: int
    avg_doc_len: float
    min_doc_len: int
    max_doc_len: int
    avg_cause_len: Optional[float] = None
    min_cause_len: Optional[int] = None
    max_cause_len: Optional[int] = None
    avg_effect_len: Optional[float] = None
    min_effect_len: Optional[int] = None
    max_effect_len: Optional[int] = None


DELIMITER = ";"
QUOTE = '"'
HEADER_GOLD = ("index", "text", "cause", "effect")
HEADER_PLAIN = ("index", "text")


def split_record(line: str) -> list[str]:
    """Split one record line into fields.

    A single space immediately after each delimiter belongs to the delimiter
    and is dropped; any further whitespace is field content.  A field whose
    first character (after that optional space) is ``"`` is quoted: it runs to
    the matching quote, with ``""`` unescaping to a literal quote.
    """
    fields: list[str] = []
    i = 0
    n = len(line)
    while True:
        if i < n and line[i] == " " and fields:  # the delimiter-side space
            i += 1
        if i < n and line[i] == QUOTE:
            buf = []
            i += 1
            while i < n:
                if line[i] == QUOTE:
                    if i + 1 < n and line[i + 1] == QUOTE:
                        buf.append(QUOTE)
                        i += 2
                        continue
                    i += 1
                    break
                buf.append(line[i])
                i += 1
            fields.append("".join(buf))
            # anything between the closing quote and the delimiter is dropped
            while i < n and line[i] != DELIMITER:
                i += 1
        else:
            j = line.find(DELIMITER, i)
            if j == -1:
                j = n
            fields.append(line[i:j])
            i = j
        if i >= n:
            return fields
        i += 1  # skip the delimiter


def _quote_field(value: str) -> str:
    if "\n" in value or "\r" in value:
        raise ValueError("corpus fields cannot contain line breaks")
    if DELIMITER in value or QUOTE in value:
        return QUOTE + value.replace(QUOTE, QUOTE * 2) + QUOTE
    return value


def _iter_lines(stream: Union[Iterable[str], IO[str]]) -> Iterator[str]:
    for line in stream:
        yield line.rstrip("\r\n")


def parse_corpus(
    stream: Union[Iterable[str], IO[str]], has_gold: bool
) -> tuple[list[Segment], list[ParseWarning]]:
    """Parse a corpus stream into segments, in file order.

    Structurally defective rows are reported as warnings and skipped, never
    silently dropped.  Raises :class:`MissingHeaderError` when the header row
    is absent or malformed, and :class:`CorpusError` when data rows exist but
    none of them parses.
    """
    lines = _iter_lines(stream)
    try:
        header_line = next(lines)
    except StopIteration:
        raise MissingHeaderError("empty stream: no header row") from None
    header = tuple(f.strip().lower() for f in split_record(header_line))
    expected = HEADER_GOLD if has_gold else HEADER_PLAIN
    if header != expected:
        raise MissingHeaderError(
            f"expected header {expected!r}, found {header!r}"
        )

    n_columns = len(expected)
    segments: list[Segment] = []
    warnings: list[ParseWarning] = []
    n_rows = 0
    for row, line in enumerate(lines, start=1):
        if line == "":
            continue
        n_rows += 1
        fields = split_record(line)
        if len(fields) != n_columns:
            warnings.append(
                ParseWarning(
                    row,
                    "wrong-column-count",
                    f"expected {n_columns} columns, found {len(fields)}",
                )
            )
            continue
        seg_id, text = fields[0], fields[1]
        if not text.strip():
            warnings.append(ParseWarning(row, "empty-text", "text field is empty"))
            continue
        gold: Optional[Gold] = None
        if has_gold:
            cause, effect = fields[2], fields[3]
            # Both blank means "no annotation" (test rows, failed predictions);
            # a pair is attached as soon as either side carries text.
            if cause.strip() or effect.strip():
                gold = Gold(cause, effect)
        segments.append(Segment(id=seg_id, text=text, gold=gold))

    if n_rows > 0 and not segments:
        raise CorpusError(f"no row parsed ({len(warnings)} defective rows)")
    return segments, warnings


def sniff_has_gold(header_line: str) -> bool:
    header = tuple(f.strip().lower() for f in split_record(header_line.rstrip("\r\n")))
    if header == HEADER_GOLD:
        return True
    if header == HEADER_PLAIN:
        return False
    raise MissingHeaderError(f"unrecognized header {header!r}")


def load_corpus(
    path: Union[str, Path], has_gold: Optional[bool] = None
) -> tuple[list[Segment], list[ParseWarning]]:
    """Read a corpus file; when ``has_gold`` is None the header decides."""
    text = Path(path).read_text(encoding="utf-8-sig")
    if has_gold is None:
        first = text.splitlines()[0] if text.splitlines() else ""
        has_gold = sniff_has_gold(first)
    return parse_corpus(io.StringIO(text), has_gold)


def write_predictions(
    rows: Iterable[tuple[str, str, str, str]], stream: IO[str]
) -> None:
    """Write ``(id, text, cause, effect)`` rows in the corpus file format."""
    stream.write("Index; Text; Cause; Effect\n")
    for seg_id, text, cause, effect in rows:
        fields = [_quote_field(f) for f in (seg_id, text, cause, effect)]
        stream.write(f"{DELIMITER} ".join(fields) + "\n")


def save_predictions(
    rows: Iterable[tuple[str, str, str, str]], path: Union[str, Path]
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_predictions(rows, fh)


def segment_to_row(seg: Segment) -> tuple[str, str, str, str]:
    cause = seg.gold.cause if seg.gold else ""
    effect = seg.gold.effect if seg.gold else ""
    return (seg.id, seg.text, cause, effect)


def validate_segment(seg: Segment) -> ValidationRecord:
    """Check that each gold side occurs verbatim (case-sensitive) in the text."""
    if seg.gold is None:
        raise NoGoldError(f"segment {seg.id!r} has no gold annotation")
    cause, effect = seg.gold
    return ValidationRecord(
        cause_is_substring=bool(cause) and cause in seg.text,
        effect_is_substring=bool(effect) and effect in seg.text,
    )


def token_count(text: str) -> int:
    """Tokens are maximal runs of non-whitespace characters."""
    return len(text.split())


def compute_stats(segments: Sequence[Segment]) -> DatasetStats:
    """Summarize a corpus: row/duplicate counts and token-length triples.

    Duplicates are rows minus distinct raw text values.  Cause/effect length
    triples are populated only when every segment carries gold.
    """
    if not segments:
        raise EmptyCorpusError("cannot compute stats over an empty corpus")
    doc_lens = [token_count(s.text) for s in segments]
    n_documents = len(segments)
    n_duplicates = n_documents - len({s.text for s in segments})
    stats = {
        "n_documents": n_documents,
        "n_duplicates": n_duplicates,
        "avg_doc_len": sum(doc_lens) / n_documents,
        "min_doc_len": min(doc_lens),
        "max_doc_len": max(doc_lens),
    }
    if all(s.gold is not None for s in segments):
        cause_lens = [token_count(s.gold.cause) for s in segments]
        effect_lens = [token_count(s.gold.effect) for s in segments]
        stats.update(
            avg_cause_len=sum(cause_lens) / n_documents,
            min_cause_len=min(cause_lens),
            max_cause_len=max(cause_lens),
            avg_effect_len=sum(effect_lens) / n_documents,
            min_effect_len=min(effect_lens),
            max_effect_len=max(effect_lens),
        )
    return DatasetStats(**stats)
