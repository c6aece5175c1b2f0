"""Turn raw model output into grounded spans of the source document.

Two problems live here.  First, generated answers arrive in loosely
structured text (a dict-like block, sometimes wrapped in chatter, sometimes
degraded to ``Cause:`` lines); :func:`parse_response` recovers the candidate
strings without ever raising.  Second, generated strings are not guaranteed
to be verbatim substrings of the document; :func:`ground_span` maps a
candidate back to a contiguous source span through a cascade of increasingly
tolerant matchers, so that downstream token scoring always works on real
offsets.

A rule-based cue-phrase splitter (:func:`cue_baseline`) provides a
no-model reference point.
"""

from __future__ import annotations

import ast
import enum
import json
import math
import re
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

FUZZY_THRESHOLD = 0.35  # max normalized edit distance accepted by the fuzzy stage
WINDOW_SLACK = 0.30  # fuzzy window lengths stay within +/-30% of the candidate


class ParseStatus(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"
    FAILED = "failed"


class MatchMethod(enum.Enum):
    EXACT = "exact"
    CASEFOLD = "casefold"
    WHITESPACE_NORM = "whitespace-norm"
    FUZZY = "fuzzy"


class EmptyCandidateError(ValueError):
    pass


@dataclass(frozen=True)
class ExtractionCandidate:
    """Cause/effect strings recovered from one raw model response."""

    cause_text: str
    effect_text: str
    parse_status: ParseStatus
    raw_excerpt: str = ""


@dataclass(frozen=True)
class GroundedSpan:
    """A contiguous source span: ``source[start:end] == matched_text`` always.

    Offsets count Unicode scalar values; ``end`` is exclusive.  ``score`` is
    the normalized character edit distance between the candidate and the
    matched text (0 for an exact match).
    """

    start: int
    end: int
    matched_text: str
    method: MatchMethod
    score: float


def serialize_candidate(candidate: ExtractionCandidate) -> str:
    """Canonical single-quoted form, the format the prompts request."""
    return repr({"Cause": candidate.cause_text, "Effect": candidate.effect_text})


# --- response parsing -------------------------------------------------------

_LINE_FIELD = re.compile(r"^\s*[-*#>]*\s*['\"`]?(cause|effect)['\"`]?\s*:\s*(.*)$", re.IGNORECASE)
_BLOCK_FIELD = re.compile(
    r"""['"]?(cause|effect)['"]?\s*:\s*(?:'((?:[^'\\]|\\.)*)'|"((?:[^"\\]|\\.)*)"|([^,}\n]*))""",
    re.IGNORECASE,
)


def _balanced_blocks(raw: str) -> Iterator[str]:
    """Yield top-level ``{...}`` blocks, quote- and escape-aware."""
    i = 0
    n = len(raw)
    while i < n:
        if raw[i] != "{":
            i += 1
            continue
        depth = 0
        quote = None
        j = i
        while j < n:
            ch = raw[j]
            if quote is not None:
                if ch == "\\":
                    j += 2
                    continue
                if ch == quote:
                    quote = None
            elif ch in "'\"":
                quote = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield raw[i : j + 1]
                    break
            j += 1
        else:
            return  # unbalanced tail
        i = j + 1


def _fields_from_mapping(obj: object) -> Optional[tuple[str, str]]:
    if not isinstance(obj, dict):
        return None
    cause = effect = None
    for key, value in obj.items():
        if not isinstance(key, str):
            continue
        name = key.strip().lower()
        text = "" if value is None else str(value)
        if name == "cause" and cause is None:
            cause = text
        elif name == "effect" and effect is None:
            effect = text
    if cause is None and effect is None:
        return None
    return cause or "", effect or ""


def _parse_block(block: str) -> Optional[tuple[str, str]]:
    for loader in (json.loads, ast.literal_eval):
        try:
            found = _fields_from_mapping(loader(block))
        except (ValueError, SyntaxError):
            continue
        if found:
            return found
    # dict-ish block that neither parser accepts: pull quoted fields directly
    cause = effect = None
    for m in _BLOCK_FIELD.finditer(block):
        value = next(g for g in m.groups()[1:] if g is not None).strip()
        name = m.group(1).lower()
        if name == "cause" and cause is None:
            cause = value
        elif name == "effect" and effect is None:
            effect = value
    if cause is None and effect is None:
        return None
    return cause or "", effect or ""


def _status_for(cause: str, effect: str) -> ParseStatus:
    if cause and effect:
        return ParseStatus.FULL
    if cause or effect:
        return ParseStatus.PARTIAL
    return ParseStatus.FAILED


def parse_response(raw: str) -> ExtractionCandidate:
    """Best-effort extraction of cause/effect strings from raw model output.

    Tries each balanced ``{...}`` block (JSON, then Python-literal, then field
    regex), then falls back to ``Cause:`` / ``Effect:`` line prefixes.  A
    response where nothing is recognizable yields ``FAILED`` — a value, not an
    error, so batch runs survive bad generations.
    """
    for block in _balanced_blocks(raw):
        found = _parse_block(block)
        if found:
            cause, effect = found
            return ExtractionCandidate(cause, effect, _status_for(cause, effect), block)

    cause = effect = None
    matched_lines = []
    for line in raw.splitlines():
        m = _LINE_FIELD.match(line)
        if not m:
            continue
        name = m.group(1).lower()
        value = m.group(2).strip().strip("'\"`").strip()
        if name == "cause" and cause is None:
            cause, _ = value, matched_lines.append(line)
        elif name == "effect" and effect is None:
            effect, _ = value, matched_lines.append(line)
    if cause is None and effect is None:
        return ExtractionCandidate("", "", ParseStatus.FAILED, "")
    cause, effect = cause or "", effect or ""
    return ExtractionCandidate(
        cause, effect, _status_for(cause, effect), "\n".join(matched_lines)
    )


# --- span grounding ---------------------------------------------------------


def _casefold_search(candidate: str, source: str) -> Optional[tuple[int, int]]:
    """Casefolded substring search, offsets reported in the original source.

    Casefolding may expand characters, so matches are accepted only when they
    align with whole source characters.
    """
    fmap: list[int] = []
    parts: list[str] = []
    for i, ch in enumerate(source):
        folded = ch.casefold()
        parts.append(folded)
        fmap.extend([i] * len(folded))
    folded_source = "".join(parts)
    needle = candidate.casefold()
    if not needle:
        return None
    j = folded_source.find(needle)
    while j != -1:
        start = fmap[j]
        last = fmap[j + len(needle) - 1]
        starts_whole = j == 0 or fmap[j - 1] != start
        ends_whole = j + len(needle) == len(folded_source) or fmap[j + len(needle)] != last
        if starts_whole and ends_whole:
            return start, last + 1
        j = folded_source.find(needle, j + 1)
    return None


def _whitespace_norm_search(candidate: str, source: str) -> Optional[tuple[int, int]]:
    """Search with whitespace runs collapsed on both sides, mapped back to raw offsets."""
    norm_cand = " ".join(candidate.split())
    if not norm_cand:
        return None
    nmap: list[int] = []
    parts: list[str] = []
    in_ws = False
    for i, ch in enumerate(source):
        if ch.isspace():
            if not in_ws:
                parts.append(" ")
                nmap.append(i)
                in_ws = True
        else:
            parts.append(ch)
            nmap.append(i)
            in_ws = False
    norm_source = "".join(parts)
    j = norm_source.find(norm_cand)
    if j == -1:
        return None
    return nmap[j], nmap[j + len(norm_cand) - 1] + 1


def _levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j - 1] + (ca != cb), prev[j] + 1, cur[j - 1] + 1))
        prev = cur
    return prev[-1]


def _normalized_distance(a: str, b: str) -> float:
    if not a and not b:
        return 0.0
    return _levenshtein(a, b) / max(len(a), len(b))


def _fuzzy_search(
    candidate: str, source: str, threshold: float, slack: float
) -> Optional[tuple[int, int, int]]:
    """Best source window within the length band, by edit distance.

    Returns ``(start, end, distance)`` for the window minimizing normalized
    edit distance ``dist / max(len(candidate), window_len)``, ties broken by
    lower score, then leftmost start, then shorter window.  Distances for all
    (start, window-length) pairs are computed with a vectorized DP: one step
    per window length, rows indexed by start position.
    """
    n = len(source)
    m = len(candidate)
    min_len = max(1, math.ceil((1.0 - slack) * m))
    max_len = min(n, math.floor((1.0 + slack) * m))
    if min_len > max_len or n == 0:
        return None

    src = np.frombuffer(source.encode("utf-32-le"), dtype=np.uint32)
    cand = np.frombuffer(candidate.encode("utf-32-le"), dtype=np.uint32)
    n_starts = n - min_len + 1
    starts = np.arange(n_starts)

    # dist[s, i] = edit distance between candidate[:i] and source[s : s+k]
    dist = np.tile(np.arange(m + 1, dtype=np.int32), (n_starts, 1))
    col = np.arange(m + 1, dtype=np.int32)

    best: Optional[tuple[int, int, int, int]] = None  # (dist, denom, start, length)

    def better(d: int, k: int, s: int) -> bool:
        if best is None:
            return True
        denom = max(m, k)
        lhs = d * best[1]
        rhs = best[0] * denom
        if lhs != rhs:
            return lhs < rhs
        if s != best[2]:
            return s < best[2]
        return k < best[3]

    for k in range(1, max_len + 1):
        valid = n - k  # starts 0..valid inclusive still have a k-char window
        chars = src[np.minimum(starts + k - 1, n - 1)]
        sub = (chars[:, None] != cand[None, :]).astype(np.int32)
        stepped = np.empty_like(dist)
        stepped[:, 0] = k
        stepped[:, 1:] = np.minimum(dist[:, :-1] + sub, dist[:, 1:] + 1)
        # fold in insertions: running minimum of stepped[:, j] - j, plus i
        dist = np.minimum.accumulate(stepped - col[None, :], axis=1) + col[None, :]
        if k < min_len:
            continue
        tail = dist[: valid + 1, m]
        d = int(tail.min())
        denom = max(m, k)
        if d > threshold * denom + 1e-9:
            continue
        s = int(np.argmin(tail))  # leftmost minimum
        if better(d, k, s):
            best = (d, denom, s, k)

    if best is None:
        return None
    d, _, s, k = best
    return s, s + k, d


def ground_span(
    candidate_text: str,
    source: str,
    *,
    fuzzy_threshold: float = FUZZY_THRESHOLD,
    window_slack: float = WINDOW_SLACK,
) -> Optional[GroundedSpan]:
    """Recover the source span a generated string points at, or None.

    Cascade: exact (case-sensitive) substring, casefolded substring,
    whitespace-collapsed substring, then windowed edit distance.  Earlier
    stages win outright; every stage reports offsets into the raw source, so
    ``source[start:end] == matched_text`` holds for every method.  Fully
    deterministic: each stage takes the leftmost hit and fuzzy tie-breaking
    is total.
    """
    if not candidate_text:
        raise EmptyCandidateError("candidate text must be non-empty")

    pos = source.find(candidate_text)
    if pos != -1:
        end = pos + len(candidate_text)
        return GroundedSpan(pos, end, candidate_text, MatchMethod.EXACT, 0.0)

    found = _casefold_search(candidate_text, source)
    if found:
        start, end = found
        matched = source[start:end]
        return GroundedSpan(
            start, end, matched, MatchMethod.CASEFOLD,
            _normalized_distance(candidate_text, matched),
        )

    found = _whitespace_norm_search(candidate_text, source)
    if found:
        start, end = found
        matched = source[start:end]
        return GroundedSpan(
            start, end, matched, MatchMethod.WHITESPACE_NORM,
            _normalized_distance(candidate_text, matched),
        )

    fuzzy = _fuzzy_search(candidate_text, source, fuzzy_threshold, window_slack)
    if fuzzy:
        start, end, d = fuzzy
        matched = source[start:end]
        return GroundedSpan(
            start, end, matched, MatchMethod.FUZZY,
            d / max(len(candidate_text), end - start),
        )
    return None


# --- cue-phrase baseline ----------------------------------------------------

# Scanned in this order; the earlier cue wins regardless of text position.
# For the first group the cause FOLLOWS the cue; for the last two it precedes.
CAUSE_FOLLOWING_CUES = ("as a result of", "due to", "caused by", "because of", "because")
EFFECT_FOLLOWING_CUES = ("led to", "resulting in")

_SENTENCE_BOUNDARY = re.compile(r"[.!?](?=\s)")


def cue_baseline(text: str) -> ExtractionCandidate:
    """Rule-based split of a segment into cause and effect.

    Explicit causal markers take priority; without one, the text splits at
    the first sentence boundary on the default temporal reading (the earlier
    event causes the later one).
    """
    if not text.strip():
        raise EmptyCandidateError("text must be non-empty")
    for cue in CAUSE_FOLLOWING_CUES + EFFECT_FOLLOWING_CUES:
        m = re.search(rf"\b{re.escape(cue)}\b", text, re.IGNORECASE)
        if not m:
            continue
        before = text[: m.start()].strip()
        after = text[m.end() :].strip()
        if cue in CAUSE_FOLLOWING_CUES:
            cause, effect = after, before
        else:
            cause, effect = before, after
        return ExtractionCandidate(cause, effect, _status_for(cause, effect), cue)

    m = _SENTENCE_BOUNDARY.search(text)
    if m:
        cause = text[: m.end()].strip()
        effect = text[m.end() :].strip()
    else:
        cause, effect = text.strip(), ""
    return ExtractionCandidate(cause, effect, _status_for(cause, effect), "")
