"""Deterministic text utilities: tokenizing, clause segmentation, numeric keys.

Everything here is pure and depends only on its inputs, so grading results
are reproducible byte-for-byte across runs and platforms.
"""
from __future__ import annotations

import re

# Small frozen stopword list. Deliberately short: content overlap between a
# learner clause and a short reference sentence is fragile, and aggressive
# stopword removal makes unrelated clauses look similar.
STOPWORDS = frozenset(
    """a an the and or of to in on at is are be was were it its this that
    with for as by from should must will can may when if then than there
    e g i etc""".split()
)

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)?")
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")
_LIST_MARKER_RE = re.compile(r"^\s*(?:[-*•]|\(?\d{1,3}[.)]|\(?[a-zA-Z][.)])\s+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?;])\s+")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; apostrophes keep contractions as one token."""
    return _TOKEN_RE.findall(text.lower())


def content_tokens(text: str) -> list[str]:
    return [t for t in tokenize(text) if t not in STOPWORDS]


def normalize(text: str) -> str:
    """Canonical lowercase token sequence as a single space-joined string."""
    return " ".join(tokenize(text))


def jaccard(a: list[str] | set[str], b: list[str] | set[str]) -> float:
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def numbers(text: str) -> list[str]:
    """Numeric literals in order of appearance, as canonical strings."""
    return [_canon_number(m) for m in _NUMBER_RE.findall(text)]


def _canon_number(raw: str) -> str:
    if "." in raw:
        raw = raw.rstrip("0").rstrip(".")
    int_part, dot, frac = raw.partition(".")
    int_part = int_part.lstrip("0") or "0"
    return int_part + dot + frac


def keyed_numbers(text: str) -> dict[str, str]:
    """Map each numeric literal to the nearest content word naming it.

    "8 rows by 6 columns" -> {"rows": "8", "columns": "6"}. The key is the
    first content token within two tokens after the number, else the first
    content token within two tokens before it. Unkeyable numbers are skipped
    here and still participate in the plain multiset comparison.
    """
    tokens = tokenize(text)
    keyed: dict[str, str] = {}
    for i, tok in enumerate(tokens):
        if not _NUMBER_RE.fullmatch(tok):
            continue
        key = None
        for j in range(i + 1, min(i + 3, len(tokens))):
            cand = tokens[j]
            if cand not in STOPWORDS and not _NUMBER_RE.fullmatch(cand):
                key = cand
                break
        if key is None:
            for j in range(i - 1, max(i - 3, -1), -1):
                cand = tokens[j]
                if cand not in STOPWORDS and not _NUMBER_RE.fullmatch(cand):
                    key = cand
                    break
        if key is not None and key not in keyed:
            keyed[key] = _canon_number(tok)
    return keyed


def segment_clauses(text: str) -> list[tuple[int, int]]:
    """Clause spans: sentence boundaries plus list-item/line boundaries.

    Returns (start, end) character offsets into ``text``, non-overlapping and
    ordered. List markers ("- ", "1. ", "a) ") are excluded from spans;
    surrounding whitespace is trimmed.
    """
    spans: list[tuple[int, int]] = []
    offset = 0
    for line in text.splitlines(keepends=True):
        raw = line.rstrip("\n\r")
        marker = _LIST_MARKER_RE.match(raw)
        body_start = marker.end() if marker else 0
        body = raw[body_start:]
        for rel_start, rel_end in _split_sentences(body):
            start = offset + body_start + rel_start
            end = offset + body_start + rel_end
            if end > start:
                spans.append((start, end))
        offset += len(line)
    return spans


def _split_sentences(body: str) -> list[tuple[int, int]]:
    pieces: list[tuple[int, int]] = []
    pos = 0
    for match in _SENTENCE_SPLIT_RE.finditer(body):
        pieces.append((pos, match.start()))
        pos = match.end()
    pieces.append((pos, len(body)))
    out = []
    for start, end in pieces:
        while start < end and body[start].isspace():
            start += 1
        while end > start and body[end - 1].isspace():
            end -= 1
        if end > start:
            out.append((start, end))
    return out


def has_token_run(haystack: str, needle: str, run_length: int) -> bool:
    """True when ``run_length`` consecutive content tokens of ``needle``
    appear consecutively (as content tokens) in ``haystack``."""
    hay = content_tokens(haystack)
    need = content_tokens(needle)
    if len(need) < run_length or len(hay) < run_length:
        return False
    grams = {tuple(need[i : i + run_length]) for i in range(len(need) - run_length + 1)}
    for i in range(len(hay) - run_length + 1):
        if tuple(hay[i : i + run_length]) in grams:
            return True
    return False
