"""Turn source files and bug reports into stemmed term counts.

The pipeline is lexical and language-agnostic: identifier-like tokens are
pulled out of the raw text (comments and string literals included), split
on underscores, digit boundaries and camelCase humps, lowercased, filtered
against the English + programming-keyword stoplists and Porter-stemmed.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import PurePath
from typing import Iterable, Mapping

from nltk.stem.porter import PorterStemmer

from .errors import EmptyDocumentError, UnsupportedFileError

SOURCE_EXTENSIONS = {
    ".java": "java",
    ".py": "python",
    ".c": "c",
    ".h": "c",
    ".cc": "cpp",
    ".cpp": "cpp",
    ".hpp": "cpp",
}

LANGUAGES = ("java", "python", "c", "cpp", "unknown")

# Numeric literals are consumed by the first alternative so that "0x1F" or
# "3e10" never leak an identifier-looking tail.
_TOKEN_RE = re.compile(r"\d\w*|([^\W\d]\w*)")
_CHUNK_RE = re.compile(r"[^\W_]+")


def load_term_list(path) -> frozenset[str]:
    """Read a one-term-per-line list; blank lines and ``#`` comments are skipped."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(parse_term_list(fh.read()))


def parse_term_list(text: str) -> list[str]:
    terms = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            terms.append(line)
    return terms


def _data_bytes(name: str) -> bytes:
    return resources.files("incbl.data").joinpath(name).read_bytes()


_STOPWORDS_RAW = _data_bytes("stopwords.txt")
_KEYWORDS_RAW = _data_bytes("keywords.txt")

ENGLISH_STOPWORDS = frozenset(parse_term_list(_STOPWORDS_RAW.decode("utf-8")))
PROGRAMMING_KEYWORDS = frozenset(parse_term_list(_KEYWORDS_RAW.decode("utf-8")))
STOPLIST = ENGLISH_STOPWORDS | PROGRAMMING_KEYWORDS


def stoplist_digests() -> dict[str, bytes]:
    """SHA-256 digests of the shipped lists; they are part of the model version."""
    return {
        "stopwords": hashlib.sha256(_STOPWORDS_RAW).digest(),
        "keywords": hashlib.sha256(_KEYWORDS_RAW).digest(),
    }


@dataclass(frozen=True, eq=True)
class TermCounts:
    """Occurrence counts of stemmed terms for one document.

    Keys keep first-appearance order, which fixes term-id assignment when the
    document is indexed.
    """

    counts: Mapping[str, int] = field(default_factory=dict)

    __hash__ = None  # type: ignore[assignment]

    @property
    def total_terms(self) -> int:
        return len(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __iter__(self):
        return iter(self.counts)

    def __getitem__(self, term: str) -> int:
        return self.counts.get(term, 0)

    def items(self):
        return self.counts.items()

    @classmethod
    def from_mapping(cls, counts: Mapping[str, int]) -> "TermCounts":
        for term, n in counts.items():
            if not isinstance(n, int) or n < 1:
                raise ValueError(f"count for {term!r} must be a positive integer, got {n!r}")
        return cls(dict(counts))


def language_for(path) -> str:
    return SOURCE_EXTENSIONS.get(PurePath(path).suffix.lower(), "unknown")


def is_source_file(path) -> bool:
    return PurePath(path).suffix.lower() in SOURCE_EXTENSIONS


def tokenize_source(text: str, language_hint: str = "unknown") -> list[str]:
    """Extract identifier-like tokens from source text.

    ``language_hint`` is accepted for interface stability; the extraction
    rule is the same for every language.
    """
    if language_hint not in LANGUAGES:
        raise ValueError(f"unknown language hint {language_hint!r}")
    return [m for m in _TOKEN_RE.findall(text) if m]


def _char_class(c: str) -> str:
    if c.isdecimal():
        return "D"
    if c.isupper():
        return "U"
    return "L"


def _humps(chunk: str) -> list[str]:
    classes = [_char_class(c) for c in chunk]
    parts = []
    start = 0
    for i in range(1, len(chunk)):
        prev, cur = classes[i - 1], classes[i]
        if (prev == "D") != (cur == "D"):
            cut = True
        elif prev == "L" and cur == "U":
            cut = True
        else:
            # last capital of an acronym run starts the next word: HTTPServer
            cut = prev == "U" and cur == "U" and i + 1 < len(chunk) and classes[i + 1] == "L"
        if cut:
            parts.append(chunk[start:i])
            start = i
    parts.append(chunk[start:])
    return parts


@lru_cache(maxsize=1 << 16)
def _split_cached(token: str) -> tuple[str, ...]:
    parts = []
    for chunk in _CHUNK_RE.findall(token):
        parts.extend(_humps(chunk))
    out = [p.lower() for p in parts if not p.isdecimal()]
    if len(parts) >= 2:
        out.append(token.lower())
    return tuple(out)


def split_identifier(token: str) -> list[str]:
    """Split an identifier into lowercase subtokens.

    >>> split_identifier("getUserName")
    ['get', 'user', 'name', 'getusername']
    >>> split_identifier("HTTPServer2")
    ['http', 'server', 'httpserver2']
    """
    if not token:
        raise ValueError("cannot split an empty token")
    return list(_split_cached(token))


_stemmer = PorterStemmer(PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=1 << 17)
def _normalize_one(token: str) -> str | None:
    token = token.lower()
    if len(token) < 2 or token.isdecimal() or token in STOPLIST:
        return None
    stem = _stemmer.stem(token)
    if len(stem) < 2 or stem in STOPLIST:
        return None
    return stem


def _accumulate(weighted: Iterable[tuple[str, int]]) -> TermCounts:
    counts: dict[str, int] = {}
    for token, n in weighted:
        term = _normalize_one(token)
        if term is not None:
            counts[term] = counts.get(term, 0) + n
    return TermCounts(counts)


def normalize_terms(tokens: Iterable[str]) -> TermCounts:
    """Lowercase, drop stopwords and one-character tokens, stem, and count."""
    return _accumulate((t, 1) for t in tokens)


def _text_to_counts(text: str, language: str) -> TermCounts:
    raw = Counter(tokenize_source(text, language))
    return _accumulate((sub, n) for tok, n in raw.items() for sub in _split_cached(tok))


def decode_source(data: bytes | str) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8", errors="replace")
    return data


def build_code_document(path, text: bytes | str) -> TermCounts:
    """Preprocess one source file.

    Raises UnsupportedFileError when ``path`` has no recognized source
    extension; callers leave such files out of the corpus.
    """
    language = language_for(path)
    if language == "unknown":
        raise UnsupportedFileError(str(path))
    return _text_to_counts(decode_source(text), language)


def build_report_document(report) -> TermCounts:
    """Preprocess a bug report (title and description combined)."""
    title = report.title or ""
    description = report.description or ""
    if not title.strip() and not description.strip():
        raise EmptyDocumentError(f"bug report {getattr(report, 'id', '?')!r} has no text")
    return _text_to_counts(title + " " + description, "unknown")
