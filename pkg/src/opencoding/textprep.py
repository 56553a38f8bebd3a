"""Deterministic normalization of raw German survey answers into token sequences."""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

Lemmatizer = Callable[[str], str]

#: Respondents write umlauts inconsistently; fold everything onto the
#: ASCII alternative spelling so both variants land on the same token.
UMLAUT_MAP: tuple[tuple[str, str], ...] = (
    ("ä", "ae"),
    ("ö", "oe"),
    ("ü", "ue"),
    ("ß", "ss"),
)

# Party names that collide with ordinary German words ("die Grünen" is also
# a colour, "die Linke" also means "left").  Each pattern matches the folded
# and the unfolded umlaut spelling, common inflections, an optional article,
# and its own replacement token, so reapplying a rule is a no-op.
DEFAULT_ENTITY_RULES: tuple[tuple[str, str], ...] = (
    (r"\b(?:(?:die|der|den)[\s_]+)?gr(?:ü|ue)ne[nrs]?\b", "die_gruenen"),
    (r"\b(?:(?:die|der|den)[\s_]+)?linken?\b", "die_linke"),
)

_WHITESPACE_RE = re.compile(r"\s+")
_DIGIT_RE = re.compile(r"\d+")
# Anything that is neither a word character nor whitespace counts as
# punctuation; underscore survives so entity tokens stay in one piece.
_PUNCT_RE = re.compile(r"[^\w\s]+")


@dataclass(frozen=True)
class RawAnswer:
    """One raw survey answer, untouched until :func:`normalize` runs."""

    record_id: str
    text: str


@dataclass(frozen=True)
class NormalizationRules:
    """Rule set steering :func:`normalize` and :func:`tokenize`.

    ``entity_rules`` are (regex pattern, replacement token) pairs applied in
    declared order, each globally per text.  Replacement tokens must contain
    no whitespace and be lowercase, otherwise they would not survive
    tokenization or the lowercase output contract.
    """

    umlaut_map: tuple[tuple[str, str], ...] = UMLAUT_MAP
    entity_rules: tuple[tuple[str, str], ...] = DEFAULT_ENTITY_RULES
    drop_single_letters: bool = True
    drop_numbers: bool = True
    drop_punctuation: bool = True

    def __post_init__(self) -> None:
        for pattern, replacement in self.entity_rules:
            if re.search(r"\s", replacement):
                raise ValueError(
                    f"entity replacement {replacement!r} contains whitespace"
                )
            if replacement != replacement.lower():
                raise ValueError(
                    f"entity replacement {replacement!r} must be lowercase"
                )
            re.compile(pattern)  # fail fast on malformed patterns

    def compiled_entity_rules(self) -> tuple[tuple[re.Pattern[str], str], ...]:
        return tuple(
            (re.compile(pattern, re.IGNORECASE), replacement)
            for pattern, replacement in self.entity_rules
        )


DEFAULT_RULES = NormalizationRules()


@dataclass(frozen=True)
class Document:
    """Normalized token sequence for one answer."""

    record_id: str
    tokens: tuple[str, ...]

    @property
    def token_count(self) -> int:
        return len(self.tokens)


def normalize(text: str, rules: NormalizationRules = DEFAULT_RULES) -> str:
    """Lowercase, fold umlauts, strip digits/punctuation, apply entity rules.

    Entity rules run after the character cleanup: a mention that only becomes
    visible once digits or punctuation are removed is still caught, which
    keeps the whole function idempotent.
    """
    # NFC first so decomposed umlauts (a + combining diaeresis) fold too.
    s = unicodedata.normalize("NFC", text).lower()
    for source, target in rules.umlaut_map:
        s = s.replace(source, target)
    if rules.drop_numbers:
        s = _DIGIT_RE.sub(" ", s)
    if rules.drop_punctuation:
        s = _PUNCT_RE.sub(" ", s)
    s = _WHITESPACE_RE.sub(" ", s).strip()
    for pattern, replacement in rules.compiled_entity_rules():
        s = pattern.sub(replacement, s)
    return _WHITESPACE_RE.sub(" ", s).strip()


def tokenize(normalized: str, rules: NormalizationRules = DEFAULT_RULES) -> list[str]:
    """Whitespace-split an already normalized string into tokens.

    Single-letter tokens are dropped when the rules say so; in German they
    are almost always typos or stray initials.
    """
    tokens = normalized.split()
    if rules.drop_single_letters:
        tokens = [t for t in tokens if len(t) > 1]
    return tokens


def lemmatize(doc: Document, lemmatizer: Lemmatizer) -> Document:
    """Replace every token by its lemma; the lemmatizer must be total."""
    return Document(doc.record_id, tuple(lemmatizer(t) for t in doc.tokens))


def identity_lemmatizer(token: str) -> str:
    return token


def dictionary_lemmatizer(mapping: Mapping[str, str]) -> Lemmatizer:
    """Lemmatizer backed by a plain token->lemma dictionary.

    Unknown tokens pass through unchanged, which makes the result a total
    function as required by :func:`lemmatize`.
    """

    def lookup(token: str) -> str:
        return mapping.get(token, token)

    return lookup


def load_lemma_dictionary(path: str | Path) -> dict[str, str]:
    """Read a two-column (token, lemma) dictionary file.

    Columns are separated by a tab or any whitespace run; blank lines and
    lines starting with ``#`` are skipped.
    """
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'token lemma', got {line!r}")
            mapping[parts[0]] = parts[1]
    return mapping


def prepare_document(
    answer: RawAnswer,
    rules: NormalizationRules = DEFAULT_RULES,
    lemmatizer: Lemmatizer | None = None,
) -> Document:
    """Full preprocessing of one answer: normalize, tokenize, lemmatize."""
    tokens = tokenize(normalize(answer.text, rules), rules)
    doc = Document(answer.record_id, tuple(tokens))
    if lemmatizer is not None:
        doc = lemmatize(doc, lemmatizer)
    return doc
