"""Token-level parsing categories for picture-description transcripts.

Each token is assigned one of six scoreable categories (Subject, Object,
Action, Location, Filler, Pronoun) or ``Category.NONE``. Assignment is a
deterministic rule cascade over small editable lexicons, optionally
sharpened by coarse UPOS-style tags when the caller has them. The input
token list is treated as a single utterance: the Subject/Object split
keys off the first Action token in the list.
"""

from __future__ import annotations

import enum
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .errors import DataError


class Category(enum.Enum):
    SUBJECT = "Subject"
    OBJECT = "Object"
    ACTION = "Action"
    LOCATION = "Location"
    FILLER = "Filler"
    PRONOUN = "Pronoun"
    NONE = "None"

    def __str__(self) -> str:
        return self.value


# Canonical listing order; also the tie-break order for rank profiles.
CATEGORIES: tuple[Category, ...] = (
    Category.SUBJECT,
    Category.OBJECT,
    Category.ACTION,
    Category.LOCATION,
    Category.FILLER,
    Category.PRONOUN,
)

CANONICAL_INDEX = {cat: i for i, cat in enumerate(CATEGORIES)}

# How far back (in tokens) a preposition may sit and still mark a noun
# as a Location.
_PREP_WINDOW = 2


def _read_lexicon(name: str) -> frozenset[str]:
    text = resources.files("ekicl.data.lexicons").joinpath(name).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


@lru_cache(maxsize=None)
def lexicons() -> dict[str, frozenset[str]]:
    """Load the bundled lexicons once; keys: fillers, pronouns, prepositions, verbs, nouns."""
    return {
        "fillers": _read_lexicon("fillers.txt"),
        "pronouns": _read_lexicon("pronouns.txt"),
        "prepositions": _read_lexicon("prepositions.txt"),
        "verbs": _read_lexicon("verbs.txt"),
        "nouns": _read_lexicon("nouns.txt"),
    }


def _is_verb(token: str, tag: Optional[str], lex: dict[str, frozenset[str]]) -> bool:
    if tag is not None:
        return tag in ("VERB", "AUX")
    if token in lex["verbs"]:
        return True
    # Suffix heuristic for untagged input; never overrides a known scene noun.
    if token in lex["nouns"]:
        return False
    return (token.endswith("ing") or token.endswith("ed")) and len(token) >= 5


def _is_noun(token: str, tag: Optional[str], lex: dict[str, frozenset[str]]) -> bool:
    if tag is not None:
        return tag in ("NOUN", "PROPN")
    return token in lex["nouns"]


def categorize(
    tokens: Sequence[str], pos_tags: Optional[Sequence[str]] = None
) -> list[Category]:
    """Assign one category (or NONE) per token, first matching rule wins.

    Rules, in order: filler lexicon/INTJ; pronoun lexicon/PRON; verb ->
    Action; noun within two tokens of a preceding preposition -> Location;
    noun before the first Action -> Subject; other noun -> Object; else NONE.
    """
    if pos_tags is not None and len(pos_tags) != len(tokens):
        raise DataError(
            f"pos_tags length {len(pos_tags)} != token count {len(tokens)}"
        )
    lex = lexicons()
    lowered = [t.lower() for t in tokens]
    tags = list(pos_tags) if pos_tags is not None else [None] * len(tokens)

    # First pass resolves the closed-class rules and verbs so the position
    # of the first Action is known before nouns are split.
    partial: list[Optional[Category]] = []
    for tok, tag in zip(lowered, tags):
        if tok in lex["fillers"] or tag == "INTJ":
            partial.append(Category.FILLER)
        elif tok in lex["pronouns"] or tag == "PRON":
            partial.append(Category.PRONOUN)
        elif _is_verb(tok, tag, lex):
            partial.append(Category.ACTION)
        else:
            partial.append(None)

    first_action = next(
        (i for i, c in enumerate(partial) if c is Category.ACTION), None
    )

    out: list[Category] = []
    for i, (tok, tag) in enumerate(zip(lowered, tags)):
        if partial[i] is not None:
            out.append(partial[i])
            continue
        if not _is_noun(tok, tag, lex):
            out.append(Category.NONE)
            continue
        window = lowered[max(0, i - _PREP_WINDOW) : i]
        if any(w in lex["prepositions"] for w in window):
            out.append(Category.LOCATION)
        elif first_action is not None and i < first_action:
            out.append(Category.SUBJECT)
        else:
            out.append(Category.OBJECT)
    return out


def category_frequencies(categories: Sequence[Category]) -> np.ndarray:
    """Count tokens per scoreable category, canonical order; NONE excluded."""
    counts = np.zeros(len(CATEGORIES), dtype=np.int64)
    for cat in categories:
        if cat is not Category.NONE:
            counts[CANONICAL_INDEX[cat]] += 1
    return counts
