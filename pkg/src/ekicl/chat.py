"""CHAT-protocol (.cha) transcript parsing.

Implements a deliberately small subset of the CHAT transcription format:
header lines (``@``) and dependent tiers (``%``) are skipped, speaker
tiers are split into whitespace tokens, and the disfluency markup that
matters for word-level modeling is resolved (fillers kept, retracings
dropped, corrections applied, word-internal expansions completed).
Tokens come out lowercased with terminator punctuation removed.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import DataError

logger = logging.getLogger(__name__)

AD = "AD"
HC = "HC"
VALID_LABELS = (AD, HC)

_SPEAKER_RE = re.compile(r"^\*([A-Z]{3}):")
_ATTACHED_CODE_RE = re.compile(r"\[[^\]]*\]")
_PAUSES = {"(.)", "(..)", "(...)"}


class ChatParseError(DataError):
    """Raised when a .cha file violates the supported line grammar."""


@dataclass(frozen=True)
class Utterance:
    speaker: str
    raw: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Transcript:
    id: str
    utterances: tuple[Utterance, ...]
    tokens: tuple[str, ...] = field(default=())
    gold_label: Optional[str] = None

    @staticmethod
    def assemble(
        id: str, utterances: Iterable[Utterance], gold_label: Optional[str] = None
    ) -> "Transcript":
        utts = tuple(utterances)
        flat = tuple(tok for u in utts for tok in u.tokens)
        return Transcript(id=id, utterances=utts, tokens=flat, gold_label=gold_label)


def _split_units(raw_tokens: list[str]) -> list[tuple[str, list[str]]]:
    """Group whitespace tokens into words, ``<...>`` groups, and ``[...]`` codes."""
    units: list[tuple[str, list[str]]] = []
    i = 0
    n = len(raw_tokens)
    while i < n:
        tok = raw_tokens[i]
        if tok.startswith("<"):
            group: list[str] = []
            while i < n:
                part = raw_tokens[i]
                done = part.endswith(">")
                part = part.lstrip("<").rstrip(">")
                if part:
                    group.append(part)
                i += 1
                if done:
                    break
            units.append(("group", group))
        elif tok.startswith("["):
            code_parts: list[str] = []
            while i < n:
                part = raw_tokens[i]
                done = part.endswith("]")
                code_parts.append(part)
                i += 1
                if done:
                    break
            code = " ".join(code_parts).strip("[]")
            units.append(("code", [code]))
        else:
            units.append(("word", [tok]))
            i += 1
    return units


def _apply_codes(units: list[tuple[str, list[str]]]) -> list[str]:
    """Fold bracket codes over the token stream.

    ``[//]``/``[/]`` drop the unit just before them; ``[: word]`` replaces
    it; every other code is stripped along with its brackets.
    """
    out: list[list[str]] = []
    for kind, payload in units:
        if kind != "code":
            out.append(list(payload))
            continue
        code = payload[0]
        if code in ("//", "/"):
            if out:
                out.pop()
        elif code.startswith(":"):
            correction = code[1:].split()
            if out and correction:
                out[-1] = correction
        # anything else ([?], [* ...], [% ...], [+ ...], ...) is dropped
    return [tok for unit in out for tok in unit]


def _normalize_token(token: str) -> Optional[str]:
    """Normalize one surviving token; None means the token is dropped."""
    tok = _ATTACHED_CODE_RE.sub("", token).lower()
    if not tok:
        return None
    if tok in _PAUSES:
        return None
    if tok.startswith("&-"):
        tok = tok[2:]  # filler marker: keep the word
    elif tok.startswith("&"):
        return None  # actions (&=) and fragments
    if tok.startswith("+"):
        return None  # +... and friends: utterance terminators
    tok = tok.replace("(", "").replace(")", "")
    if tok in ("xxx", "yyy"):
        return None
    tok = tok.strip(".,;:?!")
    if not tok or not any(ch.isalnum() for ch in tok):
        return None
    return tok


def tokenize_content(content: str) -> tuple[str, ...]:
    """Turn the text of one speaker tier into normalized tokens."""
    units = _split_units(content.split())
    kept = _apply_codes(units)
    normalized = (_normalize_token(t) for t in kept)
    return tuple(t for t in normalized if t is not None)


def _logical_lines(text: str) -> list[tuple[int, str]]:
    """Join tab/space-indented continuation lines onto the line they extend."""
    merged: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line[0] in " \t" and merged:
            prev_no, prev = merged[-1]
            merged[-1] = (prev_no, prev + " " + line.strip())
        else:
            merged.append((lineno, line.rstrip()))
    return merged


def parse_chat(
    text: str,
    transcript_id: str = "",
    include_speakers: tuple[str, ...] = ("PAR",),
) -> Transcript:
    """Parse one .cha file's contents into a participant-only Transcript."""
    utterances: list[Utterance] = []
    for lineno, line in _logical_lines(text):
        if line.startswith("@") or line.startswith("%"):
            continue
        if line.startswith("*"):
            match = _SPEAKER_RE.match(line)
            if match is None:
                raise ChatParseError(
                    f"line {lineno}: malformed speaker line: {line[:40]!r}"
                )
            speaker = match.group(1)
            content = line[match.end() :].strip()
            utterances.append(
                Utterance(speaker=speaker, raw=line, tokens=tokenize_content(content))
            )
            continue
        raise ChatParseError(f"line {lineno}: unrecognized line type: {line[:40]!r}")

    kept = [u for u in utterances if u.speaker in include_speakers]
    if not kept:
        raise DataError("no participant utterances")
    return Transcript.assemble(transcript_id, kept)


def read_label_manifest(path: str | Path) -> dict[str, str]:
    """Read a two-column ``id,label`` CSV; an ``id,label`` header row is allowed."""
    labels: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise DataError(f"{path}: row {row_no}: expected 'id,label'")
            stem, label = row[0].strip(), row[1].strip()
            if row_no == 1 and (stem, label) == ("id", "label"):
                continue
            if label not in VALID_LABELS:
                raise DataError(
                    f"{path}: row {row_no}: label {label!r} not in {VALID_LABELS}"
                )
            if stem in labels:
                raise DataError(f"{path}: duplicate manifest id {stem!r}")
            labels[stem] = label
    return labels


def load_corpus(directory: str | Path, label_manifest: str | Path) -> list[Transcript]:
    """Parse every .cha file in a directory, joining gold labels by file stem.

    Manifest entries without a matching file produce a warning; files
    without a manifest entry load with ``gold_label=None``.
    """
    directory = Path(directory)
    labels = read_label_manifest(label_manifest)
    transcripts: dict[str, Transcript] = {}
    for path in sorted(directory.glob("*.cha")):
        try:
            text = path.read_text("utf-8")
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        stem = path.stem
        if stem in transcripts:
            raise DataError(f"duplicate transcript id {stem!r}")
        tr = parse_chat(text, transcript_id=stem)
        transcripts[stem] = Transcript(
            id=tr.id,
            utterances=tr.utterances,
            tokens=tr.tokens,
            gold_label=labels.get(stem),
        )
    for stem in labels:
        if stem not in transcripts:
            logger.warning("manifest id %r has no matching .cha file", stem)
    return [transcripts[k] for k in sorted(transcripts)]
