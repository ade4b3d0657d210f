"""Prompt construction and completion parsing for the in-context learners.

One template ("ekicl-v1") renders an instruction naming both label words,
zero or more demonstration blocks, optional confidence / structural-score
hint lines, and the query. Completions are mapped back to classes by a
case-insensitive whole-word scan where the earliest occurrence of either
label word wins and text containing neither is an abstention.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Sequence

from .errors import DataError

ConfigClass = Literal["Aligned", "FixedGood", "FixedBad", "Custom"]
CONFIG_CLASSES: tuple[str, ...] = ("Aligned", "FixedGood", "FixedBad", "Custom")

TEMPLATE_ID = "ekicl-v1"

AD = "AD"
HC = "HC"
ABSTAIN = "Abstain"


@dataclass(frozen=True)
class LabelPair:
    ad_word: str
    hc_word: str
    config_class: str = "Custom"

    def __post_init__(self) -> None:
        if not self.ad_word or not self.hc_word:
            raise DataError("label words must be non-empty")
        if self.ad_word.casefold() == self.hc_word.casefold():
            raise DataError(
                f"label words must differ (got {self.ad_word!r} / {self.hc_word!r})"
            )
        if self.config_class not in CONFIG_CLASSES:
            raise DataError(f"unknown config class {self.config_class!r}")

    def word_for(self, label: str) -> str:
        if label == AD:
            return self.ad_word
        if label == HC:
            return self.hc_word
        raise DataError(f"no label word for class {label!r}")


DEFAULT_PAIR = LabelPair(ad_word="Bad", hc_word="Good", config_class="FixedBad")


@dataclass(frozen=True)
class PromptSpec:
    demos: tuple[tuple[str, str], ...]  # (transcript text, assigned label word)
    query_text: str
    label_pair: LabelPair
    conf_hint: Optional[float] = None
    feat_hint: Optional[tuple[float, tuple[float, ...]]] = None
    template_id: str = TEMPLATE_ID

    def __post_init__(self) -> None:
        object.__setattr__(self, "demos", tuple(tuple(d) for d in self.demos))
        if self.feat_hint is not None:
            q, ds = self.feat_hint
            object.__setattr__(self, "feat_hint", (float(q), tuple(float(d) for d in ds)))
        words = {self.label_pair.ad_word, self.label_pair.hc_word}
        for text, word in self.demos:
            if word not in words:
                raise DataError(
                    f"demo label {word!r} is not one of the pair's words"
                )
        if self.conf_hint is not None and not 0.0 < self.conf_hint < 1.0:
            raise DataError("confidence hint must lie strictly in (0, 1)")


def build_prompt(spec: PromptSpec) -> str:
    """Deterministic rendering of a spec under its template."""
    if spec.template_id != TEMPLATE_ID:
        raise DataError(f"unknown template {spec.template_id!r}")
    pair = spec.label_pair
    lines = [
        "You will read a picture description. "
        f"Rate it with exactly one word: {pair.ad_word} or {pair.hc_word}.",
        "",
    ]
    for text, word in spec.demos:
        lines.append(f"Description: {text}")
        lines.append(f"Answer: {word}")
        lines.append("")
    if spec.conf_hint is not None:
        lines.append(
            f"Reference screening probability of impairment: {spec.conf_hint:.2f}"
        )
    if spec.feat_hint is not None:
        query_feat, demo_feats = spec.feat_hint
        feat_line = f"Structural typicality score: {query_feat:.4f}"
        if demo_feats:
            feat_line += " (demonstrations: " + ", ".join(
                f"{d:.4f}" for d in demo_feats
            ) + ")"
        lines.append(feat_line)
    lines.append(f"Description: {spec.query_text}")
    lines.append("Answer:")
    return "\n".join(lines)


def _word_pattern(word: str) -> re.Pattern[str]:
    return re.compile(rf"(?<!\w){re.escape(word)}(?!\w)", re.IGNORECASE)


def parse_completion(text: str, label_pair: LabelPair) -> str:
    """Map a completion to AD / HC / Abstain by earliest whole-word label hit."""
    ad_match = _word_pattern(label_pair.ad_word).search(text)
    hc_match = _word_pattern(label_pair.hc_word).search(text)
    if ad_match is None and hc_match is None:
        return ABSTAIN
    if hc_match is None:
        return AD
    if ad_match is None:
        return HC
    return AD if ad_match.start() <= hc_match.start() else HC


def _read_pair_rows(lines: Sequence[str], source: str) -> list[LabelPair]:
    pairs: list[LabelPair] = []
    seen: set[tuple[str, str]] = set()
    reader = csv.reader(lines)
    for row_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if [c.strip() for c in row] == ["config_class", "ad_word", "hc_word"]:
            continue  # header
        if len(row) != 3:
            raise DataError(f"{source}:{row_no}: expected 3 fields, got {len(row)}")
        config_class, ad_word, hc_word = (c.strip() for c in row)
        key = (ad_word.casefold(), hc_word.casefold())
        if key in seen:
            raise DataError(f"{source}:{row_no}: duplicate pair {ad_word}/{hc_word}")
        seen.add(key)
        try:
            pairs.append(LabelPair(ad_word=ad_word, hc_word=hc_word, config_class=config_class))
        except DataError as exc:
            raise DataError(f"{source}:{row_no}: {exc}") from exc
    return pairs


def label_sweep_pairs(path: Optional[str | Path] = None) -> list[LabelPair]:
    """Label pairs for the sweep, from ``path`` or the bundled default file."""
    if path is None:
        text = (
            resources.files("ekicl").joinpath("data/label_pairs.csv").read_text("utf-8")
        )
        source = "label_pairs.csv"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    return _read_pair_rows(text.splitlines(), source)
