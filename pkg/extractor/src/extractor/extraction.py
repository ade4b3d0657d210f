"""Turn word-token transcripts into per-word embedding records.

The input corpus is a JSON list of ``{"transcript_id", "label",
"tokens"}`` objects (the screening CLI's ``--export-corpus`` output).
Each transcript is run through a pretrained transformer encoder with
the word boundaries supplied by the caller (``is_split_into_words``),
and the subword hidden states are pooled back to exactly one vector per
input token.  Output is ingest JSONL: one JSON object per line with
``transcript_id``, ``label``, ``tokens`` (copied verbatim),
``pos_tags`` (null unless a tagger model is configured), and
``vectors`` (one row per token, floats rounded to 8 significant
digits so re-extraction is reproducible to the digit).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

POOLING_MODES = ("mean-subtokens", "first-subtoken")
VALID_LABELS = ("AD", "HC")


class ExtractionError(Exception):
    """Raised for invalid corpora, configs, or encoder/word misalignment."""


@dataclass(frozen=True)
class CorpusEntry:
    """One transcript to embed: an id, an optional gold label, and its tokens."""

    transcript_id: str
    label: str | None
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class ExtractorConfig:
    """How to embed a corpus.

    ``encoder_name`` is a model name or local path loadable by the
    transformers auto classes.  ``layer`` selects which hidden-state
    layer to pool: ``"last"`` or an integer index (0 is the embedding
    layer output, 1..N the transformer layers).  ``pooling`` collapses
    a word's subtokens to one vector.  ``dim``, when set, is the
    expected vector width and is checked against the encoder.
    ``tagger``, when set, names a token-classification model whose
    argmax label on each word's first subtoken becomes the word's POS
    tag; otherwise ``pos_tags`` is null in the output.
    """

    encoder_name: str
    layer: int | str = "last"
    pooling: str = "mean-subtokens"
    dim: int | None = None
    tagger: str | None = None
    batch_size: int = 8

    def __post_init__(self) -> None:
        if self.pooling not in POOLING_MODES:
            raise ExtractionError(
                f"unknown pooling {self.pooling!r}; expected one of {', '.join(POOLING_MODES)}"
            )
        if isinstance(self.layer, str) and self.layer != "last":
            raise ExtractionError(
                f"layer must be an integer or 'last', got {self.layer!r}"
            )
        if self.batch_size < 1:
            raise ExtractionError("batch_size must be at least 1")
        if self.dim is not None and self.dim < 1:
            raise ExtractionError("dim must be a positive integer when set")


def read_corpus(path: str | Path) -> list[CorpusEntry]:
    """Read and validate a corpus JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ExtractionError(f"cannot read corpus file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExtractionError(f"invalid corpus JSON in {path}: {exc}") from exc
    if not isinstance(data, list):
        raise ExtractionError("corpus must be a JSON list of transcript objects")

    entries: list[CorpusEntry] = []
    for i, obj in enumerate(data):
        if not isinstance(obj, dict):
            raise ExtractionError(f"corpus[{i}]: expected an object")
        for key in ("transcript_id", "label", "tokens"):
            if key not in obj:
                raise ExtractionError(f"corpus[{i}]: missing field {key!r}")
        tid = obj["transcript_id"]
        if not isinstance(tid, str) or not tid:
            raise ExtractionError(f"corpus[{i}]: transcript_id must be a non-empty string")
        label = obj["label"]
        if label is not None and label not in VALID_LABELS:
            raise ExtractionError(
                f"corpus[{i}] ({tid}): label must be one of {', '.join(VALID_LABELS)} or null"
            )
        tokens = obj["tokens"]
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ExtractionError(f"corpus[{i}] ({tid}): tokens must be a list of strings")
        if not tokens:
            raise ExtractionError(f"corpus[{i}] ({tid}): transcript has no tokens")
        entries.append(CorpusEntry(transcript_id=tid, label=label, tokens=tuple(tokens)))
    return entries


def _round8(x: float) -> float:
    """Round to 8 significant digits (the on-disk precision)."""
    return float(f"{x:.8g}")


def _word_positions(
    word_ids: Sequence[int | None], n_words: int, transcript_id: str, tokens: Sequence[str]
) -> list[list[int]]:
    """Map each input word to its subtoken positions, or fail loudly.

    A word that the tokenizer dissolved into zero subtokens (e.g. an
    empty or unrepresentable string) breaks the one-vector-per-token
    contract, so it is an error naming the transcript and token index.
    """
    positions: list[list[int]] = [[] for _ in range(n_words)]
    for pos, wid in enumerate(word_ids):
        if wid is not None:
            positions[wid].append(pos)
    for w, plist in enumerate(positions):
        if not plist:
            raise ExtractionError(
                f"{transcript_id}: token {w} ({tokens[w]!r}) produced no subword pieces; "
                "cannot align encoder output to input tokens"
            )
    return positions


class _WordEncoder:
    """A loaded encoder that turns token lists into per-word matrices."""

    def __init__(self, config: ExtractorConfig) -> None:
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.encoder_name)
        if not getattr(self.tokenizer, "is_fast", False):
            raise ExtractionError(
                f"encoder {config.encoder_name}: word alignment needs a fast tokenizer "
                "(word_ids is unavailable on slow tokenizers)"
            )
        self.model = AutoModel.from_pretrained(config.encoder_name)
        self.model.eval()

        hidden = getattr(self.model.config, "hidden_size", None)
        if config.dim is not None and hidden is not None and hidden != config.dim:
            raise ExtractionError(
                f"encoder {config.encoder_name} produces {hidden}-dim vectors "
                f"but dim={config.dim} was requested"
            )

        n_layers = getattr(self.model.config, "num_hidden_layers", None)
        if config.layer == "last":
            self.layer_index = -1
        else:
            layer = int(config.layer)
            if n_layers is not None and not (0 <= layer <= n_layers):
                raise ExtractionError(
                    f"layer {layer} out of range: encoder exposes hidden states 0..{n_layers}"
                )
            self.layer_index = layer
        self.max_positions = getattr(self.model.config, "max_position_embeddings", None)

    def embed_batch(self, batch: Sequence[CorpusEntry]) -> list[np.ndarray]:
        """Embed a batch; returns one (n_tokens, dim) float array per entry."""
        torch = self._torch
        encodings = self.tokenizer(
            [list(entry.tokens) for entry in batch],
            is_split_into_words=True,
            padding=True,
            return_tensors="pt",
        )
        lengths = encodings["attention_mask"].sum(dim=1)
        for b, entry in enumerate(batch):
            if self.max_positions is not None and int(lengths[b]) > self.max_positions:
                raise ExtractionError(
                    f"{entry.transcript_id}: {int(lengths[b])} subtokens exceed the "
                    f"encoder's {self.max_positions}-position limit"
                )
        with torch.no_grad():
            output = self.model(**encodings, output_hidden_states=True)
        states = output.hidden_states[self.layer_index]

        matrices: list[np.ndarray] = []
        for b, entry in enumerate(batch):
            positions = _word_positions(
                encodings.word_ids(b), len(entry.tokens), entry.transcript_id, entry.tokens
            )
            rows = []
            for plist in positions:
                chunk = states[b, plist, :]
                if self.config.pooling == "first-subtoken":
                    vec = chunk[0]
                else:
                    vec = chunk.mean(dim=0)
                rows.append(vec.double().numpy())
            matrices.append(np.stack(rows))
        return matrices


class _WordTagger:
    """A loaded token-classification model that tags each word.

    The tag is the argmax class of the word's first subtoken, mapped
    through the model's id2label table.
    """

    def __init__(self, tagger_name: str) -> None:
        import torch
        from transformers import AutoModelForTokenClassification, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(tagger_name)
        if not getattr(self.tokenizer, "is_fast", False):
            raise ExtractionError(
                f"tagger {tagger_name}: word alignment needs a fast tokenizer"
            )
        self.model = AutoModelForTokenClassification.from_pretrained(tagger_name)
        self.model.eval()
        self.id2label = dict(self.model.config.id2label)

    def tag_batch(self, batch: Sequence[CorpusEntry]) -> list[list[str]]:
        torch = self._torch
        encodings = self.tokenizer(
            [list(entry.tokens) for entry in batch],
            is_split_into_words=True,
            padding=True,
            return_tensors="pt",
        )
        with torch.no_grad():
            logits = self.model(**encodings).logits
        tags: list[list[str]] = []
        for b, entry in enumerate(batch):
            positions = _word_positions(
                encodings.word_ids(b), len(entry.tokens), entry.transcript_id, entry.tokens
            )
            choice = logits[b, [plist[0] for plist in positions], :].argmax(dim=-1)
            tags.append([self.id2label[int(c)] for c in choice])
        return tags


def _batched(entries: Sequence[CorpusEntry], size: int) -> Iterator[Sequence[CorpusEntry]]:
    for start in range(0, len(entries), size):
        yield entries[start : start + size]


def extract_corpus(entries: Sequence[CorpusEntry], config: ExtractorConfig) -> list[dict]:
    """Embed every transcript; returns ingest records ready for JSONL.

    One record per input transcript, in input order, with the token
    list copied verbatim and one vector row per token.
    """
    encoder = _WordEncoder(config)
    tagger = _WordTagger(config.tagger) if config.tagger is not None else None

    records: list[dict] = []
    for batch in _batched(entries, config.batch_size):
        matrices = encoder.embed_batch(batch)
        tag_lists = tagger.tag_batch(batch) if tagger is not None else [None] * len(batch)
        for entry, matrix, tag_list in zip(batch, matrices, tag_lists):
            records.append(
                {
                    "transcript_id": entry.transcript_id,
                    "label": entry.label,
                    "tokens": list(entry.tokens),
                    "pos_tags": tag_list,
                    "vectors": [[_round8(x) for x in row] for row in matrix.tolist()],
                }
            )
    return records


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    """Write extraction records as JSONL, one object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
