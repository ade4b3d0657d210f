"""Shared fixtures: a tiny local encoder/tagger pair and a sample corpus.

The encoder is a randomly initialized 2-layer BERT with a hand-built
WordPiece vocabulary, saved to a session temp directory so tests run
fully offline and reload identical weights every time.
"""

import json
import os

import pytest

os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "boy", "is", "taking", "a", "cook", "##ie", "##s",
    "um", "stool", "water", "over", "##flow", "##ing",
    "falling", "mother", "dish", "##es", "sink",
]

CORPUS = [
    {"transcript_id": "t-ad", "label": "AD", "tokens": ["the", "boy", "is", "taking", "cookies"]},
    {"transcript_id": "t-hc", "label": "HC", "tokens": ["water", "is", "overflowing", "um"]},
    {"transcript_id": "t-open", "label": None, "tokens": ["mother", "is", "falling", "dishes"]},
]


def _build_tokenizer():
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
    from transformers import BertTokenizerFast

    vocab = {t: i for i, t in enumerate(VOCAB)}
    backend = Tokenizer(models.WordPiece(vocab=vocab, unk_token="[UNK]"))
    backend.normalizer = normalizers.BertNormalizer(lowercase=True)
    backend.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    backend.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    return BertTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )


def _bert_config(**extra):
    from transformers import BertConfig

    return BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
        **extra,
    )


@pytest.fixture(scope="session")
def encoder_dir(tmp_path_factory):
    import torch
    from transformers import BertModel

    path = tmp_path_factory.mktemp("tiny-encoder")
    _build_tokenizer().save_pretrained(path)
    torch.manual_seed(0)
    BertModel(_bert_config()).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def tagger_dir(tmp_path_factory):
    import torch
    from transformers import BertForTokenClassification

    path = tmp_path_factory.mktemp("tiny-tagger")
    _build_tokenizer().save_pretrained(path)
    torch.manual_seed(1)
    config = _bert_config(
        num_labels=3,
        id2label={0: "NOUN", 1: "VERB", 2: "DET"},
        label2id={"NOUN": 0, "VERB": 1, "DET": 2},
    )
    BertForTokenClassification(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def corpus_data():
    return CORPUS


@pytest.fixture(scope="session")
def corpus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.json"
    path.write_text(json.dumps(CORPUS, indent=1), encoding="utf-8")
    return str(path)
