"""Word-level transformer embedding extraction.

Reads a tokens-only corpus (JSON list of ``{"transcript_id", "label",
"tokens"}``), runs a pretrained encoder over each transcript, pools
subword hidden states back to one vector per word token, and writes the
ingest JSONL format consumed by the screening pipeline's embedding
reader.
"""

from extractor.extraction import (
    POOLING_MODES,
    CorpusEntry,
    ExtractionError,
    ExtractorConfig,
    extract_corpus,
    read_corpus,
    write_jsonl,
)

__all__ = [
    "POOLING_MODES",
    "CorpusEntry",
    "ExtractionError",
    "ExtractorConfig",
    "extract_corpus",
    "read_corpus",
    "write_jsonl",
]
