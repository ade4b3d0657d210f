"""Command-line entry point: corpus JSON in, ingest JSONL out."""

from __future__ import annotations

import click

from extractor.extraction import (
    POOLING_MODES,
    ExtractionError,
    ExtractorConfig,
    extract_corpus,
    read_corpus,
    write_jsonl,
)


def _parse_layer(_ctx: object, _param: object, value: str) -> int | str:
    if value == "last":
        return value
    try:
        return int(value)
    except ValueError:
        raise click.BadParameter(f"expected an integer or 'last', got {value!r}")


@click.command()
@click.option("--in", "in_path", required=True, type=click.Path(), help="Corpus JSON file (list of transcript objects).")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output ingest JSONL file.")
@click.option("--encoder", "encoder_name", required=True, help="Encoder model name or local path.")
@click.option("--layer", default="last", show_default=True, callback=_parse_layer, help="Hidden-state layer to pool: an integer or 'last'.")
@click.option("--pooling", type=click.Choice(POOLING_MODES), default="mean-subtokens", show_default=True, help="How to collapse a word's subtokens to one vector.")
@click.option("--tagger", default=None, help="Optional token-classification model for POS tags.")
@click.option("--dim", type=int, default=None, help="Expected vector width; checked against the encoder.")
@click.option("--batch-size", type=int, default=8, show_default=True, help="Transcripts per encoder forward pass.")
def main(
    in_path: str,
    out_path: str,
    encoder_name: str,
    layer: int | str,
    pooling: str,
    tagger: str | None,
    dim: int | None,
    batch_size: int,
) -> None:
    """Embed a token corpus into per-word vectors (ingest JSONL)."""
    try:
        config = ExtractorConfig(
            encoder_name=encoder_name,
            layer=layer,
            pooling=pooling,
            dim=dim,
            tagger=tagger,
            batch_size=batch_size,
        )
        entries = read_corpus(in_path)
        records = extract_corpus(entries, config)
        write_jsonl(records, out_path)
    except ExtractionError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"embedded {len(records)} transcripts to {out_path}")


if __name__ == "__main__":
    main()
