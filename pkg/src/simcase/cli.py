"""Command-line entry point: ``simcase <command> [--config FILE] [--dotted.key value ...]``."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import yaml

from . import __version__
from .config import ConfigError, PipelineConfig, deep_merge, parse_overrides
from .corpus import CorpusError, CorpusSchema, SynthConfig, generate_synthetic_corpus, load_corpus, validate_corpus, \
    write_corpus
from .pipeline import STAGES, PipelineError, run_stages

EXTRA = {"ignore_unknown_options": True, "allow_extra_args": True}


def _globals(ctx: click.Context) -> dict:
    g = {}
    obj = ctx.find_root().obj or {}
    for key in ("seed", "out_dir", "workers"):
        if obj.get(key) is not None:
            g[key] = obj[key]
    return g


def _load_config(ctx: click.Context, config: str | None) -> PipelineConfig:
    try:
        overrides = deep_merge(parse_overrides(list(ctx.args)), _globals(ctx))
        return PipelineConfig.load(config, overrides)
    except (ConfigError, CorpusError, OSError, yaml.YAMLError) as exc:
        raise click.ClickException(str(exc)) from exc


def _run(ctx: click.Context, config: str | None, stages, manifest_name: str) -> None:
    cfg = _load_config(ctx, config)
    try:
        manifest = run_stages(cfg, stages, manifest_name)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    except PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"{len(manifest.outputs)} files written to {cfg.out_dir.resolve()} ({manifest_name})")


@click.group()
@click.version_option(__version__, prog_name="simcase")
@click.option("--seed", type=int, default=None, help="Global random seed (overrides the config).")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--workers", type=int, default=None, help="Worker processes for document-parallel stages.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx: click.Context, seed, out_dir, workers, verbose) -> None:
    """Similar-case retrieval: classify precedent-related documents and track them over time."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"seed": seed, "out_dir": out_dir, "workers": workers}


@main.group()
def corpus() -> None:
    """Corpus utilities."""


@corpus.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Pipeline config whose precedents are checked against the corpus.")
def corpus_validate(path: str, config: str | None) -> None:
    """Load PATH, report schema errors and print a summary."""
    try:
        c = load_corpus(path, CorpusSchema())
        precs = PipelineConfig.load(config).precedents() if config else []
    except (CorpusError, ConfigError) as exc:
        raise click.ClickException(str(exc)) from exc
    lo, hi = c.date_range() if len(c) else (None, None)
    summary = {"documents": len(c), "first_date": str(lo), "last_date": str(hi)}
    for p in precs:
        summary[f"cites_{p.bp_id}"] = int(c.labels(p.bp_id).sum())
    click.echo(json.dumps(summary))
    for note in validate_corpus(c, precs):
        click.echo(f"warning: {note}", err=True)


@corpus.command("synth", context_settings=EXTRA)
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def corpus_synth(ctx: click.Context, config: str, seed: int | None, out: str) -> None:
    """Write a synthetic corpus with planted topic words and citations."""
    try:
        data = yaml.safe_load(Path(config).read_text(encoding="utf-8")) or {}
        data = deep_merge(data, parse_overrides(list(ctx.args)))
        seed = seed if seed is not None else _globals(ctx).get("seed", data.pop("seed", 0))
        data.pop("seed", None)
        c = generate_synthetic_corpus(SynthConfig.from_dict(data), seed)
    except (ConfigError, CorpusError, TypeError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    write_corpus(c, out)
    click.echo(f"{len(c)} documents written to {out}")


def _stage_command(stage: str, doc: str):
    @click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None)
    @click.pass_context
    def cmd(ctx: click.Context, config: str | None) -> None:
        _run(ctx, config, (stage,), f"manifest_{stage}.json")

    cmd.__doc__ = doc
    return main.command(stage, context_settings=EXTRA)(cmd)


_DOCS = {
    "train": "Split the labeled corpus, fit TF-IDF and train every model in the menu.",
    "evaluate": "Score the labeled corpus and write test-split metrics.",
    "retune": "Pick the largest threshold whose post-publication recall reaches the precedent's floor.",
    "predict": "Score the unlabeled corpus.",
    "timeseries": "Bin predicted and citing documents over time.",
    "correlate": "Word correlation matrices and frequency tables.",
    "breakdown": "Predicted documents per metadata group over time.",
    "explain": "Feature importances and LIME word frequencies.",
    "report": "Render SVG figures from the emitted tables.",
}
for _stage in STAGES:
    _stage_command(_stage, _DOCS[_stage])


@main.command("run", context_settings=EXTRA)
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def run(ctx: click.Context, config: str | None) -> None:
    """Run every stage and write manifest.json."""
    _run(ctx, config, STAGES, "manifest.json")


if __name__ == "__main__":  # pragma: no cover
    main()
