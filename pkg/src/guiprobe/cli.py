"""Command-line entry point: ``guiprobe validate|run|compare|emit-plots|convert``."""

from __future__ import annotations

import dataclasses
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .dataset import FORMATS, CorpusError, adapt, load_canonical, save_canonical, validate_corpus
from .dataset.adapters import AdapterError
from .reports import compare_runs, load_manifest_reports, render_delta_table, write_plot_data
from .runner import ConfigError, RunConfig, run_experiment


@click.group()
@click.version_option(__version__, prog_name="guiprobe")
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose: int) -> None:
    """Probe GUI agents for memorization versus reasoning."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("corpus", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--format", "format_id", type=click.Choice(FORMATS), default="canonical", show_default=True)
def validate(corpus: Path, format_id: str) -> None:
    """Check a corpus directory and print a one-line summary."""
    try:
        c = load_canonical(corpus) if format_id == "canonical" else adapt(format_id, corpus)
    except (CorpusError, AdapterError) as exc:
        click.echo(f"invalid: {exc}", err=True)
        sys.exit(1)
    problems = validate_corpus(c)
    for v in problems:
        click.echo(f"{v.sample_id}: {v.rule}: {v.message}", err=True)
    steps = c.steps()
    click.echo(f"{c.name}: {len(c.episodes)} episodes, {len(steps)} steps, "
               f"{c.dropped_steps} dropped, {len(problems)} problems")
    sys.exit(1 if problems else 0)


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Override the config's output directory.")
def run(config: Path, output_dir: Path | None) -> None:
    """Run every (agent, probe) pair of CONFIG. Exit 0 only if all produced a report."""
    try:
        cfg = RunConfig.load(config)
        if output_dir is not None:
            cfg = dataclasses.replace(cfg, output_dir=str(output_dir.resolve()))
        manifest = run_experiment(cfg)
    except (ConfigError, CorpusError, AdapterError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out = Path(manifest.output_dir)
    click.echo(f"{len(manifest.reports)} reports, {len(manifest.failures)} failures -> {out / 'manifest.json'}")
    for f in manifest.failures:
        click.echo(f"FAILED {f['agent_id']} / {f['probe']}: {f['error']}", err=True)
    sys.exit(0 if manifest.ok else 1)


@main.command()
@click.argument("manifest_a", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("manifest_b", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--all-rows", is_flag=True, help="Print unflagged rows too.")
def compare(manifest_a: Path, manifest_b: Path, all_rows: bool) -> None:
    """Metric differences between two runs (B minus A). Exit 1 if anything changed."""
    try:
        rows = compare_runs(manifest_a, manifest_b)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    flagged = [r for r in rows if r.flagged]
    click.echo(render_delta_table(rows if all_rows else flagged), nl=False)
    click.echo(f"{len(flagged)} of {len(rows)} rows differ", err=True)
    sys.exit(1 if flagged else 0)


@main.command("emit-plots")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory for the CSV tables (default: <run>/plots).")
def emit_plots(manifest: Path, out: Path | None) -> None:
    """Write memory_reasoning.csv and vmc_rs.csv for a finished run."""
    reports = load_manifest_reports(manifest)
    if not reports:
        click.echo("error: manifest lists no reports", err=True)
        sys.exit(1)
    for p in write_plot_data(reports, out or manifest.parent / "plots"):
        click.echo(str(p))


@main.command()
@click.argument("format_id", type=click.Choice([f for f in FORMATS if f != "canonical"]))
@click.argument("source", type=click.Path(exists=True, path_type=Path))
@click.argument("dest", type=click.Path(file_okay=False, path_type=Path))
def convert(format_id: str, source: Path, dest: Path) -> None:
    """Convert a native dataset export into a canonical corpus directory."""
    try:
        corpus = adapt(format_id, source)
    except (CorpusError, AdapterError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    save_canonical(corpus, dest)
    click.echo(f"{len(corpus.episodes)} episodes, {len(corpus.steps())} steps "
               f"({corpus.dropped_steps} dropped) -> {dest}")


if __name__ == "__main__":
    main()
