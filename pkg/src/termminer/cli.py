"""Command line entry point: ``termminer <stage> [options]``.

Exit codes: 0 success, 1 usage error, 2 missing input, 3 internal invariant
violation.
"""

from __future__ import annotations

import logging
import sys

import click

from .config import ConfigError, PipelineConfig, apply_overrides, load_config
from .io import MissingInputError
from .pipeline import RUNNERS, InvariantViolation, run_pipeline, summarize

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_INVARIANT = 0, 1, 2, 3

# CLI option name -> (config section, key)
_FLAG_TARGETS = {
    "manifest": ("paths", "manifest"),
    "boundaries": ("paths", "boundaries"),
    "transcriptions": ("paths", "transcriptions"),
    "ground_truth": ("paths", "ground_truth"),
    "output_dir": ("paths", "output_dir"),
    "window_ms": ("segmentation", "window_ms"),
    "k": ("codebook", "k"),
    "seed": ("codebook", "seed"),
    "min_length": ("mining", "min_length"),
    "match": ("mining", "match"),
    "mismatch": ("mining", "mismatch"),
    "gap": ("mining", "gap"),
    "traceback": ("mining", "traceback"),
    "jobs": ("mining", "jobs"),
    "radius_t": ("clustering", "radius_T"),
    "sep_a": ("clustering", "sep_a"),
    "norm_b": ("clustering", "norm_b"),
    "max_rounds": ("clustering", "max_rounds"),
    "labels": ("evaluation", "labels"),
    "transcript": ("evaluation", "transcript"),
    "stopwords": ("evaluation", "stopwords"),
}


def _common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML config file."),
        click.option("-o", "--output-dir", help="Artifact directory."),
        click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _mining_opts(f):
    opts = [
        click.option("--transcriptions", help="Pseudo transcriptions (JSON lines)."),
        click.option("--min-length", type=int, help="Shortest subsequence kept (default 4)."),
        click.option("--match", type=float, help="Match score (default +1)."),
        click.option("--mismatch", type=float, help="Mismatch score (default -1)."),
        click.option("--gap", type=float, help="Gap score (default 0)."),
        click.option("--traceback", type=click.Choice(["last-row", "global"]), help="Traceback start cells."),
        click.option("--jobs", type=int, help="Worker processes for pair alignment."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _cluster_opts(f):
    opts = [
        click.option("--radius-T", "radius_t", type=float, help="Cluster radius T (default 1.4)."),
        click.option("--sep-a", type=float, help="Centroid separation factor a (default 1.8)."),
        click.option("--norm-b", type=float, help="Distance scale b (default 4)."),
        click.option("--max-rounds", type=int, help="Round cap (default 50)."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _eval_opts(f):
    opts = [
        click.option("--ground-truth", help="Ground-truth JSON."),
        click.option("--labels", help="JSON mapping cluster id -> word label(s)."),
        click.option("--transcript", help="Reference transcript, one utterance per line."),
        click.option("--stopwords", help="Stopword file, whitespace separated."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _front_opts(f):
    opts = [
        click.option("--manifest", help="Corpus manifest JSON."),
        click.option("--boundaries", help="Directory of <utt_id>.json boundary hypotheses."),
        click.option("--window-ms", type=float, help="Boundary merge window (default 20)."),
        click.option("--k", "k", type=int, help="Number of units (default 55)."),
        click.option("--seed", type=int, help="Codebook seed."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _build_config(config_path: str | None, flags: dict) -> PipelineConfig:
    cfg = load_config(config_path)
    tree: dict[str, dict] = {}
    if flags.get("_synth"):
        tree["synth"] = dict(flags["_synth"])
    for name, value in flags.items():
        if value is None or name not in _FLAG_TARGETS:
            continue
        if name == "traceback":
            value = value.replace("-", "_")
        section, key = _FLAG_TARGETS[name]
        tree.setdefault(section, {})[key] = value
    apply_overrides(cfg, tree)
    return cfg.validate()


def _run(stage: str, config_path: str | None, verbose: bool, flags: dict) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    cfg = _build_config(config_path, flags)
    outputs = run_pipeline(cfg) if stage == "pipeline" else RUNNERS[stage](cfg)
    click.echo(summarize(outputs))


@click.group()
def cli() -> None:
    """Discover repeated keyword patterns in discrete unit sequences."""


@cli.command()
@_common
@_front_opts
def segment(config_path, verbose, **flags):
    """Merge boundary hypotheses and average frames into segment features."""
    _run("segment", config_path, verbose, flags)


@cli.command()
@_common
@_front_opts
def codebook(config_path, verbose, **flags):
    """Ward HAC for sizing hints and the k-means unit codebook."""
    _run("codebook", config_path, verbose, flags)


@cli.command("transcribe")
@_common
def transcribe_cmd(config_path, verbose, **flags):
    """Label segments with their nearest codebook unit."""
    _run("transcribe", config_path, verbose, flags)


@cli.command()
@_common
@_mining_opts
def mine(config_path, verbose, **flags):
    """Align all utterance pairs and collect the bag of unit sequences."""
    _run("mine", config_path, verbose, flags)


@cli.command()
@_common
@_cluster_opts
def cluster(config_path, verbose, **flags):
    """Leader-cluster the bag into keyword clusters."""
    _run("cluster", config_path, verbose, flags)


# the cluster stage under its descriptive name
cli.add_command(cluster, "cluster-keywords")


@cli.command()
@_common
@_eval_opts
def evaluate(config_path, verbose, **flags):
    """Purity, keyword recovery and n-gram coverage reports."""
    _run("evaluate", config_path, verbose, flags)


@cli.command()
@_common
@click.option("--synth-seed", type=int, help="Generator seed.")
@click.option("--substitution-rate", type=float)
@click.option("--insertion-rate", type=float)
@click.option("--deletion-rate", type=float)
@click.option("--features/--no-features", default=None, help="Also render frame features and boundary hypotheses.")
def synth(config_path, verbose, synth_seed, substitution_rate, insertion_rate, deletion_rate, features, **flags):
    """Generate a synthetic corpus with planted keywords and its ground truth."""
    extra = {
        "seed": synth_seed,
        "substitution_rate": substitution_rate,
        "insertion_rate": insertion_rate,
        "deletion_rate": deletion_rate,
        "features": features,
    }
    flags["_synth"] = {k: v for k, v in extra.items() if v is not None}
    _run("synth", config_path, verbose, flags)


@cli.command()
@_common
@_front_opts
@_mining_opts
@_cluster_opts
@_eval_opts
def pipeline(config_path, verbose, **flags):
    """Run every stage in order."""
    _run("pipeline", config_path, verbose, flags)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="termminer", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except ConfigError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return EXIT_USAGE
    except MissingInputError as exc:
        click.echo(f"missing input: {exc}", err=True)
        return EXIT_MISSING
    except InvariantViolation as exc:
        click.echo(f"invariant violation: {exc}", err=True)
        return EXIT_INVARIANT
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
