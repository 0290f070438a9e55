"""Command-line interface: ``python -m src <command>``.

Command output goes to stdout (or ``--out`` files); logs and tables go to
stderr. Any library failure ends the command with one line on stderr,
``error code=<code> type=<Class> message=<text>``, and the class's exit code.
"""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, List, Optional, TypeVar

import click
import pandas as pd
import typer
from rich.console import Console
from rich.table import Table
from typer.core import TyperGroup

from src.config import load_methods, load_settings, load_splits, load_synth_config
from src.errors import ConfigError, SigfuseError
from src.evaluation.harness import (
    compare_methods,
    evaluate_split,
    lambda_grid_search,
    load_split,
    parse_grid,
)
from src.evaluation.metrics import render_cell_grid
from src.evaluation.reports import (
    comparison_frame,
    ranked_lists_to_frame,
    write_accuracy_rows,
    write_cell_grid,
    write_comparison,
    write_grid_curves,
    write_ranked_lists,
)
from src.identify.identifier import batch_identify, explain_match
from src.ingest.loader import (
    load_accuracy_table,
    load_gallery,
    load_manifest,
    load_probes,
    load_signatures_from_dir,
)
from src.ingest.atomic import write_text_atomic
from src.ingest.sigfile import read_signature
from src.logging_setup import configure_logging
from src.matching.matcher import match_signatures
from src.schemas.evaluation import MatcherKind, MethodConfig, default_methods
from src.schemas.identification import Aggregation
from src.schemas.matching import DEFAULT_LAMBDA, AttributeSource
from src.schemas.synth import SynthConfig
from src.signature.assembler import validate
from src.stats.friedman import (
    DEFAULT_ALPHA,
    compare_two_methods,
    load_accuracy_matrix,
    significance_from_ranks,
)
from src.synth.generator import generate_benchmark, write_benchmark
from src.weighting.weights import weights_from_probe_confidence, weights_from_training_accuracy

logger = logging.getLogger(__name__)

err_console = Console(stderr=True)

USAGE_ERROR_CODE = "usage"
IO_ERROR_CODE = "io_error"
IO_ERROR_EXIT = 3
LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")

F = TypeVar("F", bound=Callable)


def _error_line(code: str, kind: str, message: str) -> None:
    text = " ".join(str(message).split())
    typer.echo(f"error code={code} type={kind} message={text}", err=True)


def _fail(code: str, kind: str, message: str, exit_code: int) -> None:
    _error_line(code, kind, message)
    raise typer.Exit(code=exit_code)


class SingleLineErrorGroup(TyperGroup):
    """Reports click parsing errors (unknown flags, bad values) as one error line."""

    def main(self, *args: Any, standalone_mode: bool = True, **kwargs: Any) -> Any:
        if not standalone_mode:
            return super().main(*args, standalone_mode=False, **kwargs)
        try:
            result = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as err:
            _error_line(USAGE_ERROR_CODE, type(err).__name__, err.format_message())
            sys.exit(err.exit_code)
        except click.Abort:
            _error_line("aborted", "Abort", "aborted by user")
            sys.exit(1)
        # non-standalone click returns the exit code of typer.Exit
        sys.exit(result if isinstance(result, int) else 0)


app = typer.Typer(
    cls=SingleLineErrorGroup,
    add_completion=False,
    no_args_is_help=True,
    help="Patch + soft-attribute signature matcher.",
)


def handled(fn: F) -> F:
    """Map library errors to the single-line error report and exit status."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SigfuseError as err:
            _fail(err.code, type(err).__name__, str(err), err.exit_code)
        except OSError as err:
            _fail(IO_ERROR_CODE, type(err).__name__, str(err), IO_ERROR_EXIT)

    return wrapper  # type: ignore[return-value]


@app.callback()
@handled
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING, ERROR."),
) -> None:
    settings = load_settings()
    level = log_level or settings.log_level
    if level.upper() not in LOG_LEVELS:
        raise ConfigError(f"unknown log level {level!r}")
    configure_logging(level)


def _parse_ints(text: str) -> List[int]:
    try:
        values = sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError as err:
        raise ConfigError(f"ranks {text!r} must be a comma list of integers") from err
    if not values or values[0] < 1:
        raise ConfigError(f"ranks {text!r} must be integers >= 1")
    return values


def _parse_floats(text: str, what: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as err:
        raise ConfigError(f"{what} {text!r} must be a comma list of numbers") from err


def _method(name: str, lam: float, matcher: MatcherKind, agg: Aggregation, source: AttributeSource) -> MethodConfig:
    try:
        return MethodConfig(name=name, lam=lam, matcher=matcher, aggregation=agg, attribute_source=source)
    except ValueError as err:
        raise ConfigError(str(err)) from err


# -----------------------------
# match / identify / validate
# -----------------------------

@app.command()
@handled
def match(
    gallery_sig: Path = typer.Argument(..., help="Gallery .sig file."),
    probe_sig: Path = typer.Argument(..., help="Probe .sig file."),
    lam: float = typer.Option(DEFAULT_LAMBDA, "--lambda", help="Fusion weight."),
    matcher: MatcherKind = typer.Option(MatcherKind.plain, "--matcher"),
    weights: Optional[Path] = typer.Option(None, "--weights", help="Attribute accuracy table (weighted matcher)."),
    source: AttributeSource = typer.Option(AttributeSource.logits, "--source"),
) -> None:
    """Score one pair and list the attributes the two signatures share."""
    method = _method("match", lam, matcher, Aggregation.max, source)
    if weights is not None and matcher is not MatcherKind.weighted:
        raise ConfigError("--weights is only used by the weighted matcher")
    g = read_signature(gallery_sig)
    p = read_signature(probe_sig)

    w = None
    if matcher is MatcherKind.weighted:
        if weights is None:
            raise ConfigError("the weighted matcher needs --weights")
        w = weights_from_training_accuracy(load_accuracy_table(weights), g.attributes.attribute_names)
    elif matcher is MatcherKind.probe:
        w = weights_from_probe_confidence(p.attributes)

    b = match_signatures(g, p, method.fusion_config(), w)
    shared, gallery_only, probe_only = explain_match(g, p)
    typer.echo(f"patch_score={b.patch_score:.6f}")
    typer.echo(f"attribute_score={b.attribute_score:.6f}")
    typer.echo(f"fused_score={b.fused_score:.6f}")
    typer.echo(f"non_occluded_pairs={b.non_occluded_pairs}")
    typer.echo(f"lambda={b.lam:g}")
    typer.echo(f"shared_attributes={'; '.join(shared)}")
    typer.echo(f"gallery_only_attributes={'; '.join(gallery_only)}")
    typer.echo(f"probe_only_attributes={'; '.join(probe_only)}")


@app.command()
@handled
def identify(
    gallery: Path = typer.Option(..., "--gallery", help="Gallery manifest."),
    probe: Path = typer.Option(..., "--probe", help="Probe manifest."),
    lam: float = typer.Option(DEFAULT_LAMBDA, "--lambda"),
    matcher: MatcherKind = typer.Option(MatcherKind.plain, "--matcher"),
    agg: Aggregation = typer.Option(Aggregation.max, "--agg"),
    source: AttributeSource = typer.Option(AttributeSource.logits, "--source"),
    weights: Optional[Path] = typer.Option(None, "--weights"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out: Optional[Path] = typer.Option(None, "--out", help="Ranked-list CSV (stdout when omitted)."),
) -> None:
    """Rank every gallery subject for every probe template."""
    method = _method("identify", lam, matcher, agg, source)
    table = load_accuracy_table(weights) if weights is not None else None
    g = load_gallery(gallery)
    probes = load_probes(probe)
    lists = batch_identify(
        probes.templates,
        g,
        method.fusion_config(),
        weight_mode=method.weight_mode,
        accuracy_table=table,
        aggregation=method.aggregation,
        n_jobs=threads,
    )
    frame = ranked_lists_to_frame(lists)
    if out is None:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    else:
        write_ranked_lists(out, lists)
    failed = sum(1 for rl in lists if not rl.ok)
    if failed:
        err_console.print(f"[yellow]{failed} of {len(lists)} probes failed; see the CSV notes[/yellow]")


@app.command("validate")
@handled
def validate_cmd(
    paths: List[Path] = typer.Argument(None, help=".sig files or directories."),
    manifest: Optional[Path] = typer.Option(None, "--manifest", help="Validate every signature a manifest lists."),
) -> None:
    """Load and check signature files; exit nonzero on the first class of failure."""
    files: List[Path] = []
    for p in paths or []:
        files.extend(load_signatures_from_dir(p) if p.is_dir() else [p])
    if manifest is not None:
        files.extend(e.path for e in load_manifest(manifest))
    if not files:
        raise ConfigError("nothing to validate: pass .sig files, directories or --manifest")

    first_error: Optional[SigfuseError] = None
    for f in files:
        try:
            violations = validate(read_signature(f))
        except SigfuseError as err:
            typer.echo(f"{f}: {type(err).__name__}: {err}")
            first_error = first_error or err
            continue
        typer.echo(f"{f}: ok" if not violations else f"{f}: {'; '.join(violations)}")
    if first_error is not None:
        raise first_error


# -----------------------------
# evaluate / gridsearch / compare
# -----------------------------

def _accuracy_table(configured: Optional[Path], override: Optional[Path]):
    path = override or configured
    return load_accuracy_table(path) if path is not None else None


@app.command()
@handled
def evaluate(
    splits: Path = typer.Option(..., "--splits", help="TOML with [[split]] tables."),
    ranks: str = typer.Option("1", "--ranks", help="Comma list, e.g. 1,5."),
    lam: float = typer.Option(DEFAULT_LAMBDA, "--lambda"),
    matcher: MatcherKind = typer.Option(MatcherKind.plain, "--matcher"),
    agg: Aggregation = typer.Option(Aggregation.max, "--agg"),
    source: AttributeSource = typer.Option(AttributeSource.logits, "--source"),
    weights: Optional[Path] = typer.Option(None, "--weights"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out: Path = typer.Option(..., "--out", help="CSV of method,split,k,accuracy rows."),
    cells_dir: Optional[Path] = typer.Option(None, "--cells-dir", help="Write per-cell rank-1 grids here."),
) -> None:
    """Rank-k accuracy of one matcher on every split."""
    ks = _parse_ints(ranks)
    method = _method(matcher.value, lam, matcher, agg, source)
    split_cfgs, table_path = load_splits(splits)
    table = _accuracy_table(table_path, weights)

    reports = []
    for cfg in split_cfgs:
        loaded = load_split(cfg)
        report = evaluate_split(loaded, method, table, max_rank=max(ks), n_jobs=threads)
        reports.append(report)
        if cells_dir is not None and report.cells:
            write_cell_grid(cells_dir / f"{cfg.name}_cells.csv", render_cell_grid(report.cells))
    write_accuracy_rows(out, reports, ks)

    grid = Table(title=f"{method.name} (lambda={lam:g})")
    grid.add_column("split")
    for k in ks:
        grid.add_column(f"rank-{k}", justify="right")
    grid.add_column("skipped", justify="right")
    for r in reports:
        grid.add_row(r.split, *(f"{r.rank_k[k - 1]:.2f}" for k in ks), str(r.probes_skipped))
    err_console.print(grid)


@app.command()
@handled
def gridsearch(
    splits: Path = typer.Option(..., "--splits"),
    grid: str = typer.Option("0.1:0.1:1.0", "--grid", help="start:step:stop or a comma list."),
    matcher: Optional[List[MatcherKind]] = typer.Option(
        None, "--matcher", help="Repeatable; default sweeps every matcher the inputs allow."
    ),
    agg: Aggregation = typer.Option(Aggregation.max, "--agg"),
    source: AttributeSource = typer.Option(AttributeSource.logits, "--source"),
    weights: Optional[Path] = typer.Option(None, "--weights"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out: Path = typer.Option(..., "--out", help="CSV of method,lambda,mean_rank1,best rows."),
) -> None:
    """Sweep the fusion weight and report the best value per matcher."""
    values = parse_grid(grid)
    split_cfgs, table_path = load_splits(splits)
    table = _accuracy_table(table_path, weights)
    kinds = matcher or [
        k for k in MatcherKind if k is not MatcherKind.weighted or table is not None
    ]
    loaded = [load_split(cfg) for cfg in split_cfgs]

    results = []
    for kind in kinds:
        method = _method(kind.value, values[0], kind, agg, source)
        results.append(lambda_grid_search(loaded, values, method, table, n_jobs=threads))
    write_grid_curves(out, results)
    for r in results:
        err_console.print(f"{r.method}: best lambda = {r.best_lambda:g}")


@app.command()
@handled
def compare(
    splits: Path = typer.Option(..., "--splits"),
    methods: Optional[Path] = typer.Option(None, "--methods", help="TOML with [[method]] tables."),
    lam: float = typer.Option(DEFAULT_LAMBDA, "--lambda", help="Fusion weight of the built-in methods."),
    weights: Optional[Path] = typer.Option(None, "--weights"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    out: Path = typer.Option(..., "--out", help="Methods x splits rank-1 matrix CSV (input of `stats`)."),
) -> None:
    """Rank-1 matrix of several methods over every split."""
    split_cfgs, table_path = load_splits(splits)
    table = _accuracy_table(table_path, weights)
    if methods is not None:
        catalogue = load_methods(methods)
    else:
        catalogue = [m for m in default_methods(lam) if m.matcher is not MatcherKind.weighted or table is not None]
    loaded = [load_split(cfg) for cfg in split_cfgs]

    comparison = compare_methods(catalogue, loaded, table, n_jobs=threads)
    write_comparison(out, comparison)

    frame = comparison_frame(comparison)
    best = comparison.best_per_split()
    view = Table(title="rank-1 accuracy (%)")
    view.add_column("method")
    for col in frame.columns:
        view.add_column(str(col), justify="right")
    for name, row in frame.iterrows():
        cells = []
        for col, v in row.items():
            text = "failed" if pd.isna(v) else f"{v:.2f}"
            cells.append(f"[bold]{text}[/bold]" if name in best.get(col, []) else text)
        view.add_row(str(name), *cells)
    err_console.print(view)
    for (m, s), reason in sorted(comparison.failures.items()):
        err_console.print(f"[red]{m} on {s}: {reason}[/red]")


# -----------------------------
# stats / synth
# -----------------------------

@app.command()
@handled
def stats(
    matrix: Optional[Path] = typer.Option(None, "--matrix", help="Accuracy CSV from `compare` or `evaluate`."),
    ranks: Optional[str] = typer.Option(None, "--ranks", help="Average ranks instead of a matrix, e.g. 1.73,1.27."),
    datasets: Optional[int] = typer.Option(None, "--datasets", min=1, help="N, with --ranks."),
    names: Optional[str] = typer.Option(None, "--methods", help="Method names, with --ranks."),
    fcrit: Optional[float] = typer.Option(None, "--fcrit", help="F critical value; looked up when omitted."),
    qalpha: Optional[float] = typer.Option(None, "--qalpha", help="Bonferroni-Dunn q_alpha; looked up when omitted."),
    alpha: float = typer.Option(DEFAULT_ALPHA, "--alpha"),
    out: Optional[Path] = typer.Option(None, "--out", help="Machine-readable statistic,value CSV."),
) -> None:
    """Friedman / Iman-Davenport test with the Bonferroni-Dunn critical difference."""
    if (matrix is None) == (ranks is None):
        raise ConfigError("pass exactly one of --matrix or --ranks")
    if matrix is not None:
        report = compare_two_methods(load_accuracy_matrix(matrix), f_crit=fcrit, q_alpha=qalpha, alpha=alpha)
    else:
        if datasets is None:
            raise ConfigError("--ranks needs --datasets")
        method_names = [x.strip() for x in names.split(",")] if names else None
        report = significance_from_ranks(
            _parse_floats(ranks, "ranks"),
            datasets,
            methods=method_names,
            f_crit=fcrit,
            q_alpha=qalpha,
            alpha=alpha,
        )
    typer.echo(report.render())
    if out is not None:
        write_text_atomic(out, report.to_frame().to_csv(index=False, lineterminator="\n"))


@app.command()
@handled
def synth(
    config: Path = typer.Option(..., "--config", help="TOML synth configuration."),
    out: Path = typer.Option(..., "--out", help="Output directory."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the configured seed."),
) -> None:
    """Generate a deterministic synthetic gallery/probe benchmark."""
    cfg = load_synth_config(config)
    if seed is not None:
        try:
            cfg = SynthConfig(**{**cfg.model_dump(), "seed": seed})
        except ValueError as err:
            raise ConfigError(f"invalid --seed: {err}") from err
    paths = write_benchmark(generate_benchmark(cfg), out)
    for kind, path in paths.items():
        typer.echo(f"{kind}={path}")
