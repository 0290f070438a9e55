from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.config import load_settings
from src.errors import ConfigError, EvaluationError, ManifestError, SigfuseError
from src.evaluation.metrics import cmc_curve, per_cell_accuracy
from src.identify.gallery import Gallery, Template
from src.identify.identifier import batch_identify
from src.ingest.loader import load_gallery, load_probes
from src.schemas.evaluation import AccuracyReport, EvaluationSplit, GridSearchResult, MethodConfig
from src.schemas.identification import RankedList
from src.weighting.weights import AttributeAccuracyTable

logger = logging.getLogger(__name__)

AVERAGE = "Average"


@dataclass(frozen=True)
class LoadedSplit:
    name: str
    gallery: Gallery
    probes: List[Template]
    truth: Dict[str, str]
    cells: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.probes:
            raise EvaluationError(f"split {self.name!r} has no probes")
        enrolled = set(self.gallery.subject_ids)
        missing = sorted({s for s in self.truth.values() if s not in enrolled})
        if missing:
            raise EvaluationError(
                f"split {self.name!r}: probe subjects not enrolled in the gallery: {missing[:5]}"
            )


def load_split(split: EvaluationSplit) -> LoadedSplit:
    for role, path in (("gallery", split.gallery), ("probe", split.probe)):
        if not Path(path).is_file():
            raise ManifestError(
                f"split {split.name!r}: {role} manifest {path} does not exist (create it with `synth --out`)"
            )
    gallery = load_gallery(split.gallery)
    probes = load_probes(split.probe)
    logger.info(
        "split %s: %d gallery subjects, %d probe templates",
        split.name,
        len(gallery.templates),
        len(probes.templates),
    )
    return LoadedSplit(split.name, gallery, probes.templates, probes.truth, probes.cells)


def _jobs(n_jobs: Optional[int]) -> int:
    return n_jobs if n_jobs is not None else load_settings().threads


def _parallel(tasks: Iterable, n_jobs: Optional[int]) -> list:
    jobs = _jobs(n_jobs)
    tasks = list(tasks)
    if jobs == 1:
        return [fn(*args) for fn, args, _ in tasks]
    return Parallel(n_jobs=jobs, prefer="threads")(delayed(fn)(*args) for fn, args, _ in tasks)


def identify_split(
    split: LoadedSplit,
    method: MethodConfig,
    accuracy_table: Optional[AttributeAccuracyTable] = None,
    lam: Optional[float] = None,
    n_jobs: Optional[int] = 1,
) -> List[RankedList]:
    return batch_identify(
        split.probes,
        split.gallery,
        method.fusion_config(lam),
        weight_mode=method.weight_mode,
        accuracy_table=accuracy_table,
        aggregation=method.aggregation,
        n_jobs=n_jobs,
    )


def evaluate_split(
    split: LoadedSplit,
    method: MethodConfig,
    accuracy_table: Optional[AttributeAccuracyTable] = None,
    max_rank: int = 1,
    lam: Optional[float] = None,
    n_jobs: Optional[int] = 1,
) -> AccuracyReport:
    """Rank-1..max_rank accuracy of one method on one split.

    Failed probes and probes whose true subject was skipped count as misses;
    ``probes_skipped`` reports how many of them there were.
    """
    lists = identify_split(split, method, accuracy_table, lam, n_jobs)
    curve = cmc_curve(lists, split.truth, max_rank)
    cells = per_cell_accuracy(lists, split.truth, split.cells) if split.cells else {}
    skipped = sum(1 for rl in lists if not rl.ok or rl.rank_of(split.truth[rl.probe_id]) is None)
    return AccuracyReport(
        split=split.name,
        method=method.name,
        rank_k=curve,
        cells=cells,
        probes_evaluated=len(lists),
        probes_skipped=skipped,
    )


# -----------------------------
# Fusion-weight sweep
# -----------------------------

def parse_grid(text: str) -> List[float]:
    """``start:step:stop`` (inclusive) or a comma list, e.g. ``0.1:0.1:1.0``."""
    text = text.strip()
    try:
        if ":" in text:
            start, step, stop = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"grid {text!r}: need step > 0 and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 10) for i in range(count)]
        else:
            values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as err:
        raise ConfigError(f"grid {text!r} is not 'start:step:stop' or a comma list") from err
    return validate_grid(values)


def validate_grid(grid: Sequence[float]) -> List[float]:
    values = sorted(set(float(x) for x in grid))
    if not values:
        raise ConfigError("lambda grid is empty")
    bad = [v for v in values if not math.isfinite(v) or v < 0]
    if bad:
        raise ConfigError(f"lambda grid values must be finite and >= 0, got {bad}")
    return values


def lambda_grid_search(
    splits: Sequence[LoadedSplit],
    grid: Sequence[float],
    method: MethodConfig,
    accuracy_table: Optional[AttributeAccuracyTable] = None,
    n_jobs: Optional[int] = None,
) -> GridSearchResult:
    """Mean rank-1 over splits for every λ; the best λ breaks ties toward the smallest."""
    if not splits:
        raise EvaluationError("lambda grid search needs at least one split")
    values = validate_grid(grid)

    tasks = [
        (evaluate_split, (s, method, accuracy_table, 1, lam, 1), (lam, s.name))
        for lam in values
        for s in splits
    ]
    reports = _parallel(tasks, n_jobs)

    by_lam: Dict[float, List[float]] = {lam: [] for lam in values}
    for (_, _, (lam, _)), report in zip(tasks, reports):
        by_lam[lam].append(report.rank1)
    curve = [(lam, float(np.mean(by_lam[lam]))) for lam in values]

    best_lam, best_acc = curve[0]
    for lam, acc in curve[1:]:
        if acc > best_acc:
            best_lam, best_acc = lam, acc
    logger.info("method %s: best lambda %.4g (mean rank-1 %.2f%%)", method.name, best_lam, best_acc)
    return GridSearchResult(method=method.name, best_lambda=best_lam, curve=curve)


# -----------------------------
# Method comparison
# -----------------------------

@dataclass
class MethodComparison:
    """Rank-1 accuracy matrix: one row per method, one column per split."""

    accuracy: pd.DataFrame
    reports: List[AccuracyReport] = field(default_factory=list)
    failures: Dict[Tuple[str, str], str] = field(default_factory=dict)

    def with_average(self) -> pd.DataFrame:
        """Adds the unweighted mean over splits; NaN where any split failed."""
        out = self.accuracy.copy()
        out[AVERAGE] = self.accuracy.mean(axis=1, skipna=False)
        return out

    def best_per_split(self) -> Dict[str, List[str]]:
        """Methods reaching the column maximum, per split (and Average)."""
        table = self.with_average()
        best: Dict[str, List[str]] = {}
        for col in table.columns:
            column = table[col]
            if column.isna().all():
                best[col] = []
                continue
            top = column.max()
            best[col] = [m for m, v in column.items() if v == top]
        return best


def compare_methods(
    methods: Sequence[MethodConfig],
    splits: Sequence[LoadedSplit],
    accuracy_table: Optional[AttributeAccuracyTable] = None,
    n_jobs: Optional[int] = None,
) -> MethodComparison:
    if len(methods) < 2:
        raise ConfigError(f"compare needs at least 2 methods, got {len(methods)}")
    if len(splits) < 2:
        raise ConfigError(f"compare needs at least 2 splits, got {len(splits)}")
    for kind, names in (("method", [m.name for m in methods]), ("split", [s.name for s in splits])):
        if len(set(names)) != len(names):
            raise ConfigError(f"{kind} names must be unique: {names}")

    def run(method: MethodConfig, split: LoadedSplit):
        try:
            return evaluate_split(split, method, accuracy_table)
        except SigfuseError as err:
            logger.warning("method %s failed on split %s: %s", method.name, split.name, err)
            return err

    tasks = [(run, (m, s), (m.name, s.name)) for m in methods for s in splits]
    results = _parallel(tasks, n_jobs)

    matrix = pd.DataFrame(
        np.nan,
        index=pd.Index([m.name for m in methods], name="method"),
        columns=[s.name for s in splits],
        dtype=np.float64,
    )
    comparison = MethodComparison(accuracy=matrix)
    for (_, _, (method_name, split_name)), result in zip(tasks, results):
        if isinstance(result, SigfuseError):
            comparison.failures[(method_name, split_name)] = f"{type(result).__name__}: {result}"
            continue
        matrix.loc[method_name, split_name] = result.rank1
        comparison.reports.append(result)
    return comparison
