"""CSV emitters for ranked lists, accuracy tables and sweep curves.

Floats in ranked-list CSVs are written with ``repr`` (shortest round-trip form)
so the same ranking always produces the same bytes; accuracy tables are
rounded to 2 decimals.
"""

from __future__ import annotations

import logging
import os
from typing import Iterable, List, Sequence

import pandas as pd

from src.errors import EvaluationError
from src.evaluation.harness import MethodComparison
from src.ingest.atomic import write_text_atomic
from src.schemas.evaluation import AccuracyReport, GridSearchResult
from src.schemas.identification import RankedList

logger = logging.getLogger(__name__)

RANKED_COLUMNS = [
    "probe_id",
    "rank",
    "subject_id",
    "score",
    "patch_score",
    "attribute_score",
    "non_occluded_pairs",
    "note",
]
ACCURACY_COLUMNS = ["method", "split", "k", "accuracy"]


def _write(frame: pd.DataFrame, path: str | os.PathLike, index: bool = False) -> None:
    target = write_text_atomic(path, frame.to_csv(index=index, lineterminator="\n"))
    logger.debug("wrote %s (%d rows)", target, len(frame))


def ranked_lists_to_frame(lists: Iterable[RankedList]) -> pd.DataFrame:
    rows: List[dict] = []
    for rl in lists:
        for rank, e in enumerate(rl.entries, start=1):
            b = e.breakdown
            rows.append(
                {
                    "probe_id": rl.probe_id,
                    "rank": str(rank),
                    "subject_id": e.subject_id,
                    "score": repr(e.score),
                    "patch_score": repr(b.patch_score),
                    "attribute_score": repr(b.attribute_score),
                    "non_occluded_pairs": str(b.non_occluded_pairs),
                    "note": "",
                }
            )
        for s in rl.skipped:
            rows.append(
                {
                    "probe_id": rl.probe_id,
                    "rank": "",
                    "subject_id": s.subject_id,
                    "score": "",
                    "patch_score": "",
                    "attribute_score": "",
                    "non_occluded_pairs": "",
                    "note": f"skipped: {s.reason}",
                }
            )
    return pd.DataFrame(rows, columns=RANKED_COLUMNS, dtype=object)


def write_ranked_lists(path: str | os.PathLike, lists: Iterable[RankedList]) -> None:
    _write(ranked_lists_to_frame(lists), path)


def accuracy_rows(reports: Sequence[AccuracyReport], ks: Sequence[int]) -> pd.DataFrame:
    """One row per (method, split, k)."""
    rows = []
    for r in reports:
        for k in ks:
            if k > len(r.rank_k):
                raise EvaluationError(f"report {r.method}/{r.split} has ranks up to {len(r.rank_k)}, asked for {k}")
            rows.append({"method": r.method, "split": r.split, "k": k, "accuracy": round(r.rank_k[k - 1], 2)})
    return pd.DataFrame(rows, columns=ACCURACY_COLUMNS)


def write_accuracy_rows(path: str | os.PathLike, reports: Sequence[AccuracyReport], ks: Sequence[int]) -> None:
    _write(accuracy_rows(reports, ks), path)


def write_cell_grid(path: str | os.PathLike, grid: pd.DataFrame) -> None:
    _write(grid, path, index=True)


def comparison_frame(comparison: MethodComparison) -> pd.DataFrame:
    """Methods x splits rank-1 matrix with the Average column, 2 decimals."""
    return comparison.with_average().round(2)


def write_comparison(path: str | os.PathLike, comparison: MethodComparison) -> None:
    _write(comparison_frame(comparison), path, index=True)


def grid_curve_frame(results: Sequence[GridSearchResult]) -> pd.DataFrame:
    rows = [
        {"method": r.method, "lambda": lam, "mean_rank1": round(acc, 2), "best": lam == r.best_lambda}
        for r in results
        for lam, acc in r.curve
    ]
    return pd.DataFrame(rows, columns=["method", "lambda", "mean_rank1", "best"])


def write_grid_curves(path: str | os.PathLike, results: Sequence[GridSearchResult]) -> None:
    _write(grid_curve_frame(results), path)
