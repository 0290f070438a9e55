"""Friedman test, Iman-Davenport correction and Bonferroni-Dunn critical difference.

Methods are compared by their average rank over N datasets (rank 1 = best).
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy.stats import rankdata

from src.errors import DegenerateStatisticError, StatisticsError
from src.stats.critical_values import f_critical as lookup_f_critical
from src.stats.critical_values import q_alpha as lookup_q_alpha

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.10
AVERAGE_COLUMN = "Average"


@dataclass(frozen=True)
class RankMatrix:
    """Per-dataset method ranks: N rows (datasets) x k columns (methods)."""

    ranks: np.ndarray
    methods: tuple

    def __post_init__(self) -> None:
        n, k = self.ranks.shape
        if k < 2 or n < 2:
            raise StatisticsError(f"need at least 2 datasets and 2 methods, got N={n}, k={k}")
        if len(self.methods) != k:
            raise StatisticsError(f"{len(self.methods)} method names for {k} columns")
        expected = k * (k + 1) / 2.0
        if not np.allclose(self.ranks.sum(axis=1), expected, rtol=0.0, atol=1e-9):
            raise StatisticsError(f"every row of ranks must sum to k(k+1)/2 = {expected:g}")

    @property
    def n_datasets(self) -> int:
        return int(self.ranks.shape[0])

    @property
    def n_methods(self) -> int:
        return int(self.ranks.shape[1])

    def average_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


def rank_rows(accuracy: pd.DataFrame | np.ndarray, methods: Optional[Sequence[str]] = None) -> RankMatrix:
    """Rank methods within each dataset row; the highest accuracy gets rank 1, ties share the average."""
    if isinstance(accuracy, pd.DataFrame):
        methods = list(accuracy.columns) if methods is None else list(methods)
        values = accuracy.to_numpy(dtype=np.float64)
    else:
        values = np.asarray(accuracy, dtype=np.float64)
    if values.ndim != 2:
        raise StatisticsError(f"accuracy matrix must be 2-D, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise StatisticsError("accuracy matrix has non-finite entries")
    if methods is None:
        methods = [f"method{j + 1}" for j in range(values.shape[1])]
    ranks = rankdata(-values, method="average", axis=1)
    return RankMatrix(ranks=ranks, methods=tuple(str(m) for m in methods))


def friedman_chi2(avg_ranks: Sequence[float], n_datasets: int, k: Optional[int] = None) -> float:
    """chi2_F = 12N / (k(k+1)) * (sum_j R_j^2 - k(k+1)^2 / 4)."""
    r = np.asarray(avg_ranks, dtype=np.float64)
    k = len(r) if k is None else k
    if k < 2 or len(r) != k:
        raise StatisticsError(f"need k >= 2 average ranks, got {len(r)} (k={k})")
    if n_datasets < 1:
        raise StatisticsError(f"need N >= 1 datasets, got {n_datasets}")
    if not np.all(np.isfinite(r)):
        raise StatisticsError("average ranks must be finite")
    chi2 = 12.0 * n_datasets / (k * (k + 1)) * (float(np.sum(r * r)) - k * (k + 1) ** 2 / 4.0)
    # rounding noise around the all-equal case
    return 0.0 if abs(chi2) < 1e-12 else chi2


def iman_davenport(chi2: float, n_datasets: int, k: int) -> float:
    """F_F = (N-1) chi2_F / (N(k-1) - chi2_F), F-distributed with (k-1, (k-1)(N-1)) dof."""
    if not math.isfinite(chi2) or chi2 < 0:
        raise StatisticsError(f"chi2 must be finite and >= 0, got {chi2}")
    if k < 2 or n_datasets < 1:
        raise StatisticsError(f"need k >= 2 and N >= 1, got k={k}, N={n_datasets}")
    denom = n_datasets * (k - 1) - chi2
    if denom <= 0:
        raise DegenerateStatisticError(
            f"degenerate statistic: N(k-1) - chi2 = {denom:g} <= 0 (one ranking in every dataset)"
        )
    return (n_datasets - 1) * chi2 / denom


def bonferroni_dunn_cd(q_alpha: float, k: int, n_datasets: int) -> float:
    """CD = q_alpha * sqrt(k(k+1) / (6N))."""
    if not (q_alpha > 0 and k > 0 and n_datasets > 0):
        raise StatisticsError(f"q_alpha, k and N must be positive, got {q_alpha}, {k}, {n_datasets}")
    return q_alpha * math.sqrt(k * (k + 1) / (6.0 * n_datasets))


# -----------------------------
# Report
# -----------------------------

class PairComparison(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    better: str
    worse: str
    rank_gap: float
    significant: bool


class SignificanceReport(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    methods: List[str]
    average_ranks: List[float]
    n_datasets: int
    alpha: float
    chi2: float
    ff: float
    df1: int
    df2: int
    f_critical: float
    null_rejected: bool
    q_alpha: float
    critical_difference: float
    pairs: List[PairComparison]

    def render(self) -> str:
        lines = [
            f"methods           : {', '.join(self.methods)}",
            f"average ranks     : {', '.join(f'{r:.4f}' for r in self.average_ranks)}",
            f"datasets (N)      : {self.n_datasets}",
            f"Friedman chi2_F   : {self.chi2:.4f}",
            f"Iman-Davenport F_F: {self.ff:.4f}  (F({self.df1}, {self.df2}) critical {self.f_critical:g} "
            f"at alpha={self.alpha:g})",
            f"null hypothesis   : {'rejected' if self.null_rejected else 'accepted'}",
            f"critical diff CD  : {self.critical_difference:.4f}  (q_alpha={self.q_alpha:g})",
        ]
        for p in self.pairs:
            verdict = "significantly better than" if p.significant else "not significantly different from"
            lines.append(f"  {p.better} {verdict} {p.worse} (rank gap {p.rank_gap:.4f})")
        return "\n".join(lines)

    def to_frame(self) -> pd.DataFrame:
        """Machine-readable rows: one per statistic, one per method pair."""
        rows = [
            ("chi2_F", f"{self.chi2:.6f}"),
            ("F_F", f"{self.ff:.6f}"),
            ("F_critical", f"{self.f_critical:g}"),
            ("null_rejected", str(self.null_rejected).lower()),
            ("q_alpha", f"{self.q_alpha:g}"),
            ("CD", f"{self.critical_difference:.6f}"),
        ]
        rows += [(f"avg_rank:{m}", f"{r:.6f}") for m, r in zip(self.methods, self.average_ranks)]
        rows += [
            (f"pair:{p.better}>{p.worse}", f"gap={p.rank_gap:.6f};significant={str(p.significant).lower()}")
            for p in self.pairs
        ]
        return pd.DataFrame(rows, columns=["statistic", "value"])


def significance_from_ranks(
    avg_ranks: Sequence[float],
    n_datasets: int,
    methods: Optional[Sequence[str]] = None,
    f_crit: Optional[float] = None,
    q_alpha: Optional[float] = None,
    alpha: float = DEFAULT_ALPHA,
) -> SignificanceReport:
    """
    Significance procedure from average ranks:
    1) Friedman chi2_F over the k average ranks
    2) Iman-Davenport F_F, compared with the F(k-1, (k-1)(N-1)) critical value
    3) Bonferroni-Dunn CD; a pair differs when its rank gap exceeds CD
    Critical values not passed in are looked up in the built-in table.
    """
    r = [float(x) for x in avg_ranks]
    k = len(r)
    methods = [f"method{j + 1}" for j in range(k)] if methods is None else [str(m) for m in methods]
    if len(methods) != k:
        raise StatisticsError(f"{len(methods)} method names for {k} average ranks")

    chi2 = friedman_chi2(r, n_datasets, k)
    ff = iman_davenport(chi2, n_datasets, k)
    df1, df2 = k - 1, (k - 1) * (n_datasets - 1)
    f_value = lookup_f_critical(df1, df2, alpha) if f_crit is None else float(f_crit)
    q_value = lookup_q_alpha(k, alpha) if q_alpha is None else float(q_alpha)
    if f_value <= 0:
        raise StatisticsError(f"F critical value must be positive, got {f_value}")
    cd = bonferroni_dunn_cd(q_value, k, n_datasets)

    pairs: List[PairComparison] = []
    for a, b in itertools.combinations(range(k), 2):
        lo, hi = (a, b) if r[a] <= r[b] else (b, a)
        gap = r[hi] - r[lo]
        pairs.append(PairComparison(better=methods[lo], worse=methods[hi], rank_gap=gap, significant=gap > cd))

    report = SignificanceReport(
        methods=methods,
        average_ranks=r,
        n_datasets=n_datasets,
        alpha=alpha,
        chi2=chi2,
        ff=ff,
        df1=df1,
        df2=df2,
        f_critical=f_value,
        null_rejected=ff > f_value,
        q_alpha=q_value,
        critical_difference=cd,
        pairs=pairs,
    )
    logger.info("F_F=%.4f (critical %.4g), CD=%.4f", ff, f_value, cd)
    return report


def compare_two_methods(
    accuracy: pd.DataFrame,
    f_crit: Optional[float] = None,
    q_alpha: Optional[float] = None,
    alpha: float = DEFAULT_ALPHA,
) -> SignificanceReport:
    """Full procedure on a datasets x methods accuracy matrix (k >= 2 methods)."""
    rm = rank_rows(accuracy)
    return significance_from_ranks(
        rm.average_ranks(),
        rm.n_datasets,
        methods=rm.methods,
        f_crit=f_crit,
        q_alpha=q_alpha,
        alpha=alpha,
    )


def load_accuracy_matrix(path: str | os.PathLike) -> pd.DataFrame:
    """Read an accuracy CSV as a datasets x methods frame.

    Accepts the long ``method,split,k,accuracy`` rows (rank-1 rows are used)
    or the wide methods x splits matrix whose first column is ``method``; a
    trailing ``Average`` column is ignored.
    """
    p = Path(path)
    try:
        frame = pd.read_csv(p)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise StatisticsError(f"{p}: unreadable accuracy matrix: {err}") from err

    cols = set(frame.columns)
    if {"method", "split", "accuracy"} <= cols:
        if "k" in cols:
            frame = frame[frame["k"] == 1]
        if frame.duplicated(["method", "split"]).any():
            raise StatisticsError(f"{p}: duplicate (method, split) rows")
        matrix = frame.pivot(index="split", columns="method", values="accuracy")
        methods = list(dict.fromkeys(frame["method"]))
        splits = list(dict.fromkeys(frame["split"]))
        matrix = matrix.loc[splits, methods]
    elif frame.columns[0] == "method":
        wide = frame.set_index("method").drop(columns=[AVERAGE_COLUMN], errors="ignore")
        matrix = wide.T
    else:
        raise StatisticsError(f"{p}: expected long 'method,split,accuracy' rows or a wide matrix keyed by 'method'")

    matrix = matrix.apply(pd.to_numeric, errors="coerce").astype(np.float64)
    if matrix.isna().any().any():
        raise StatisticsError(f"{p}: accuracy matrix has missing or non-numeric entries")
    matrix.index.name = "split"
    matrix.columns.name = "method"
    return matrix
