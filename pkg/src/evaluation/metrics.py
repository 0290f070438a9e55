"""Closed-set identification metrics over ranked lists."""

from __future__ import annotations

import re
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from src.errors import EvaluationError
from src.schemas.identification import RankedList

OVERALL = "overall"
ABSENT_CELL = "-"


def _true_ranks(ranked_lists: Sequence[RankedList], truth: Mapping[str, str]) -> List[Optional[int]]:
    if not ranked_lists:
        raise EvaluationError("no probes to evaluate")
    ranks: List[Optional[int]] = []
    for rl in ranked_lists:
        if rl.probe_id not in truth:
            raise EvaluationError(f"probe {rl.probe_id!r} has no ground-truth subject")
        # failed probes and skipped true subjects are misses
        ranks.append(rl.rank_of(truth[rl.probe_id]) if rl.ok else None)
    return ranks


def _percent(hits: int, total: int) -> float:
    return 100.0 * hits / total


def rank_k_accuracy(ranked_lists: Sequence[RankedList], truth: Mapping[str, str], k: int = 1) -> float:
    """Percent of probes whose true subject is among the top ``k`` entries."""
    if k < 1:
        raise EvaluationError(f"k must be >= 1, got {k}")
    ranks = _true_ranks(ranked_lists, truth)
    return _percent(sum(1 for r in ranks if r is not None and r <= k), len(ranks))


def cmc_curve(ranked_lists: Sequence[RankedList], truth: Mapping[str, str], max_rank: int) -> List[float]:
    """Rank-1..max_rank accuracies; nondecreasing by construction."""
    if max_rank < 1:
        raise EvaluationError(f"max_rank must be >= 1, got {max_rank}")
    ranks = _true_ranks(ranked_lists, truth)
    found = np.array([r for r in ranks if r is not None and r <= max_rank], dtype=np.int64)
    hits = np.cumsum(np.bincount(found, minlength=max_rank + 1)[1:])
    return [_percent(int(h), len(ranks)) for h in hits]


def per_cell_accuracy(
    ranked_lists: Sequence[RankedList],
    truth: Mapping[str, str],
    cell_labels: Mapping[str, str],
) -> Dict[str, float]:
    """Rank-1 accuracy per cell label plus ``overall``. Only cells with probes appear."""
    ranks = _true_ranks(ranked_lists, truth)
    per_cell: Dict[str, List[int]] = {}
    for rl, r in zip(ranked_lists, ranks):
        label = cell_labels.get(rl.probe_id)
        if not label:
            raise EvaluationError(f"probe {rl.probe_id!r} has no cell label")
        if label == OVERALL:
            raise EvaluationError(f"cell label {OVERALL!r} is reserved")
        per_cell.setdefault(label, []).append(1 if r == 1 else 0)

    table = {label: _percent(sum(v), len(v)) for label, v in sorted(per_cell.items())}
    table[OVERALL] = _percent(sum(1 for r in ranks if r == 1), len(ranks))
    return table


_NUMBER = re.compile(r"[+-]?\d+(?:\.\d+)?")


def _axis_key(value: str):
    # "-30" < "+15" and "c2" < "c10"
    m = _NUMBER.search(value)
    if m is None:
        return (value, 0.0, "")
    return (value[: m.start()], float(m.group()), value[m.end():])


def _axis_order(values: Sequence[str]) -> List[str]:
    return sorted(set(values), key=_axis_key)


def render_cell_grid(cells: Mapping[str, float]) -> pd.DataFrame:
    """Lay ``"<column>/<row>"`` labels out as a grid (e.g. yaw columns, pitch rows).

    Values are formatted to 2 decimals; combinations without probes show ``-``.
    """
    parsed = {}
    for label, acc in cells.items():
        if label == OVERALL:
            continue
        col, sep, row = label.partition("/")
        if not sep or not col or not row:
            raise EvaluationError(f"cell label {label!r} is not of the form '<column>/<row>'")
        parsed[(row, col)] = acc
    if not parsed:
        raise EvaluationError("no labelled cells to render")

    rows = _axis_order([r for r, _ in parsed])
    cols = _axis_order([c for _, c in parsed])
    grid = pd.DataFrame(ABSENT_CELL, index=rows, columns=cols, dtype=object)
    for (row, col), acc in parsed.items():
        grid.loc[row, col] = f"{acc:.2f}"
    return grid
