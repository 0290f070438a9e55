"""Tabulated critical values for the rank tests.

Only a handful of values ship here; anything else must be passed explicitly.
"""

from __future__ import annotations

from typing import Dict, Tuple

from src.errors import MissingCriticalValueError

# F distribution upper quantiles: (df1, df2, alpha) -> value
F_CRITICAL: Dict[Tuple[int, int, float], float] = {
    (1, 29, 0.10): 2.88,
}

# Two-tailed Bonferroni-Dunn q_alpha: (number of methods, alpha) -> value
Q_BONFERRONI_DUNN: Dict[Tuple[int, float], float] = {
    (2, 0.05): 1.960,
    (3, 0.05): 2.241,
    (4, 0.05): 2.394,
    (5, 0.05): 2.498,
    (6, 0.05): 2.576,
    (7, 0.05): 2.638,
    (8, 0.05): 2.690,
    (9, 0.05): 2.724,
    (10, 0.05): 2.773,
    (2, 0.10): 1.645,
    (3, 0.10): 1.960,
    (4, 0.10): 2.128,
    (5, 0.10): 2.241,
    (6, 0.10): 2.326,
    (7, 0.10): 2.394,
    (8, 0.10): 2.450,
    (9, 0.10): 2.498,
    (10, 0.10): 2.539,
}


def _alpha_key(alpha: float) -> float:
    return round(float(alpha), 6)


def f_critical(df1: int, df2: int, alpha: float) -> float:
    try:
        return F_CRITICAL[(df1, df2, _alpha_key(alpha))]
    except KeyError:
        raise MissingCriticalValueError(
            f"no tabulated F({df1}, {df2}) critical value at alpha={alpha:g}; pass it explicitly"
        ) from None


def q_alpha(k: int, alpha: float) -> float:
    try:
        return Q_BONFERRONI_DUNN[(k, _alpha_key(alpha))]
    except KeyError:
        raise MissingCriticalValueError(
            f"no tabulated Bonferroni-Dunn q for k={k} at alpha={alpha:g}; pass it explicitly"
        ) from None
