"""Trend statistics for sequences that should shrink along alpha_n -> alpha_0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = ["TrendResult", "decreasing_trend"]


@dataclass(frozen=True)
class TrendResult:
    slopes: np.ndarray
    mean_slope: float
    upper_bound: float
    ratios: np.ndarray
    passed: bool
    shrink: float = 5.0

    @property
    def rows_shrinking(self) -> int:
        """Rows that end below their first value divided by ``shrink``."""
        return int(np.sum(self.ratios < 1.0 / self.shrink))

    def summary(self) -> str:
        return (f"mean slope {self.mean_slope:.3f} (95% upper {self.upper_bound:.3f}), "
                f"worst final/initial {np.max(self.ratios):.3g}")


def decreasing_trend(values, shrink: float = 5.0, level: float = 0.95,
                     floor: float = 1e-300, pooled: bool = False) -> TrendResult:
    """Test that each row of ``values`` decreases along its columns.

    ``values`` has one row per noise seed and one column per ``n``.  The slope
    of ``log(values)`` against ``n`` is fitted per row; the trend is accepted
    when the one-sided ``level`` upper confidence bound on the mean slope is
    negative (Student t over rows) and every row ends below its first value
    divided by ``shrink``; with ``pooled=True`` the end-point condition is
    applied to the row mean instead.  With a single row the regression's own
    standard error is used for the bound.
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    if v.shape[1] < 2:
        raise ValueError("need at least two points per sequence")
    n = np.arange(v.shape[1], dtype=float)
    logs = np.log(np.maximum(v, floor))
    fits = [stats.linregress(n, row) for row in logs]
    slopes = np.array([f.slope for f in fits])
    mean = float(slopes.mean())
    if v.shape[0] > 1:
        se = float(slopes.std(ddof=1) / np.sqrt(v.shape[0]))
        upper = mean + stats.t.ppf(level, v.shape[0] - 1) * se
    else:
        dof = max(v.shape[1] - 2, 1)
        upper = mean + stats.t.ppf(level, dof) * float(fits[0].stderr)
    ratios = v[:, -1] / np.maximum(v[:, 0], floor)
    if pooled:
        mean_row = v.mean(axis=0)
        ends_ok = bool(mean_row[-1] < mean_row[0] / shrink)
    else:
        ends_ok = bool(np.all(v[:, -1] < v[:, 0] / shrink))
    passed = bool(upper < 0 and ends_ok)
    return TrendResult(slopes, mean, float(upper), ratios, passed, float(shrink))
