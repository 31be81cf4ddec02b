"""Median / IQR summaries and box-plot statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CellStats:
    median: float
    q1: float
    q3: float
    count: int
    excluded: int = 0
    undefined: int = 0
    whisker_low: float = math.nan
    whisker_high: float = math.nan

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @property
    def missing(self) -> bool:
        return self.count == 0


def lower_median(values) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return math.nan
    return float(v[(v.size - 1) // 2])


def summarize(values, excluded: int = 0) -> CellStats:
    """Lower median, linear-interpolation quartiles and 1.5 IQR whiskers.

    Non-finite entries (undefined normalizations) are counted separately and
    left out of the statistics. An empty cell is reported with count 0.
    """
    v = np.asarray(list(values), dtype=float)
    finite = v[np.isfinite(v)]
    undefined = int(v.size - finite.size)
    if finite.size == 0:
        return CellStats(math.nan, math.nan, math.nan, 0, excluded, undefined)
    q1, q3 = np.quantile(finite, [0.25, 0.75])
    iqr = q3 - q1
    inside = finite[(finite >= q1 - 1.5 * iqr) & (finite <= q3 + 1.5 * iqr)]
    return CellStats(
        median=lower_median(finite),
        q1=float(q1),
        q3=float(q3),
        count=int(finite.size),
        excluded=excluded,
        undefined=undefined,
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
    )
