"""
Box-plot statistics.

Quartiles use linear interpolation between order statistics (numpy's
``"linear"`` method, Hyndman-Fan type 7). Whiskers extend to the most
extreme observations within ``1.5 * IQR`` of the quartiles; anything
beyond is an outlier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

__all__ = ["BoxStats", "box_stats"]


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: List[float] = field(default_factory=list)

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def box_stats(values, whisker: float = 1.5) -> BoxStats:
    """Box-plot summary of a nonempty sample."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("no values")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    lo, hi = q1 - whisker * (q3 - q1), q3 + whisker * (q3 - q1)
    inside = v[(v >= lo) & (v <= hi)]
    return BoxStats(median=float(med), q1=float(q1), q3=float(q3),
                    whisker_low=float(inside[0]), whisker_high=float(inside[-1]),
                    outliers=[float(x) for x in v[(v < lo) | (v > hi)]])
