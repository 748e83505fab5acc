"""Small least-squares helpers shared by the asymptotic fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearFit:
    coef: np.ndarray
    rss: float
    r2: float
    n: int

    @property
    def aic(self) -> float:
        # Gaussian AIC up to a constant; a tiny floor keeps exact fits finite
        p = len(self.coef)
        return self.n * np.log(max(self.rss, 1e-300) / self.n) + 2 * p


def lstsq(columns, y) -> LinearFit:
    A = np.column_stack(columns)
    y = np.asarray(y, dtype=float)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    rss = float(res @ res)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return LinearFit(coef, rss, r2, len(y))


def power_law_exponent(x, y) -> float:
    """Slope of log y against log x."""
    fit = lstsq([np.ones(len(x)), np.log(x)], np.log(y))
    return float(fit.coef[1])
