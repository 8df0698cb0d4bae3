"""Hypothesis tests used by the report tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

ALTERNATIVES = ("two_sided", "greater", "less")


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this as a test class

    statistic: float
    p_value: float
    method: str
    alternative: str = "two_sided"
    degrees_of_freedom: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise StatsError(f"p-value outside [0, 1]: {self.p_value}")

    def significant(self, alpha: float = 0.01) -> bool:
        return self.p_value <= alpha

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alternative": self.alternative,
            "statistic": self.statistic,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value": self.p_value,
        }


def _alt(alternative: str) -> str:
    if alternative not in ALTERNATIVES:
        raise StatsError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    return alternative.replace("_", "-")


def welch_t_test(a: Sequence[float], b: Sequence[float], alternative: str = "two_sided") -> TestResult:
    """Unequal-variance t-test with Welch-Satterthwaite degrees of freedom."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if len(x) < 2 or len(y) < 2:
        raise StatsError(f"each sample needs at least 2 values (got {len(x)} and {len(y)})")
    if np.var(x) == 0 and np.var(y) == 0:
        raise StatsError("both samples have zero variance")
    res = stats.ttest_ind(x, y, equal_var=False, alternative=_alt(alternative))
    return TestResult(float(res.statistic), float(res.pvalue), "welch_t", alternative, float(res.df))


def binomial_test_exact(k: int, n: int, p0: float, alternative: str = "two_sided") -> TestResult:
    """Exact binomial test; two-sided sums every outcome no more likely than ``k``."""
    if not (isinstance(k, (int, np.integer)) and isinstance(n, (int, np.integer))) or n < 1 or not 0 <= k <= n:
        raise StatsError(f"need integers 0 <= k <= n with n >= 1 (k={k}, n={n})")
    if not 0.0 < p0 < 1.0:
        raise StatsError(f"p0 must lie strictly between 0 and 1, got {p0}")
    res = stats.binomtest(int(k), int(n), p0, alternative=_alt(alternative))
    return TestResult(k / n, min(1.0, float(res.pvalue)), "binomial_exact", alternative)


def chi_square_test(table: Sequence[Sequence[float]], correction: bool = False) -> TestResult:
    """Pearson chi-square homogeneity test on a 2 x K table.

    ``correction`` applies Yates' continuity correction (2 x 2 tables only).
    """
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.shape[0] != 2 or t.shape[1] < 2:
        raise StatsError(f"expected a 2 x K table with K >= 2, got shape {t.shape}")
    if (t < 0).any():
        raise StatsError("counts must be non-negative")
    if (t.sum(axis=0) == 0).any() or (t.sum(axis=1) == 0).any():
        raise StatsError("table has a zero marginal")
    stat, p, dof, _ = stats.chi2_contingency(t, correction=correction)
    return TestResult(float(stat), float(p), "chi_square", "two_sided", float(dof))
