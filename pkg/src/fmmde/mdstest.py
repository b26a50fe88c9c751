"""Wild-bootstrap test of the martingale difference hypothesis.

The statistic aggregates univariate lag-j divergences of a factor series
with decaying weights; its null distribution is non-pivotal, so p-values
come from a wild bootstrap that multiplies the (demeaned) series by
external two-point weights with mean zero and unit variance. A sequential
scan over eigenvalue-ordered factors turns the test into a factor-count
rule: keep factors until the first one that looks conditionally mean
independent of its past.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .mddm import mddm_scalar_lag

_SQRT5 = np.sqrt(5.0)
#: two-point law with mean 0, variance 1 (Mammen 1993)
MAMMEN_VALUES = ((1.0 - _SQRT5) / 2.0, (1.0 + _SQRT5) / 2.0)
MAMMEN_PROBS = ((_SQRT5 + 1.0) / (2.0 * _SQRT5), (_SQRT5 - 1.0) / (2.0 * _SQRT5))


@dataclass(frozen=True)
class MdsTestResult:
    """One factor's test outcome with its bootstrap settings."""

    statistic: float
    p_value: float
    M: int
    n_boot: int
    seed: int


@dataclass(frozen=True)
class SequentialSelection:
    """Outcome of the sequential factor scan: ``r`` leading rejections."""

    r: int
    per_factor: tuple[MdsTestResult, ...]
    alpha: float


def truncation_weights(M: int, N: int) -> np.ndarray:
    """Lag weights (N - j + 1) / (N j^2) for j = 1..M."""
    if M < 1 or N < 1:
        raise InputError("M and N must be >= 1")
    j = np.arange(1, M + 1, dtype=float)
    return (N - j + 1.0) / (N * j**2)


def wang_shao_stat(f: np.ndarray, M: int, N: int | None = None) -> float:
    """Weighted-divergence statistic T * sum_j w_j |MDDM_j| for a scalar
    series.

    ``N`` in the weights defaults to the series length. The statistic is
    translation invariant (centering on one side, distances on the other)
    and scales as |c|^3 under f -> c f.
    """
    f = np.asarray(f, dtype=float).ravel()
    t = f.shape[0]
    if t - M < 3:
        raise InputError(f"series too short: T-M = {t - M} < 3")
    w = truncation_weights(M, t if N is None else N)
    total = 0.0
    for j in range(1, M + 1):
        total += w[j - 1] * abs(mddm_scalar_lag(f, j))
    return t * total


def mammen_weights(length: int, seed: int | np.random.Generator) -> np.ndarray:
    """iid draws from the Mammen two-point law, deterministic given seed."""
    if length < 1:
        raise InputError("length must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo, hi = MAMMEN_VALUES
    return np.where(rng.random(length) < MAMMEN_PROBS[0], lo, hi)


def wild_bootstrap_pvalue(f: np.ndarray, M: int = 6, n_boot: int = 499,
                          seed: int = 0, N: int | None = None) -> MdsTestResult:
    """Bootstrap p-value for the martingale-difference null on ``f``.

    The series is demeaned once; each replication multiplies it elementwise
    by fresh Mammen weights (replication i draws from seed + i) and
    recomputes the statistic. The p-value uses the add-one rule, so it is
    strictly positive.
    """
    f = np.asarray(f, dtype=float).ravel()
    if n_boot < 1:
        raise InputError("n_boot must be >= 1")
    fc = f - f.mean()
    observed = wang_shao_stat(fc, M, N=N)
    exceed = 0
    for i in range(1, n_boot + 1):
        w = mammen_weights(fc.shape[0], seed + i)
        if wang_shao_stat(fc * w, M, N=N) >= observed:
            exceed += 1
    p = (1.0 + exceed) / (1.0 + n_boot)
    return MdsTestResult(statistic=observed, p_value=p, M=M, n_boot=n_boot, seed=seed)


def select_r_sequential(factors: np.ndarray, M: int = 6, n_boot: int = 499,
                        alpha: float = 0.05, seed: int = 0,
                        N: int | None = None) -> SequentialSelection:
    """Sequential factor count: test columns of ``factors`` (eigenvalue
    order) and stop at the first one whose null is not rejected.

    Rejection is p <= alpha. r = 0 when the very first factor already fails
    to reject; r = n when every factor rejects. Each factor's test gets its
    own seed block so bootstrap draws are independent across factors.
    """
    factors = np.asarray(factors, dtype=float)
    if factors.ndim == 1:
        factors = factors[:, None]
    n = factors.shape[1]
    results: list[MdsTestResult] = []
    r = 0
    for i in range(n):
        res = wild_bootstrap_pvalue(factors[:, i], M=M, n_boot=n_boot,
                                    seed=seed + 1_000_003 * i, N=N)
        results.append(res)
        if res.p_value > alpha:
            break
        r += 1
    return SequentialSelection(r=r, per_factor=tuple(results), alpha=alpha)


def results_to_csv(results: tuple[MdsTestResult, ...] | list[MdsTestResult]) -> str:
    lines = ["factor,statistic,p_value,M,n_boot"]
    for i, res in enumerate(results, start=1):
        lines.append(f"{i},{res.statistic!r},{res.p_value!r},{res.M},{res.n_boot}")
    return "\n".join(lines) + "\n"
