"""Factor extraction and factor-count selection.

Two extractors: the divergence-based rotation (eigenvectors of the
cumulative divergence matrix, factors ordered by conditional-mean
dependence on the past) and the classical principal-component estimator
(eigenvectors of the second-moment matrix, factors rescaled to unit sample
second moment). Plus the eigenvalue-ratio rule and the Bai-Ng IC_p2
criterion for choosing how many factors to keep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError
from .mddm import EigenSystem, cumulative_mddm, eigen_sym


@dataclass(frozen=True)
class FactorBasis:
    """Full orthonormal rotation with the retained factor count.

    ``basis`` columns are ordered by descending eigenvalue; the first ``r``
    columns are the loading directions, the rest span the conditionally
    mean independent remainder.
    """

    basis: np.ndarray  # (n, n)
    r: int
    source: str
    eigenvalues: np.ndarray  # (n,)

    @property
    def loadings(self) -> np.ndarray:
        return self.basis[:, : self.r]


@dataclass(frozen=True)
class FactorSeries:
    """Projected factors, one column per retained factor."""

    values: np.ndarray  # (T, r)
    source: str
    dates: np.ndarray | None = None

    @property
    def r(self) -> int:
        return self.values.shape[1]


def extract_fmmde(x: np.ndarray, k0: int, r: int) -> tuple[FactorBasis, FactorSeries]:
    """Divergence-rotation factors: eigenvectors of the cumulative
    divergence matrix over lags 1..k0, projected onto all T rows.

    An all-zero panel degenerates to zero eigenvalues with the identity
    basis rather than an error.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[1]
    if not 1 <= r <= n:
        raise InputError(f"r must be in 1..{n}, got {r}")
    gamma = cumulative_mddm(x, k0)
    es = eigen_sym(gamma)
    basis = FactorBasis(basis=es.eigenvectors, r=r, source=f"fmmde(k0={k0})",
                        eigenvalues=es.eigenvalues)
    series = FactorSeries(values=x @ basis.loadings, source=basis.source)
    return basis, series


def project_factors(x: np.ndarray, es: EigenSystem, r: int, source: str) -> FactorSeries:
    """Project ``x`` on the first ``r`` eigenvectors of a precomputed
    eigensystem (used by the recursive harness to reuse one decomposition
    across candidate factor counts)."""
    return FactorSeries(values=np.asarray(x, float) @ es.eigenvectors[:, :r], source=source)


def extract_sw(x: np.ndarray, r: int) -> FactorSeries:
    """Principal-component factors from the uncentered second-moment matrix
    S = T^-1 sum x_t x_t', rescaled so every factor has unit sample second
    moment."""
    x = np.asarray(x, dtype=float)
    t, n = x.shape
    if t < 2:
        raise InputError("need at least 2 observations")
    if not 1 <= r <= n:
        raise InputError(f"r must be in 1..{n}, got {r}")
    s = (x.T @ x) / t
    es = eigen_sym(0.5 * (s + s.T))
    d2 = es.eigenvalues[:r]
    if np.any(d2 <= 1e-12):
        raise NumericError(f"rank deficient: eigenvalue {d2.min()} among the first {r}")
    return FactorSeries(values=(x @ es.eigenvectors[:, :r]) / np.sqrt(d2), source="sw")


def eigenvalue_ratio_r(eigs: np.ndarray, R: int) -> int:
    """Factor count minimizing the adjacent-eigenvalue ratio
    lambda_{i+1}/lambda_i over i = 1..R (1-based, smallest i on ties).

    Ratios with a zero denominator are excluded (treated as +inf).
    """
    eigs = np.asarray(eigs, dtype=float)
    n = eigs.size
    if not 1 <= R <= n - 1:
        raise InputError(f"R must be in 1..{n - 1}, got {R}")
    if np.any(np.diff(eigs) > 1e-12 * max(1.0, float(np.abs(eigs).max(initial=0.0)))):
        raise InputError("eigenvalues must be sorted descending")
    if eigs[0] <= 0.0:
        raise InputError("all eigenvalues zero")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(eigs[:R] > 0.0, eigs[1 : R + 1] / eigs[:R], np.inf)
    if not np.isfinite(ratios).any():
        raise InputError("no valid ratio: leading eigenvalues all zero")
    return int(np.argmin(ratios)) + 1


def bai_ng_icp2(x: np.ndarray, rmax: int) -> int:
    """Bai-Ng IC_p2 factor count for a standardized panel.

    IC(r) = ln V(r) + r * ((n+T)/(nT)) * ln(min(n,T)) with V(r) the mean
    squared principal-component residual; argmin over r = 1..rmax, smallest
    r on ties.
    """
    x = np.asarray(x, dtype=float)
    t, n = x.shape
    if not 1 <= rmax <= min(n, t):
        raise InputError(f"rmax must be in 1..{min(n, t)}, got {rmax}")
    sv = np.linalg.svd(x, compute_uv=False)
    sq = np.zeros(min(n, t))
    sq[: sv.size] = sv**2
    # V(r) = residual sum of squares beyond the first r components / (n T)
    tail = np.cumsum(sq[::-1])[::-1]
    penalty = ((n + t) / (n * t)) * np.log(min(n, t))
    best_r, best_ic = 0, np.inf
    for r in range(1, rmax + 1):
        v = tail[r] / (n * t) if r < sq.size else 0.0
        if v <= 0.0:
            raise NumericError("rank deficient: zero residual variance")
        ic = float(np.log(v) + r * penalty)
        if ic < best_ic:
            best_r, best_ic = r, ic
    return best_r


def factor_series_to_csv(series: FactorSeries) -> str:
    """CSV dump: optional ISO date column plus one column per factor."""
    from .dates import format_month

    header = ["factor_%d" % (i + 1) for i in range(series.r)]
    lines = []
    if series.dates is not None:
        lines.append(",".join(["date"] + header))
        for d, row in zip(series.dates, series.values):
            lines.append(",".join([format_month(int(d))] + [repr(float(v)) for v in row]))
    else:
        lines.append(",".join(header))
        for row in series.values:
            lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
