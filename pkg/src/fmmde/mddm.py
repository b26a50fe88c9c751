"""Martingale difference divergence estimators.

Measures of conditional mean dependence of a vector series on its own lags:
the scalar divergence for one component against the lagged vector, the
matrix form for the full vector, and the cumulative matrix summed over a
lag budget, whose eigenvectors define the dependence-ordered rotation used
for factor extraction.

All estimators pair the retained observations x_t (t = j+1..T) with the
lagged rows z_t = x_{t-j}; means are taken over the retained rows only, so
the scalar estimator equals the matching diagonal entry of the matrix one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError


@dataclass(frozen=True)
class LagSpec:
    """Either a single lag (``cumulative=False``) or a lag budget 1..lag."""

    lag: int
    cumulative: bool = False

    def __str__(self) -> str:
        return f"cumulative(1..{self.lag})" if self.cumulative else f"lag({self.lag})"


@dataclass(frozen=True)
class MddMatrix:
    """Real symmetric positive semidefinite divergence matrix."""

    values: np.ndarray  # (n, n)
    lag_spec: LagSpec
    sample_len: int  # T of the series the estimate was computed from

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class EigenSystem:
    """Descending eigenvalues with orthonormal eigenvectors as columns."""

    eigenvalues: np.ndarray  # (n,) non-increasing
    eigenvectors: np.ndarray  # (n, n), column i pairs with eigenvalue i


def pairwise_distances(z: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix between the rows of ``z``.

    Computed from the Gram matrix, which keeps the cost at one matrix
    product; squared distances are clamped at zero before the square root
    so near-duplicate rows cannot produce NaN.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] < 2:
        raise InputError("need a 2-D array with at least 2 rows")
    if z.shape[1] == 1:
        d = np.abs(z[:, 0][:, None] - z[:, 0][None, :])
    else:
        gram = z @ z.T
        sq = np.diag(gram)[:, None] + np.diag(gram)[None, :] - (gram + gram.T)
        np.maximum(sq, 0.0, out=sq)
        d = np.sqrt(sq)
    np.fill_diagonal(d, 0.0)
    return d


def _double_center(a: np.ndarray) -> np.ndarray:
    row = a.mean(axis=1, keepdims=True)
    col = a.mean(axis=0, keepdims=True)
    return a - row - col + a.mean()


def mdd_sq(x: np.ndarray, z_source: np.ndarray, j: int) -> float:
    """Squared sample martingale difference divergence of the scalar series
    ``x`` on the lag-``j`` rows of ``z_source``.

    Both double-centered kernels are formed explicitly: the Euclidean
    distances of the lagged rows and half the squared differences of the
    scalar values. Tiny negative results (pure rounding) are clamped to 0.
    """
    x = np.asarray(x, dtype=float).ravel()
    z_source = np.asarray(z_source, dtype=float)
    if z_source.ndim == 1:
        z_source = z_source[:, None]
    t = x.shape[0]
    if z_source.shape[0] != t:
        raise InputError("x and z_source must have the same length")
    if j < 1:
        raise InputError(f"lag must be >= 1, got {j}")
    m = t - j
    if m < 3:
        raise InputError(f"series too short: T-j = {m} < 3")

    a = _double_center(pairwise_distances(z_source[:m]))
    xr = x[j:]
    b = _double_center(0.5 * (xr[:, None] - xr[None, :]) ** 2)
    val = float((a * b).sum() / m**2)
    if val < 0.0:
        tol = 1e-12 * max(1.0, float(np.abs(a * b).sum() / m**2))
        if val < -tol:
            raise NumericError(f"mdd_sq produced {val}, below -{tol}")
        val = 0.0
    return val


def mddm(x: np.ndarray, j: int) -> MddMatrix:
    """Sample martingale difference divergence matrix of ``x_t`` on
    ``x_{t-j}``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    t = x.shape[0]
    if j < 1:
        raise InputError(f"lag must be >= 1, got {j}")
    if t - j < 3:
        raise InputError(f"series too short: T-j = {t - j} < 3")
    d = pairwise_distances(x[: t - j])
    vals = _weighted_outer_sum(x, j, d)
    return MddMatrix(values=vals, lag_spec=LagSpec(lag=j), sample_len=t)


def _weighted_outer_sum(x: np.ndarray, j: int, d: np.ndarray) -> np.ndarray:
    """-(T-j)^-2 sum over retained pairs of centered outer products weighted
    by the lagged-row distances ``d`` (which may be a shared larger matrix
    sliced to the first T-j rows/columns)."""
    t = x.shape[0]
    m = t - j
    xc = x[j:] - x[j:].mean(axis=0)
    out = xc.T @ (d[:m, :m] @ xc)
    out *= -1.0 / m**2
    return 0.5 * (out + out.T)


def mddm_scalar_lag(x: np.ndarray, j: int) -> float:
    """Single entry of the univariate divergence matrix for lag ``j``.

    Equivalent to ``mddm(x, j)`` on a one-column series but runs in
    O(m log m): after sorting the lagged values, the distance-weighted sum
    collapses to prefix sums. This is the hot path of the bootstrap test.
    """
    x = np.asarray(x, dtype=float).ravel()
    t = x.shape[0]
    if j < 1:
        raise InputError(f"lag must be >= 1, got {j}")
    m = t - j
    if m < 3:
        raise InputError(f"series too short: T-j = {m} < 3")
    u = x[j:] - x[j:].mean()
    z = x[:m]
    order = np.argsort(z, kind="stable")
    a = u[order]
    b = z[order]
    s = np.cumsum(a)
    ab = a * b
    # sum_{r,l} u_r u_l |z_r - z_l| = 2 sum_{i<k} a_i a_k (b_k - b_i)
    term1 = float(np.dot(ab[1:], s[:-1]))
    term2 = float(np.dot(ab, s[-1] - s))
    return -2.0 * (term1 - term2) / m**2


def cumulative_mddm(x: np.ndarray, k0: int) -> MddMatrix:
    """Cumulative divergence matrix: the sum of the per-lag matrices over
    lags 1..k0. Positive semidefinite as a sum of PSD terms."""
    x = np.asarray(x, dtype=float)
    t = x.shape[0] if x.ndim == 2 else x.size
    mats = mddm_per_lag(x, k0)
    total = mats[0].copy()
    for m_j in mats[1:]:
        total += m_j
    return MddMatrix(values=total, lag_spec=LagSpec(lag=k0, cumulative=True), sample_len=t)


def mddm_per_lag(x: np.ndarray, k0: int) -> list[np.ndarray]:
    """Per-lag divergence matrices for lags 1..k0 sharing one distance
    matrix.

    The lag-j conditioning rows are the first T-j rows of ``x``, so every
    lag's distance matrix is a leading block of the lag-1 one; computing it
    once makes the cumulative matrix (and a grid of lag budgets) cheap.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    t = x.shape[0]
    if k0 < 1:
        raise InputError(f"lag budget must be >= 1, got {k0}")
    if t - k0 < 3:
        raise InputError(f"series too short: T-k0 = {t - k0} < 3")
    d_full = pairwise_distances(x[: t - 1])
    return [_weighted_outer_sum(x, j, d_full) for j in range(1, k0 + 1)]


def eigen_sym(m: MddMatrix | np.ndarray, clamp_tol: float = 1e-8) -> EigenSystem:
    """Eigendecomposition of a PSD divergence matrix, eigenvalues descending.

    Eigenvalues in ``[-clamp_tol * max(1, lambda_max), 0)`` are clamped to
    zero (exact arithmetic would give a PSD matrix); anything more negative
    raises. Each eigenvector is oriented so its entry of largest magnitude
    is positive, which pins the sign across platforms.
    """
    vals = m.values if isinstance(m, MddMatrix) else np.asarray(m, dtype=float)
    if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
        raise InputError("matrix must be square")
    sym_err = np.abs(vals - vals.T).max()
    scale = max(1.0, float(np.abs(vals).max()))
    if sym_err > 1e-10 * scale:
        raise InputError(f"matrix not symmetric: max asymmetry {sym_err}")
    if not vals.any():
        n = vals.shape[0]
        return EigenSystem(eigenvalues=np.zeros(n), eigenvectors=np.eye(n))

    w, v = np.linalg.eigh(0.5 * (vals + vals.T))
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    lam_max = float(w[0]) if w.size else 0.0
    tol = clamp_tol * max(1.0, lam_max)
    if w[-1] < -tol:
        raise NumericError(f"matrix not PSD: min eigenvalue {w[-1]} < -{tol}")
    np.maximum(w, 0.0, out=w)

    anchor = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[anchor, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v *= signs
    return EigenSystem(eigenvalues=w, eigenvectors=v)


def mddm_to_csv(m: MddMatrix) -> str:
    """Row-major CSV dump with the lag spec and sample length in the header."""
    lines = [f"# lag_spec={m.lag_spec},sample_len={m.sample_len}"]
    for row in m.values:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
