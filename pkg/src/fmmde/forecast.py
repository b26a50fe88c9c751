"""Direct h-step forecasting and the pseudo-real-time evaluation harness.

The forecasting regression projects the h-period-ahead target on current
factor estimates plus lags of the one-period target series, fit by least
squares; every horizon gets its own regression (direct forecasts, never
iterated). The harness expands the estimation window one month at a time,
re-extracting factors, re-selecting factor counts and lag orders at every
origin, and records forecasts against their realized values. A grid
variant keeps the full recursive history per candidate lag budget and
selects, at every origin, the budget with the best mean squared error over
the expanding validation set.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dates import format_month
from .errors import InputError, NumericError
from .factors import bai_ng_icp2, eigenvalue_ratio_r, extract_sw
from .mddm import eigen_sym, mddm_per_lag
from .mdstest import select_r_sequential
from .panel import RawPanel, StationaryPanel, build_target, monthly_target_series, standardize

MODELS = ("ar", "sw", "fmmde")
R_METHODS = ("icp2", "eigen_ratio", "sequential_mds", "fixed")


@dataclass(frozen=True)
class ForecastSpec:
    """Configuration of one pseudo-real-time run (one model)."""

    model: str = "fmmde"
    horizons: tuple[int, ...] = (1, 3, 6, 12, 24)
    p_max: int = 6
    r_method: str | None = None  # default: icp2 for sw, sequential_mds for fmmde
    r_fixed: int | None = None
    max_r: int = 15
    k0: int = 6
    k0_grid: tuple[int, ...] | None = None  # triggers cross-validated runs
    initial_window: int = 132
    cv_start: int | None = None  # origin index where grid runs start emitting
    standardize: bool = True
    mds_m: int = 6
    n_boot: int = 499
    alpha: float = 0.05
    seed: int = 0
    nominal_second_term_scaled: bool = True

    def __post_init__(self):
        if self.model not in MODELS:
            raise InputError(f"unknown model {self.model!r}")
        if self.r_method is not None and self.r_method not in R_METHODS:
            raise InputError(f"unknown r_method {self.r_method!r}")
        if self.r_method == "fixed" and self.r_fixed is None:
            raise InputError("r_method 'fixed' needs r_fixed")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise InputError("horizons must be positive")
        if not 1 <= self.p_max:
            raise InputError("p_max must be >= 1")
        if self.initial_window < 2:
            raise InputError("initial_window must be >= 2")
        if self.k0 < 1:
            raise InputError("k0 must be >= 1")
        if self.k0_grid is not None and any(k < 1 for k in self.k0_grid):
            raise InputError("k0 grid values must be >= 1")

    @property
    def effective_r_method(self) -> str:
        if self.r_method is not None:
            return self.r_method
        return "sequential_mds" if self.model == "fmmde" else "icp2"


@dataclass(frozen=True)
class ForecastRecord:
    target: str
    origin: int  # month ordinal of the forecast origin
    horizon: int
    model: str
    y_hat: float
    y_true: float
    r_used: int
    p_used: int
    k0_used: int | None

    def sort_key(self):
        return (self.target, self.origin, self.horizon, self.model)


@dataclass(frozen=True)
class SkippedOrigin:
    origin: int
    target: str  # "*" when the whole origin failed for the model
    horizon: int  # 0 when the whole origin failed
    model: str
    reason: str


@dataclass
class RunResult:
    records: list[ForecastRecord]
    skipped: list[SkippedOrigin] = field(default_factory=list)


def ols(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Least squares coefficients for a design whose first column is the
    intercept, via SVD. Rank-deficient designs raise rather than silently
    returning one of many solutions."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    m, k = x.shape
    if m <= k + 1:
        raise InputError(f"insufficient observations: {m} rows for {k} regressors")
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < k:
        raise NumericError("collinear regressors")
    return coef


def _lag_matrix(y: np.ndarray, p_max: int) -> np.ndarray:
    """Column k holds y lagged k periods (row s -> y[s-k]); leading entries
    NaN."""
    t = y.shape[0]
    out = np.full((t, p_max), np.nan)
    for k in range(p_max):
        out[k:, k] = y[: t - k]
    return out


def _regression_parts(y_future, lagmat, factors, h, p, origin, s_min):
    s_max = origin - h
    if s_max < s_min:
        raise InputError(f"insufficient data: no estimation rows for h={h}, p={p}")
    rows = np.arange(s_min, s_max + 1)
    resp = y_future[rows]
    blocks = [np.ones((rows.size, 1))]
    if factors is not None and factors.shape[1] > 0:
        blocks.append(factors[rows])
    blocks.append(lagmat[rows, :p])
    design = np.hstack(blocks)
    if np.isnan(resp).any() or np.isnan(design).any():
        raise InputError("non-finite values in regression sample")
    xrow = [1.0]
    if factors is not None and factors.shape[1] > 0:
        xrow.extend(factors[origin])
    xrow.extend(lagmat[origin, :p])
    xrow = np.asarray(xrow)
    if np.isnan(xrow).any():
        raise InputError("non-finite regressors at the forecast origin")
    return resp, design, xrow


def _default_y_future(y: np.ndarray, h: int) -> np.ndarray:
    out = np.full(y.shape[0], np.nan)
    out[: y.shape[0] - h] = y[h:]
    return out


def di_forecast(
    y: np.ndarray,
    factors: np.ndarray | None,
    h: int,
    p: int,
    origin: int | None = None,
    y_future: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Direct h-step forecast issued at ``origin``.

    ``y`` is the one-period target series supplying the autoregressive
    lags; ``y_future[s]`` is the h-period target realized at s+h (defaults
    to ``y`` shifted, i.e. forecasting the series itself). The regression
    pairs regressors dated s with targets dated s+h, so nothing after the
    origin enters the fit. Returns the point forecast and the coefficient
    vector (intercept, factor block, lag block).

    A constant target with no factor block short-circuits to that constant:
    every least-squares solution of the degenerate system forecasts it.
    """
    y = np.asarray(y, dtype=float)
    if p < 1:
        raise InputError(f"p must be >= 1, got {p}")
    if origin is None:
        origin = y.shape[0] - 1
    if y_future is None:
        y_future = _default_y_future(y, h)
    lagmat = _lag_matrix(y, p)
    resp, design, xrow = _regression_parts(y_future, lagmat, factors, h, p, origin, p - 1)
    no_factors = factors is None or factors.shape[1] == 0
    if no_factors and np.ptp(resp) == 0.0 and np.ptp(design[:, 1:]) == 0.0 \
            and np.all(design[0, 1:] == resp[0]):
        coef = np.zeros(design.shape[1])
        coef[0] = resp[0]
        return float(resp[0]), coef
    coef = ols(resp, design)
    return float(xrow @ coef), coef


def bic_lag_select(
    y: np.ndarray,
    h: int,
    p_max: int = 6,
    factors: np.ndarray | None = None,
    origin: int | None = None,
    y_future: np.ndarray | None = None,
) -> int:
    """Lag order in 1..p_max minimizing BIC = m ln(RSS/m) + k ln(m) for the
    direct forecast regression, the factor block (if any) held fixed.

    All candidates are fit on the common sample implied by ``p_max`` so
    their criteria are comparable; ties go to the smallest order.
    """
    y = np.asarray(y, dtype=float)
    if p_max < 1:
        raise InputError("p_max must be >= 1")
    if origin is None:
        origin = y.shape[0] - 1
    if y_future is None:
        y_future = _default_y_future(y, h)
    lagmat = _lag_matrix(y, p_max)
    s_min = p_max - 1
    best_p, best_bic = 0, np.inf
    for p in range(1, p_max + 1):
        resp, design, _ = _regression_parts(y_future, lagmat, factors, h, p, origin, s_min)
        m, k = design.shape
        if m <= k + 1:
            raise InputError(f"insufficient data for BIC at p={p}")
        if np.ptp(resp) == 0.0 and np.ptp(design[:, 1:], axis=0).max(initial=0.0) == 0.0:
            return 1
        coef, _, rank, _ = np.linalg.lstsq(design, resp, rcond=None)
        if rank < k:
            raise NumericError("collinear regressors")
        rss = float(np.sum((resp - design @ coef) ** 2))
        bic = m * np.log(max(rss, 1e-300) / m) + k * np.log(m)
        if bic < best_bic:
            best_p, best_bic = p, bic
    return best_p


def ar_forecast(
    y: np.ndarray,
    h: int,
    p_max: int = 6,
    origin: int | None = None,
    y_future: np.ndarray | None = None,
) -> tuple[float, int, np.ndarray]:
    """Autoregressive benchmark: BIC lag order, then the direct forecast
    with no factor block. Returns (forecast, p, coefficients)."""
    p = bic_lag_select(y, h, p_max, None, origin, y_future)
    y_hat, coef = di_forecast(y, None, h, p, origin, y_future)
    return y_hat, p, coef


# ---------------------------------------------------------------------------
# pseudo-real-time harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _TargetData:
    name: str
    y_monthly: np.ndarray  # stationary-index aligned lag source
    y_future: dict[int, np.ndarray]  # horizon -> origin-indexed target values


def _prepare_target(raw: RawPanel, stationary: StationaryPanel, j: int,
                    horizons: Sequence[int], scaled: bool) -> _TargetData:
    levels = raw.values[:, j]
    meta = raw.meta[j]
    lost = stationary.lost_rows
    t_out = stationary.n_obs
    y_m = monthly_target_series(levels, meta.tcode)[lost:]
    y_fut: dict[int, np.ndarray] = {}
    for h in horizons:
        vals = np.full(t_out, np.nan)
        for s in range(t_out - h):
            vals[s] = build_target(levels, meta.tcode, h, s + lost,
                                   nominal_second_term_scaled=scaled)
        y_fut[h] = vals
    return _TargetData(name=meta.mnemonic, y_monthly=y_m, y_future=y_fut)


def _window_matrix(stationary: StationaryPanel, t: int, do_standardize: bool) -> np.ndarray:
    if do_standardize:
        xs, _ = standardize(stationary, (0, t + 1))
        return xs
    return stationary.values[: t + 1]


def _select_r(spec: ForecastSpec, xs: np.ndarray, eigenvalues: np.ndarray,
              basis: np.ndarray, origin_seed: int) -> int:
    n = xs.shape[1]
    method = spec.effective_r_method
    if method == "fixed":
        if not 1 <= spec.r_fixed <= n:
            raise InputError(f"r_fixed out of range: {spec.r_fixed}")
        return spec.r_fixed
    if method == "icp2":
        return bai_ng_icp2(xs, min(spec.max_r, n, xs.shape[0]))
    if method == "eigen_ratio":
        return eigenvalue_ratio_r(eigenvalues, min(spec.max_r, n - 1))
    # sequential_mds: scan at most max_r leading factors
    full = xs @ basis[:, : min(spec.max_r, n)]
    sel = select_r_sequential(full, M=spec.mds_m, n_boot=spec.n_boot,
                              alpha=spec.alpha, seed=origin_seed)
    return sel.r


def _fmmde_factors(spec: ForecastSpec, xs: np.ndarray, t: int,
                   k0: int, gamma: np.ndarray) -> tuple[np.ndarray | None, int]:
    es = eigen_sym(gamma)
    r = _select_r(spec, xs, es.eigenvalues, es.eigenvectors, spec.seed + 7919 * t + 31 * k0)
    if r == 0:
        return None, 0
    return xs @ es.eigenvectors[:, :r], r


def _factors_at_origin(spec: ForecastSpec, xs: np.ndarray, t: int):
    """Factor block for the estimation window ending at origin ``t``.

    Returns (values or None, r_used, k0_used)."""
    if spec.model == "ar":
        return None, 0, None
    if spec.model == "sw":
        if spec.effective_r_method == "sequential_mds":
            raise InputError("sequential_mds applies to the fmmde model only")
        s = (xs.T @ xs) / xs.shape[0]
        es = eigen_sym(0.5 * (s + s.T))
        r = _select_r(spec, xs, es.eigenvalues, es.eigenvectors, spec.seed + 7919 * t)
        if r == 0:
            return None, 0, None
        return extract_sw(xs, r).values, r, None
    gamma = sum(mddm_per_lag(xs, spec.k0))
    f, r = _fmmde_factors(spec, xs, t, spec.k0, gamma)
    return f, r, spec.k0


def _origin_bounds(stationary: StationaryPanel, spec: ForecastSpec,
                   first_origin: int | None, last_origin: int | None) -> tuple[int, int]:
    t_obs = stationary.n_obs
    t0 = spec.initial_window - 1 if first_origin is None else first_origin
    t1 = t_obs - 1 - min(spec.horizons) if last_origin is None else last_origin
    if t0 < spec.initial_window - 1:
        raise InputError("first origin precedes the initial window")
    if t0 > t1:
        raise InputError("panel too short for the initial window and horizons")
    return t0, t1


def _resolve_targets(raw: RawPanel, targets) -> list[int]:
    if targets is None:
        return list(range(raw.n_series))
    return [raw.column_index(t) for t in targets]


def recursive_run(
    stationary: StationaryPanel,
    raw: RawPanel,
    spec: ForecastSpec,
    targets: Sequence[int | str] | None = None,
    first_origin: int | None = None,
    last_origin: int | None = None,
    workers: int = 1,
) -> RunResult:
    """Expanding-window run: at every origin, standardize the window,
    re-extract factors, re-select the factor count and lag order, and emit
    one direct forecast per (target, horizon) whose realization lies inside
    the sample.

    Failures (collinearity, short samples) skip the affected origin entries
    and are reported in the result rather than aborting the run. Origins
    are independent computations (seeds derive from (seed, origin)), so
    ``workers`` threads change neither the records nor their order: the
    record list is sorted by (target, origin, horizon, model) regardless
    of execution order.
    """
    idx = _resolve_targets(raw, targets)
    t0, t1 = _origin_bounds(stationary, spec, first_origin, last_origin)
    tdata = [_prepare_target(raw, stationary, j, spec.horizons,
                             spec.nominal_second_term_scaled) for j in idx]
    t_obs = stationary.n_obs

    def one_origin(t: int) -> tuple[list[ForecastRecord], list[SkippedOrigin]]:
        recs: list[ForecastRecord] = []
        skips: list[SkippedOrigin] = []
        date = int(stationary.dates[t])
        try:
            xs = _window_matrix(stationary, t, spec.standardize)
            factors, r_used, k0_used = _factors_at_origin(spec, xs, t)
        except (InputError, NumericError) as exc:
            skips.append(SkippedOrigin(date, "*", 0, spec.model, str(exc)))
            return recs, skips
        for td in tdata:
            for h in spec.horizons:
                if t + h > t_obs - 1:
                    continue
                try:
                    p = bic_lag_select(td.y_monthly, h, spec.p_max, factors,
                                       origin=t, y_future=td.y_future[h])
                    y_hat, _ = di_forecast(td.y_monthly, factors, h, p,
                                           origin=t, y_future=td.y_future[h])
                except (InputError, NumericError) as exc:
                    skips.append(SkippedOrigin(date, td.name, h, spec.model, str(exc)))
                    continue
                recs.append(ForecastRecord(
                    target=td.name, origin=date, horizon=h, model=spec.model,
                    y_hat=y_hat, y_true=float(td.y_future[h][t]),
                    r_used=r_used, p_used=p, k0_used=k0_used))
        return recs, skips

    origins = range(t0, t1 + 1)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_origin, origins))
    else:
        results = [one_origin(t) for t in origins]
    records: list[ForecastRecord] = []
    skipped: list[SkippedOrigin] = []
    for recs, skips in results:
        records.extend(recs)
        skipped.extend(skips)
    records.sort(key=ForecastRecord.sort_key)
    return RunResult(records=records, skipped=skipped)


# ---------------------------------------------------------------------------
# lag-budget cross-validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationLedger:
    """Per-budget running squared forecast errors over the validation set.

    Entries are appended in target-date order; every budget must always
    hold the same dates, so mean errors are comparable at any step.
    """

    grid: tuple[int, ...]
    target_dates: list[int] = field(default_factory=list)
    sq_errors: dict[int, list[float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.grid:
            raise InputError("empty k0 grid")
        for k0 in self.grid:
            self.sq_errors.setdefault(k0, [])

    def append(self, target_date: int, errors: dict[int, float]) -> None:
        if set(errors) != set(self.grid):
            raise InputError("ragged ledger: errors must cover the whole grid")
        if self.target_dates and target_date < self.target_dates[-1]:
            raise InputError("ledger entries must arrive in date order")
        self.target_dates.append(target_date)
        for k0, e in errors.items():
            self.sq_errors[k0].append(float(e))

    def cv_mse(self, upto_date: int | None = None) -> dict[int, float]:
        count = len(self.target_dates) if upto_date is None else \
            bisect_right(self.target_dates, upto_date)
        if count == 0:
            raise InputError("empty ledger")
        lengths = {len(v) for v in self.sq_errors.values()}
        if lengths != {len(self.target_dates)}:
            raise InputError("ragged ledger: unequal error counts across k0")
        return {k0: float(np.sum(v[:count]) / count) for k0, v in self.sq_errors.items()}


def cv_select_k0(ledger: ValidationLedger, grid: Sequence[int] | None = None,
                 upto_date: int | None = None) -> int:
    """Budget minimizing the validation mean squared error; ties go to the
    smallest value."""
    grid = tuple(ledger.grid if grid is None else grid)
    mse = ledger.cv_mse(upto_date)
    missing = [k for k in grid if k not in mse]
    if missing:
        raise InputError(f"grid value {missing[0]} not in ledger")
    best = min(grid, key=lambda k0: (mse[k0], k0))
    return int(best)


def cv_recursive_run(
    stationary: StationaryPanel,
    raw: RawPanel,
    spec: ForecastSpec,
    targets: Sequence[int | str] | None = None,
    first_origin: int | None = None,
    last_origin: int | None = None,
) -> RunResult:
    """Expanding-window run with the lag budget re-selected at every origin.

    The full recursive forecast history is maintained for every budget in
    the grid (per-lag divergence matrices are computed once per origin and
    shared). From ``spec.cv_start`` onward, each emitted record uses the
    budget whose accumulated squared errors over realized targets (dates up
    to the origin) are smallest; earlier origins only feed the ledgers.
    """
    if spec.model != "fmmde":
        raise InputError("cross-validated lag budgets apply to the fmmde model")
    if not spec.k0_grid:
        raise InputError("spec.k0_grid is required for cross-validated runs")
    grid = tuple(sorted(set(spec.k0_grid)))
    idx = _resolve_targets(raw, targets)
    t0, t1 = _origin_bounds(stationary, spec, first_origin, last_origin)
    h_max = max(spec.horizons)
    cv_start = spec.cv_start if spec.cv_start is not None else t0 + h_max
    if cv_start < t0 + h_max:
        raise InputError("cv_start must leave at least one realized forecast per horizon")
    tdata = [_prepare_target(raw, stationary, j, spec.horizons,
                             spec.nominal_second_term_scaled) for j in idx]
    ledgers = {(td.name, h): ValidationLedger(grid=grid)
               for td in tdata for h in spec.horizons}
    records: list[ForecastRecord] = []
    skipped: list[SkippedOrigin] = []
    t_obs = stationary.n_obs
    for t in range(t0, t1 + 1):
        date = int(stationary.dates[t])
        try:
            xs = _window_matrix(stationary, t, spec.standardize)
            mats = mddm_per_lag(xs, grid[-1])
        except (InputError, NumericError) as exc:
            skipped.append(SkippedOrigin(date, "*", 0, spec.model, str(exc)))
            continue
        running = np.zeros_like(mats[0])
        factors_by_k0: dict[int, tuple[np.ndarray | None, int]] = {}
        pos = 0
        for k0 in grid:
            while pos < k0:
                running += mats[pos]
                pos += 1
            try:
                factors_by_k0[k0] = _fmmde_factors(spec, xs, t, k0, running.copy())
            except (InputError, NumericError) as exc:
                skipped.append(SkippedOrigin(date, "*", 0, spec.model,
                                             f"k0={k0}: {exc}"))
        if len(factors_by_k0) < len(grid):
            continue  # ledger must stay rectangular across the grid
        for td in tdata:
            for h in spec.horizons:
                if t + h > t_obs - 1:
                    continue
                per_k0: dict[int, ForecastRecord] = {}
                errs: dict[int, float] = {}
                try:
                    for k0 in grid:
                        factors, r_used = factors_by_k0[k0]
                        p = bic_lag_select(td.y_monthly, h, spec.p_max, factors,
                                           origin=t, y_future=td.y_future[h])
                        y_hat, _ = di_forecast(td.y_monthly, factors, h, p,
                                               origin=t, y_future=td.y_future[h])
                        y_true = float(td.y_future[h][t])
                        per_k0[k0] = ForecastRecord(
                            target=td.name, origin=date, horizon=h, model=spec.model,
                            y_hat=y_hat, y_true=y_true, r_used=r_used, p_used=p,
                            k0_used=k0)
                        errs[k0] = (y_hat - y_true) ** 2
                except (InputError, NumericError) as exc:
                    skipped.append(SkippedOrigin(date, td.name, h, spec.model, str(exc)))
                    continue
                target_date = int(stationary.dates[t + h])
                ledgers[(td.name, h)].append(target_date, errs)
                if t >= cv_start:
                    k0_star = cv_select_k0(ledgers[(td.name, h)], grid, upto_date=date)
                    records.append(per_k0[k0_star])
    records.sort(key=ForecastRecord.sort_key)
    return RunResult(records=records, skipped=skipped)


# ---------------------------------------------------------------------------
# record serialization
# ---------------------------------------------------------------------------

_CSV_HEADER = "target,origin,horizon,model,y_hat,y_true,r_used,p_used,k0_used"


def records_to_csv(records: Sequence[ForecastRecord]) -> str:
    lines = [_CSV_HEADER]
    for r in records:
        k0 = "" if r.k0_used is None else str(r.k0_used)
        lines.append(f"{r.target},{format_month(r.origin)},{r.horizon},{r.model},"
                     f"{r.y_hat!r},{r.y_true!r},{r.r_used},{r.p_used},{k0}")
    return "\n".join(lines) + "\n"


def records_from_csv(text: str) -> list[ForecastRecord]:
    from .dates import parse_month

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _CSV_HEADER:
        raise InputError("unrecognized records CSV header")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 9:
            raise InputError(f"ragged row in records CSV: {ln!r}")
        out.append(ForecastRecord(
            target=parts[0], origin=parse_month(parts[1]), horizon=int(parts[2]),
            model=parts[3], y_hat=float(parts[4]), y_true=float(parts[5]),
            r_used=int(parts[6]), p_used=int(parts[7]),
            k0_used=None if parts[8] == "" else int(parts[8])))
    return out
