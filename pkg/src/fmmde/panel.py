"""Monthly panel ingestion and stationarity transforms.

Handles FRED-MD style CSV files (header row with mnemonics, second row with
transformation codes, then monthly observations), the seven standard
transformation codes, forecast-target construction for the transformed
series, and per-window standardization.

Transformation codes:

==== =========================
code transform
==== =========================
1    x_t
2    delta x_t
3    delta^2 x_t
4    log x_t
5    delta log x_t
6    delta^2 log x_t
7    delta (x_t/x_{t-1} - 1)
==== =========================
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .dates import format_month, parse_month
from .errors import InputError

TCODE_DESCRIPTIONS = {
    1: "no transformation",
    2: "first difference",
    3: "second difference",
    4: "log",
    5: "first difference of log",
    6: "second difference of log",
    7: "first difference of period-over-period ratio minus one",
}

#: leading observations consumed by each transform
TCODE_LOST_ROWS = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}


@dataclass(frozen=True)
class SeriesMeta:
    """Per-series metadata: 1-based id, FRED mnemonic, group 1..8, tcode 1..7.

    ``group`` may be 0 when no sidecar metadata supplies group assignments.
    """

    id: int
    mnemonic: str
    description: str
    group: int
    tcode: int

    def __post_init__(self):
        if self.tcode not in TCODE_LOST_ROWS:
            raise InputError(f"invalid tcode {self.tcode} for {self.mnemonic!r}")
        if not (0 <= self.group <= 8):
            raise InputError(f"invalid group {self.group} for {self.mnemonic!r}")


@dataclass(frozen=True)
class RawPanel:
    """Untransformed monthly panel: T x n levels with per-series metadata."""

    dates: np.ndarray  # (T,) int month ordinals, consecutive
    values: np.ndarray  # (T, n) float levels
    meta: tuple[SeriesMeta, ...]

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != self.dates.shape[0]:
            raise InputError("values shape does not match dates")
        if self.values.shape[1] != len(self.meta):
            raise InputError("values column count does not match metadata")
        d = np.diff(self.dates)
        if d.size and not np.all(d == 1):
            raise InputError("dates are not consecutive months")
        names = [m.mnemonic for m in self.meta]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise InputError(f"duplicate mnemonic: {dup[0]}")

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def column(self, key: int | str) -> np.ndarray:
        return self.values[:, self.column_index(key)]

    def column_index(self, key: int | str) -> int:
        if isinstance(key, str):
            for i, m in enumerate(self.meta):
                if m.mnemonic == key:
                    return i
            raise InputError(f"unknown series: {key!r}")
        if not 0 <= key < self.n_series:
            raise InputError(f"series index out of range: {key}")
        return key


@dataclass(frozen=True)
class StationaryPanel:
    """Transformed panel, head-trimmed so every column spans the same dates."""

    dates: np.ndarray  # (T',) month ordinals
    values: np.ndarray  # (T', n)
    meta: tuple[SeriesMeta, ...]
    lost_rows: int

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class WindowStats:
    """Column means and sample standard deviations over an estimation window."""

    means: np.ndarray
    stds: np.ndarray


def apply_tcode(x: np.ndarray, tcode: int) -> np.ndarray:
    """Apply transformation ``tcode`` to a level series.

    The result is shorter than the input by :data:`TCODE_LOST_ROWS`
    observations, consumed at the head.
    """
    if tcode not in TCODE_LOST_ROWS:
        raise InputError(f"invalid tcode {tcode}")
    x = np.asarray(x, dtype=float)
    lost = TCODE_LOST_ROWS[tcode]
    if x.shape[0] < lost + 1:
        raise InputError(f"series too short for tcode {tcode}: T={x.shape[0]}")
    if tcode in (4, 5, 6) and not np.all(x > 0.0):
        raise InputError(f"non-positive value under log transform (tcode {tcode})")
    if tcode == 1:
        return x.copy()
    if tcode == 2:
        return np.diff(x)
    if tcode == 3:
        return np.diff(x, n=2)
    if tcode == 4:
        return np.log(x)
    if tcode == 5:
        return np.diff(np.log(x))
    if tcode == 6:
        return np.diff(np.log(x), n=2)
    # tcode 7
    return np.diff(x[1:] / x[:-1] - 1.0)


def parse_fred_md_csv(data: bytes | str, metadata: bytes | str | None = None) -> RawPanel:
    """Parse a FRED-MD style CSV into a :class:`RawPanel`.

    Layout: first row is the date column name followed by mnemonics, second
    row carries the per-series transformation codes (its leading label is
    ignored), remaining rows are one month of observations each. Rows that
    are entirely empty are dropped.

    ``metadata`` is an optional sidecar CSV of ``mnemonic,group`` rows (an
    optional ``mnemonic,group`` header is skipped); series without an entry
    get group 0.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    rows = [r for r in csv.reader(io.StringIO(text))]
    rows = [r for r in rows if any(f.strip() for f in r)]
    if len(rows) < 3:
        raise InputError("CSV must contain a header row, a tcode row and data rows")

    header = [f.strip() for f in rows[0]]
    ncols = len(header)
    mnemonics = header[1:]
    if len(set(mnemonics)) != len(mnemonics):
        dup = sorted({m for m in mnemonics if mnemonics.count(m) > 1})
        raise InputError(f"duplicate mnemonic: {dup[0]}")

    tcode_row = rows[1]
    if len(tcode_row) != ncols:
        raise InputError(f"ragged row: tcode row has {len(tcode_row)} fields, expected {ncols}")
    tcodes = []
    for name, field in zip(mnemonics, tcode_row[1:]):
        try:
            tc = int(float(field))
        except ValueError as exc:
            raise InputError(f"invalid tcode {field!r} for column {name}") from exc
        if tc not in TCODE_LOST_ROWS:
            raise InputError(f"invalid tcode {tc} for column {name}")
        tcodes.append(tc)

    groups = parse_group_sidecar(metadata) if metadata is not None else {}

    dates = []
    values = []
    for irow, row in enumerate(rows[2:], start=3):
        if len(row) != ncols:
            raise InputError(f"ragged row: line {irow} has {len(row)} fields, expected {ncols}")
        dates.append(parse_month(row[0]))
        values.append([_parse_value(f, mnemonics[j], irow) for j, f in enumerate(row[1:])])

    meta = tuple(
        SeriesMeta(id=i + 1, mnemonic=m, description="", group=groups.get(m, 0), tcode=tc)
        for i, (m, tc) in enumerate(zip(mnemonics, tcodes))
    )
    return RawPanel(dates=np.asarray(dates, dtype=np.int64),
                    values=np.asarray(values, dtype=float),
                    meta=meta)


def _parse_value(field: str, name: str, irow: int) -> float:
    s = field.strip()
    if s == "" or s.upper() in ("NA", "NAN", "."):
        return np.nan
    try:
        return float(s)
    except ValueError as exc:
        raise InputError(f"invalid value {field!r} for {name} on line {irow}") from exc


def parse_group_sidecar(metadata: bytes | str) -> dict[str, int]:
    text = metadata.decode("utf-8") if isinstance(metadata, bytes) else metadata
    out: dict[str, int] = {}
    for row in csv.reader(io.StringIO(text)):
        if not any(f.strip() for f in row):
            continue
        if row[0].strip().lower() == "mnemonic":
            continue
        if len(row) < 2:
            raise InputError(f"metadata row needs mnemonic,group: {row!r}")
        out[row[0].strip()] = int(row[1])
    return out


def build_stationary_panel(panel: RawPanel) -> StationaryPanel:
    """Transform every series by its tcode and align all columns.

    All transformed columns are truncated at the head to the common start
    implied by the most demanding tcode present (2 rows when any tcode in
    {3, 6, 7}, 1 when the worst is {2, 5}, 0 otherwise).
    """
    if np.isnan(panel.values).any():
        bad = [panel.meta[j].mnemonic
               for j in np.unique(np.argwhere(np.isnan(panel.values))[:, 1])]
        raise InputError(f"missing values in series: {', '.join(bad)}")
    max_lost = max(TCODE_LOST_ROWS[m.tcode] for m in panel.meta)
    t_out = panel.values.shape[0] - max_lost
    if t_out < 1:
        raise InputError("panel too short for its transformation codes")
    out = np.empty((t_out, panel.n_series))
    for j, m in enumerate(panel.meta):
        z = apply_tcode(panel.values[:, j], m.tcode)
        out[:, j] = z[z.shape[0] - t_out:]
    if not np.all(np.isfinite(out)):
        raise InputError("non-finite values after transformation")
    return StationaryPanel(dates=panel.dates[max_lost:].copy(), values=out,
                           meta=panel.meta, lost_rows=max_lost)


def standardize(panel: StationaryPanel, window: tuple[int, int]) -> tuple[np.ndarray, WindowStats]:
    """Standardize the rows ``window = (start, stop)`` (half-open) to zero
    mean and unit sample standard deviation per column."""
    start, stop = window
    if stop - start < 2:
        raise InputError("window length must be >= 2")
    block = panel.values[start:stop]
    means = block.mean(axis=0)
    stds = block.std(axis=0, ddof=1)
    if np.any(stds <= 0.0):
        j = int(np.argmax(stds <= 0.0))
        raise InputError(f"constant column: {panel.meta[j].mnemonic}")
    return (block - means) / stds, WindowStats(means=means, stds=stds)


def build_target(
    x: np.ndarray,
    tcode: int,
    h: int,
    t: int,
    nominal_second_term_scaled: bool = True,
) -> float:
    """h-step forecast target for a level series, evaluated at origin ``t``.

    Growth series (tcodes 4, 5) use the h-period growth at a monthly rate
    ``ln(X[t+h]/X[t]) / h``; change-in-growth series (tcode 6) subtract the
    current one-period growth, with both terms divided by ``h`` unless
    ``nominal_second_term_scaled`` is False (then only the first term is).
    All other tcodes forecast the transformed stationary value at ``t+h``
    directly.

    ``t`` and ``t+h`` index the level series (0-based).
    """
    x = np.asarray(x, dtype=float)
    if h < 1:
        raise InputError(f"horizon must be >= 1, got {h}")
    if t < 0 or t + h > x.shape[0] - 1:
        raise InputError(f"target index {t}+{h} out of range for T={x.shape[0]}")

    if tcode in (4, 5):
        if x[t] <= 0 or x[t + h] <= 0:
            raise InputError("non-positive level under log target")
        return float(np.log(x[t + h] / x[t]) / h)
    if tcode == 6:
        if t < 1:
            raise InputError("tcode 6 target needs one observation before the origin")
        if min(x[t - 1], x[t], x[t + h]) <= 0:
            raise InputError("non-positive level under log target")
        lead = np.log(x[t + h] / x[t]) / h
        cur = np.log(x[t] / x[t - 1])
        return float(lead - (cur / h if nominal_second_term_scaled else cur))
    if tcode in (1, 2, 3, 7):
        z = apply_tcode(x, tcode)
        idx = t + h - TCODE_LOST_ROWS[tcode]
        if idx < 0:
            raise InputError("target date precedes transformed series start")
        return float(z[idx])
    raise InputError(f"invalid tcode {tcode}")


def monthly_target_series(x: np.ndarray, tcode: int) -> np.ndarray:
    """One-period target series, aligned so entry k corresponds to level
    date k (leading entries are NaN where the target is undefined).

    Equals ``build_target(x, tcode, 1, k-1)`` for every feasible k. This is
    the series whose lags enter the forecasting regressions; it coincides
    with the tcode transform except for tcode 4, whose target is growth
    (delta log) rather than the log level.
    """
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape[0], np.nan)
    eff = 5 if tcode == 4 else tcode
    z = apply_tcode(x, eff)
    out[TCODE_LOST_ROWS[eff]:] = z
    return out


def stationary_panel_to_csv(panel: StationaryPanel) -> str:
    """Serialize a stationary panel to CSV with ISO dates."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date"] + [m.mnemonic for m in panel.meta])
    for i in range(panel.n_obs):
        w.writerow([format_month(panel.dates[i])]
                   + [repr(float(v)) for v in panel.values[i]])
    return buf.getvalue()
