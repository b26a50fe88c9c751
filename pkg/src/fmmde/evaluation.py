"""Forecast evaluation: squared-error aggregation, model comparisons and
the report tables.

Mean squared forecast errors are aggregated over a window of forecast
origins; model pairs are compared through the ratio of their MSFEs (the
convention used throughout: a ratio below one favors the numerator model)
and through a one-sided Diebold-Mariano test of equal squared-error loss.
Reports come in three shapes: per-series ratios with significance stars,
percentiles of the ratio distribution across series, and the same
percentiles within each variable group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dates import format_month
from .errors import InputError
from .forecast import ForecastRecord

DEFAULT_PERCENTILES = (10, 25, 50, 75, 90)
DEFAULT_PAIRS = (("fmmde", "ar"), ("sw", "ar"), ("fmmde", "sw"))

GROUP_NAMES = {
    0: "Ungrouped",
    1: "Output & Income",
    2: "Labor Market",
    3: "Housing",
    4: "Consumption, Orders & Inventories",
    5: "Money & Credit",
    6: "Interest & Exchange Rates",
    7: "Prices",
    8: "Stock Market",
}


def _in_window(r: ForecastRecord, window: tuple[int | None, int | None] | None) -> bool:
    if window is None:
        return True
    lo, hi = window
    return (lo is None or r.origin >= lo) and (hi is None or r.origin <= hi)


def msfe(records: Sequence[ForecastRecord],
         window: tuple[int | None, int | None] | None = None) -> float:
    """Mean squared forecast error over the records whose origin falls in
    the (inclusive) window of month ordinals."""
    errs = [(r.y_hat - r.y_true) ** 2 for r in records if _in_window(r, window)]
    if not errs:
        raise InputError("empty evaluation window")
    return float(np.mean(errs))


def rmsfe_ratio(records: Sequence[ForecastRecord], m1: str, m2: str,
                window: tuple[int | None, int | None] | None = None,
                ratio_of_roots: bool = False) -> float:
    """MSFE ratio of model ``m1`` over ``m2`` on their common records.

    Both models must cover exactly the same forecast origins in the window.
    ``ratio_of_roots`` switches to the ratio of root-MSFEs.
    """
    rec1 = [r for r in records if r.model == m1 and _in_window(r, window)]
    rec2 = [r for r in records if r.model == m2 and _in_window(r, window)]
    if not rec1 or not rec2:
        raise InputError("empty evaluation window")
    if sorted(r.origin for r in rec1) != sorted(r.origin for r in rec2):
        raise InputError(f"mismatched origin sets for {m1} vs {m2}")
    num, den = msfe(rec1), msfe(rec2)
    if den == 0.0:
        raise InputError("zero denominator MSFE")
    ratio = num / den
    return float(np.sqrt(ratio)) if ratio_of_roots else float(ratio)


def percentile_table(ratios: Sequence[float],
                     percentiles: Sequence[float] = DEFAULT_PERCENTILES) -> np.ndarray:
    """Empirical percentiles with linear interpolation between order
    statistics (numpy's default rule, so values reproduce exactly)."""
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise InputError("empty ratio vector")
    return np.percentile(ratios, list(percentiles), method="linear")


def group_table(ratios: Sequence[float], groups: Sequence[int],
                percentiles: Sequence[float] = DEFAULT_PERCENTILES) -> dict[int, np.ndarray]:
    """Percentile rows computed within each group id."""
    ratios = np.asarray(ratios, dtype=float)
    groups = np.asarray(groups, dtype=int)
    if ratios.shape != groups.shape:
        raise InputError("ratios and groups must align")
    out: dict[int, np.ndarray] = {}
    for g in sorted(set(groups.tolist())):
        if g not in GROUP_NAMES:
            raise InputError(f"unknown group id {g}")
        out[g] = percentile_table(ratios[groups == g], percentiles)
    return out


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def dm_test(e1: Sequence[float], e2: Sequence[float], h: int = 1) -> tuple[float, float]:
    """One-sided Diebold-Mariano test of H1: model-1 squared loss below
    model-2's.

    The loss differential's long-run variance uses a Bartlett kernel with
    h-1 lags (plain variance at h=1). Identical losses give the defined
    degenerate result (0, 0.5).
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if e1.shape != e2.shape or e1.ndim != 1:
        raise InputError("error series must be 1-D of equal length")
    n = e1.size
    if n < 10:
        raise InputError(f"need at least 10 observations, got {n}")
    d = e1**2 - e2**2
    dbar = float(d.mean())
    dc = d - dbar
    gamma0 = float(dc @ dc) / n
    lrv = gamma0
    for k in range(1, h):
        gk = float(dc[k:] @ dc[:-k]) / n
        lrv += 2.0 * (1.0 - k / h) * gk
    if lrv <= 0.0:
        return 0.0, 0.5
    stat = dbar / math.sqrt(lrv / n)
    return float(stat), float(_norm_cdf(stat))


def dm_stars(p_value: float) -> str:
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    """Comparison tables for one record set over one evaluation window."""

    window: tuple[int | None, int | None] | None
    horizons: tuple[int, ...]
    targets: tuple[str, ...]
    pairs: tuple[tuple[str, str], ...]
    msfe: dict = field(default_factory=dict)  # (target, h, model) -> float
    ratios: dict = field(default_factory=dict)  # (target, h, (m1, m2)) -> float
    dm: dict = field(default_factory=dict)  # (target, h) -> (stat, p)
    dm_pair: tuple[str, str] = ("fmmde", "sw")


def build_report(records: Sequence[ForecastRecord],
                 window: tuple[int | None, int | None] | None = None,
                 pairs: Sequence[tuple[str, str]] = DEFAULT_PAIRS,
                 dm_pair: tuple[str, str] = ("fmmde", "sw"),
                 ratio_of_roots: bool = False) -> EvalReport:
    """Aggregate records into per-(target, horizon) MSFEs, pair ratios and
    the Diebold-Mariano comparison for ``dm_pair``.

    Pairs whose models are absent from the records are dropped; the DM test
    is skipped where fewer than 10 common origins exist.
    """
    recs = [r for r in records if _in_window(r, window)]
    if not recs:
        raise InputError("empty evaluation window")
    models = sorted({r.model for r in recs})
    targets = tuple(sorted({r.target for r in recs}))
    horizons = tuple(sorted({r.horizon for r in recs}))
    pairs = tuple(p for p in pairs if p[0] in models and p[1] in models)
    report = EvalReport(window=window, horizons=horizons, targets=targets,
                        pairs=pairs, dm_pair=dm_pair)
    by_key: dict[tuple[str, int, str], list[ForecastRecord]] = {}
    for r in recs:
        by_key.setdefault((r.target, r.horizon, r.model), []).append(r)
    for (target, h, model), group in by_key.items():
        report.msfe[(target, h, model)] = msfe(group)
    for target in targets:
        for h in horizons:
            for m1, m2 in pairs:
                g1 = by_key.get((target, h, m1))
                g2 = by_key.get((target, h, m2))
                if g1 and g2:
                    report.ratios[(target, h, (m1, m2))] = rmsfe_ratio(
                        g1 + g2, m1, m2, ratio_of_roots=ratio_of_roots)
            g1 = by_key.get((target, h, dm_pair[0]))
            g2 = by_key.get((target, h, dm_pair[1]))
            if g1 and g2:
                o1 = {r.origin: r for r in g1}
                o2 = {r.origin: r for r in g2}
                common = sorted(set(o1) & set(o2))
                if len(common) >= 10:
                    e1 = [o1[o].y_hat - o1[o].y_true for o in common]
                    e2 = [o2[o].y_hat - o2[o].y_true for o in common]
                    report.dm[(target, h)] = dm_test(e1, e2, h)
    return report


def _fmt_window(window) -> str:
    if window is None:
        return "all origins"
    lo, hi = window
    lo_s = format_month(lo) if lo is not None else "start"
    hi_s = format_month(hi) if hi is not None else "end"
    return f"origins {lo_s}..{hi_s}"


def per_series_csv(report: EvalReport) -> str:
    lines = ["target,horizon," + ",".join(f"{m1}_vs_{m2}" for m1, m2 in report.pairs)
             + ",dm_stat,dm_p,stars"]
    for target in report.targets:
        for h in report.horizons:
            cells = [target, str(h)]
            for pair in report.pairs:
                v = report.ratios.get((target, h, pair))
                cells.append("" if v is None else repr(v))
            dm = report.dm.get((target, h))
            if dm is None:
                cells.extend(["", "", ""])
            else:
                cells.extend([repr(dm[0]), repr(dm[1]), dm_stars(dm[1])])
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def percentile_csv(report: EvalReport,
                   percentiles: Sequence[float] = DEFAULT_PERCENTILES) -> str:
    lines = ["pair,horizon," + ",".join(f"p{int(p)}" for p in percentiles)]
    for pair in report.pairs:
        for h in report.horizons:
            vals = [report.ratios[(t, h, pair)] for t in report.targets
                    if (t, h, pair) in report.ratios]
            if not vals:
                continue
            row = percentile_table(vals, percentiles)
            lines.append(f"{pair[0]}_vs_{pair[1]},{h},"
                         + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def group_csv(report: EvalReport, groups: dict[str, int],
              pair: tuple[str, str] = ("fmmde", "sw"),
              percentiles: Sequence[float] = DEFAULT_PERCENTILES) -> str:
    lines = ["group,group_name,horizon," + ",".join(f"p{int(p)}" for p in percentiles)]
    for h in report.horizons:
        vals, gids = [], []
        for t in report.targets:
            v = report.ratios.get((t, h, pair))
            if v is not None:
                vals.append(v)
                gids.append(groups.get(t, 0))
        if not vals:
            continue
        table = group_table(vals, gids, percentiles)
        for g, row in table.items():
            lines.append(f"{g},{GROUP_NAMES[g]},{h},"
                         + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def per_series_text(report: EvalReport) -> str:
    """Aligned text table: one block per model pair, horizons as columns;
    significance stars attach to the DM pair's cells."""
    width = max([len(t) for t in report.targets] + [8])
    out = [f"MSFE ratios, {_fmt_window(report.window)}"]
    for pair in report.pairs:
        out.append("")
        out.append(f"[{pair[0].upper()} vs {pair[1].upper()}]")
        header = " " * width + "".join(f"  h={h:<9d}" for h in report.horizons)
        out.append(header)
        for target in report.targets:
            cells = [target.ljust(width)]
            for h in report.horizons:
                v = report.ratios.get((target, h, pair))
                if v is None:
                    cells.append("  " + "-".ljust(11))
                    continue
                stars = ""
                if pair == report.dm_pair and (target, h) in report.dm:
                    stars = dm_stars(report.dm[(target, h)][1])
                cells.append(f"  {v:.3f}{stars}".ljust(13))
            out.append("".join(cells).rstrip())
    return "\n".join(out) + "\n"


def percentile_text(report: EvalReport,
                    percentiles: Sequence[float] = DEFAULT_PERCENTILES) -> str:
    out = [f"Percentiles of MSFE ratios across series, {_fmt_window(report.window)}"]
    for pair in report.pairs:
        out.append("")
        out.append(f"[{pair[0].upper()} vs {pair[1].upper()}]")
        out.append("      " + "".join(f"{int(p):>8d}th" for p in percentiles))
        for h in report.horizons:
            vals = [report.ratios[(t, h, pair)] for t in report.targets
                    if (t, h, pair) in report.ratios]
            if not vals:
                continue
            row = percentile_table(vals, percentiles)
            out.append(f"h={h:<4d}" + "".join(f"{v:>10.3f}" for v in row))
    return "\n".join(out) + "\n"


def group_text(report: EvalReport, groups: dict[str, int],
               pair: tuple[str, str] = ("fmmde", "sw"),
               percentiles: Sequence[float] = DEFAULT_PERCENTILES) -> str:
    name_w = max(len(n) for n in GROUP_NAMES.values()) + 2
    out = [f"Percentiles of {pair[0].upper()}/{pair[1].upper()} MSFE ratios by group, "
           f"{_fmt_window(report.window)}"]
    for h in report.horizons:
        vals, gids = [], []
        for t in report.targets:
            v = report.ratios.get((t, h, pair))
            if v is not None:
                vals.append(v)
                gids.append(groups.get(t, 0))
        if not vals:
            continue
        out.append("")
        out.append(f"[h={h}]")
        out.append(" " * name_w + "".join(f"{int(p):>8d}th" for p in percentiles))
        for g, row in group_table(vals, gids, percentiles).items():
            out.append(GROUP_NAMES[g].ljust(name_w)
                       + "".join(f"{v:>10.3f}" for v in row))
    return "\n".join(out) + "\n"
