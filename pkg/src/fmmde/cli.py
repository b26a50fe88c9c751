"""Command-line interface.

Subcommands cover the full pipeline: ``transform`` (CSV ingestion and
stationarity transforms), ``simulate`` (Monte Carlo forecast-error
ratios), ``factors`` (one-shot extraction with selection diagnostics),
``mds-test`` (per-factor martingale tests), ``forecast`` (recursive
pseudo-real-time runs with checkpoint/resume), ``cv-k0`` (recursive runs
with cross-validated lag budget) and ``evaluate`` (report tables).

Configuration comes from an optional YAML file plus flag overrides; flags
win. All randomness derives from the single configured seed. Progress goes
to stderr, machine output to files or stdout. Exit codes: 0 success, 1
runtime/numeric failure, 2 input/configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import evaluation, forecast, mdstest, panel, sim
from .dates import format_month, parse_month
from .errors import InputError, NumericError
from .factors import extract_sw, factor_series_to_csv, FactorSeries
from .mddm import cumulative_mddm, eigen_sym

STANDARD_HORIZONS = (1, 3, 6, 12, 24)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _load_panel(path: str, meta_path: str | None):
    raw = panel.parse_fred_md_csv(_read(path), _read(meta_path) if meta_path else None)
    return raw, panel.build_stationary_panel(raw)


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------


def cmd_transform(args) -> int:
    if args.list_tcodes:
        for code, desc in panel.TCODE_DESCRIPTIONS.items():
            print(f"{code}: {desc}")
        return 0
    if args.input is None:
        raise InputError("input CSV required (or use --list-tcodes)")
    raw, stat = _load_panel(args.input, args.meta)
    _progress(f"transformed {raw.n_series} series, {stat.n_obs} rows "
              f"({stat.lost_rows} lost to differencing)")
    if args.dry_run:
        return 0
    if args.output is None:
        raise InputError("output path required unless --dry-run")
    _write(args.output, panel.stationary_panel_to_csv(stat))
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = sim.SimConfig(n=args.n, T=args.t, example=args.example, hurst=args.hurst,
                        reps=args.reps, seed=args.seed, error_scale=args.error_scale,
                        k0=args.k0, fix_loadings=args.fix_loadings)
    _progress(f"simulating {cfg.example} example: n={cfg.n} T={cfg.T} reps={cfg.reps}")
    result = sim.run_afe_experiment(cfg, workers=args.workers)
    text = sim.afe_result_to_csv(result)
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# factors / mds-test
# ---------------------------------------------------------------------------


def _standardized_full_sample(stat):
    return panel.standardize(stat, (0, stat.n_obs))[0]


def cmd_factors(args) -> int:
    raw, stat = _load_panel(args.panel, args.meta)
    xs = _standardized_full_sample(stat) if args.standardize else stat.values
    n = xs.shape[1]
    diag_lines = []
    if args.model == "sw":
        from .factors import bai_ng_icp2

        r = args.r or bai_ng_icp2(xs, min(args.max_r, n, xs.shape[0]))
        values = extract_sw(xs, r).values
        diag_lines.append(f"model=sw r={r}" + (" (fixed)" if args.r else " (IC_p2)"))
    else:
        from .factors import eigenvalue_ratio_r

        gamma = cumulative_mddm(xs, args.k0)
        es = eigen_sym(gamma)
        diag_lines.append("top eigenvalues: "
                          + " ".join(f"{v:.4g}" for v in es.eigenvalues[: min(10, n)]))
        if args.r:
            r = args.r
            diag_lines.append(f"model=fmmde k0={args.k0} r={r} (fixed)")
        elif args.r_method == "eigen_ratio":
            r = eigenvalue_ratio_r(es.eigenvalues, min(args.max_r, n - 1))
            diag_lines.append(f"model=fmmde k0={args.k0} r={r} (eigenvalue ratio)")
        else:
            full = xs @ es.eigenvectors[:, : min(args.max_r, n)]
            sel = mdstest.select_r_sequential(full, M=args.truncation_lag,
                                              n_boot=args.n_boot, alpha=args.alpha,
                                              seed=args.seed)
            r = sel.r
            for i, res in enumerate(sel.per_factor, start=1):
                diag_lines.append(f"factor {i}: stat={res.statistic:.6g} p={res.p_value:.4f}")
            diag_lines.append(f"model=fmmde k0={args.k0} r={r} (sequential test)")
        values = xs @ es.eigenvectors[:, :r]
    series = FactorSeries(values=values, source=args.model, dates=stat.dates)
    _write(args.output, factor_series_to_csv(series))
    for line in diag_lines:
        print(line)
    return 0


def cmd_mds_test(args) -> int:
    raw, stat = _load_panel(args.panel, args.meta)
    xs = _standardized_full_sample(stat) if args.standardize else stat.values
    gamma = cumulative_mddm(xs, args.k0)
    es = eigen_sym(gamma)
    k = min(args.max_factors, xs.shape[1])
    full = xs @ es.eigenvectors[:, :k]
    results = []
    for i in range(k):
        results.append(mdstest.wild_bootstrap_pvalue(
            full[:, i], M=args.truncation_lag, n_boot=args.n_boot,
            seed=args.seed + 1_000_003 * i))
        _progress(f"factor {i + 1}: p={results[-1].p_value:.4f}")
    text = mdstest.results_to_csv(results)
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# forecast / cv-k0
# ---------------------------------------------------------------------------

_FORECAST_DEFAULTS = {
    "panel": None,
    "metadata": None,
    "targets": "all",
    "horizons": list(STANDARD_HORIZONS),
    "models": ["ar", "sw", "fmmde"],
    "initial_window": 132,
    "first_origin": None,  # ISO date overriding initial_window anchoring
    "p_max": 6,
    "max_r": 15,
    "r_method": None,
    "r_fixed": None,
    "k0": 6,
    "k0_grid": None,
    "cv_start": None,  # ISO date where grid emission starts
    "standardize": True,
    "truncation_lag": 6,
    "n_boot": 499,
    "alpha": 0.05,
    "seed": 0,
    "output_dir": ".",
    "checkpoint_every": 50,
    "limit_origins": None,
    "workers": 1,
}


def _load_config(args, defaults) -> dict:
    cfg = dict(defaults)
    if args.config:
        loaded = yaml.safe_load(_read(args.config))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise InputError("config file must contain a mapping")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if cfg["panel"] is None:
        raise InputError("panel path required (config key 'panel' or --panel)")
    for h in cfg["horizons"]:
        if not isinstance(h, int) or h < 1:
            raise InputError(f"invalid horizon {h!r}")
        if h not in STANDARD_HORIZONS:
            _progress(f"warning: nonstandard horizon {h}")
    return cfg


def _spec_for(cfg: dict, model: str, stat) -> forecast.ForecastSpec:
    initial_window = cfg["initial_window"]
    if cfg["first_origin"] is not None:
        anchor = parse_month(str(cfg["first_origin"]))
        pos = int(np.searchsorted(stat.dates, anchor))
        if pos >= stat.n_obs or stat.dates[pos] != anchor:
            raise InputError(f"first_origin {cfg['first_origin']} not in the panel")
        initial_window = pos + 1
    cv_start = None
    if cfg["cv_start"] is not None:
        anchor = parse_month(str(cfg["cv_start"]))
        pos = int(np.searchsorted(stat.dates, anchor))
        if pos >= stat.n_obs or stat.dates[pos] != anchor:
            raise InputError(f"cv_start {cfg['cv_start']} not in the panel")
        cv_start = pos
    return forecast.ForecastSpec(
        model=model, horizons=tuple(cfg["horizons"]), p_max=cfg["p_max"],
        r_method=cfg["r_method"], r_fixed=cfg["r_fixed"], max_r=cfg["max_r"],
        k0=cfg["k0"], k0_grid=tuple(cfg["k0_grid"]) if cfg["k0_grid"] else None,
        initial_window=initial_window, cv_start=cv_start,
        standardize=cfg["standardize"], mds_m=cfg["truncation_lag"],
        n_boot=cfg["n_boot"], alpha=cfg["alpha"], seed=cfg["seed"])


def _targets_list(cfg, raw):
    if cfg["targets"] in ("all", None):
        return None
    targets = cfg["targets"]
    if isinstance(targets, str):
        targets = [t.strip() for t in targets.split(",") if t.strip()]
    for t in targets:
        raw.column_index(t)
    return targets


def _checkpoint_path(outdir: str) -> str:
    return os.path.join(outdir, "forecast.checkpoint.json")


def _run_with_checkpoints(cfg, raw, stat, targets, models, runner, outdir, resume) -> int:
    """Drive per-model recursive runs in checkpointed origin chunks.

    The checkpoint stores completed records and the next origin per model;
    chunked and single-shot runs emit identical records because every
    origin derives its state from (seed, origin) alone.
    """
    ckpt_path = _checkpoint_path(outdir)
    state = {"records": "", "next_origin": {}, "skipped": []}
    if resume and os.path.exists(ckpt_path):
        state = json.loads(_read(ckpt_path))
        _progress(f"resuming from {ckpt_path}")
    records = forecast.records_from_csv(state["records"]) if state["records"] else []
    skipped = list(state.get("skipped", []))
    budget = cfg["limit_origins"]
    chunk = max(1, int(cfg["checkpoint_every"]))
    exhausted = False
    for model in models:
        spec = _spec_for(cfg, model, stat)
        t0, t1 = forecast._origin_bounds(stat, spec, None, None)
        nxt = int(state["next_origin"].get(model, t0))
        while nxt <= t1:
            if budget is not None and budget <= 0:
                exhausted = True
                break
            end = min(t1, nxt + chunk - 1)
            if budget is not None:
                end = min(end, nxt + budget - 1)
            kw = {"workers": cfg["workers"]} if runner is forecast.recursive_run else {}
            result = runner(stat, raw, spec, targets=targets,
                            first_origin=nxt, last_origin=end, **kw)
            records.extend(result.records)
            skipped.extend([[s.origin, s.target, s.horizon, s.model, s.reason]
                            for s in result.skipped])
            done = end - nxt + 1
            if budget is not None:
                budget -= done
            nxt = end + 1
            state["next_origin"][model] = nxt
            state["records"] = forecast.records_to_csv(records)
            state["skipped"] = skipped
            _write(ckpt_path, json.dumps(state))
            _progress(f"{model}: origins through {format_month(stat.dates[end])} done")
        if exhausted:
            break
    if exhausted:
        _progress("origin budget exhausted; checkpoint saved, rerun with --resume")
        return 0
    records.sort(key=forecast.ForecastRecord.sort_key)
    _write(os.path.join(outdir, "records.csv"), forecast.records_to_csv(records))
    if skipped:
        lines = ["origin,target,horizon,model,reason"]
        lines += [f"{format_month(s[0])},{s[1]},{s[2]},{s[3]},\"{s[4]}\"" for s in skipped]
        _write(os.path.join(outdir, "skipped.csv"), "\n".join(lines) + "\n")
        _progress(f"{len(skipped)} origin entries skipped (see skipped.csv)")
    if os.path.exists(ckpt_path):
        os.remove(ckpt_path)
    _progress(f"wrote {len(records)} records to {os.path.join(outdir, 'records.csv')}")
    return 0


def cmd_forecast(args) -> int:
    cfg = _load_config(args, _FORECAST_DEFAULTS)
    raw, stat = _load_panel(cfg["panel"], cfg["metadata"])
    targets = _targets_list(cfg, raw)
    models = cfg["models"]
    if isinstance(models, str):
        models = [m.strip() for m in models.split(",") if m.strip()]
    models = [m.lower() for m in models]
    for m in models:
        if m not in forecast.MODELS:
            raise InputError(f"unknown model {m!r}")
    os.makedirs(cfg["output_dir"], exist_ok=True)
    return _run_with_checkpoints(cfg, raw, stat, targets, models,
                                 forecast.recursive_run, cfg["output_dir"],
                                 args.resume)


def cmd_cv_k0(args) -> int:
    cfg = _load_config(args, _FORECAST_DEFAULTS)
    if not cfg["k0_grid"]:
        raise InputError("cv-k0 requires a k0_grid (config key 'k0_grid' or --k0-grid)")
    raw, stat = _load_panel(cfg["panel"], cfg["metadata"])
    targets = _targets_list(cfg, raw)
    os.makedirs(cfg["output_dir"], exist_ok=True)
    return _run_with_checkpoints(cfg, raw, stat, targets, ["fmmde"],
                                 forecast.cv_recursive_run, cfg["output_dir"],
                                 args.resume)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    records = forecast.records_from_csv(_read(args.records))
    window = None
    if args.window_start or args.window_end:
        window = (parse_month(args.window_start) if args.window_start else None,
                  parse_month(args.window_end) if args.window_end else None)
    report = evaluation.build_report(records, window=window,
                                     ratio_of_roots=args.ratio_of_roots)
    groups: dict[str, int] = {}
    if args.meta:
        groups = dict(panel.parse_group_sidecar(_read(args.meta)))
    os.makedirs(args.output_dir, exist_ok=True)

    def emit(name, text):
        _write(os.path.join(args.output_dir, name), text)

    emit("per_series.csv", evaluation.per_series_csv(report))
    emit("per_series.txt", evaluation.per_series_text(report))
    emit("percentiles.csv", evaluation.percentile_csv(report))
    emit("percentiles.txt", evaluation.percentile_text(report))
    pair = ("fmmde", "sw") if ("fmmde", "sw") in report.pairs else \
        (report.pairs[0] if report.pairs else None)
    if pair is not None:
        emit("groups.csv", evaluation.group_csv(report, groups, pair=pair))
        emit("groups.txt", evaluation.group_text(report, groups, pair=pair))
    _progress(f"wrote report tables to {args.output_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fmmde",
                                 description="Factor-model forecasting toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="apply stationarity transforms to a panel CSV")
    p.add_argument("input", nargs="?", help="FRED-MD style CSV")
    p.add_argument("-o", "--output", help="output CSV path")
    p.add_argument("--meta", help="sidecar metadata CSV (mnemonic,group)")
    p.add_argument("--dry-run", action="store_true", help="validate without writing")
    p.add_argument("--list-tcodes", action="store_true",
                   help="print the transformation-code legend and exit")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("simulate", help="Monte Carlo forecast-error comparison")
    p.add_argument("--example", choices=("linear", "nonlinear"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k0", type=int, default=6)
    p.add_argument("--hurst", type=float, default=0.9)
    p.add_argument("--error-scale", type=float, default=None,
                   help="noise variance multiplier (default per example)")
    p.add_argument("--fix-loadings", action="store_true",
                   help="draw loadings once and share them across replications")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("factors", help="one-shot factor extraction with diagnostics")
    p.add_argument("--panel", required=True)
    p.add_argument("--meta")
    p.add_argument("--model", choices=("sw", "fmmde"), default="fmmde")
    p.add_argument("--k0", type=int, default=6)
    p.add_argument("--r", type=int, help="fixed factor count (skip selection)")
    p.add_argument("--r-method", choices=("sequential_mds", "eigen_ratio"),
                   default="sequential_mds")
    p.add_argument("--max-r", type=int, default=15)
    p.add_argument("--truncation-lag", type=int, default=6)
    p.add_argument("--n-boot", type=int, default=499)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-standardize", dest="standardize", action="store_false")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_factors)

    p = sub.add_parser("mds-test", help="martingale-difference tests per factor")
    p.add_argument("--panel", required=True)
    p.add_argument("--meta")
    p.add_argument("--k0", type=int, default=6)
    p.add_argument("--max-factors", type=int, default=10)
    p.add_argument("--truncation-lag", type=int, default=6)
    p.add_argument("--n-boot", type=int, default=499)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-standardize", dest="standardize", action="store_false")
    p.add_argument("-o", "--output", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_mds_test)

    for name, fn in (("forecast", cmd_forecast), ("cv-k0", cmd_cv_k0)):
        p = sub.add_parser(name, help=f"recursive pseudo-real-time {name} run")
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--panel")
        p.add_argument("--metadata")
        p.add_argument("--targets", help="'all' or comma-separated mnemonics")
        p.add_argument("--horizons", type=_int_list)
        p.add_argument("--models", help="comma-separated subset of ar,sw,fmmde")
        p.add_argument("--initial-window", dest="initial_window", type=int)
        p.add_argument("--first-origin", dest="first_origin",
                       help="ISO month anchoring the first forecast origin")
        p.add_argument("--p-max", dest="p_max", type=int)
        p.add_argument("--max-r", dest="max_r", type=int)
        p.add_argument("--r-method", dest="r_method",
                       choices=("icp2", "eigen_ratio", "sequential_mds", "fixed"))
        p.add_argument("--r-fixed", dest="r_fixed", type=int)
        p.add_argument("--k0", type=int)
        p.add_argument("--k0-grid", dest="k0_grid", type=_int_list)
        p.add_argument("--cv-start", dest="cv_start",
                       help="ISO month where cross-validated emission starts")
        p.add_argument("--truncation-lag", dest="truncation_lag", type=int)
        p.add_argument("--n-boot", dest="n_boot", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
        p.add_argument("--limit-origins", dest="limit_origins", type=int,
                       help="process at most this many origins, then checkpoint")
        p.add_argument("--resume", action="store_true",
                       help="continue from an existing checkpoint")
        p.set_defaults(func=fn)

    p = sub.add_parser("evaluate", help="build evaluation tables from records")
    p.add_argument("--records", required=True, help="records CSV from 'forecast'")
    p.add_argument("--meta", help="sidecar metadata CSV for group tables")
    p.add_argument("--window-start", help="first origin (ISO month), inclusive")
    p.add_argument("--window-end", help="last origin (ISO month), inclusive")
    p.add_argument("--ratio-of-roots", action="store_true",
                   help="report ratios of root MSFEs instead of MSFEs")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
