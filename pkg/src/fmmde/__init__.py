"""Factor models with martingale difference errors.

Estimation and forecasting toolkit for large stationary monthly panels:
divergence-based factor extraction with martingale-difference factor-count
selection, the classical principal-component benchmark, direct h-step
diffusion-index forecasting with a recursive pseudo-real-time harness, and
the Monte Carlo experiments comparing the two extractors.
"""

from .errors import InputError, NumericError
from .evaluation import (build_report, dm_test, group_table, msfe,
                         percentile_table, rmsfe_ratio)
from .factors import (FactorBasis, FactorSeries, bai_ng_icp2,
                      eigenvalue_ratio_r, extract_fmmde, extract_sw)
from .forecast import (ForecastRecord, ForecastSpec, RunResult,
                       ValidationLedger, ar_forecast, bic_lag_select,
                       cv_recursive_run, cv_select_k0, di_forecast, ols,
                       recursive_run)
from .mddm import (EigenSystem, MddMatrix, cumulative_mddm, eigen_sym,
                   mdd_sq, mddm, mddm_scalar_lag, pairwise_distances)
from .mdstest import (MdsTestResult, SequentialSelection, mammen_weights,
                      select_r_sequential, wang_shao_stat,
                      wild_bootstrap_pvalue)
from .panel import (RawPanel, SeriesMeta, StationaryPanel, WindowStats,
                    apply_tcode, build_stationary_panel, build_target,
                    parse_fred_md_csv, standardize)
from .sim import (AfeResult, SimConfig, SimPanel, fgn_covariance,
                  gen_linear_example, gen_nonlinear_example,
                  run_afe_experiment)

__version__ = "0.1.0"

__all__ = [
    "InputError", "NumericError",
    "MddMatrix", "EigenSystem", "pairwise_distances", "mdd_sq", "mddm",
    "mddm_scalar_lag", "cumulative_mddm", "eigen_sym",
    "FactorBasis", "FactorSeries", "extract_fmmde", "extract_sw",
    "eigenvalue_ratio_r", "bai_ng_icp2",
    "MdsTestResult", "SequentialSelection", "wang_shao_stat",
    "mammen_weights", "wild_bootstrap_pvalue", "select_r_sequential",
    "SeriesMeta", "RawPanel", "StationaryPanel", "WindowStats",
    "parse_fred_md_csv", "apply_tcode", "build_stationary_panel",
    "standardize", "build_target",
    "ForecastSpec", "ForecastRecord", "RunResult", "ValidationLedger",
    "ols", "bic_lag_select", "di_forecast", "ar_forecast", "recursive_run",
    "cv_select_k0", "cv_recursive_run",
    "msfe", "rmsfe_ratio", "percentile_table", "group_table", "dm_test",
    "build_report",
    "SimConfig", "SimPanel", "AfeResult", "fgn_covariance",
    "gen_linear_example", "gen_nonlinear_example", "run_afe_experiment",
]
