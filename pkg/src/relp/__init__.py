"""Transaction-cost-aware robust online portfolio selection.

Backtesting engine, price-relative data handling, an LP/SOCP solver for the
robust rebalancing model, adaptive parameter-selection schemes over expert
pools, and performance-metric reporting.
"""

from .errors import (ConditionError, ConfigError, ContractError, DataError,
                     HistoryError, RelpError, SolverError)
from .market_data import (DatasetManifest, RelativesMatrix, load_manifest,
                          load_relatives, save_manifest, slice_window,
                          write_relatives)
from .metrics import (MetricReport, WealthSeries, average_turnover, calmar,
                      compute_report, cumulative_wealth, information_ratio,
                      max_drawdown, mer, relative_ranking, sharpe_daily, var95)
from .predictors import ShapeFactor, mar_predictor, shape_factor
from .schemes import (ExpertPool, RelpAdaptive, RelpPoolStrategy, SbState,
                      TopKState, default_kappa_grid,
                      default_lambda_multipliers, log_grid, relp_adap,
                      sb_step, scheme_combinator, topk_step)
from .solver import (RelpProblem, RelpSolution, check_condition,
                     solve_relp_lp, solve_relp_socp)
from .strategies import (BacktestResult, RelpParams, Strategy, TradeLog,
                         eg_strategy, olmar_strategy, project_to_simplex,
                         relp_fixed, run_backtest, ubah, ucrp)
from .transaction_cost import CostSpec, net_proportion, net_proportion_bounds

__version__ = "0.1.0"

__all__ = [
    "BacktestResult", "ConditionError", "ConfigError", "ContractError",
    "CostSpec", "DataError", "DatasetManifest", "ExpertPool", "HistoryError",
    "MetricReport", "RelativesMatrix", "RelpAdaptive", "RelpError",
    "RelpParams", "RelpPoolStrategy", "RelpProblem", "RelpSolution",
    "SbState", "ShapeFactor", "SolverError", "Strategy", "TopKState",
    "TradeLog", "WealthSeries", "average_turnover", "calmar",
    "check_condition", "compute_report", "cumulative_wealth",
    "default_kappa_grid", "default_lambda_multipliers", "eg_strategy",
    "information_ratio", "load_manifest", "load_relatives", "log_grid",
    "max_drawdown", "mer", "mar_predictor", "net_proportion",
    "net_proportion_bounds", "olmar_strategy", "project_to_simplex",
    "relative_ranking", "relp_adap", "relp_fixed", "run_backtest",
    "save_manifest", "sb_step", "scheme_combinator", "shape_factor",
    "sharpe_daily", "slice_window", "solve_relp_lp", "solve_relp_socp",
    "topk_step", "ubah", "ucrp", "var95", "write_relatives",
]
