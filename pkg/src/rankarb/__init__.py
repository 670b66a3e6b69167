"""Statistical arbitrage in capitalization-rank space.

Backtesting engine and diagnostics for strategies that trade residuals of
a daily-refit PCA factor model, in plain asset coordinates or on the
capitalization leaderboard, with an intraday engine that prices the cost of
holding names against a rank-indexed target book.
"""

from .bridge import (WeightRecord, WeightStream, export_weight_stream,
                     import_weight_stream, nn_equity_weights)
from .config import Config
from .errors import ConfigError, DataError, DegeneracyError, EngineError
from .factors import (FactorModel, ResidualSeries, build_projector,
                      fit_factors, fit_loadings, project_and_normalize,
                      residuals, weights_to_equity)
from .market import (AtlasConfig, IntradayPanel, MarketPanel,
                     UniverseSelection, default_atlas_config,
                     generate_atlas_market, load_daily_panel,
                     load_intraday_panel, panel_from_returns, select_universe)
from .ou import (OUFit, PositionState, fit_ou, signal, strategy_weights,
                 update_positions)
from .pnl import (AnnualMetrics, PnLSeries, annual_metrics,
                  dollar_neutrality, holding_time, pnl_name, pnl_rank)
from .ranks import (CrossingRecord, RankPermutation, compute_ranks,
                    local_crossing_time, rank_return_series, rank_returns)
from .rebalance import (CostLedger, IntradayBook, evolve_name_weights,
                        evolve_rank_weights, open_book, rebalance_step,
                        simulate_day)
from .residual import (CumulativeTrajectory, NormalizedTrajectory,
                       cumulative_residuals, export_training_set,
                       load_training_set, normalize_cumulative)

__version__ = "0.1.0"
