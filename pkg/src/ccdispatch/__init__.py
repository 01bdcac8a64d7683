"""Rolling-horizon dispatch simulation for a five-node industrial energy
system (wind, urban, foundry, storage, grid) with chance-constraint
tightening and parametric forecast-modification policies."""

from .forecast import (ForecastBundle, GaussianMarginal, ScenarioConfig,
                       SeriesProfile, forecast_at, generate_truth, load_csv,
                       quantile)
from .lp import LpInstance, LpSolution, LpTemplate, build, export_mps, solve
from .model import (CostBreakdown, ExogenousRealization, FlowDecision,
                    StorageState, SystemParams, check_feasible, step_cost,
                    storage_step)
from .policy import (LeadSchedule, PolicyParams, alpha_schedule,
                     apply_dla_theta, theta_schedule, tighten_bound)
from .search import GridResult, GridSpec, best_schedule, emit_heatmap, run_grid
from .sim import (SimResult, SimulationConfig, feasibility_update, run,
                  run_replications)

__version__ = "0.1.0"
