"""Rolling-horizon simulation: forecast, plan, repair, account, advance.

Each decision epoch t solves the horizon LP on fresh forecasts, executes the
first planned step against the realization, repairs wind shortfalls in the
fixed priority order (grid export, storage charge, foundry serving with grid
compensation, urban serving with grid compensation), clamps deliveries that
exceed the realized demand (grid first, then storage, then wind, with the
cascades needed to keep the executed step feasible), accounts the realized
cost, and advances the storage state.

When steps == horizon the single plan is executed in full (one LP, no
rolling); otherwise steps - horizon epochs run, executing one step each, so
every solved LP spans a full horizon.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import lp
from .forecast import (ForecastBundle, GaussianMarginal, ScenarioConfig,
                       derive_stream_seed, forecast_at, generate_truth)
from .model import (FLOW_FIELDS, CostBreakdown, ExogenousRealization,
                    FlowDecision, StorageState, SystemParams, step_cost,
                    storage_step)
from .policy import PolicyParams, alpha_schedule, apply_dla_theta, theta_schedule

__all__ = [
    "ReplicationSummary",
    "SimResult",
    "SimulationConfig",
    "SimulationError",
    "clairvoyant_cost",
    "execute_step",
    "feasibility_update",
    "perfect_bundle",
    "run",
    "run_replications",
    "write_trace",
]

_TOL = 1e-9


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    horizon: int = 24
    steps: int = 8760
    replications: int = 10
    policy: PolicyParams = field(default_factory=PolicyParams)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    params: SystemParams = field(default_factory=SystemParams)
    surplus_export_enabled: bool = False
    trace_path: str | None = None

    def validate(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.steps < self.horizon:
            raise ValueError("steps must be >= horizon")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.steps > self.scenario.year_length:
            raise ValueError("steps exceed the scenario year_length")
        self.params.validate()
        self.scenario.validate()


@dataclass
class SimResult:
    total_cost: float
    cost_by_term: CostBreakdown
    repair_events: dict[str, int]
    storage_trace: list[StorageState]
    executed_flows: list[FlowDecision]
    step_repairs: list[tuple[str, ...]]
    replication_seed: int


def feasibility_update(planned: FlowDecision, realized_wind: float,
                       surplus_export: bool = False
                       ) -> tuple[FlowDecision, set[str]]:
    """Reconcile planned wind allocations with the realized wind.

    On surplus no corrective action is taken (the excess is recorded as
    unused) unless surplus export is enabled, in which case the grid export
    absorbs it.  On deficit, allocations shrink in the fixed priority order
    grid export, storage charge, foundry serving, urban serving; the last
    two are compensated one-for-one by grid imports so deliveries to the
    foundry and the urban node are preserved exactly.
    """
    if realized_wind < 0.0 or not math.isfinite(realized_wind):
        raise ValueError(f"realized wind must be finite and >= 0, got {realized_wind!r}")
    usage = planned.wind_usage()
    deficit = usage - realized_wind
    kinds: set[str] = set()
    if deficit <= _TOL:
        surplus = -deficit
        if surplus > _TOL:
            if surplus_export:
                kinds.add("surplus_export")
                return planned.replace(e_wg=planned.e_wg + surplus), kinds
            kinds.add("surplus_unused")
        return planned, kinds

    f = {name: getattr(planned, name) for name in FLOW_FIELDS}
    cut = min(f["e_wg"], deficit)
    if cut > 0.0:
        f["e_wg"] -= cut
        deficit -= cut
        kinds.add("export_cut")
    cut = min(f["e_wr"], deficit)
    if cut > 0.0:
        f["e_wr"] -= cut
        deficit -= cut
        kinds.add("storage_cut")
    cut = min(f["e_wf"], deficit)
    if cut > 0.0:
        f["e_wf"] -= cut
        f["e_gf"] += cut
        deficit -= cut
        kinds.add("foundry_shift")
    cut = min(f["e_wu"], deficit)
    if cut > 0.0:
        f["e_wu"] -= cut
        f["e_gu"] += cut
        deficit -= cut
        kinds.add("urban_shift")
    # All wind allocations can reach zero, so the deficit is always resolved.
    return FlowDecision(**{k: max(0.0, v) for k, v in f.items()}), kinds


def _clamp_delivery(f: dict[str, float], grid: str, store: str, direct: str,
                    beta_d: float, demand: float) -> bool:
    """Cut oversupply of one demand: grid first, then storage, then direct."""
    supplied = f[direct] + beta_d * f[store] + f[grid]
    excess = supplied - demand
    if excess <= _TOL:
        return False
    cut = min(f[grid], excess)
    f[grid] -= cut
    excess -= cut
    if excess > 0.0:
        deliv = beta_d * f[store]
        cut = min(deliv, excess)
        f[store] -= cut / beta_d
        excess -= cut
    if excess > 0.0:
        cut = min(f[direct], excess)
        f[direct] -= cut
        excess -= cut
    return True


def execute_step(planned: FlowDecision, exo: ExogenousRealization,
                 state: StorageState, params: SystemParams,
                 surplus_export: bool = False
                 ) -> tuple[FlowDecision, set[str]]:
    """Turn a planned step into an executable one against the realization.

    Applies, in order: a discharge guard against the actual storage levels
    (a no-op under rolling execution, where the plan saw the true levels),
    the wind feasibility update, per-demand delivery clamps with the
    foundry heat-yield cascade, and storage overflow guards.  The result
    satisfies every per-step constraint against the realization.
    """
    p = params
    f = {name: getattr(planned, name) for name in FLOW_FIELDS}
    kinds: set[str] = set()

    # Discharge guard: executed discharges cannot exceed the actual level.
    ees_capacity = min(p.gamma_e_d, state.r_e)
    discharge = f["e_ru"] + f["e_rf"] + f["e_rg"]
    if discharge > ees_capacity + _TOL:
        kinds.add("discharge_cut")
        over = discharge - ees_capacity
        for name, comp in (("e_rg", None), ("e_rf", "e_gf"), ("e_ru", "e_gu")):
            cut = min(f[name], over)
            f[name] -= cut
            over -= cut
            if comp is not None and cut > 0.0:
                f[comp] += p.beta_e_d * cut
            if over <= 0.0:
                break
    tes_capacity = min(p.gamma_h_d, state.r_h)
    if f["h_ru"] > tes_capacity + _TOL:
        kinds.add("discharge_cut")
        cut = f["h_ru"] - tes_capacity
        f["h_ru"] -= cut
        f["h_gu"] += p.beta_h_d * cut

    flows, wind_kinds = feasibility_update(
        FlowDecision(**{k: max(0.0, v) for k, v in f.items()}),
        exo.e_w, surplus_export)
    kinds |= wind_kinds
    f = {name: getattr(flows, name) for name in FLOW_FIELDS}

    # Delivery clamps: executed supply may not exceed the realized demand.
    if _clamp_delivery(f, "e_gf", "e_rf", "e_wf", p.beta_e_d, exo.d_ef):
        kinds.add("demand_clamp")
    # Foundry heat output is capped by the (possibly reduced) foundry supply.
    heat_cap = p.delta_eh * (f["e_wf"] + p.beta_e_d * f["e_rf"] + f["e_gf"])
    heat_out = f["h_fu"] + f["h_fr"]
    if heat_out > heat_cap + _TOL:
        kinds.add("heat_yield_cut")
        over = heat_out - heat_cap
        cut = min(f["h_fr"], over)
        f["h_fr"] -= cut
        over -= cut
        if over > 0.0:
            cut = min(f["h_fu"], over)
            f["h_fu"] -= cut
            f["h_gu"] += cut  # preserve urban heat delivery
    if _clamp_delivery(f, "e_gu", "e_ru", "e_wu", p.beta_e_d, exo.d_eu):
        kinds.add("demand_clamp")
    if _clamp_delivery(f, "h_gu", "h_ru", "h_fu", p.beta_h_d, exo.d_hu):
        kinds.add("demand_clamp")

    # Overflow guards: clamped discharges leave more in storage than the
    # plan assumed, so charges may need to shrink to respect capacity.
    level_e = state.r_e + p.beta_e_c * (f["e_wr"] + f["e_gr"]) \
        - (f["e_ru"] + f["e_rf"] + f["e_rg"])
    if level_e > p.r_e_max + _TOL:
        kinds.add("storage_overflow")
        over = level_e - p.r_e_max
        for name in ("e_gr", "e_wr"):
            cut = min(f[name], over / p.beta_e_c)
            f[name] -= cut
            over -= p.beta_e_c * cut
            if over <= _TOL:
                break
    level_h = state.r_h + p.beta_h_c * f["h_fr"] - f["h_ru"]
    if level_h > p.r_h_max + _TOL:
        kinds.add("storage_overflow")
        cut = min(f["h_fr"], (level_h - p.r_h_max) / p.beta_h_c)
        f["h_fr"] -= cut

    return FlowDecision(**{k: max(0.0, v) for k, v in f.items()}), kinds


def perfect_bundle(truth: list[ExogenousRealization], t: int,
                   horizon: int) -> ForecastBundle:
    """Zero-variance bundle equal to the truth (clairvoyant forecasts)."""
    vectors = {}
    for name in ("e_w", "d_eu", "d_hu", "d_ef", "p_eg", "p_hg"):
        vectors[name] = tuple(
            GaussianMarginal(mu=getattr(truth[t + k], name), sigma=0.0)
            for k in range(horizon))
    return ForecastBundle(issued_at=t, horizon=horizon, **vectors)


def _plan_inputs(cfg: SimulationConfig):
    """Resolve the policy into (theta schedule or None, alpha schedule or None)."""
    kind = cfg.policy.kind
    if kind == "mean":
        return None, None
    if kind.startswith("theta"):
        return theta_schedule(cfg.policy, cfg.horizon), None
    return None, alpha_schedule(cfg.policy, cfg.horizon)


def run(cfg: SimulationConfig, replication_seed: int) -> SimResult:
    """Run one rolling-horizon simulation, deterministic in (cfg, seed)."""
    cfg.validate()
    scenario = replace(cfg.scenario, seed=replication_seed)
    truth = generate_truth(scenario)
    H = cfg.horizon
    T = cfg.steps
    params = cfg.params
    theta_sched, a_sched = _plan_inputs(cfg)
    template = lp.LpTemplate(params, H)
    solver = lp.RollingSolver()

    state = params.initial_state()
    flows_out: list[FlowDecision] = []
    trace: list[StorageState] = []
    step_repairs: list[tuple[str, ...]] = []
    repair_counts: dict[str, int] = {}
    term_sums = dict.fromkeys(
        ("penalty_eu", "penalty_hu", "penalty_ef", "grid_e_purchase",
         "grid_h_purchase", "export_revenue", "lcos_e_cost", "lcos_h_cost",
         "total"), 0.0)

    def account(flows: FlowDecision, exo: ExogenousRealization,
                kinds: set[str], st: StorageState) -> StorageState:
        cost = step_cost(flows, exo, params)
        for key in term_sums:
            term_sums[key] += getattr(cost, key)
        for k in sorted(kinds):
            repair_counts[k] = repair_counts.get(k, 0) + 1
        nxt = storage_step(st, flows, params)
        flows_out.append(flows)
        trace.append(nxt)
        step_repairs.append(tuple(sorted(kinds)))
        return nxt

    if T == H:
        bundle = forecast_at(truth, 0, H, scenario)
        if theta_sched is not None:
            bundle = apply_dla_theta(bundle, theta_sched)
        inst = template.instantiate(bundle, a_sched, state)
        sol = solver.solve(inst)
        if sol.status != "optimal":
            raise SimulationError(f"LP {sol.status} at step 0: {sol.detail}")
        for j in range(H):
            planned = FlowDecision(**{
                name: max(0.0, float(sol.primal[14 * j + k]))
                for k, name in enumerate(FLOW_FIELDS)})
            flows, kinds = execute_step(planned, truth[j], state, params,
                                        cfg.surplus_export_enabled)
            state = account(flows, truth[j], kinds, state)
    else:
        for t in range(T - H):
            bundle = forecast_at(truth, t, H, scenario)
            if theta_sched is not None:
                bundle = apply_dla_theta(bundle, theta_sched)
            inst = template.instantiate(bundle, a_sched, state)
            sol = solver.solve(inst)
            if sol.status != "optimal":
                raise SimulationError(f"LP {sol.status} at step {t}: {sol.detail}")
            flows, kinds = execute_step(sol.first_step, truth[t], state, params,
                                        cfg.surplus_export_enabled)
            state = account(flows, truth[t], kinds, state)

    breakdown = CostBreakdown(**term_sums)
    result = SimResult(
        total_cost=term_sums["total"], cost_by_term=breakdown,
        repair_events=repair_counts, storage_trace=trace,
        executed_flows=flows_out, step_repairs=step_repairs,
        replication_seed=replication_seed,
    )
    if cfg.trace_path:
        write_trace(result, truth, cfg.trace_path, params)
    return result


def write_trace(result: SimResult, truth: list[ExogenousRealization],
                path, params: SystemParams) -> None:
    """Per-step CSV trace of executed flows, storage, realization and cost."""
    exo_fields = ("e_w", "d_eu", "d_hu", "d_ef", "p_eg", "p_hg")
    header = ("t", *FLOW_FIELDS, "r_e", "r_h", *exo_fields,
              "cost_total", "repair_flags")
    lines = [",".join(header)]
    for t, (flows, st) in enumerate(zip(result.executed_flows,
                                        result.storage_trace)):
        exo = truth[t]
        cost = step_cost(flows, exo, params)
        row = [str(t)]
        row.extend(repr(getattr(flows, f)) for f in FLOW_FIELDS)
        row.append(repr(st.r_e))
        row.append(repr(st.r_h))
        row.extend(repr(getattr(exo, f)) for f in exo_fields)
        row.append(repr(cost.total))
        row.append("|".join(result.step_repairs[t]))
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def clairvoyant_cost(cfg: SimulationConfig, replication_seed: int) -> float:
    """Optimum of a single LP over the executed window with truth as forecast."""
    cfg.validate()
    scenario = replace(cfg.scenario, seed=replication_seed)
    truth = generate_truth(scenario)
    window = cfg.horizon if cfg.steps == cfg.horizon else cfg.steps - cfg.horizon
    bundle = perfect_bundle(truth, 0, window)
    inst = lp.build(bundle, None, cfg.params.initial_state(), cfg.params, window)
    sol = lp.solve(inst)
    if sol.status != "optimal":
        raise SimulationError(f"clairvoyant LP {sol.status}: {sol.detail}")
    return sol.objective_value


@dataclass
class ReplicationSummary:
    mean_cost: float
    std_cost: float
    totals: tuple[float, ...]
    repair_totals: dict[str, int]
    replications: int


def _replication_task(args) -> tuple[float, dict[str, int]]:
    cfg, seed = args
    res = run(cfg, seed)
    return res.total_cost, res.repair_events


def replication_seeds(scenario_seed: int, replications: int) -> list[int]:
    """Deterministic per-replication seeds derived from the scenario seed."""
    return [derive_stream_seed(scenario_seed, i) for i in range(replications)]


def run_replications(cfg: SimulationConfig, jobs: int = 1) -> ReplicationSummary:
    """Run all replications; seeds derive from the scenario seed + index."""
    cfg.validate()
    seeds = replication_seeds(cfg.scenario.seed, cfg.replications)
    tasks = [(replace(cfg, trace_path=None), s) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_replication_task, tasks))
    else:
        outcomes = [_replication_task(t) for t in tasks]
    totals = tuple(total for total, _ in outcomes)
    repair_totals: dict[str, int] = {}
    for _, repairs in outcomes:
        for k, v in repairs.items():
            repair_totals[k] = repair_totals.get(k, 0) + v
    n = len(totals)
    mean = sum(totals) / n
    var = sum((x - mean) ** 2 for x in totals) / n
    return ReplicationSummary(mean_cost=mean, std_cost=math.sqrt(var),
                              totals=totals,
                              repair_totals=dict(sorted(repair_totals.items())),
                              replications=n)
