"""Energy-system domain types, per-step constraints, storage dynamics and cost.

The system has five nodes: wind (w), urban (u), foundry (f), storage (r) and
grid (g).  Fourteen non-negative flow variables move energy between them each
hourly step: ten electric, four heat.  All flows are energies per 1-hour step,
so kW rate limits and kWh amounts are numerically interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

__all__ = [
    "FLOW_FIELDS",
    "CostBreakdown",
    "ExogenousRealization",
    "FlowDecision",
    "StorageBoundError",
    "StorageState",
    "SystemParams",
    "Violation",
    "ViolationReport",
    "check_feasible",
    "step_cost",
    "storage_step",
]

# Canonical flow ordering, used everywhere (LP columns, CSV traces, ...).
FLOW_FIELDS = (
    "e_wu", "e_wf", "e_wr", "e_wg",
    "e_ru", "e_rf", "e_rg",
    "e_gu", "e_gf", "e_gr",
    "h_fu", "h_gu", "h_fr", "h_ru",
)

FEAS_TOL = 1e-6


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class FlowDecision:
    """One timestep of dispatch decisions (kWh per step), all non-negative."""

    e_wu: float = 0.0
    e_wf: float = 0.0
    e_wr: float = 0.0
    e_wg: float = 0.0
    e_ru: float = 0.0
    e_rf: float = 0.0
    e_rg: float = 0.0
    e_gu: float = 0.0
    e_gf: float = 0.0
    e_gr: float = 0.0
    h_fu: float = 0.0
    h_gu: float = 0.0
    h_fr: float = 0.0
    h_ru: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            _require_finite(f.name, v)
            if v < 0.0:
                raise ValueError(f"flow {f.name} must be >= 0, got {v!r}")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FLOW_FIELDS)

    def wind_usage(self) -> float:
        return self.e_wu + self.e_wf + self.e_wr + self.e_wg

    def replace(self, **kw) -> "FlowDecision":
        return replace(self, **kw)


@dataclass(frozen=True)
class StorageState:
    """Electric and thermal storage levels in kWh."""

    r_e: float = 0.0
    r_h: float = 0.0


@dataclass(frozen=True)
class SystemParams:
    """All model constants plus unmet-demand penalty prices.

    Defaults are the base system: 10000 households, storage capacity
    10 kWh per household, charge/discharge rates at a tenth of capacity,
    90% one-way storage efficiencies, and half of foundry electricity
    recoverable as usable heat.  The penalty prices have no tabulated
    source values; the defaults here are artifact choices set above
    typical grid prices so that serving demand is always preferred.
    """

    n_houses: int = 10000
    r_e_max: float = 100000.0
    r_e_min: float = 0.0
    r_e_0: float = 0.0
    r_h_max: float = 100000.0
    r_h_min: float = 0.0
    r_h_0: float = 0.0
    beta_e_c: float = 0.9
    beta_e_d: float = 0.9
    beta_h_c: float = 0.9
    beta_h_d: float = 0.9
    gamma_e_c: float = 10000.0
    gamma_e_d: float = 10000.0
    gamma_h_c: float = 10000.0
    gamma_h_d: float = 10000.0
    lcos_e: float = 0.05
    lcos_h: float = 0.01
    delta_eh: float = 0.5
    c_p_eu: float = 0.50
    c_p_hu: float = 0.20
    c_p_ef: float = 0.50

    def validate(self) -> None:
        for name in ("beta_e_c", "beta_e_d", "beta_h_c", "beta_h_d", "delta_eh"):
            v = getattr(self, name)
            _require_finite(name, v)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v!r}")
        for name in (
            "r_e_max", "r_e_min", "r_h_max", "r_h_min",
            "gamma_e_c", "gamma_e_d", "gamma_h_c", "gamma_h_d",
            "lcos_e", "lcos_h", "c_p_eu", "c_p_hu", "c_p_ef",
        ):
            v = getattr(self, name)
            _require_finite(name, v)
            if v < 0.0:
                raise ValueError(f"{name} must be >= 0, got {v!r}")
        if not self.r_e_min <= self.r_e_0 <= self.r_e_max:
            raise ValueError("r_e_0 must lie within [r_e_min, r_e_max]")
        if not self.r_h_min <= self.r_h_0 <= self.r_h_max:
            raise ValueError("r_h_0 must lie within [r_h_min, r_h_max]")

    def initial_state(self) -> StorageState:
        return StorageState(r_e=self.r_e_0, r_h=self.r_h_0)


@dataclass(frozen=True)
class ExogenousRealization:
    """Realized uncertain values for one step.

    Prices may be negative (electricity markets allow it); wind and
    demands may not.
    """

    e_w: float = 0.0
    d_eu: float = 0.0
    d_hu: float = 0.0
    d_ef: float = 0.0
    p_eg: float = 0.0
    p_hg: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            _require_finite(f.name, getattr(self, f.name))
        for name in ("e_w", "d_eu", "d_hu", "d_ef"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class CostBreakdown:
    """Per-term realized cost of one step, in euros.

    total = penalties + grid purchases - export revenue + storage LCOS.
    """

    penalty_eu: float
    penalty_hu: float
    penalty_ef: float
    grid_e_purchase: float
    grid_h_purchase: float
    export_revenue: float
    lcos_e_cost: float
    lcos_h_cost: float
    total: float


def step_cost(flows: FlowDecision, exo: ExogenousRealization,
              params: SystemParams) -> CostBreakdown:
    """Evaluate the per-step cost terms for executed flows and realized data.

    Penalty terms are the raw linear residuals (no clamping): under the
    supply-cap constraints they are non-negative for feasible flows, and the
    LP objective uses exactly these expressions.  Export revenue applies the
    discharge efficiency only to the storage-sourced export, not to wind
    export, mirroring the cost function as printed.
    """
    p = params
    penalty_eu = p.c_p_eu * (exo.d_eu - flows.e_wu - p.beta_e_d * flows.e_ru - flows.e_gu)
    penalty_hu = p.c_p_hu * (exo.d_hu - flows.h_fu - flows.h_gu - p.beta_h_d * flows.h_ru)
    penalty_ef = p.c_p_ef * (exo.d_ef - flows.e_wf - p.beta_e_d * flows.e_rf - flows.e_gf)
    grid_e = exo.p_eg * (flows.e_gu + flows.e_gf + flows.e_gr)
    grid_h = exo.p_hg * flows.h_gu
    export = exo.p_eg * (p.beta_e_d * flows.e_rg + flows.e_wg)
    lcos_e = p.lcos_e * (flows.e_rf + flows.e_rg + flows.e_ru)
    lcos_h = p.lcos_h * flows.h_ru
    total = (penalty_eu + penalty_hu + penalty_ef + grid_e + grid_h
             - export + lcos_e + lcos_h)
    for name, v in (("penalty_eu", penalty_eu), ("total", total)):
        _require_finite(name, v)
    return CostBreakdown(
        penalty_eu=penalty_eu, penalty_hu=penalty_hu, penalty_ef=penalty_ef,
        grid_e_purchase=grid_e, grid_h_purchase=grid_h, export_revenue=export,
        lcos_e_cost=lcos_e, lcos_h_cost=lcos_h, total=total,
    )


class StorageBoundError(ValueError):
    """A storage update left its [min, max] band."""

    def __init__(self, storage: str, level: float, lo: float, hi: float):
        self.storage = storage
        self.level = level
        self.excess = level - hi if level > hi else level - lo
        super().__init__(
            f"{storage} storage level {level:.6f} outside [{lo:.6f}, {hi:.6f}] "
            f"(by {self.excess:+.6f})"
        )


def storage_step(state: StorageState, flows: FlowDecision,
                 params: SystemParams, tol: float = FEAS_TOL) -> StorageState:
    """Advance storage levels one step.

    Charging is scaled by the charge efficiency at the storage side;
    discharging leaves the storage unscaled (the discharge efficiency
    applies on the delivery side instead).
    """
    r_e = state.r_e + params.beta_e_c * (flows.e_wr + flows.e_gr) \
        - (flows.e_ru + flows.e_rf + flows.e_rg)
    r_h = state.r_h + params.beta_h_c * flows.h_fr - flows.h_ru
    if not params.r_e_min - tol <= r_e <= params.r_e_max + tol:
        raise StorageBoundError("electric", r_e, params.r_e_min, params.r_e_max)
    if not params.r_h_min - tol <= r_h <= params.r_h_max + tol:
        raise StorageBoundError("thermal", r_h, params.r_h_min, params.r_h_max)
    # Snap float dust back onto the band so long traces stay within bounds.
    r_e = min(max(r_e, params.r_e_min), params.r_e_max)
    r_h = min(max(r_h, params.r_h_min), params.r_h_max)
    return StorageState(r_e=r_e, r_h=r_h)


@dataclass(frozen=True)
class Violation:
    constraint: str
    lhs: float
    bound: float
    slack: float  # bound - lhs; negative means violated


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def names(self) -> tuple[str, ...]:
        return tuple(v.constraint for v in self.violations)


def check_feasible(flows: FlowDecision, state: StorageState,
                   exo: ExogenousRealization, params: SystemParams,
                   tol: float = FEAS_TOL) -> ViolationReport:
    """Check every per-step constraint; return the violated ones.

    Diagnostic only: reports constraint id, left-hand value, bound and slack
    for each constraint violated beyond the absolute tolerance.
    """
    p = params
    foundry_supply = flows.e_wf + p.beta_e_d * flows.e_rf + flows.e_gf
    checks = (
        ("wind_avail", flows.e_wu + flows.e_wf + flows.e_wr + flows.e_wg, exo.e_w),
        ("ees_discharge_rate", flows.e_ru + flows.e_rf + flows.e_rg, p.gamma_e_d),
        ("ees_discharge_level", flows.e_ru + flows.e_rf + flows.e_rg, state.r_e),
        ("ees_charge_rate", p.beta_e_c * (flows.e_wr + flows.e_gr), p.gamma_e_c),
        ("urban_elec_cap", flows.e_wu + p.beta_e_d * flows.e_ru + flows.e_gu, exo.d_eu),
        ("foundry_elec_cap", foundry_supply, exo.d_ef),
        ("tes_discharge_rate", flows.h_ru, p.gamma_h_d),
        ("tes_discharge_level", flows.h_ru, state.r_h),
        ("tes_charge_rate", p.beta_h_c * flows.h_fr, p.gamma_h_c),
        ("urban_heat_cap", flows.h_fu + flows.h_gu + p.beta_h_d * flows.h_ru, exo.d_hu),
        ("foundry_heat_yield", flows.h_fu + flows.h_fr, p.delta_eh * foundry_supply),
        ("ees_cap",
         state.r_e + p.beta_e_c * (flows.e_wr + flows.e_gr)
         - (flows.e_ru + flows.e_rf + flows.e_rg),
         p.r_e_max),
        ("tes_cap", state.r_h + p.beta_h_c * flows.h_fr - flows.h_ru, p.r_h_max),
    )
    bad = []
    for name, lhs, bound in checks:
        slack = bound - lhs
        if slack < -tol:
            bad.append(Violation(constraint=name, lhs=lhs, bound=bound, slack=slack))
    return ViolationReport(violations=tuple(bad))
