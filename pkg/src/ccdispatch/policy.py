"""Forecast-modification policies and the chance-constraint reformulation.

Two families of policies steer the rolling planner away from plain mean
forecasts:

* deterministic lookahead with a multiplicative modifier theta applied to the
  forecast means of wind and the demands (constant, per-lead lookup, or
  exponential in the lead), after which the plan is solved as an ordinary
  deterministic LP; and
* a confidence schedule alpha per lead, under which every constraint with a
  random upper bound xi ~ N(mu, sigma) is replaced by the deterministic bound
  mu - sigma * Phi^-1(alpha), so the planned usage stays below the realized
  value with probability alpha.

With the lead defined as ell = (future step) - (decision step) >= 1, both
exponential schedules decay as exp(-rate * ell); alpha rates are restricted
to be non-negative (confidence decays into the future), while theta rates may
take either sign so both the conservative-near and aggressive-near shapes are
reachable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .forecast import ForecastBundle, GaussianMarginal, normal_quantile

__all__ = [
    "ALPHA_CLAMP",
    "DEFAULT_THETA_SERIES",
    "LeadSchedule",
    "PolicyParams",
    "alpha_schedule",
    "apply_dla_theta",
    "tighten_bound",
    "theta_schedule",
]

THETA_KINDS = ("theta_constant", "theta_lookup", "theta_exp")
CC_KINDS = ("cc_alpha_exp", "cc_alpha_lookup")
POLICY_KINDS = ("mean",) + THETA_KINDS + CC_KINDS

# Confidence levels are clamped away from 0/1 to keep quantiles finite.
ALPHA_CLAMP = 1e-6

# Series whose forecast means the theta policy rescales: the quantities that
# enter constraints.  Price errors only move the cost function, so prices
# keep their forecast mean.
DEFAULT_THETA_SERIES = frozenset({"e_w", "d_eu", "d_hu", "d_ef"})


@dataclass(frozen=True)
class PolicyParams:
    """Strategy selector plus its parameters."""

    kind: str = "mean"
    theta1: float = 1.0
    theta2: float = 0.0
    alpha1: float = 0.95
    alpha2: float = 0.0
    lookup: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind in CC_KINDS:
            if not 0.0 < self.alpha1 < 1.0:
                raise ValueError(f"alpha1 must lie in (0, 1), got {self.alpha1!r}")
            if self.alpha2 < 0.0:
                raise ValueError(f"alpha2 must be >= 0, got {self.alpha2!r}")
        if self.kind in ("theta_lookup", "cc_alpha_lookup"):
            if self.lookup is None:
                raise ValueError(f"{self.kind} requires a lookup vector")
            if self.kind == "cc_alpha_lookup":
                for v in self.lookup:
                    if not 0.0 < v < 1.0:
                        raise ValueError("cc lookup values must lie in (0, 1)")

    def with_(self, **kw) -> "PolicyParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class LeadSchedule:
    """Per-lead values; index lead ell in 1..H maps to values[ell-1]."""

    values: tuple[float, ...]

    def __post_init__(self):
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError("schedule values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def value(self, lead: int) -> float:
        return self.values[lead - 1]


def theta_schedule(p: PolicyParams, horizon: int) -> LeadSchedule:
    """Evaluate a theta policy into its per-lead multiplier schedule."""
    if p.kind not in THETA_KINDS:
        raise ValueError(f"theta_schedule needs a theta policy, got {p.kind!r}")
    if p.kind == "theta_constant":
        return LeadSchedule(values=(p.theta1,) * horizon)
    if p.kind == "theta_exp":
        return LeadSchedule(values=tuple(
            p.theta1 * math.exp(-p.theta2 * lead) for lead in range(1, horizon + 1)))
    if len(p.lookup) != horizon:
        raise ValueError(
            f"lookup length {len(p.lookup)} does not match horizon {horizon}")
    return LeadSchedule(values=tuple(p.lookup))


def _clamp_alpha(a: float) -> float:
    return min(max(a, ALPHA_CLAMP), 1.0 - ALPHA_CLAMP)


def alpha_schedule(p: PolicyParams, horizon: int) -> LeadSchedule:
    """Evaluate a confidence policy into its per-lead alpha schedule."""
    if p.kind not in CC_KINDS:
        raise ValueError(f"alpha_schedule needs a cc policy, got {p.kind!r}")
    if p.kind == "cc_alpha_exp":
        return LeadSchedule(values=tuple(
            _clamp_alpha(p.alpha1 * math.exp(-p.alpha2 * lead))
            for lead in range(1, horizon + 1)))
    if len(p.lookup) != horizon:
        raise ValueError(
            f"lookup length {len(p.lookup)} does not match horizon {horizon}")
    return LeadSchedule(values=tuple(_clamp_alpha(v) for v in p.lookup))


def apply_dla_theta(bundle: ForecastBundle, sched: LeadSchedule,
                    modified=DEFAULT_THETA_SERIES) -> ForecastBundle:
    """Rescale forecast means by the schedule and zero all sigmas.

    Series in `modified` get mu multiplied by the per-lead value; the rest
    keep their mean.  Sigmas are dropped because the resulting plan is
    treated as a plain deterministic problem.
    """
    if len(sched) != bundle.horizon:
        raise ValueError(
            f"schedule length {len(sched)} does not match horizon {bundle.horizon}")
    new = {}
    for name in ("e_w", "d_eu", "d_hu", "d_ef", "p_eg", "p_hg"):
        vec = bundle.series(name)
        if name in modified:
            row = tuple(
                GaussianMarginal(mu=max(0.0, sched.values[i] * g.mu), sigma=0.0)
                for i, g in enumerate(vec))
        else:
            row = tuple(GaussianMarginal(mu=g.mu, sigma=0.0) for g in vec)
        new[name] = row
    return ForecastBundle(issued_at=bundle.issued_at, horizon=bundle.horizon, **new)


def tighten_bound(g: GaussianMarginal, alpha: float,
                  sense: str = "supply_upper") -> float:
    """Deterministic replacement for a random upper bound xi ~ N(mu, sigma).

    Returns mu - sigma * Phi^-1(alpha): the plan's usage stays below the
    realized xi with probability alpha.  alpha > 0.5 tightens below the mean
    (conservative), alpha < 0.5 relaxes above it (aggressive).  The same
    formula applies to both the availability and the demand-cap senses.
    """
    if sense not in ("supply_upper", "demand_upper"):
        raise ValueError(f"unknown sense {sense!r}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return g.mu - g.sigma * normal_quantile(alpha)
