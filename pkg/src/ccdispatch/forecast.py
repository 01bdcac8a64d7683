"""Synthetic scenarios and rolling probabilistic forecasts.

Ground truth for the six uncertain series (wind, three demands, two prices)
is a parametric profile -- base level plus seasonal and diurnal cosines --
with AR(1) noise on top.  Forecasts issued at step t are Gaussian marginals
per lead: the mean is the future truth value perturbed by a per-series bias
plus seeded noise that grows with the lead, and the declared sigma grows
with lead as well.  Declared and actual error deliberately disagree the way
trained forecasters do (biased mean, sigma overstated at short leads and
understated far out); the confidence policies earn their keep by correcting
exactly these defects.

All randomness derives from a counter-based generator with documented
constants (the splitmix64 finalizer), so every sequence is a pure function
of the scenario seed and its coordinates and is reproducible across
implementations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ExogenousRealization

__all__ = [
    "SERIES",
    "ForecastBundle",
    "GaussianMarginal",
    "ScenarioConfig",
    "SeriesProfile",
    "derive_stream_seed",
    "forecast_at",
    "generate_truth",
    "load_csv",
    "normal_cdf",
    "normal_quantile",
    "quantile",
]

SERIES = ("e_w", "d_eu", "d_hu", "d_ef", "p_eg", "p_hg")

# Series whose values cannot be negative (prices are handled separately).
_NONNEG = frozenset({"e_w", "d_eu", "d_hu", "d_ef"})


# ---------------------------------------------------------------------------
# Deterministic counter-based random numbers (splitmix64 finalizer).
# ---------------------------------------------------------------------------

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1FE4E5B9
_MIX_2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX_1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_2) & _MASK
    return z ^ (z >> 31)


def _hash_key(seed: int, *key: int) -> int:
    """Collapse (seed, key...) into one 64-bit word, order-sensitively."""
    h = _mix64(seed + _GOLDEN)
    for k in key:
        h = _mix64(h + _GOLDEN + (k & _MASK))
    return h


def _mix64_arr(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_2)
    return z ^ (z >> np.uint64(31))


def _uniform_arr(prefix: int, last: np.ndarray) -> np.ndarray:
    """Uniform draws in (0, 1) for one final key component vectorized.

    `prefix` is the hash of all leading key components; folding the final
    component here matches _hash_key(seed, ..., k) bit for bit.
    """
    h = np.uint64((prefix + _GOLDEN) & _MASK) + last.astype(np.uint64)
    r = _mix64_arr(h)
    return ((r >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def _normal_draws(seed: int, stream: int, series: int, last: np.ndarray,
                  mid: int | None = None) -> np.ndarray:
    """Standard-normal draws addressed by (seed, stream, series[, mid], k)."""
    if mid is None:
        prefix = _hash_key(seed, stream, series)
    else:
        prefix = _hash_key(seed, stream, series, mid)
    return _acklam_arr(_uniform_arr(prefix, last))


def derive_stream_seed(seed: int, index: int) -> int:
    """Deterministic child seed, e.g. one per replication index."""
    return _hash_key(seed, 0x5EED, index)


# Stream tags keeping truth noise and forecast noise independent.
_STREAM_TRUTH = 1
_STREAM_FORECAST = 2


# ---------------------------------------------------------------------------
# Standard normal quantile / CDF.
# ---------------------------------------------------------------------------

# Rational approximation coefficients (Acklam), refined below by one Halley
# step against the erfc-based CDF; the result is accurate to ~1e-15.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc (exactly 0.5 at x = 0)."""
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, accurate to well below 1e-9.

    Raises ValueError unless 0 < p < 1.  Exactly 0.0 at p = 0.5.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile probability must lie in (0, 1), got {p!r}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) \
            / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q \
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) \
            / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    # One Halley refinement against the high-accuracy CDF.
    e = normal_cdf(x) - p
    if e != 0.0:
        u = e * _SQRT_2PI * math.exp(0.5 * x * x)
        x -= u / (1.0 + 0.5 * x * u)
    return x


def _acklam_arr(p: np.ndarray) -> np.ndarray:
    """Vectorized rational approximation of the normal quantile.

    Unrefined (max abs error ~1.2e-9), which is plenty for noise sampling;
    the public quantile() adds the refinement step.
    """
    q = p - 0.5
    r = q * q
    x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q \
        / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    low = p < _P_LOW
    if low.any():
        ql = np.sqrt(-2.0 * np.log(p[low]))
        x[low] = (((((_C[0] * ql + _C[1]) * ql + _C[2]) * ql + _C[3]) * ql + _C[4]) * ql + _C[5]) \
            / ((((_D[0] * ql + _D[1]) * ql + _D[2]) * ql + _D[3]) * ql + 1.0)
    high = p > 1.0 - _P_LOW
    if high.any():
        qh = np.sqrt(-2.0 * np.log(1.0 - p[high]))
        x[high] = -(((((_C[0] * qh + _C[1]) * qh + _C[2]) * qh + _C[3]) * qh + _C[4]) * qh + _C[5]) \
            / ((((_D[0] * qh + _D[1]) * qh + _D[2]) * qh + _D[3]) * qh + 1.0)
    return x


# ---------------------------------------------------------------------------
# Domain types.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianMarginal:
    """Mean and standard deviation of one forecasted value."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError("marginal parameters must be finite")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")


def quantile(g: GaussianMarginal, p: float) -> float:
    """p-quantile of a Gaussian marginal: mu + sigma * Phi^-1(p)."""
    return g.mu + g.sigma * normal_quantile(p)


@dataclass(frozen=True)
class ForecastBundle:
    """Per-lead Gaussian marginals for all six series, issued at one step.

    Lead ell in 1..horizon refers to absolute step issued_at + ell - 1, so
    the first lead is the step about to be decided.
    """

    issued_at: int
    horizon: int
    e_w: tuple[GaussianMarginal, ...]
    d_eu: tuple[GaussianMarginal, ...]
    d_hu: tuple[GaussianMarginal, ...]
    d_ef: tuple[GaussianMarginal, ...]
    p_eg: tuple[GaussianMarginal, ...]
    p_hg: tuple[GaussianMarginal, ...]

    def __post_init__(self):
        for name in SERIES:
            vec = getattr(self, name)
            if len(vec) != self.horizon:
                raise ValueError(
                    f"series {name} has {len(vec)} marginals, expected {self.horizon}")
        for name in _NONNEG:
            for g in getattr(self, name):
                if g.mu < 0.0:
                    raise ValueError(f"{name} forecast mean must be >= 0")

    def series(self, name: str) -> tuple[GaussianMarginal, ...]:
        return getattr(self, name)


@dataclass(frozen=True)
class SeriesProfile:
    """Shape parameters of one synthetic series.

    value(t) = base
             + seasonal_amp * cos(2*pi*(t - 24*seasonal_peak_day) / year_length)
             + diurnal_amp  * cos(2*pi*(hour_of_day - diurnal_peak_hour) / 24)
             + AR(1) noise with marginal std noise_std

    forecast_bias shifts the forecast mean away from the truth by a fixed
    amount, in multiples of noise_std (lead-independent).  Real generation
    forecasts are rarely unbiased at a single site; a positive wind bias
    reproduces the chronic over-commitment that near-lead confidence
    tightening corrects, while the declared sigma keeps growing with lead,
    so the bias shrinks relative to it and the optimal confidence decays
    into the future.
    """

    base: float
    diurnal_amp: float = 0.0
    diurnal_peak_hour: float = 12.0
    seasonal_amp: float = 0.0
    seasonal_peak_day: float = 15.0
    noise_std: float = 0.0
    forecast_bias: float = 0.0

    def __post_init__(self):
        for name in ("diurnal_amp", "seasonal_amp", "noise_std"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


def _default_profiles() -> dict[str, SeriesProfile]:
    # Sized for a 10000-household town next to a mid-size foundry.  Wind
    # regularly exceeds immediate electric demand around its midday peak and
    # falls short in the evening, which is what makes storage planning and
    # forecast conservatism matter.  Demand forecasts are deliberately much
    # sharper than the wind forecast, as they are in practice.
    return {
        "e_w": SeriesProfile(base=11000.0, diurnal_amp=2500.0, diurnal_peak_hour=13.0,
                             seasonal_amp=3000.0, seasonal_peak_day=15.0,
                             noise_std=1100.0, forecast_bias=3.2),
        "d_eu": SeriesProfile(base=4200.0, diurnal_amp=1600.0, diurnal_peak_hour=19.0,
                              seasonal_amp=400.0, seasonal_peak_day=15.0,
                              noise_std=8.0),
        "d_hu": SeriesProfile(base=7000.0, diurnal_amp=1200.0, diurnal_peak_hour=7.0,
                              seasonal_amp=5000.0, seasonal_peak_day=15.0,
                              noise_std=12.0),
        "d_ef": SeriesProfile(base=6500.0, diurnal_amp=700.0, diurnal_peak_hour=11.0,
                              seasonal_amp=0.0, seasonal_peak_day=15.0,
                              noise_std=10.0),
        "p_eg": SeriesProfile(base=0.17, diurnal_amp=0.11, diurnal_peak_hour=19.0,
                              seasonal_amp=0.02, seasonal_peak_day=15.0,
                              noise_std=0.012),
        "p_hg": SeriesProfile(base=0.09),
    }


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything that defines one synthetic year and its forecasts."""

    seed: int = 1
    year_length: int = 8760
    e_w: SeriesProfile = field(default_factory=lambda: _default_profiles()["e_w"])
    d_eu: SeriesProfile = field(default_factory=lambda: _default_profiles()["d_eu"])
    d_hu: SeriesProfile = field(default_factory=lambda: _default_profiles()["d_hu"])
    d_ef: SeriesProfile = field(default_factory=lambda: _default_profiles()["d_ef"])
    p_eg: SeriesProfile = field(default_factory=lambda: _default_profiles()["p_eg"])
    p_hg: SeriesProfile = field(default_factory=lambda: _default_profiles()["p_hg"])
    forecast_growth: float = 0.1
    ar1_rho: float = 0.7
    # Realized electricity price moves against the realized wind anomaly
    # (windy hours are cheap), in EUR/kWh per one standard deviation of wind.
    wind_price_coupling: float = 0.05
    # Scale of the actual forecast error, which grows proportionally to the
    # lead (near-lead nowcasts are almost exact, day-ahead values are not):
    # error_std(lead) = forecast_overconfidence * noise_std * growth * lead.
    # Around 1/growth the declared sigma is roughly calibrated; at short
    # leads it overstates the error, in the far tail it understates it.
    forecast_overconfidence: float = 1.25
    allow_negative_prices: bool = False

    def validate(self) -> None:
        if self.year_length < 1:
            raise ValueError("year_length must be >= 1")
        if not 0.0 <= self.ar1_rho < 1.0:
            raise ValueError("ar1_rho must lie in [0, 1)")
        if self.forecast_growth < 0.0:
            raise ValueError("forecast_growth must be >= 0")
        if self.forecast_overconfidence <= 0.0:
            raise ValueError("forecast_overconfidence must be > 0")
        for name in SERIES:
            getattr(self, name)  # profile dataclasses validate themselves

    def profile(self, name: str) -> SeriesProfile:
        return getattr(self, name)


# ---------------------------------------------------------------------------
# Operations.
# ---------------------------------------------------------------------------


def _profile_values(prof: SeriesProfile, n: int) -> np.ndarray:
    t = np.arange(n, dtype=np.float64)
    v = np.full(n, prof.base)
    if prof.seasonal_amp:
        v += prof.seasonal_amp * np.cos(
            2.0 * np.pi * (t - 24.0 * prof.seasonal_peak_day) / n)
    if prof.diurnal_amp:
        v += prof.diurnal_amp * np.cos(
            2.0 * np.pi * ((t % 24) - prof.diurnal_peak_hour) / 24.0)
    return v


def generate_truth(cfg: ScenarioConfig) -> list[ExogenousRealization]:
    """Generate the ground-truth year, a pure function of the config."""
    cfg.validate()
    n = cfg.year_length
    rho = cfg.ar1_rho
    innov = math.sqrt(1.0 - rho * rho)
    steps = np.arange(n, dtype=np.uint64)
    values: dict[str, np.ndarray] = {}
    wind_anomaly = np.zeros(n)
    for si, name in enumerate(SERIES):
        prof = cfg.profile(name)
        v = _profile_values(prof, n)
        if prof.noise_std > 0.0:
            z = _normal_draws(cfg.seed, _STREAM_TRUTH, si, steps)
            eps_list = z.tolist()
            eps = eps_list[0] * prof.noise_std
            eps_list[0] = eps
            scale = innov * prof.noise_std
            for t in range(1, n):
                eps = rho * eps + scale * eps_list[t]
                eps_list[t] = eps
            eps_arr = np.asarray(eps_list)
            v = v + eps_arr
            if name == "e_w":
                wind_anomaly = eps_arr / prof.noise_std
        values[name] = v
    if cfg.wind_price_coupling:
        values["p_eg"] = values["p_eg"] - cfg.wind_price_coupling * wind_anomaly
    for name in _NONNEG:
        np.clip(values[name], 0.0, None, out=values[name])
    if not cfg.allow_negative_prices:
        np.clip(values["p_eg"], 0.0, None, out=values["p_eg"])
    np.clip(values["p_hg"], 0.0, None, out=values["p_hg"])
    cols = [values[name].tolist() for name in SERIES]
    return [ExogenousRealization(e_w=cols[0][t], d_eu=cols[1][t],
                                 d_hu=cols[2][t], d_ef=cols[3][t],
                                 p_eg=cols[4][t], p_hg=cols[5][t])
            for t in range(n)]


def forecast_sigma(prof: SeriesProfile, growth: float, lead: int) -> float:
    """Declared forecast std at a given lead: noise_std * (1 + growth*lead)."""
    return prof.noise_std * (1.0 + growth * lead)


def forecast_at(truth: list[ExogenousRealization], t: int, horizon: int,
                cfg: ScenarioConfig) -> ForecastBundle:
    """Forecast issued at step t for leads 1..horizon (steps t .. t+horizon-1).

    Forecast means are the future truth values shifted by the per-series
    bias and perturbed with seeded noise whose std grows proportionally to
    the lead; the declared sigma follows noise_std * (1 + growth * lead).
    Wind and demand means are clamped at zero.  Everything is a pure
    function of (truth, t, horizon, config).
    """
    if t < 0 or t + horizon > len(truth):
        raise ValueError(
            f"forecast window [{t}, {t + horizon}) out of range for "
            f"{len(truth)} truth steps")
    leads = np.arange(1, horizon + 1, dtype=np.uint64)
    growth = cfg.forecast_growth
    spread = cfg.forecast_overconfidence
    vectors: dict[str, tuple[GaussianMarginal, ...]] = {}
    window = truth[t:t + horizon]
    for si, name in enumerate(SERIES):
        prof = cfg.profile(name)
        std = prof.noise_std
        if std > 0.0:
            z = _normal_draws(cfg.seed, _STREAM_FORECAST, si, leads, mid=t).tolist()
            shift = std * prof.forecast_bias
            clamp = name in _NONNEG
            row = []
            for i, exo in enumerate(window):
                lead = i + 1
                sigma = std * (1.0 + growth * lead)
                err = spread * std * growth * lead
                mu = getattr(exo, name) + shift + err * z[i]
                if clamp and mu < 0.0:
                    mu = 0.0
                row.append(GaussianMarginal(mu=mu, sigma=sigma))
        else:
            row = [GaussianMarginal(mu=getattr(exo, name), sigma=0.0)
                   for exo in window]
        vectors[name] = tuple(row)
    return ForecastBundle(issued_at=t, horizon=horizon, **vectors)


class CsvFormatError(ValueError):
    """A scenario CSV file failed validation."""


def load_csv(path, schema: dict[str, str] | None = None) -> list[ExogenousRealization]:
    """Read realized series from CSV.

    The expected header is ``t,e_w,d_eu,d_hu,d_ef,p_eg,p_hg``; `schema` maps
    series names to alternative column names.  Extra columns are ignored.
    Demands and wind must be non-negative; offending cells are reported with
    their data row number (first data row is row 1).
    """
    colmap = {name: name for name in SERIES}
    if schema:
        unknown = set(schema) - set(SERIES)
        if unknown:
            raise CsvFormatError(f"schema maps unknown series: {sorted(unknown)}")
        colmap.update(schema)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [colmap[name] for name in SERIES if colmap[name] not in header]
        if missing:
            raise CsvFormatError(f"missing columns: {missing}")
        for row_no, row in enumerate(reader, start=1):
            vals = {}
            for name in SERIES:
                cell = row.get(colmap[name])
                if cell is None or cell.strip() == "":
                    raise CsvFormatError(f"row {row_no}: empty {colmap[name]} cell")
                try:
                    v = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"row {row_no}: non-numeric {colmap[name]} value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise CsvFormatError(f"row {row_no}: non-finite {colmap[name]}")
                if name in _NONNEG and v < 0.0:
                    raise CsvFormatError(
                        f"row {row_no}: negative {name} value {v!r}")
                vals[name] = v
            out.append(ExogenousRealization(**vals))
    return out
