"""Grid-search harness over policy parameters and storage sizes.

Every cell of the grid runs the same replicated simulation with two config
fields overridden; all cells (and the normalization baseline, the plain
mean-forecast policy) share the same scenario seeds, so comparisons are
paired.  Results are emitted as a normalized-cost heatmap CSV plus the
per-lead schedule of the winning parameter pair.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .policy import LeadSchedule, PolicyParams, alpha_schedule, theta_schedule
from .sim import SimulationConfig, replication_seeds, run

__all__ = [
    "AXIS_NAMES",
    "GridResult",
    "GridSpec",
    "apply_axis",
    "best_schedule",
    "emit_heatmap",
    "emit_schedule",
    "normalize_cells",
    "run_grid",
]

AXIS_NAMES = ("theta1", "theta2", "alpha1", "alpha2", "sf_e", "sf_h")


@dataclass(frozen=True)
class GridSpec:
    axis1_name: str
    axis2_name: str
    axis1_values: tuple[float, ...]
    axis2_values: tuple[float, ...]
    base_config: SimulationConfig

    def validate(self) -> None:
        for name in (self.axis1_name, self.axis2_name):
            if name not in AXIS_NAMES:
                raise ValueError(f"unknown grid axis {name!r}")
        if not self.axis1_values or not self.axis2_values:
            raise ValueError("grid axes must be non-empty")
        for name, values in ((self.axis1_name, self.axis1_values),
                             (self.axis2_name, self.axis2_values)):
            for v in values:
                if name.startswith("sf") and v <= 0.0:
                    raise ValueError(f"storage factor {name} must be > 0")
        self.base_config.validate()


@dataclass
class GridResult:
    axis1_name: str
    axis2_name: str
    axis1_values: tuple[float, ...]
    axis2_values: tuple[float, ...]
    cells: list[list[tuple[float, float, int]]]  # (mean, std, n) per cell
    normalized: list[list[float]]
    best_cell: tuple[tuple[int, int], tuple[float, float]]
    baseline_cost: float
    baseline_totals: tuple[float, ...] = field(default=())
    cell_totals: dict[tuple[int, int], tuple[float, ...]] = field(default_factory=dict)


def apply_axis(cfg: SimulationConfig, name: str, value: float) -> SimulationConfig:
    """Override one grid axis on a simulation config."""
    if name in ("theta1", "theta2", "alpha1", "alpha2"):
        return replace(cfg, policy=cfg.policy.with_(**{name: value}))
    if name == "sf_e":
        cap = cfg.params.r_e_max * value
        params = replace(cfg.params, r_e_max=cap,
                         gamma_e_c=cap / 10.0, gamma_e_d=cap / 10.0)
        return replace(cfg, params=params)
    if name == "sf_h":
        cap = cfg.params.r_h_max * value
        params = replace(cfg.params, r_h_max=cap,
                         gamma_h_c=cap / 10.0, gamma_h_d=cap / 10.0)
        return replace(cfg, params=params)
    raise ValueError(f"unknown grid axis {name!r}")


def _cell_config(spec: GridSpec, i1: int, i2: int) -> SimulationConfig:
    cfg = apply_axis(spec.base_config, spec.axis1_name, spec.axis1_values[i1])
    return apply_axis(cfg, spec.axis2_name, spec.axis2_values[i2])


def _grid_task(args) -> float:
    cfg, seed = args
    return run(cfg, seed).total_cost


def normalize_cells(means: list[list[float]], baseline: float
                    ) -> tuple[list[list[float]], tuple[int, int]]:
    """Normalize cell means by the baseline and locate the minimum.

    Ties break to the lexicographically smallest indices; scaling every
    mean and the baseline by one positive constant changes nothing.
    """
    normalized = [[m / baseline for m in row] for row in means]
    best = (0, 0)
    for i1, row in enumerate(normalized):
        for i2, v in enumerate(row):
            if v < normalized[best[0]][best[1]]:
                best = (i1, i2)
    return normalized, best


def run_grid(spec: GridSpec, jobs: int = 1) -> GridResult:
    """Run every cell with paired replication seeds and normalize.

    The baseline is the mean-forecast policy on the identical scenario
    seeds; the best cell minimizes the normalized cost, ties broken by the
    lexicographically smallest indices.
    """
    spec.validate()
    base = spec.base_config
    seeds = replication_seeds(base.scenario.seed, base.replications)
    n1, n2 = len(spec.axis1_values), len(spec.axis2_values)

    baseline_cfg = replace(base, policy=PolicyParams(kind="mean"),
                           trace_path=None)
    tasks: list[tuple[SimulationConfig, int]] = [
        (baseline_cfg, s) for s in seeds]
    for i1 in range(n1):
        for i2 in range(n2):
            cfg = replace(_cell_config(spec, i1, i2), trace_path=None)
            tasks.extend((cfg, s) for s in seeds)

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            totals = list(pool.map(_grid_task, tasks, chunksize=1))
    else:
        totals = [_grid_task(t) for t in tasks]

    R = len(seeds)
    baseline_totals = tuple(totals[:R])
    baseline = sum(baseline_totals) / R

    cells: list[list[tuple[float, float, int]]] = []
    cell_totals: dict[tuple[int, int], tuple[float, ...]] = {}
    pos = R
    for i1 in range(n1):
        row_cells = []
        for i2 in range(n2):
            vals = totals[pos:pos + R]
            pos += R
            mean = sum(vals) / R
            var = sum((x - mean) ** 2 for x in vals) / R
            row_cells.append((mean, var ** 0.5, R))
            cell_totals[(i1, i2)] = tuple(vals)
        cells.append(row_cells)

    normalized, best = normalize_cells(
        [[cell[0] for cell in row] for row in cells], baseline)
    best_cell = (best, (spec.axis1_values[best[0]], spec.axis2_values[best[1]]))
    return GridResult(
        axis1_name=spec.axis1_name, axis2_name=spec.axis2_name,
        axis1_values=tuple(spec.axis1_values),
        axis2_values=tuple(spec.axis2_values),
        cells=cells, normalized=normalized, best_cell=best_cell,
        baseline_cost=baseline, baseline_totals=baseline_totals,
        cell_totals=cell_totals,
    )


def best_schedule(result: GridResult, kind: str, horizon: int) -> LeadSchedule:
    """Evaluate the winning parameter pair into its per-lead schedule."""
    axes = (result.axis1_name, result.axis2_name)
    (_, _), (v1, v2) = result.best_cell
    if kind == "theta":
        if axes != ("theta1", "theta2"):
            raise ValueError(f"theta schedule needs theta axes, grid has {axes}")
        return theta_schedule(PolicyParams(kind="theta_exp", theta1=v1, theta2=v2),
                              horizon)
    if kind == "alpha":
        if axes != ("alpha1", "alpha2"):
            raise ValueError(f"alpha schedule needs alpha axes, grid has {axes}")
        return alpha_schedule(
            PolicyParams(kind="cc_alpha_exp", alpha1=v1, alpha2=v2), horizon)
    raise ValueError(f"unknown schedule kind {kind!r}")


def emit_heatmap(result: GridResult, path) -> None:
    """CSV heatmap: one row per cell, row-major over axis1 then axis2."""
    lines = ["axis1,axis2,mean_cost,std_cost,normalized"]
    for i1, v1 in enumerate(result.axis1_values):
        for i2, v2 in enumerate(result.axis2_values):
            mean, std, _ = result.cells[i1][i2]
            lines.append(
                f"{v1:.9g},{v2:.9g},{mean:.9g},{std:.9g},"
                f"{result.normalized[i1][i2]:.9g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_schedule(sched: LeadSchedule, path) -> None:
    """CSV schedule: lead index and value, one row per lead."""
    lines = ["lead,value"]
    for lead, v in enumerate(sched.values, start=1):
        lines.append(f"{lead},{v:.9g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
