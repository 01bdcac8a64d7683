"""Command-line entry point: simulate, gridsearch, export-lp, generate-scenario.

Configuration is a JSON document with sections `system`, `scenario`,
`simulation`, `policy`, `grid` and `output`.  Parsing is strict: unknown keys
are rejected with their dotted path, missing sections fall back to the
built-in defaults (the base Table of system parameters and the default
synthetic scenario).  Exit codes: 0 success, 1 configuration/usage error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import lp, search, sim
from .forecast import (SERIES, ScenarioConfig, SeriesProfile, forecast_at,
                       generate_truth)
from .model import SystemParams, storage_step
from .policy import PolicyParams, alpha_schedule, apply_dla_theta, theta_schedule

__all__ = ["ConfigError", "load_config", "effective_config", "main"]


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


DEFAULT_GRIDS = {
    "theta": ("theta1", (0.6, 0.7, 0.8, 0.9, 1.0, 1.1),
              "theta2", (0.0, 0.05, 0.1, 0.2)),
    "alpha": ("alpha1", (0.5, 0.7, 0.9, 0.95, 0.99),
              "alpha2", (0.0, 0.05, 0.1, 0.2)),
    "storage": ("sf_e", (1e-3, 1e-2, 1e-1, 1e0, 1e1),
                "sf_h", (1e-3, 1e-2, 1e-1, 1e0, 1e1)),
}

_OUTPUT_KEYS = ("trace_csv", "heatmap_csv", "schedule_csv", "scenario_csv",
                "mps_path")


def _check_keys(section: dict, allowed, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _build_dataclass(cls, data: dict, path: str):
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(data, names, path)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_system(data: dict) -> SystemParams:
    params = _build_dataclass(SystemParams, data, "system")
    try:
        params.validate()
    except ValueError as exc:
        field_name = str(exc).split()[0]
        raise ConfigError(f"system.{field_name}", str(exc)) from None
    return params


def _parse_scenario(data: dict) -> ScenarioConfig:
    data = dict(data)
    profiles = data.pop("profiles", {})
    scalar_keys = {"seed", "year_length", "forecast_growth", "ar1_rho",
                   "wind_price_coupling", "allow_negative_prices"}
    _check_keys(data, scalar_keys, "scenario")
    if not isinstance(profiles, dict):
        raise ConfigError("scenario.profiles", "must be an object")
    prof_objs = {}
    for name, pdata in profiles.items():
        if name not in SERIES:
            raise ConfigError(f"scenario.profiles.{name}", "unknown series")
        base = getattr(ScenarioConfig(), name)
        merged = {f.name: getattr(base, f.name)
                  for f in dataclasses.fields(SeriesProfile)}
        _check_keys(pdata, set(merged), f"scenario.profiles.{name}")
        merged.update(pdata)
        prof_objs[name] = _build_dataclass(SeriesProfile, merged,
                                           f"scenario.profiles.{name}")
    try:
        cfg = ScenarioConfig(**data, **prof_objs)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError("scenario", str(exc)) from None
    return cfg


def _parse_policy(data: dict) -> PolicyParams:
    data = dict(data)
    if "lookup" in data and data["lookup"] is not None:
        data["lookup"] = tuple(data["lookup"])
    return _build_dataclass(PolicyParams, data, "policy")


def load_config(path: str | None, seed_override: int | None = None):
    """Parse the JSON config into a SimulationConfig plus grid/output extras."""
    doc = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be an object")
    _check_keys(doc, {"system", "scenario", "simulation", "policy", "grid",
                      "output"}, "config")

    params = _parse_system(doc.get("system", {}))
    scenario = _parse_scenario(doc.get("scenario", {}))
    if seed_override is not None:
        scenario = dataclasses.replace(scenario, seed=seed_override)
    policy = _parse_policy(doc.get("policy", {}))

    sim_data = dict(doc.get("simulation", {}))
    _check_keys(sim_data, {"horizon", "steps", "replications",
                           "surplus_export_enabled"}, "simulation")
    try:
        cfg = sim.SimulationConfig(policy=policy, scenario=scenario,
                                   params=params, **sim_data)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError("simulation", str(exc)) from None

    grid_data = dict(doc.get("grid", {}))
    _check_keys(grid_data, {"axis1_name", "axis1_values", "axis2_name",
                            "axis2_values"}, "grid")
    output = dict(doc.get("output", {}))
    _check_keys(output, set(_OUTPUT_KEYS), "output")
    return cfg, grid_data, output


def effective_config(cfg: sim.SimulationConfig) -> dict:
    """Serialize the defaults-applied configuration back to a JSON document."""
    profiles = {name: dataclasses.asdict(cfg.scenario.profile(name))
                for name in SERIES}
    scenario = {
        "seed": cfg.scenario.seed,
        "year_length": cfg.scenario.year_length,
        "forecast_growth": cfg.scenario.forecast_growth,
        "ar1_rho": cfg.scenario.ar1_rho,
        "wind_price_coupling": cfg.scenario.wind_price_coupling,
        "allow_negative_prices": cfg.scenario.allow_negative_prices,
        "profiles": profiles,
    }
    policy = dataclasses.asdict(cfg.policy)
    if policy["lookup"] is not None:
        policy["lookup"] = list(policy["lookup"])
    else:
        policy.pop("lookup")
    return {
        "system": dataclasses.asdict(cfg.params),
        "scenario": scenario,
        "simulation": {
            "horizon": cfg.horizon,
            "steps": cfg.steps,
            "replications": cfg.replications,
            "surplus_export_enabled": cfg.surplus_export_enabled,
        },
        "policy": policy,
    }


def _json_line(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def cmd_simulate(cfg: sim.SimulationConfig, output: dict, out_dir: Path,
                 jobs: int) -> int:
    summary = sim.run_replications(cfg, jobs=jobs)
    if output.get("trace_csv"):
        seed0 = sim.replication_seeds(cfg.scenario.seed, 1)[0]
        traced = dataclasses.replace(
            cfg, trace_path=str(out_dir / output["trace_csv"]))
        sim.run(traced, seed0)
    print(f"simulated {cfg.replications} replication(s) of {cfg.steps} steps "
          f"(horizon {cfg.horizon}, policy {cfg.policy.kind})")
    print(f"total cost: {summary.mean_cost:.2f} +/- {summary.std_cost:.2f} EUR")
    if summary.repair_totals:
        pretty = ", ".join(f"{k}={v}" for k, v in summary.repair_totals.items())
        print(f"repair events: {pretty}")
    print(_json_line({
        "command": "simulate",
        "mean_cost": summary.mean_cost,
        "std_cost": summary.std_cost,
        "replications": summary.replications,
        "total_costs": list(summary.totals),
        "repairs": summary.repair_totals,
        "seed": cfg.scenario.seed,
    }))
    return 0


def cmd_gridsearch(cfg: sim.SimulationConfig, which: str, grid_data: dict,
                   output: dict, out_dir: Path, jobs: int) -> int:
    a1_name, a1_vals, a2_name, a2_vals = DEFAULT_GRIDS[which]
    if grid_data.get("axis1_name", a1_name) != a1_name \
            or grid_data.get("axis2_name", a2_name) != a2_name:
        raise ConfigError("grid.axis1_name",
                          f"axes for --which {which} must be ({a1_name}, {a2_name})")
    a1_vals = tuple(grid_data.get("axis1_values", a1_vals))
    a2_vals = tuple(grid_data.get("axis2_values", a2_vals))
    base = cfg
    if which == "theta":
        base = dataclasses.replace(cfg, policy=cfg.policy.with_(kind="theta_exp"))
    elif which == "alpha":
        base = dataclasses.replace(cfg, policy=cfg.policy.with_(kind="cc_alpha_exp"))
    spec = search.GridSpec(axis1_name=a1_name, axis2_name=a2_name,
                           axis1_values=a1_vals, axis2_values=a2_vals,
                           base_config=base)
    result = search.run_grid(spec, jobs=jobs)

    heatmap_path = out_dir / output.get("heatmap_csv", f"heatmap_{which}.csv")
    search.emit_heatmap(result, heatmap_path)
    wrote = [str(heatmap_path)]
    if which in ("theta", "alpha"):
        sched = search.best_schedule(result, which, cfg.horizon)
        sched_path = out_dir / output.get("schedule_csv", f"schedule_{which}.csv")
        search.emit_schedule(sched, sched_path)
        wrote.append(str(sched_path))
    (i1, i2), (v1, v2) = result.best_cell
    print(f"grid {which}: best cell {a1_name}={v1:g}, {a2_name}={v2:g} "
          f"(normalized cost {result.normalized[i1][i2]:.6f})")
    print(f"wrote {', '.join(wrote)}")
    print(_json_line({
        "command": "gridsearch",
        "which": which,
        "best": {a1_name: v1, a2_name: v2},
        "best_normalized": result.normalized[i1][i2],
        "baseline_cost": result.baseline_cost,
        "seed": cfg.scenario.seed,
    }))
    return 0


def cmd_export_lp(cfg: sim.SimulationConfig, t: int, output: dict,
                  out_dir: Path) -> int:
    last_epoch = 0 if cfg.steps == cfg.horizon else cfg.steps - cfg.horizon - 1
    if not 0 <= t <= last_epoch:
        raise ConfigError("t", f"step must lie in [0, {last_epoch}]")
    seed0 = sim.replication_seeds(cfg.scenario.seed, 1)[0]
    scenario = dataclasses.replace(cfg.scenario, seed=seed0)
    truth = generate_truth(scenario)
    # Roll the simulation forward so the exported LP sees the same storage
    # state the simulator would have at step t.
    state = cfg.params.initial_state()
    template = lp.LpTemplate(cfg.params, cfg.horizon)
    solver = lp.RollingSolver()
    theta_sched = None
    a_sched = None
    if cfg.policy.kind.startswith("theta"):
        theta_sched = theta_schedule(cfg.policy, cfg.horizon)
    elif cfg.policy.kind.startswith("cc"):
        a_sched = alpha_schedule(cfg.policy, cfg.horizon)
    inst = None
    for step in range(t + 1):
        bundle = forecast_at(truth, step, cfg.horizon, scenario)
        if theta_sched is not None:
            bundle = apply_dla_theta(bundle, theta_sched)
        inst = template.instantiate(bundle, a_sched, state)
        if step == t:
            break
        sol = solver.solve(inst)
        if sol.status != "optimal":
            raise RuntimeError(f"LP {sol.status} at step {step}: {sol.detail}")
        flows, _ = sim.execute_step(sol.first_step, truth[step], state,
                                    cfg.params, cfg.surplus_export_enabled)
        state = storage_step(state, flows, cfg.params)
    path = out_dir / output.get("mps_path", f"export_t{t}.mps")
    lp.export_mps(inst, path)
    print(f"wrote {path} ({inst.num_vars} columns, {inst.num_rows} rows)")
    print(_json_line({"command": "export-lp", "t": t, "path": str(path),
                      "columns": inst.num_vars, "rows": inst.num_rows}))
    return 0


def cmd_generate_scenario(cfg: sim.SimulationConfig, output: dict,
                          out_dir: Path) -> int:
    truth = generate_truth(cfg.scenario)
    path = out_dir / output.get("scenario_csv", "scenario.csv")
    lines = ["t," + ",".join(SERIES)]
    for t, exo in enumerate(truth):
        lines.append(f"{t}," + ",".join(repr(getattr(exo, s)) for s in SERIES))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(truth)} steps)")
    print(_json_line({"command": "generate-scenario", "path": str(path),
                      "steps": len(truth), "seed": cfg.scenario.seed}))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccdispatch",
                     description="Rolling-horizon energy dispatch simulator")
    parser.add_argument("--config", default=None, help="JSON config path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for replications/grid cells")
    parser.add_argument("--out", default=".", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="run replicated simulations")
    g = sub.add_parser("gridsearch", help="run a 2-D parameter grid search")
    g.add_argument("--which", required=True, choices=("theta", "alpha", "storage"))
    e = sub.add_parser("export-lp", help="write one planning LP as MPS")
    e.add_argument("--t", type=int, required=True, help="decision step")
    sub.add_parser("generate-scenario", help="write the truth series as CSV")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg, grid_data, output = load_config(args.config, args.seed)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(cfg, output, out_dir, args.jobs)
        if args.command == "gridsearch":
            return cmd_gridsearch(cfg, args.which, grid_data, output, out_dir,
                                  args.jobs)
        if args.command == "export-lp":
            return cmd_export_lp(cfg, args.t, output, out_dir)
        if args.command == "generate-scenario":
            return cmd_generate_scenario(cfg, output, out_dir)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
