#!/usr/bin/env python3
"""Run the policy-parameter grid searches at desk scale.

Sweeps the confidence schedule (alpha1, alpha2) and the forecast-modifier
schedule (theta1, theta2) against the mean-forecast baseline on paired
scenario seeds, then writes the normalized-cost heatmaps and the winning
per-lead schedules as CSV.

    python scripts/policy_search.py --out results/ --steps 2000 --reps 10
"""

import argparse
import dataclasses
import time
from pathlib import Path

from ccdispatch.cli import DEFAULT_GRIDS
from ccdispatch.forecast import ScenarioConfig
from ccdispatch.policy import PolicyParams
from ccdispatch.search import GridSpec, best_schedule, emit_heatmap, \
    emit_schedule, run_grid
from ccdispatch.sim import SimulationConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jobs", type=int, default=2)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    scenario = dataclasses.replace(ScenarioConfig(), seed=args.seed,
                                   year_length=max(args.steps, 24))
    for which, kind in (("alpha", "cc_alpha_exp"), ("theta", "theta_exp")):
        a1, v1, a2, v2 = DEFAULT_GRIDS[which]
        cfg = SimulationConfig(horizon=24, steps=args.steps,
                               replications=args.reps, scenario=scenario,
                               policy=PolicyParams(kind=kind))
        spec = GridSpec(axis1_name=a1, axis2_name=a2, axis1_values=v1,
                        axis2_values=v2, base_config=cfg)
        t0 = time.perf_counter()
        result = run_grid(spec, jobs=args.jobs)
        dt = time.perf_counter() - t0
        emit_heatmap(result, out / f"heatmap_{which}.csv")
        emit_schedule(best_schedule(result, which, cfg.horizon),
                      out / f"schedule_{which}.csv")
        (i1, i2), (b1, b2) = result.best_cell
        print(f"{which}: best ({a1}={b1:g}, {a2}={b2:g}) "
              f"normalized {result.normalized[i1][i2]:.4f} "
              f"[{dt:.0f}s, baseline {result.baseline_cost:.0f} EUR]")


if __name__ == "__main__":
    main()
