"""Acceptance suite: one test per criterion, each printing a PASS line.

Grid-search criteria run at desk scale (shorter years, two workers); the
tolerances and decision rules are fixed here, not tuned at runtime.
"""

import dataclasses
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from ccdispatch import lp
from ccdispatch.forecast import (ForecastBundle, GaussianMarginal,
                                 ScenarioConfig)
from ccdispatch.model import (FLOW_FIELDS, FlowDecision, StorageState,
                              SystemParams)
from ccdispatch.policy import PolicyParams, tighten_bound
from ccdispatch.search import GridSpec, best_schedule, run_grid
from ccdispatch.sim import (SimulationConfig, clairvoyant_cost,
                            feasibility_update, run)

from helpers import (enumerate_bfs_optimum, read_mps, solve_instance_scipy,
                     solve_mps_scipy)

from test_lp import _random_family_instance, _random_generic_instance


def _flat_bundle(horizon, **means):
    vectors = {}
    for name in ("e_w", "d_eu", "d_hu", "d_ef", "p_eg", "p_hg"):
        vectors[name] = tuple(GaussianMarginal(mu=means[name], sigma=0.0)
                              for _ in range(horizon))
    return ForecastBundle(issued_at=0, horizon=horizon, **vectors)


def test_criterion_01_equation_transcription_audit():
    """Hand transcription of the one-step model matches build exactly."""
    t0 = time.perf_counter()
    p = SystemParams()  # the tabulated base system
    e_w, d_eu, d_hu, d_ef = 6000.0, 4000.0, 3000.0, 5000.0
    peg, phg = 0.25, 0.125
    bundle = _flat_bundle(1, e_w=e_w, d_eu=d_eu, d_hu=d_hu, d_ef=d_ef,
                          p_eg=peg, p_hg=phg)
    inst = lp.build(bundle, None, StorageState(r_e=0.0, r_h=0.0), p, 1)

    idx = {name: i for i, name in enumerate(FLOW_FIELDS)}
    RE, RH = 14, 15
    A = np.zeros((15, 16))
    rhs = np.zeros(15)
    senses = np.zeros(15, dtype=np.int8)

    A[0, [idx["e_wu"], idx["e_wf"], idx["e_wr"], idx["e_wg"]]] = 1.0
    rhs[0] = e_w
    A[1, [idx["e_ru"], idx["e_rf"], idx["e_rg"]]] = 1.0
    rhs[1] = p.gamma_e_d
    A[2, [idx["e_ru"], idx["e_rf"], idx["e_rg"]]] = 1.0
    A[2, RE] = -1.0
    A[3, idx["e_wr"]] = p.beta_e_c
    A[3, idx["e_gr"]] = p.beta_e_c
    rhs[3] = p.gamma_e_c
    A[4, idx["e_wu"]] = 1.0
    A[4, idx["e_ru"]] = p.beta_e_d
    A[4, idx["e_gu"]] = 1.0
    rhs[4] = d_eu
    A[5, idx["e_wf"]] = 1.0
    A[5, idx["e_rf"]] = p.beta_e_d
    A[5, idx["e_gf"]] = 1.0
    rhs[5] = d_ef
    A[6, idx["h_ru"]] = 1.0
    rhs[6] = p.gamma_h_d
    A[7, idx["h_ru"]] = 1.0
    A[7, RH] = -1.0
    A[8, idx["h_fr"]] = p.beta_h_c
    rhs[8] = p.gamma_h_c
    A[9, idx["h_fu"]] = 1.0
    A[9, idx["h_gu"]] = 1.0
    A[9, idx["h_ru"]] = p.beta_h_d
    rhs[9] = d_hu
    A[10, idx["h_fu"]] = 1.0
    A[10, idx["h_fr"]] = 1.0
    A[10, idx["e_wf"]] = -p.delta_eh
    A[10, idx["e_rf"]] = -(p.delta_eh * p.beta_e_d)
    A[10, idx["e_gf"]] = -p.delta_eh
    A[11, RE] = 1.0
    A[11, idx["e_wr"]] = p.beta_e_c
    A[11, idx["e_gr"]] = p.beta_e_c
    A[11, [idx["e_ru"], idx["e_rf"], idx["e_rg"]]] = -1.0
    rhs[11] = p.r_e_max
    A[12, RH] = 1.0
    A[12, idx["h_fr"]] = p.beta_h_c
    A[12, idx["h_ru"]] = -1.0
    rhs[12] = p.r_h_max
    A[13, RE] = 1.0
    senses[13] = 1
    A[14, RH] = 1.0
    senses[14] = 1

    c = np.zeros(16)
    c[idx["e_wu"]] = -p.c_p_eu
    c[idx["e_wf"]] = -p.c_p_ef
    c[idx["e_wg"]] = -peg
    c[idx["e_ru"]] = p.lcos_e - p.c_p_eu * p.beta_e_d
    c[idx["e_rf"]] = p.lcos_e - p.c_p_ef * p.beta_e_d
    c[idx["e_rg"]] = p.lcos_e - peg * p.beta_e_d
    c[idx["e_gu"]] = peg - p.c_p_eu
    c[idx["e_gf"]] = peg - p.c_p_ef
    c[idx["e_gr"]] = peg
    c[idx["h_fu"]] = -p.c_p_hu
    c[idx["h_gu"]] = phg - p.c_p_hu
    c[idx["h_ru"]] = p.lcos_h - p.c_p_hu * p.beta_h_d
    offset = p.c_p_eu * d_eu + p.c_p_hu * d_hu + p.c_p_ef * d_ef

    assert inst.num_vars == 16 and inst.num_rows == 15
    assert np.array_equal(inst.matrix, A)
    assert np.array_equal(inst.rhs, rhs)
    assert np.array_equal(inst.senses, senses)
    assert np.array_equal(inst.objective, c)
    assert inst.offset == offset
    dt = time.perf_counter() - t0
    assert dt < 1.0
    print(f"\nACCEPTANCE 1 PASS: transcription audit exact ({dt:.2f}s)")


def test_criterion_02_lp_solver_oracle():
    """solve() matches enumeration on 100 seeded instances, and an external
    solver via MPS on 10 of them; the production instance family matches
    the external solver too."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20230811)
    import tempfile
    from pathlib import Path
    checked_mps = 0
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(100):
            inst = _random_generic_instance(rng)
            sol = lp.solve(inst)
            assert sol.status == "optimal"
            best, _ = enumerate_bfs_optimum(inst.objective, inst.matrix,
                                            inst.rhs)
            assert sol.objective_value == pytest.approx(best, rel=1e-6,
                                                        abs=1e-9)
            if k < 10:
                path = Path(tmp) / f"oracle_{k}.mps"
                lp.export_mps(inst, path)
                external = solve_mps_scipy(read_mps(path))
                assert external == pytest.approx(sol.objective_value,
                                                 rel=1e-6, abs=1e-8)
                checked_mps += 1
    for _ in range(30):
        inst = _random_family_instance(rng)
        sol = lp.solve(inst)
        res = solve_instance_scipy(inst)
        assert sol.status == "optimal" and res.success
        assert sol.objective_value == pytest.approx(res.fun + inst.offset,
                                                    rel=1e-6, abs=1e-6)
        assert sol.dual_objective == pytest.approx(sol.objective_value,
                                                   rel=1e-6, abs=1e-6)
    dt = time.perf_counter() - t0
    assert dt < 60.0
    print(f"\nACCEPTANCE 2 PASS: 100 enumerated + {checked_mps} MPS-external "
          f"+ 30 family instances agree ({dt:.1f}s)")


def test_criterion_03_quantile_reformulation_coverage():
    """P(sample <= tightened bound) == 1 - alpha within +/-0.01."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    mu, sigma = 50.0, 10.0
    samples = mu + sigma * rng.standard_normal(1_000_000)
    for alpha in (0.5, 0.9, 0.95, 0.99):
        bound = tighten_bound(GaussianMarginal(mu=mu, sigma=sigma), alpha)
        hit = float(np.mean(samples <= bound))
        assert hit == pytest.approx(1.0 - alpha, abs=0.01), alpha
    dt = time.perf_counter() - t0
    assert dt < 10.0
    print(f"\nACCEPTANCE 3 PASS: empirical coverage matches 1-alpha ({dt:.1f}s)")


def test_criterion_04_policy_equivalences():
    """Mean policy, cc(0.5, 0) and theta(1, 0) execute identically."""
    t0 = time.perf_counter()
    steps = 524  # 500 executed rolling steps at horizon 24
    scen = dataclasses.replace(ScenarioConfig(), seed=404, year_length=steps)
    runs = {}
    for tag, pol in (
        ("mean", PolicyParams(kind="mean")),
        ("alpha", PolicyParams(kind="cc_alpha_exp", alpha1=0.5, alpha2=0.0)),
        ("theta", PolicyParams(kind="theta_exp", theta1=1.0, theta2=0.0)),
    ):
        cfg = SimulationConfig(horizon=24, steps=steps, replications=1,
                               scenario=scen, policy=pol)
        runs[tag] = run(cfg, replication_seed=99)
    assert len(runs["mean"].executed_flows) == 500
    assert runs["mean"].executed_flows == runs["alpha"].executed_flows
    assert runs["mean"].executed_flows == runs["theta"].executed_flows
    assert runs["mean"].total_cost == runs["alpha"].total_cost
    assert runs["mean"].total_cost == runs["theta"].total_cost
    dt = time.perf_counter() - t0
    assert dt < 30.0
    print(f"\nACCEPTANCE 4 PASS: three mean reductions identical over "
          f"500 steps ({dt:.1f}s)")


def test_criterion_05_feasibility_repair_suite():
    """The four repair examples hold exactly; 10^4 random pairs keep the
    wind balance and preserve deliveries."""
    t0 = time.perf_counter()
    plan = FlowDecision(e_wu=5, e_wf=5, e_wr=5, e_wg=5)
    flows, kinds = feasibility_update(plan, 20.0)
    assert flows == plan and kinds == set()
    flows, kinds = feasibility_update(plan, 25.0)
    assert flows == plan and kinds == {"surplus_unused"}
    flows, kinds = feasibility_update(plan, 12.0)
    assert (flows.e_wg, flows.e_wr, flows.e_wf, flows.e_wu) == (0.0, 2.0, 5.0, 5.0)
    flows, kinds = feasibility_update(plan, 3.0)
    assert (flows.e_wg, flows.e_wr, flows.e_wf, flows.e_wu) == (0.0, 0.0, 0.0, 3.0)
    assert flows.e_gf == 5.0 and flows.e_gu == 2.0

    rng = np.random.default_rng(55)
    for _ in range(10_000):
        vals = rng.uniform(0.0, 100.0, size=14)
        planned = FlowDecision(**dict(zip(FLOW_FIELDS, vals)))
        wind = float(rng.uniform(0.0, 500.0))
        flows, _ = feasibility_update(planned, wind)
        deficit = planned.wind_usage() - wind
        if deficit > 1e-9:
            assert flows.wind_usage() == pytest.approx(wind, abs=1e-6)
            assert flows.e_wf + flows.e_gf == pytest.approx(
                planned.e_wf + planned.e_gf, abs=1e-9)
            assert flows.e_wu + flows.e_gu == pytest.approx(
                planned.e_wu + planned.e_gu, abs=1e-9)
        else:
            assert flows.wind_usage() <= wind + 1e-9
    dt = time.perf_counter() - t0
    assert dt < 5.0
    print(f"\nACCEPTANCE 5 PASS: repair examples + 10^4 random pairs ({dt:.1f}s)")


def _noise_free_scenario(steps):
    base = ScenarioConfig()
    quiet = {name: dataclasses.replace(base.profile(name), noise_std=0.0)
             for name in ("e_w", "d_eu", "d_hu", "d_ef", "p_eg", "p_hg")}
    return dataclasses.replace(base, seed=606, year_length=steps,
                               wind_price_coupling=0.0, **quiet)


def test_criterion_06_perfect_information_bound():
    """Zero-noise rolling cost >= clairvoyant optimum; equality at T == H."""
    t0 = time.perf_counter()
    scen = _noise_free_scenario(24)
    cfg = SimulationConfig(horizon=24, steps=24, replications=1,
                           scenario=scen, policy=PolicyParams(kind="mean"))
    res = run(cfg, replication_seed=1)
    bound = clairvoyant_cost(cfg, 1)
    assert res.total_cost == pytest.approx(bound, rel=1e-6)

    scen72 = _noise_free_scenario(72)
    cfg72 = SimulationConfig(horizon=24, steps=72, replications=1,
                             scenario=scen72, policy=PolicyParams(kind="mean"))
    res72 = run(cfg72, replication_seed=1)
    bound72 = clairvoyant_cost(cfg72, 1)
    assert res72.total_cost >= bound72 - 1e-6 * max(1.0, abs(bound72))
    dt = time.perf_counter() - t0
    assert dt < 30.0
    print(f"\nACCEPTANCE 6 PASS: rolling {res72.total_cost:.2f} >= "
          f"clairvoyant {bound72:.2f}; equality at T=H ({dt:.1f}s)")


def test_criterion_07_alpha_grid_beats_mean_baseline():
    """Desk-scale confidence grid: conservative near-lead schedules win."""
    t0 = time.perf_counter()
    scen = dataclasses.replace(ScenarioConfig(), year_length=2000)
    cfg = SimulationConfig(horizon=24, steps=2000, replications=10,
                           scenario=scen,
                           policy=PolicyParams(kind="cc_alpha_exp"))
    a1_vals = (0.5, 0.7, 0.9, 0.95, 0.99)
    a2_vals = (0.0, 0.05, 0.1, 0.2)
    spec = GridSpec("alpha1", "alpha2", a1_vals, a2_vals, cfg)
    result = run_grid(spec, jobs=2)

    # (a) some schedule with alpha1 > 0.9 and alpha2 > 0 beats the paired
    # mean baseline with a one-sided sign test at p < 0.05 (>= 9/10 wins).
    qualifying = []
    for (i1, i2), totals in result.cell_totals.items():
        a1, a2 = a1_vals[i1], a2_vals[i2]
        if a1 > 0.9 and a2 > 0.0:
            wins = sum(1 for c, b in zip(totals, result.baseline_totals)
                       if c < b)
            mean = result.cells[i1][i2][0]
            qualifying.append(((a1, a2), wins, mean))
    strong = [(cell, wins, mean) for cell, wins, mean in qualifying
              if wins >= 9 and mean < result.baseline_cost]
    assert strong, f"no significantly better conservative cell: {qualifying}"

    # (b) the best schedule is non-increasing with near-lead value > 0.9.
    sched = best_schedule(result, "alpha", cfg.horizon)
    vals = sched.values
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[0] > 0.9, f"near-lead value {vals[0]} not > 0.9"

    dt = time.perf_counter() - t0
    assert dt < 900.0
    best_cell, best_wins, best_mean = max(strong, key=lambda s: s[1])
    print(f"\nACCEPTANCE 7 PASS: cell {best_cell} wins {best_wins}/10 "
          f"(mean {best_mean:.0f} vs baseline {result.baseline_cost:.0f}); "
          f"best cell {result.best_cell[1]} near-lead {vals[0]:.3f} "
          f"({dt:.0f}s)")


def test_criterion_08_storage_grid_ees_dominates():
    """Electric storage size explains more cost range than thermal size."""
    t0 = time.perf_counter()
    scen = dataclasses.replace(ScenarioConfig(), year_length=600)
    assert scen.p_hg.diurnal_amp == 0.0 and scen.p_hg.noise_std == 0.0
    cfg = SimulationConfig(horizon=24, steps=600, replications=2,
                           scenario=scen, policy=PolicyParams(kind="mean"))
    factors = (1e-3, 1e-2, 1e-1, 1e0, 1e1)
    spec = GridSpec("sf_e", "sf_h", factors, factors, cfg)
    result = run_grid(spec, jobs=2)
    norm = result.normalized
    n = len(factors)
    sf_e_marginals = [sum(norm[i][j] for j in range(n)) / n for i in range(n)]
    sf_h_marginals = [sum(norm[i][j] for i in range(n)) / n for j in range(n)]
    range_e = max(sf_e_marginals) - min(sf_e_marginals)
    range_h = max(sf_h_marginals) - min(sf_h_marginals)
    assert range_e > range_h
    dt = time.perf_counter() - t0
    assert dt < 1200.0
    print(f"\nACCEPTANCE 8 PASS: sf_e range {range_e:.4f} > sf_h range "
          f"{range_h:.4f} ({dt:.0f}s)")


def test_criterion_09_full_year_performance():
    """One full-year run (8736 rolling solves) in under five minutes."""
    cfg = SimulationConfig(horizon=24, steps=8760, replications=1,
                           scenario=ScenarioConfig(),
                           policy=PolicyParams(kind="mean"))
    t0 = time.perf_counter()
    res = run(cfg, replication_seed=2023)
    dt = time.perf_counter() - t0
    assert len(res.executed_flows) == 8736
    assert dt < 300.0
    print(f"\nACCEPTANCE 9 PASS: full year in {dt:.1f}s "
          f"({dt / 8736 * 1000:.2f} ms/solve)")


def test_criterion_10_byte_identical_outputs(tmp_path):
    """Identical config + seed give byte-identical CSV and JSON outputs."""
    t0 = time.perf_counter()
    config = {
        "scenario": {"seed": 77, "year_length": 80},
        "simulation": {"horizon": 12, "steps": 60, "replications": 2},
        "policy": {"kind": "cc_alpha_exp", "alpha1": 0.95, "alpha2": 0.05},
        "output": {"trace_csv": "trace.csv"},
        "grid": {"axis1_values": [0.5, 0.95], "axis2_values": [0.0]},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    captures = []
    for _attempt in range(2):  # identical invocations, same output dir
        blobs = {}
        for cmd in (["simulate"], ["generate-scenario"],
                    ["gridsearch", "--which", "alpha"]):
            proc = subprocess.run(
                [sys.executable, "-m", "ccdispatch.cli", "--config",
                 str(cfg_path), "--out", str(out_dir)] + cmd,
                capture_output=True, text=True, check=True)
            json_line = proc.stdout.strip().splitlines()[-1]
            blobs[tuple(cmd)] = json_line
        for name in ("trace.csv", "scenario.csv", "heatmap_alpha.csv",
                     "schedule_alpha.csv"):
            blobs[name] = (out_dir / name).read_bytes()
        captures.append(blobs)
    assert captures[0] == captures[1]
    dt = time.perf_counter() - t0
    print(f"\nACCEPTANCE 10 PASS: byte-identical outputs across reruns "
          f"({dt:.1f}s)")
