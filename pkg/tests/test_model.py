import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccdispatch.model import (FLOW_FIELDS, ExogenousRealization, FlowDecision,
                              StorageBoundError, StorageState, SystemParams,
                              check_feasible, step_cost, storage_step)

PARAMS = SystemParams()

flow_values = st.floats(min_value=0.0, max_value=5000.0, allow_nan=False)


def make_flows(**kw):
    return FlowDecision(**kw)


@st.composite
def flows_strategy(draw):
    vals = {name: draw(flow_values) for name in FLOW_FIELDS}
    return FlowDecision(**vals)


@st.composite
def exo_strategy(draw):
    pos = st.floats(min_value=0.0, max_value=20000.0, allow_nan=False)
    price = st.floats(min_value=-0.2, max_value=0.6, allow_nan=False)
    return ExogenousRealization(
        e_w=draw(pos), d_eu=draw(pos), d_hu=draw(pos), d_ef=draw(pos),
        p_eg=draw(price), p_hg=draw(price))


class TestFlowDecision:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            FlowDecision(e_wu=-1.0)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            FlowDecision(h_ru=float("nan"))

    def test_wind_usage(self):
        f = FlowDecision(e_wu=1, e_wf=2, e_wr=3, e_wg=4, e_gu=100)
        assert f.wind_usage() == 10


class TestStepCost:
    def test_zero_flows_full_penalty(self):
        p = SystemParams(c_p_eu=0.5, c_p_hu=0.5, c_p_ef=0.5)
        exo = ExogenousRealization(d_eu=10, d_hu=5, d_ef=20)
        cost = step_cost(FlowDecision(), exo, p)
        assert cost.total == pytest.approx(0.5 * (10 + 5 + 20))
        assert cost.total == pytest.approx(17.5)

    def test_grid_only_coverage(self):
        exo = ExogenousRealization(d_eu=10, d_hu=5, d_ef=20, p_eg=0.30, p_hg=0.10)
        flows = FlowDecision(e_gu=10, e_gf=20, h_gu=5)
        cost = step_cost(flows, exo, PARAMS)
        assert cost.penalty_eu == pytest.approx(0.0)
        assert cost.penalty_hu == pytest.approx(0.0)
        assert cost.penalty_ef == pytest.approx(0.0)
        assert cost.grid_e_purchase == pytest.approx(9.0)
        assert cost.grid_h_purchase == pytest.approx(0.5)
        assert cost.total == pytest.approx(9.5)

    def test_wind_export_revenue(self):
        # Discharge efficiency applies only to storage-sourced export.
        exo = ExogenousRealization(p_eg=0.20)
        cost = step_cost(FlowDecision(e_wg=100), exo, PARAMS)
        assert cost.export_revenue == pytest.approx(20.0)
        assert cost.total == pytest.approx(-20.0)

    def test_rejects_non_finite(self):
        exo = ExogenousRealization(p_eg=1e308, d_eu=1.0)
        with pytest.raises(ValueError):
            step_cost(FlowDecision(e_gu=1e308), exo, PARAMS)

    @settings(max_examples=60, deadline=None)
    @given(flows=flows_strategy(), exo=exo_strategy())
    def test_total_is_sum_of_terms(self, flows, exo):
        c = step_cost(flows, exo, PARAMS)
        expected = (c.penalty_eu + c.penalty_hu + c.penalty_ef
                    + c.grid_e_purchase + c.grid_h_purchase - c.export_revenue
                    + c.lcos_e_cost + c.lcos_h_cost)
        assert c.total == pytest.approx(expected, rel=1e-9, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(f1=flows_strategy(), f2=flows_strategy(), exo=exo_strategy(),
           a=st.floats(0.0, 2.0), b=st.floats(0.0, 2.0))
    def test_cost_linearity(self, f1, f2, exo, a, b):
        mixed = FlowDecision(**{
            name: a * getattr(f1, name) + b * getattr(f2, name)
            for name in FLOW_FIELDS})
        lhs = step_cost(mixed, exo, PARAMS).total
        rhs = (a * step_cost(f1, exo, PARAMS).total
               + b * step_cost(f2, exo, PARAMS).total
               + (1.0 - a - b) * step_cost(FlowDecision(), exo, PARAMS).total)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-7)

    @settings(max_examples=60, deadline=None)
    @given(flows=flows_strategy(), exo=exo_strategy(),
           bump=st.floats(0.0, 1000.0),
           which=st.sampled_from(["d_eu", "d_hu", "d_ef"]))
    def test_monotone_penalty(self, flows, exo, bump, which):
        import dataclasses
        higher = dataclasses.replace(exo, **{which: getattr(exo, which) + bump})
        assert step_cost(flows, higher, PARAMS).total >= \
            step_cost(flows, exo, PARAMS).total - 1e-9


class TestStorageStep:
    def test_charge_efficiency(self):
        state = StorageState(r_e=0.0, r_h=0.0)
        nxt = storage_step(state, FlowDecision(e_wr=10), PARAMS)
        assert nxt.r_e == pytest.approx(9.0)

    def test_heat_discharge_unscaled(self):
        # Discharge leaves storage unscaled; the efficiency applies on the
        # delivery side.
        state = StorageState(r_e=0.0, r_h=50.0)
        nxt = storage_step(state, FlowDecision(h_ru=20), PARAMS)
        assert nxt.r_h == pytest.approx(30.0)

    def test_identity(self):
        state = StorageState(r_e=123.0, r_h=45.0)
        assert storage_step(state, FlowDecision(), PARAMS) == state

    def test_bound_violation_reported(self):
        state = StorageState(r_e=10.0, r_h=0.0)
        with pytest.raises(StorageBoundError) as err:
            storage_step(state, FlowDecision(e_ru=50), PARAMS)
        assert err.value.storage == "electric"
        assert err.value.excess == pytest.approx(-40.0)

    @settings(max_examples=40, deadline=None)
    @given(seq=st.lists(flows_strategy(), min_size=1, max_size=20))
    def test_conservation(self, seq):
        # Mirror the update arithmetic step by step; the telescoped level
        # matches the chained one exactly.
        big = SystemParams(r_e_max=1e9, r_h_max=1e9)
        state = StorageState(r_e=5e8, r_h=5e8)
        acc_e, acc_h = state.r_e, state.r_h
        for f in seq:
            state = storage_step(state, f, big)
            acc_e = acc_e + big.beta_e_c * (f.e_wr + f.e_gr) \
                - (f.e_ru + f.e_rf + f.e_rg)
            acc_h = acc_h + big.beta_h_c * f.h_fr - f.h_ru
        assert state.r_e == acc_e
        assert state.r_h == acc_h


def _reference_violations(flows, state, exo, p, tol=1e-6):
    """Independent transcription of the per-step constraint set."""
    f = flows
    supply_f = f.e_wf + p.beta_e_d * f.e_rf + f.e_gf
    rows = [
        ("wind_avail", f.e_wu + f.e_wf + f.e_wr + f.e_wg - exo.e_w),
        ("ees_discharge_rate", f.e_ru + f.e_rf + f.e_rg - p.gamma_e_d),
        ("ees_discharge_level", f.e_ru + f.e_rf + f.e_rg - state.r_e),
        ("ees_charge_rate", p.beta_e_c * (f.e_wr + f.e_gr) - p.gamma_e_c),
        ("urban_elec_cap", f.e_wu + p.beta_e_d * f.e_ru + f.e_gu - exo.d_eu),
        ("foundry_elec_cap", supply_f - exo.d_ef),
        ("tes_discharge_rate", f.h_ru - p.gamma_h_d),
        ("tes_discharge_level", f.h_ru - state.r_h),
        ("tes_charge_rate", p.beta_h_c * f.h_fr - p.gamma_h_c),
        ("urban_heat_cap", f.h_fu + f.h_gu + p.beta_h_d * f.h_ru - exo.d_hu),
        ("foundry_heat_yield", f.h_fu + f.h_fr - p.delta_eh * supply_f),
        ("ees_cap", state.r_e + p.beta_e_c * (f.e_wr + f.e_gr)
         - (f.e_ru + f.e_rf + f.e_rg) - p.r_e_max),
        ("tes_cap", state.r_h + p.beta_h_c * f.h_fr - f.h_ru - p.r_h_max),
    ]
    return {name for name, excess in rows if excess > tol}


class TestCheckFeasible:
    def test_zero_flows_pass(self):
        report = check_feasible(FlowDecision(), StorageState(),
                                ExogenousRealization(), PARAMS)
        assert report.ok

    def test_wind_violation_slack(self):
        flows = FlowDecision(e_wu=40, e_wf=40, e_wg=40)
        exo = ExogenousRealization(e_w=100, d_eu=100, d_ef=100)
        report = check_feasible(flows, StorageState(), exo, PARAMS)
        assert report.names() == ("wind_avail",)
        v = report.violations[0]
        assert v.lhs == pytest.approx(120.0)
        assert v.bound == pytest.approx(100.0)
        assert v.slack == pytest.approx(-20.0)

    def test_heat_yield_bound(self):
        flows = FlowDecision(e_gf=100, h_fu=40, h_fr=20)
        exo = ExogenousRealization(d_ef=100, d_hu=50)
        report = check_feasible(flows, StorageState(r_h=0.0), exo, PARAMS)
        assert report.names() == ("foundry_heat_yield",)
        v = report.violations[0]
        assert v.lhs == pytest.approx(60.0)
        assert v.bound == pytest.approx(50.0)

    @settings(max_examples=150, deadline=None)
    @given(flows=flows_strategy(), exo=exo_strategy(),
           r_e=st.floats(0, 100000), r_h=st.floats(0, 100000))
    def test_matches_reference_evaluator(self, flows, exo, r_e, r_h):
        state = StorageState(r_e=r_e, r_h=r_h)
        got = set(check_feasible(flows, state, exo, PARAMS).names())
        assert got == _reference_violations(flows, state, exo, PARAMS)
