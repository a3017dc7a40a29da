from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfacpp.colgen import (
    Column,
    build_cgmp,
    finish_report_csv,
    mip_finish,
    price_month,
    reduced_cost,
    run_colgen,
)
from tfacpp.models import COVER_LE, build_bim_legbased
from tfacpp.solver import solve_lp, solve_mip
from tfacpp.timespace import build_networks

from conftest import hand_instance, tiny

TWO_LEGS = [("L1", "A", "B", 480, 600), ("L2", "B", "A", 700, 820)]


def one_family_instance(crew_count=1, cap=10.0):
    return hand_instance(TWO_LEGS, crew=(crew_count, 1e6, cap))


def test_cgmp_picks_single_column():
    inst = one_family_instance()
    cols = {"1": [Column("a", "1", {}, 5.0, {"B1": 2.0})]}
    r = solve_lp(build_cgmp(inst, cols))
    assert r.objective == pytest.approx(5.0)


def test_cgmp_mixes_two_columns():
    inst = one_family_instance(cap=5.0)
    cols = {"1": [Column("a", "1", {}, 10.0, {"B1": 10.0}), Column("b", "1", {}, 0.0, {"B1": 0.0})]}
    r = solve_lp(build_cgmp(inst, cols))
    assert r.objective == pytest.approx(5.0)
    assert r.duals["year|B1"] == pytest.approx(1.0)


def convex_oracle(profits, times, budget):
    """Best convex combination under one budget row: at most two columns are mixed."""
    best = -math.inf
    n = len(profits)
    for i in range(n):
        if times[i] <= budget:
            best = max(best, profits[i])
    for i, j in itertools.combinations(range(n), 2):
        if times[i] == times[j]:
            continue
        lam = (budget - times[j]) / (times[i] - times[j])
        if 0.0 <= lam <= 1.0:
            best = max(best, lam * profits[i] + (1 - lam) * profits[j])
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_cgmp_against_convex_combination_oracle(seed, n):
    rng = np.random.default_rng(seed)
    profits = rng.uniform(-5, 20, size=n)
    times = rng.uniform(0, 20, size=n)
    times[0] = 0.0
    budget = float(rng.uniform(1, 15))
    inst = one_family_instance(cap=budget)
    cols = {"1": [Column(f"c{i}", "1", {}, float(profits[i]), {"B1": float(times[i])}) for i in range(n)]}
    r = solve_lp(build_cgmp(inst, cols))
    assert r.objective == pytest.approx(convex_oracle(profits, times, budget), rel=1e-9, abs=1e-9)


def test_reduced_cost_arithmetic():
    c = Column("c", "1", {}, 100.0, {"B1": 10.0, "B2": 5.0})
    assert reduced_cost(c, {"1": 20.0}, {"B1": 2.0, "B2": 4.0}) == pytest.approx(100 - 20 - 20 - 20)


def test_zero_beta_pricing_equals_monthly_model(small):
    inst, nets = small
    for m in inst.months:
        pr = price_month(inst, nets, m, -math.inf, {b.id: 0.0 for b in inst.families})
        oracle = solve_lp(build_bim_legbased(inst, nets, relax=True, months=(m,), cover=COVER_LE,
                                             yearly_rhs={b.id: 1e12 for b in inst.families}))
        assert pr.chi == pytest.approx(oracle.objective, rel=1e-9)


def test_huge_beta_prices_to_zero(small):
    inst, nets = small
    pr = price_month(inst, nets, inst.months[0], 0.0, {b.id: 1e9 for b in inst.families})
    assert pr.chi == pytest.approx(0.0, abs=1e-6)
    assert pr.column is None


@pytest.mark.parametrize("seed", [1, 5, 9])
def test_colgen_equals_leg_based_lp(seed):
    inst = tiny(seed, stations=4, legs=10, months=3)
    nets = build_networks(inst)
    state = run_colgen(inst, nets)
    assert state.status == "converged"
    oracle = solve_lp(build_bim_legbased(inst, nets, relax=True, cover=COVER_LE)).objective
    assert state.lp_objective == pytest.approx(oracle, rel=1e-6)
    months = len(inst.months)
    assert state.cgsp_calls == months * state.cgmp_calls + months
    assert all(b >= a - 1e-6 * abs(a) for a, b in zip(state.lp_trace, state.lp_trace[1:]))
    for col in state.all_columns():
        assert reduced_cost(col, state.alpha, state.beta) <= 1e-6 * max(1.0, abs(col.profit))


def test_threads_give_identical_columns(small):
    inst, nets = small
    a = run_colgen(inst, nets, threads=1)
    b = run_colgen(inst, nets, threads=3)
    assert [c.id for c in a.all_columns()] == [c.id for c in b.all_columns()]
    assert a.lp_objective == b.lp_objective


def test_mip_finish_bounds(small):
    inst, nets = small
    state = run_colgen(inst, nets)
    sol = mip_finish(state, nets)
    for r in sol.info["finish"]:
        assert r.mip_objective <= r.lp_objective + 1e-9 * max(1.0, abs(r.lp_objective))
        assert r.gap <= 1e-12
    for b in inst.families:
        used = sum(sol.crew_time_used.get((m, b.id), 0.0) for m in inst.months)
        assert used <= b.crew_count * b.yearly_cap_per_crew + 1e-6
    assert finish_report_csv(sol.info["finish"]).startswith("month,")


def test_mip_finish_zero_gap_when_lp_integral():
    # a single out-and-back with ample crew time: the LP picks one integral column
    inst = hand_instance(TWO_LEGS, demand=200.0)
    nets = build_networks(inst)
    state = run_colgen(inst, nets)
    sol = mip_finish(state, nets)
    (r,) = sol.info["finish"]
    assert r.gap == 0.0
    assert sol.objective == pytest.approx(solve_mip(build_bim_legbased(inst, nets)).objective)


def test_mip_finish_requires_convergence(small):
    inst, nets = small
    state = run_colgen(inst, nets, max_iter=0)
    assert state.status == "iteration_cap"
    with pytest.raises(Exception):
        mip_finish(state, nets)
