from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfacpp.extensions import (
    absence_cost,
    base_crew_duals,
    build_tfacpp_ct,
    build_tfacpp_cu,
    cu_yearly_rhs,
    monte_carlo_check,
    quantile_index,
    transition_costs,
    transition_plan,
)
from tfacpp.instance import TransitionArc, Uncertainty
from tfacpp.models import build_bim_legbased, extract_solution
from tfacpp.solver import Status, solve_lp, solve_mip
from tfacpp.timespace import build_networks

from conftest import tiny


def cum_oracle(phi, eps):
    total = 0.0
    for q, p in enumerate(phi, start=1):
        total += p
        if eps <= total + 1e-12:
            return q
    return len(phi)


def test_quantile_single_scenario():
    q = quantile_index([1000.0], [1.0], 0.1)
    assert (q.q0, q.value) == (1, 1000.0)


def test_quantile_middle():
    q = quantile_index([900.0, 950.0, 1000.0], [0.3, 0.4, 0.3], 0.5)
    assert (q.q0, q.value) == (2, 950.0)


def test_quantile_breakpoint():
    assert quantile_index([900.0, 950.0, 1000.0], [0.3, 0.4, 0.3], 0.3).q0 == 1


@pytest.mark.parametrize("eps", np.linspace(0.01, 0.99, 25))
def test_quantile_grid_matches_oracle(eps):
    phi = [0.1, 0.25, 0.05, 0.4, 0.2]
    assert quantile_index([1, 2, 3, 4, 5], phi, float(eps)).q0 == cum_oracle(phi, eps)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8), st.floats(0.001, 0.999))
def test_quantile_bracket_property(seed, n, eps):
    rng = np.random.default_rng(seed)
    phi = rng.dirichlet(np.ones(n))
    phi[-1] = 1.0 - phi[:-1].sum()
    q = quantile_index(np.sort(rng.uniform(100, 1000, n)), phi, eps)
    assert phi[: q.q0 - 1].sum() < eps + 1e-12
    assert eps <= phi[: q.q0].sum() + 1e-12


def test_quantile_bad_inputs():
    with pytest.raises(ValueError):
        quantile_index([1.0], [0.5], 0.1)
    with pytest.raises(ValueError):
        quantile_index([1.0], [1.0], 1.0)


def test_absence_cost_examples():
    # half a year at a yearly marginal profit of 2,000,000 (beta x hours)
    assert absence_cost(0.5, 2000.0, 1000.0) == pytest.approx(1_000_000)
    assert absence_cost(0.5, 0.0, 1000.0) == 0.0
    assert absence_cost(1.0, 3.0, 500.0) == 2 * absence_cost(0.5, 3.0, 500.0)


def with_transition(inst, cost=0, cap=3, starve=True, training=0.0):
    fams = inst.families
    if starve:
        fams = (fams[0], replace(fams[1], crew_count=max(1, fams[1].crew_count // 3)))
    arc = TransitionArc(fams[0].id, fams[1].id, cost, cap, training)
    return replace(inst, families=fams, transition=(arc,))


def test_caps_zero_reduce_to_base():
    inst = with_transition(tiny(2), cap=0)
    nets = build_networks(inst)
    a = solve_mip(build_tfacpp_ct(inst, nets), gap=0.0).objective
    b = solve_mip(build_bim_legbased(inst, nets), gap=0.0).objective
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("seed", [1, 2, 4])
def test_ct_matches_brute_force_over_v(seed):
    inst = with_transition(tiny(seed), cost=5000, cap=3)
    nets = build_networks(inst)
    model = build_tfacpp_ct(inst, nets)
    res = solve_mip(model, gap=0.0)
    arc = inst.transition[0]
    best = -np.inf
    for v in range(arc.cap + 1):
        b1, b2 = inst.families
        if v > b1.crew_count:
            break
        moved = replace(inst, families=(replace(b1, crew_count=b1.crew_count - v),
                                        replace(b2, crew_count=b2.crew_count + v)))
        r = solve_mip(build_bim_legbased(moved, nets), gap=0.0)
        if r.status is Status.OPTIMAL:
            best = max(best, r.objective - arc.cost * v)
    assert res.objective == pytest.approx(best, rel=1e-9)
    plan = transition_plan(inst, model, res)
    assert sum(plan.effective_crew.values()) == pytest.approx(sum(b.crew_count for b in inst.families))


def test_free_transitions_never_hurt():
    inst = with_transition(tiny(4), cost=0, cap=2)
    nets = build_networks(inst)
    ct = solve_mip(build_tfacpp_ct(inst, nets), gap=0.0).objective
    base = solve_mip(build_bim_legbased(inst, nets), gap=0.0).objective
    assert ct >= base - 1e-9 * abs(base)


def test_expensive_transition_unused():
    inst = with_transition(tiny(4), cap=2)
    nets = build_networks(inst)
    beta = base_crew_duals(inst, nets)
    target = inst.transition[0].target
    cost = 10 * beta[target] * inst.family_by_id[target].yearly_cap_per_crew + 1e9
    model = build_tfacpp_ct(inst, nets, costs={(inst.transition[0].source, target): cost})
    res = solve_mip(model, gap=0.0)
    assert all(v == 0 for v in transition_plan(inst, model, res).v.values())


def test_transition_costs_add_absence():
    inst = with_transition(tiny(4), cost=100, training=0.5)
    key = (inst.transition[0].source, inst.transition[0].target)
    assert transition_costs(inst)[key] == 100
    b2 = inst.family_by_id[key[1]]
    assert transition_costs(inst, {key[1]: 2.0})[key] == pytest.approx(100 + 0.5 * 2.0 * b2.yearly_cap_per_crew)


def with_uncertainty(inst, eps):
    unc = {}
    for b in inst.families:
        base = b.crew_count * b.yearly_cap_per_crew
        unc[b.id] = Uncertainty((0.97 * base, base, 1.1 * base), (0.2, 0.3, 0.5), eps)
    return replace(inst, uncertainty=unc)


def test_cu_rhs_and_monotone_in_risk():
    inst = tiny(3)
    nets = build_networks(inst)
    values = []
    for eps in (0.1, 0.4, 0.9):
        u = with_uncertainty(inst, eps)
        rhs = cu_yearly_rhs(u)
        oracle = build_bim_legbased(u, nets, relax=True, yearly_rhs=rhs)
        r = solve_lp(build_tfacpp_cu(u, nets, relax=True))
        assert r.objective == pytest.approx(solve_lp(oracle).objective, rel=1e-12)
        values.append(r.objective)
    # higher epsilon picks a larger quantile, so the budget and the optimum grow
    assert values == sorted(values)


def test_monte_carlo_validates_deterministic_equivalent():
    inst = with_uncertainty(tiny(3), 0.3)
    nets = build_networks(inst)
    model = build_tfacpp_cu(inst, nets)
    res = solve_mip(model)
    sol = extract_solution(model, res, inst)
    checks = monte_carlo_check(inst, sol, draws=100_000, seed=1)
    assert all(c.ok for c in checks.values())
    assert all(c.target == pytest.approx(0.7) for c in checks.values())
