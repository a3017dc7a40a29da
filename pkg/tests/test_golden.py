"""Frozen desk-scale results (synthetic seed 0, twelve months)."""

from __future__ import annotations

import pytest

from tfacpp.colgen import mip_finish, run_colgen
from tfacpp.models import COVER_LE, build_bim_legbased
from tfacpp.solver import solve_lp

GOLDEN_LP = 40049351.83568137
GOLDEN_FINISH = 39300457.446


def test_desk_colgen_golden(desk):
    inst, nets = desk
    state = run_colgen(inst, nets)
    assert state.status == "converged"
    assert state.lp_objective == pytest.approx(GOLDEN_LP, rel=1e-9)
    assert solve_lp(build_bim_legbased(inst, nets, relax=True, cover=COVER_LE)).objective == pytest.approx(
        GOLDEN_LP, rel=1e-9)
    assert state.cgsp_calls == 12 * state.cgmp_calls + 12
    sol = mip_finish(state, nets)
    # the finishing MIPs run at a small relative gap, so allow solver-version drift
    assert sol.objective == pytest.approx(GOLDEN_FINISH, rel=1e-3)
    assert sol.objective <= state.lp_objective
