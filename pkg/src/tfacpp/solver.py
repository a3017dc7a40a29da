"""Backend-neutral LP/MIP model container and HiGHS (via SciPy) solve calls.

Dual convention: ``SolveResult.duals[c]`` is the derivative of the optimal
objective with respect to the right-hand side of constraint ``c``, in the
model's own sense. For a maximization, ``<=`` rows therefore carry
nonnegative duals and ``>=`` rows nonpositive ones; for a minimization it is
the other way round.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

LP_FEAS_TOL = 1e-7
MIP_GAP = 1e-4
CGSP_MIP_GAP = 1e-3

_SENSES = ("<=", "==", ">=")


class Sense(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"
    ERROR = "error"


class SolverError(RuntimeError):
    """The backend failed in a way that is not a model status."""


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    obj: float = 0.0
    integer: bool = False


@dataclass
class Constraint:
    name: str
    coeffs: Dict[str, float]
    sense: str
    rhs: float


@dataclass
class SolveResult:
    status: Status
    objective: float = math.nan
    primal: Dict[str, float] = field(default_factory=dict)
    duals: Dict[str, float] = field(default_factory=dict)
    gap: float = 0.0
    wall_time: float = 0.0
    dual_bound: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class LinearModel:
    """A linear (mixed-integer) program with named variables and rows."""

    def __init__(self, name: str = "model", sense: Sense = Sense.MAXIMIZE):
        self.name = name
        self.sense = Sense(sense)
        self.variables: Dict[str, Variable] = {}
        self.constraints: Dict[str, Constraint] = {}
        self.objective_offset = 0.0
        self.meta: Dict[str, object] = {}

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, obj: float = 0.0,
                integer: bool = False) -> str:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name}")
        if not math.isfinite(obj):
            raise ValueError(f"non-finite objective coefficient on {name}")
        self.variables[name] = Variable(name, float(lb), float(ub), float(obj), bool(integer))
        return name

    def add_constr(self, name: str, coeffs: Mapping[str, float], sense: str, rhs: float) -> str:
        if name in self.constraints:
            raise ValueError(f"duplicate constraint {name}")
        if sense not in _SENSES:
            raise ValueError(f"bad sense {sense!r}")
        row: Dict[str, float] = {}
        for v, a in coeffs.items():
            if v not in self.variables:
                raise KeyError(f"constraint {name} references unknown variable {v}")
            if not math.isfinite(a):
                raise ValueError(f"non-finite coefficient in {name}")
            row[v] = row.get(v, 0.0) + float(a)
        row = {v: a for v, a in row.items() if a != 0.0}
        self.constraints[name] = Constraint(name, row, sense, float(rhs))
        return name

    def set_obj(self, name: str, coeff: float) -> None:
        self.variables[name].obj = float(coeff)

    # evaluation helpers ------------------------------------------------

    def evaluate(self, values: Mapping[str, float]) -> float:
        return self.objective_offset + sum(v.obj * values.get(k, 0.0) for k, v in self.variables.items())

    def activity(self, constraint: str, values: Mapping[str, float]) -> float:
        return sum(a * values.get(v, 0.0) for v, a in self.constraints[constraint].coeffs.items())

    def violations(self, values: Mapping[str, float], tol: float = 1e-6) -> List[str]:
        bad = []
        for c in self.constraints.values():
            lhs = self.activity(c.name, values)
            scale = tol * max(1.0, abs(c.rhs))
            if (c.sense == "<=" and lhs > c.rhs + scale) or (c.sense == ">=" and lhs < c.rhs - scale) or (
                c.sense == "==" and abs(lhs - c.rhs) > scale
            ):
                bad.append(c.name)
        for v in self.variables.values():
            x = values.get(v.name, 0.0)
            if x < v.lb - tol or x > v.ub + tol:
                bad.append(v.name)
        return bad

    def relaxed(self) -> "LinearModel":
        out = LinearModel(self.name, self.sense)
        out.variables = {k: Variable(v.name, v.lb, v.ub, v.obj, False) for k, v in self.variables.items()}
        out.constraints = {k: Constraint(c.name, dict(c.coeffs), c.sense, c.rhs) for k, c in self.constraints.items()}
        out.objective_offset = self.objective_offset
        out.meta = dict(self.meta)
        return out

    @property
    def is_mip(self) -> bool:
        return any(v.integer for v in self.variables.values())

    # export -------------------------------------------------------------

    def to_lp(self) -> str:
        """CPLEX LP-format text of the model."""
        def nm(s: str) -> str:
            return re.sub(r"[^A-Za-z0-9_.]", "_", s)

        def expr(coeffs: Mapping[str, float]) -> str:
            if not coeffs:
                return "0"
            return " ".join(f"{'+' if a >= 0 else '-'} {abs(a):.12g} {nm(v)}" for v, a in coeffs.items())

        lines = [f"\\ {self.name}", "Maximize" if self.sense is Sense.MAXIMIZE else "Minimize"]
        lines.append(" obj: " + expr({k: v.obj for k, v in self.variables.items() if v.obj}))
        lines.append("Subject To")
        for c in self.constraints.values():
            op = {"<=": "<=", ">=": ">=", "==": "="}[c.sense]
            lines.append(f" {nm(c.name)}: {expr(c.coeffs)} {op} {c.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables.values():
            lo = "-inf" if v.lb == -math.inf else f"{v.lb:.12g}"
            hi = "+inf" if v.ub == math.inf else f"{v.ub:.12g}"
            lines.append(f" {lo} <= {nm(v.name)} <= {hi}")
        ints = [nm(v.name) for v in self.variables.values() if v.integer]
        if ints:
            lines.append("General")
            lines.append(" " + " ".join(ints))
        lines.append("End")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------


@dataclass
class _Arrays:
    names: List[str]
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    A: sparse.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    row_names: List[str]
    row_sense: List[str]


def _arrays(model: LinearModel) -> _Arrays:
    names = list(model.variables)
    index = {n: i for i, n in enumerate(names)}
    sign = -1.0 if model.sense is Sense.MAXIMIZE else 1.0
    c = np.array([sign * model.variables[n].obj for n in names], dtype=float)
    lb = np.array([model.variables[n].lb for n in names], dtype=float)
    ub = np.array([model.variables[n].ub for n in names], dtype=float)
    integrality = np.array([1 if model.variables[n].integer else 0 for n in names])
    rows, cols, vals = [], [], []
    lo, hi, rnames, rsense = [], [], [], []
    for r, con in enumerate(model.constraints.values()):
        for v, a in con.coeffs.items():
            rows.append(r)
            cols.append(index[v])
            vals.append(a)
        lo.append(-np.inf if con.sense == "<=" else con.rhs)
        hi.append(np.inf if con.sense == ">=" else con.rhs)
        rnames.append(con.name)
        rsense.append(con.sense)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(rnames), len(names)))
    return _Arrays(names, c, lb, ub, integrality, A, np.array(lo), np.array(hi), rnames, rsense)


def _status_from_linprog(code: int) -> Status:
    return {0: Status.OPTIMAL, 1: Status.LIMIT, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}.get(code, Status.ERROR)


def solve_lp(model: LinearModel, time_limit: Optional[float] = None) -> SolveResult:
    """Solve the LP relaxation of ``model`` (integrality is ignored)."""
    t0 = time.perf_counter()
    if not model.variables:
        return _empty_solve(model, t0)
    arr = _arrays(model)
    ub_rows = [i for i, s in enumerate(arr.row_sense) if s != "=="]
    eq_rows = [i for i, s in enumerate(arr.row_sense) if s == "=="]
    # >= rows are negated into <= form
    flip = np.array([-1.0 if arr.row_sense[i] == ">=" else 1.0 for i in ub_rows])
    A_ub = b_ub = A_eq = b_eq = None
    if ub_rows:
        A_ub = sparse.diags(flip) @ arr.A[ub_rows]
        b_ub = flip * np.array([arr.row_hi[i] if arr.row_sense[i] == "<=" else arr.row_lo[i] for i in ub_rows])
    if eq_rows:
        A_eq = arr.A[eq_rows]
        b_eq = arr.row_lo[eq_rows]
    options = {"primal_feasibility_tolerance": LP_FEAS_TOL, "dual_feasibility_tolerance": LP_FEAS_TOL}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    bounds = list(zip(arr.lb, arr.ub))
    try:
        res = linprog(arr.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs",
                      options=options)
    except ValueError as exc:
        raise SolverError(str(exc)) from exc
    status = _status_from_linprog(res.status)
    out = SolveResult(status=status, wall_time=time.perf_counter() - t0)
    if status is not Status.OPTIMAL:
        return out
    obj_sign = -1.0 if model.sense is Sense.MAXIMIZE else 1.0
    out.objective = obj_sign * res.fun + model.objective_offset
    out.dual_bound = out.objective
    out.primal = dict(zip(arr.names, (float(v) for v in res.x)))
    duals: Dict[str, float] = {}
    if ub_rows:
        for i, s, mu in zip(ub_rows, flip, res.ineqlin.marginals):
            duals[arr.row_names[i]] = float(obj_sign * s * mu)
    if eq_rows:
        for i, mu in zip(eq_rows, res.eqlin.marginals):
            duals[arr.row_names[i]] = float(obj_sign * mu)
    out.duals = duals
    return out


def solve_mip(model: LinearModel, gap: float = MIP_GAP, time_limit: Optional[float] = None) -> SolveResult:
    """Solve ``model`` honouring integrality; LP models are passed to :func:`solve_lp`."""
    if not model.is_mip:
        return solve_lp(model, time_limit)
    t0 = time.perf_counter()
    arr = _arrays(model)
    options = {"disp": False, "mip_rel_gap": float(gap), "presolve": True}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    constraints = [LinearConstraint(arr.A, arr.row_lo, arr.row_hi)] if arr.row_names else []
    try:
        res = milp(arr.c, integrality=arr.integrality, bounds=Bounds(arr.lb, arr.ub), constraints=constraints,
                   options=options)
    except ValueError as exc:
        raise SolverError(str(exc)) from exc
    status = {0: Status.OPTIMAL, 1: Status.LIMIT, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}.get(res.status,
                                                                                               Status.ERROR)
    out = SolveResult(status=status, wall_time=time.perf_counter() - t0)
    if res.x is None:
        if status is Status.OPTIMAL:
            out.status = Status.ERROR
        return out
    obj_sign = -1.0 if model.sense is Sense.MAXIMIZE else 1.0
    x = np.where(arr.integrality == 1, np.round(res.x), res.x)
    out.primal = dict(zip(arr.names, (float(v) for v in x)))
    out.objective = obj_sign * res.fun + model.objective_offset
    out.gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
    bound = getattr(res, "mip_dual_bound", None)
    out.dual_bound = obj_sign * float(bound) + model.objective_offset if bound is not None else out.objective
    return out


def _empty_solve(model: LinearModel, t0: float) -> SolveResult:
    for c in model.constraints.values():
        if (c.sense == "<=" and c.rhs < -LP_FEAS_TOL) or (c.sense == ">=" and c.rhs > LP_FEAS_TOL) or (
            c.sense == "==" and abs(c.rhs) > LP_FEAS_TOL
        ):
            return SolveResult(Status.INFEASIBLE, wall_time=time.perf_counter() - t0)
    return SolveResult(Status.OPTIMAL, objective=model.objective_offset, dual_bound=model.objective_offset,
                       duals={c: 0.0 for c in model.constraints}, wall_time=time.perf_counter() - t0)
