"""Minimal LP representation with primal and dual solutions.

Solving is delegated to scipy's HiGHS backend. Duals are reported in shadow
price convention: for a minimization, the dual of any constraint is the
right-derivative of the optimal objective with respect to that constraint's
rhs. HiGHS already reports ``<=`` and ``==`` marginals that way; ``>=`` rows
are stored negated internally and their duals flipped back on extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

DEFAULT_TOLERANCE = 1e-7  # absolute, on constraint residuals and the duality gap

LEQ = "<="
EQ = "=="
GEQ = ">="


class SolverError(RuntimeError):
    """Backend failed to classify the problem (numerical trouble, limits)."""


class InfeasibleError(RuntimeError):
    """Raised by callers that require an optimal solution and got none."""


@dataclass
class _Constraint:
    name: str
    coeffs: dict[str, float]
    relation: str
    rhs: float


class LinearProgram:
    """Named variables, {<=,==,>=} constraints, minimize a linear objective."""

    def __init__(self):
        self._var_names: list[str] = []
        self._var_index: dict[str, int] = {}
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._constraints: list[_Constraint] = []
        self._con_names: set[str] = set()
        self._objective: dict[str, float] = {}
        self.objective_constant = 0.0

    @property
    def variables(self) -> list[str]:
        return list(self._var_names)

    @property
    def constraints(self) -> list[str]:
        return [c.name for c in self._constraints]

    @property
    def objective_coeffs(self) -> dict[str, float]:
        return dict(self._objective)

    def bounds_of(self, name: str) -> tuple[float, float]:
        i = self._var_index[name]
        return self._lower[i], self._upper[i]

    def add_variable(self, name: str, lower: float = -math.inf, upper: float = math.inf) -> str:
        if name in self._var_index:
            raise ValueError(f"variable {name!r} already declared")
        if lower > upper:
            raise ValueError(f"variable {name!r}: lower {lower} > upper {upper}")
        self._var_index[name] = len(self._var_names)
        self._var_names.append(name)
        self._lower.append(lower)
        self._upper.append(upper)
        return name

    def add_constraint(self, name: str, coeffs: dict[str, float], relation: str, rhs: float) -> str:
        if name in self._con_names:
            raise ValueError(f"constraint {name!r} already declared")
        if relation not in (LEQ, EQ, GEQ):
            raise ValueError(f"constraint {name!r}: unknown relation {relation!r}")
        for var in coeffs:
            if var not in self._var_index:
                raise ValueError(f"constraint {name!r} references undeclared variable {var!r}")
        self._con_names.add(name)
        self._constraints.append(_Constraint(name, dict(coeffs), relation, float(rhs)))
        return name

    def set_objective(self, coeffs: dict[str, float], constant: float = 0.0) -> None:
        for var in coeffs:
            if var not in self._var_index:
                raise ValueError(f"objective references undeclared variable {var!r}")
        self._objective = dict(coeffs)
        self.objective_constant = float(constant)


@dataclass
class LpSolution:
    status: str
    objective: float = math.nan
    primal: dict[str, float] = field(default_factory=dict)
    dual: dict[str, float] = field(default_factory=dict)
    duality_gap: float = math.nan
    max_residual: float = math.nan

    def __bool__(self) -> bool:
        return self.status == OPTIMAL


# Running record of solve quality, so a test run can assert the duality gap
# stayed within tolerance on every solve it triggered.
_gap_stats = {"solves": 0, "max_gap": 0.0, "max_residual": 0.0}


def reset_solve_stats() -> None:
    _gap_stats.update(solves=0, max_gap=0.0, max_residual=0.0)


def solve_stats() -> dict[str, float]:
    return dict(_gap_stats)


def solve(lp: LinearProgram, tolerance: float = DEFAULT_TOLERANCE) -> LpSolution:
    """Solve ``lp``; Optimal solutions carry primal, duals, and the duality gap.

    Pure and reentrant. Infeasible/unbounded come back as statuses; anything
    the backend cannot classify raises SolverError.
    """
    nvar = len(lp._var_names)
    if nvar == 0:
        return LpSolution(status=OPTIMAL, objective=lp.objective_constant,
                          duality_gap=0.0, max_residual=0.0)

    c = np.zeros(nvar)
    for var, coef in lp._objective.items():
        c[lp._var_index[var]] = coef
    bounds = list(zip(lp._lower, lp._upper))

    a_ub_rows, b_ub, ub_cons = [], [], []  # (row, rhs, (constraint, sign))
    a_eq_rows, b_eq, eq_cons = [], [], []
    for con in lp._constraints:
        row = np.zeros(nvar)
        for var, coef in con.coeffs.items():
            row[lp._var_index[var]] = coef
        if con.relation == EQ:
            a_eq_rows.append(row)
            b_eq.append(con.rhs)
            eq_cons.append(con)
        elif con.relation == LEQ:
            a_ub_rows.append(row)
            b_ub.append(con.rhs)
            ub_cons.append((con, 1.0))
        else:  # >=  stored as  -a x <= -rhs
            a_ub_rows.append(-row)
            b_ub.append(-con.rhs)
            ub_cons.append((con, -1.0))

    res = linprog(
        c,
        A_ub=np.array(a_ub_rows) if a_ub_rows else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq_rows) if a_eq_rows else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        return LpSolution(status=INFEASIBLE)
    if res.status == 3:
        return LpSolution(status=UNBOUNDED)
    if res.status != 0:
        raise SolverError(f"backend status {res.status}: {res.message}")

    primal = {name: float(res.x[i]) for i, name in enumerate(lp._var_names)}
    dual: dict[str, float] = {}
    for i, con in enumerate(eq_cons):
        dual[con.name] = float(res.eqlin.marginals[i])
    for i, (con, sign) in enumerate(ub_cons):
        dual[con.name] = sign * float(res.ineqlin.marginals[i])

    # Dual objective: y'b plus finite-bound reduced-cost terms. Marginals on
    # infinite bounds are zero, so skip them rather than produce 0 * inf.
    dual_obj = 0.0
    for i, con in enumerate(eq_cons):
        dual_obj += float(res.eqlin.marginals[i]) * b_eq[i]
    for i, (_, _) in enumerate(ub_cons):
        dual_obj += float(res.ineqlin.marginals[i]) * b_ub[i]
    for j in range(nvar):
        if math.isfinite(lp._lower[j]):
            dual_obj += float(res.lower.marginals[j]) * lp._lower[j]
        if math.isfinite(lp._upper[j]):
            dual_obj += float(res.upper.marginals[j]) * lp._upper[j]
    gap = abs(float(res.fun) - dual_obj)

    max_residual = 0.0
    for con in lp._constraints:
        lhs = sum(coef * primal[var] for var, coef in con.coeffs.items())
        if con.relation == EQ:
            resid = abs(lhs - con.rhs)
        elif con.relation == LEQ:
            resid = max(0.0, lhs - con.rhs)
        else:
            resid = max(0.0, con.rhs - lhs)
        max_residual = max(max_residual, resid)

    _gap_stats["solves"] += 1
    _gap_stats["max_gap"] = max(_gap_stats["max_gap"], gap)
    _gap_stats["max_residual"] = max(_gap_stats["max_residual"], max_residual)
    if max_residual > max(100 * tolerance, 1e-9):
        raise SolverError(f"optimal solution violates constraints by {max_residual:g}")
    if gap > max(100 * tolerance, 1e-9):
        raise SolverError(f"duality gap {gap:g} exceeds tolerance")

    return LpSolution(
        status=OPTIMAL,
        objective=float(res.fun) + lp.objective_constant,
        primal=primal,
        dual=dual,
        duality_gap=gap,
        max_residual=max_residual,
    )
