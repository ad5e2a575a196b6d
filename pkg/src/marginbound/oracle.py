"""Independent verification: analytic bounds, certificate checking, and the
full-parameterization baseline.

Everything here deliberately avoids the simplex machinery: constraints are
re-evaluated by direct summation, and the reference bounds come from
closed-form expressions, so agreement with the LP route is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constraints import Constraint, assemble_constraints, query_objective
from .errors import TooLargeError
from .model import MarginSpec, ModelSpec, Query, RegimeTable
from .simplex import BoundsResult, SimplexSolver


def manski_bounds(p_obs: RegimeTable, x: int) -> tuple[float, float]:
    """No-assumptions bounds on P(B=1 | do(A=x)) from a 2-variable
    observational table (A = variable 0, B = variable 1).

    lower = P(B=1, A=x); upper adds the whole unobserved arm P(A != x).
    """
    if p_obs.n_vars != 2:
        raise ValueError("expected a table over exactly two variables")
    if p_obs.regime.interventions:
        raise ValueError("expected the observational regime")
    lo = p_obs.event_prob({0: x, 1: 1})
    return lo, lo + p_obs.event_prob({0: 1 - x})


@dataclass
class Violation:
    tag: str
    amount: float

    def to_json_dict(self) -> dict:
        return {"tag": self.tag, "violation": self.amount}


@dataclass
class CertificateReport:
    max_violation: float
    worst_tag: str
    violations: list[Violation]

    def ok(self, tol: float) -> bool:
        return self.max_violation <= tol

    def to_json_dict(self) -> dict:
        return {
            "max_violation": self.max_violation,
            "worst_tag": self.worst_tag,
            "violations": [v.to_json_dict() for v in self.violations],
        }


def check_certificate(
    theta: np.ndarray, constraints: Sequence[Constraint], tol: float = 1e-7
) -> CertificateReport:
    """Re-evaluate every constraint at theta by direct summation.

    Also checks nonnegativity of every coordinate.  Violations above
    ``tol`` are listed; the maximum over all rows is always reported.
    """
    theta = np.asarray(theta, dtype=float)
    worst = 0.0
    worst_tag = ""
    violations: list[Violation] = []

    def note(tag: str, amount: float) -> None:
        nonlocal worst, worst_tag
        if amount > worst:
            worst, worst_tag = amount, tag
        if amount > tol:
            violations.append(Violation(tag, amount))

    neg = np.nonzero(theta < 0)[0]
    for g in neg:
        note(f"nonneg:{g}", float(-theta[g]))
    for con in constraints:
        value = con.expr.value_at(theta)
        amount = abs(value) if con.relation == "=" else max(0.0, value)
        note(con.tag, amount)
    return CertificateReport(worst, worst_tag, violations)


MAX_FULL_VARS = 4


def full_margin_spec(n_vars: int, regimes=()) -> ModelSpec:
    """A model with the single margin covering every variable."""
    return ModelSpec(
        n_vars=n_vars,
        margins=(MarginSpec(id=1, vars=tuple(range(n_vars))),),
        regimes_available=tuple(regimes),
    )


def full_margin_solver(tables: Sequence[RegimeTable], n_vars: int):
    """Constraint system and reusable solver for the full parameterization.

    Rejected for n >= 5: the joint response space for five variables
    already has 2**31 indices.
    """
    if n_vars > MAX_FULL_VARS:
        raise TooLargeError(
            f"full parameterization of {n_vars} variables needs "
            f"2**{sum(1 << k for k in range(n_vars))} parameters; capped at n={MAX_FULL_VARS}"
        )
    spec = full_margin_spec(n_vars, [t.regime for t in tables])
    system = assemble_constraints(spec, tables)
    solver = SimplexSolver(system.layout.total_dim, system.equalities, system.inequalities)
    return spec, system, solver


def full_margin_baseline(
    tables: Sequence[RegimeTable], query: Query, n_vars: int
) -> BoundsResult:
    """Bounds from the single-margin model over all variables, all data bound."""
    spec, system, solver = full_margin_solver(tables, n_vars)
    objective, _ = query_objective(system.layout, spec, query)
    return solver.bounds(objective, query.label())
