"""Two-phase primal simplex with certificates and reoptimization.

Programs are solved in standard form (slacks added to the <= rows, all
variables bounded below by zero) with a revised simplex: the basis inverse
is maintained explicitly and refactorized periodically.  Pricing is by
most-negative reduced cost, switching to Bland's rule after 10 * (rows +
columns) pivots to rule out cycling.  Everything is deterministic for a
given program.

The solver keeps its feasible basis between calls, so many objectives can
be bounded over one constraint set without repeating phase 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraints import Constraint, LinExpr
from .errors import IterationLimitError, MarginBoundError

FEAS_TOL = 1e-7  # phase-1 objective threshold for declaring infeasibility
PIVOT_TOL = 1e-9
REDUCED_COST_TOL = 1e-9
PIVOT_LIMIT = 1_000_000
REFACTOR_EVERY = 200

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """min/max objective over equality and <= constraints, variables >= 0."""

    n_vars: int
    objective: LinExpr
    equalities: list[Constraint] = field(default_factory=list)
    inequalities: list[Constraint] = field(default_factory=list)


@dataclass
class SolveOutcome:
    status: str
    value: float | None
    certificate: np.ndarray | None
    iterations: int
    pivots: int
    dual_values: np.ndarray | None = None
    duality_gap: float | None = None


@dataclass
class BoundsResult:
    """[lower, upper] interval with attaining parameter vectors."""

    query: str
    lower: float | None
    upper: float | None
    lower_certificate: np.ndarray | None
    upper_certificate: np.ndarray | None
    lower_status: str = STATUS_OPTIMAL
    upper_status: str = STATUS_OPTIMAL

    @property
    def falsified(self) -> bool:
        # the feasible set is shared by both directions, so one infeasible
        # verdict falsifies the whole model
        return STATUS_INFEASIBLE in (self.lower_status, self.upper_status)

    @property
    def width(self) -> float | None:
        if self.lower is None or self.upper is None:
            return None
        return self.upper - self.lower


class SimplexSolver:
    """Standard-form simplex over a fixed constraint set.

    ``minimize`` may be called repeatedly with different objectives; the
    feasible basis found by phase 1 is reused (classic reoptimization).
    """

    def __init__(
        self,
        n_vars: int,
        equalities: Sequence[Constraint],
        inequalities: Sequence[Constraint],
        feas_tol: float = FEAS_TOL,
    ):
        self.n_struct = n_vars
        self.feas_tol = feas_tol
        m = len(equalities) + len(inequalities)
        n_slack = len(inequalities)
        self.n_total = n_vars + n_slack
        A = np.zeros((m, self.n_total))
        b = np.zeros(m)
        tags: list[str] = []
        for i, con in enumerate(list(equalities) + list(inequalities)):
            if con.expr.terms:
                idx = np.fromiter(con.expr.terms.keys(), dtype=np.int64, count=len(con.expr.terms))
                val = np.fromiter(con.expr.terms.values(), dtype=np.float64, count=len(con.expr.terms))
                if idx.min() < 0 or idx.max() >= n_vars:
                    raise ValueError(f"constraint {con.tag} references index outside [0, {n_vars})")
                A[i, idx] = val
            b[i] = -con.expr.const
            if con.relation == "<=":
                A[i, n_vars + (i - len(equalities))] = 1.0
            elif con.relation != "=":
                raise ValueError(f"unknown relation {con.relation!r} in {con.tag}")
            tags.append(con.tag)
        neg = b < 0
        A[neg] *= -1.0
        b[neg] = -b[neg]
        self.A = A
        self.b = b
        self.row_tags = tags
        self._n_eq = len(equalities)
        self._neg_rows = neg
        self._basis: np.ndarray | None = None  # feasible basis, set by phase 1
        self._binv: np.ndarray | None = None
        self.pivots_total = 0

    # -- basis plumbing ---------------------------------------------------

    def _column(self, j: int) -> np.ndarray:
        if j < self.n_total:
            return self.A[:, j]
        e = np.zeros(self.A.shape[0])
        e[j - self.n_total] = 1.0
        return e

    def _basis_matrix(self, basis: np.ndarray) -> np.ndarray:
        m = self.A.shape[0]
        B = np.empty((m, m))
        for r, j in enumerate(basis):
            B[:, r] = self._column(int(j))
        return B

    def _refactor(self, basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.A.shape[0]
        binv = np.linalg.solve(self._basis_matrix(basis), np.eye(m))
        xb = binv @ self.b
        xb[np.abs(xb) < 1e-12] = 0.0
        return binv, xb

    def _basic_costs(self, costs: np.ndarray, basis: np.ndarray, art_cost: float) -> np.ndarray:
        safe = np.minimum(basis, max(self.n_total - 1, 0))
        return np.where(basis < self.n_total, costs[safe], art_cost)

    # -- core loop --------------------------------------------------------

    def _iterate(
        self,
        costs: np.ndarray,
        art_cost: float,
        basis: np.ndarray,
        binv: np.ndarray,
        xb: np.ndarray,
    ) -> tuple[str, np.ndarray, np.ndarray, np.ndarray, int, int]:
        """Run primal simplex to optimality or unboundedness."""
        m = self.A.shape[0]
        bland_after = 10 * (m + self.n_total)
        iterations = 0
        pivots = 0
        since_refactor = 0
        in_basis = np.zeros(self.n_total, dtype=bool)
        real = basis[basis < self.n_total]
        in_basis[real] = True

        while True:
            iterations += 1
            if self.pivots_total >= PIVOT_LIMIT:
                raise IterationLimitError(f"pivot limit {PIVOT_LIMIT} reached without a verdict")
            y = self._basic_costs(costs, basis, art_cost) @ binv
            reduced = costs - y @ self.A
            reduced[in_basis] = 0.0
            candidates = reduced < -REDUCED_COST_TOL
            if not candidates.any():
                if since_refactor > 0:
                    # certify optimality against a fresh factorization
                    binv, xb = self._refactor(basis)
                    since_refactor = 0
                    y = self._basic_costs(costs, basis, art_cost) @ binv
                    reduced = costs - y @ self.A
                    reduced[in_basis] = 0.0
                    candidates = reduced < -REDUCED_COST_TOL
                if not candidates.any():
                    return STATUS_OPTIMAL, basis, binv, xb, iterations, pivots
            bland = pivots > bland_after
            if bland:
                j = int(np.argmax(candidates))  # first eligible: Bland's rule
            else:
                j = int(np.argmin(reduced))
            d = binv @ self.A[:, j]
            pos = d > PIVOT_TOL
            if not pos.any():
                if since_refactor > 0:
                    binv, xb = self._refactor(basis)
                    since_refactor = 0
                    d = binv @ self.A[:, j]
                    pos = d > PIVOT_TOL
                if not pos.any():
                    return STATUS_UNBOUNDED, basis, binv, xb, iterations, pivots
            ratios = np.where(pos, np.maximum(xb, 0.0) / np.where(pos, d, 1.0), np.inf)
            best = float(ratios.min())
            tied = np.nonzero(ratios <= best + 1e-12)[0]
            if bland:
                r = int(tied[np.argmin(basis[tied])])  # anti-cycling tie-break
            else:
                r = int(tied[np.argmax(d[tied])])  # largest pivot keeps B well-conditioned
            theta = ratios[r]
            leaving = int(basis[r])
            pivot_row = binv[r] / d[r]
            binv = binv - np.outer(d, pivot_row)
            binv[r] = pivot_row
            xb = xb - theta * d
            xb[r] = theta
            xb[np.abs(xb) < 1e-13] = 0.0
            basis = basis.copy()
            basis[r] = j
            if leaving < self.n_total:
                in_basis[leaving] = False
            in_basis[j] = True
            pivots += 1
            self.pivots_total += 1
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                binv, xb = self._refactor(basis)
                since_refactor = 0

    # -- phase 1 ----------------------------------------------------------

    def _phase1(self) -> tuple[str, int, int]:
        m = self.A.shape[0]
        if m == 0:
            self._basis = np.zeros(0, dtype=np.int64)
            self._binv = np.zeros((0, 0))
            return STATUS_OPTIMAL, 0, 0
        basis = np.empty(m, dtype=np.int64)
        for i in range(m):
            if i >= self._n_eq and not self._neg_rows[i]:
                basis[i] = self.n_struct + (i - self._n_eq)  # slack with +1 coefficient
            else:
                basis[i] = self.n_total + i  # artificial
        binv, xb = self._refactor(basis)
        costs = np.zeros(self.n_total)
        status, basis, binv, xb, iters, pivots = self._iterate(costs, 1.0, basis, binv, xb)
        if status != STATUS_OPTIMAL:
            raise MarginBoundError("phase 1 failed to reach an optimum (numerical breakdown)")
        infeas = float(xb[basis >= self.n_total].sum())
        if infeas > self.feas_tol:
            return STATUS_INFEASIBLE, iters, pivots

        # drive zero-level artificials out of the basis; rows that offer no
        # pivot are linearly dependent on the others and are dropped.
        # Artificials basic at a nonzero level (possible when feas_tol was
        # relaxed for noisy tables) stay put and absorb the residual.
        drop_rows: list[int] = []
        in_basis = np.zeros(self.n_total, dtype=bool)
        in_basis[basis[basis < self.n_total]] = True
        for r in range(m):
            if basis[r] < self.n_total or xb[r] > 1e-11:
                continue
            row = binv[r] @ self.A
            row[in_basis] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > PIVOT_TOL:
                d = binv @ self.A[:, j]
                pivot_row = binv[r] / d[r]
                binv = binv - np.outer(d, pivot_row)
                binv[r] = pivot_row
                basis[r] = j
                in_basis[j] = True
                self.pivots_total += 1
                pivots += 1
            else:
                drop_rows.append(r)
        if drop_rows:
            keep = np.setdiff1d(np.arange(m), np.asarray(drop_rows))
            self.A = self.A[keep]
            self.b = self.b[keep]
            self.row_tags = [self.row_tags[i] for i in keep]
            basis = basis[keep]
            # artificial ids are row-based; remap them onto the surviving rows
            new_row = {int(old): new for new, old in enumerate(keep)}
            for r in range(basis.size):
                if basis[r] >= self.n_total:
                    basis[r] = self.n_total + new_row[int(basis[r]) - self.n_total]
        self._basis = basis
        self._binv, _ = self._refactor(basis)
        return STATUS_OPTIMAL, iters, pivots

    # -- public -----------------------------------------------------------

    def minimize(self, objective: LinExpr, sign: float = 1.0) -> SolveOutcome:
        """Minimize sign * objective over the constraint set."""
        iters = 0
        pivots = 0
        if self._basis is None:
            status, i1, p1 = self._phase1()
            iters += i1
            pivots += p1
            if status == STATUS_INFEASIBLE:
                return SolveOutcome(STATUS_INFEASIBLE, None, None, iters, pivots)
        assert self._basis is not None and self._binv is not None
        basis = self._basis
        binv = self._binv
        xb = binv @ self.b
        xb[np.abs(xb) < 1e-12] = 0.0
        costs = np.concatenate(
            [sign * objective.dense(self.n_struct), np.zeros(self.n_total - self.n_struct)]
        )
        status, basis, binv, xb, i2, p2 = self._iterate(costs, 0.0, basis, binv, xb)
        iters += i2
        pivots += p2
        self._basis = basis  # still primal feasible, whatever the verdict
        self._binv = binv
        if status == STATUS_UNBOUNDED:
            return SolveOutcome(STATUS_UNBOUNDED, None, None, iters, pivots)
        x = np.zeros(self.n_total)
        real = basis < self.n_total
        x[basis[real]] = xb[real]
        theta = x[: self.n_struct].copy()
        value = float(objective.value_at(theta))
        y = self._basic_costs(costs, basis, 0.0) @ binv
        dual = float(y @ self.b) + sign * objective.const
        gap = abs(sign * value - dual)
        return SolveOutcome(STATUS_OPTIMAL, value, theta, iters, pivots, y, gap)

    def bounds(self, objective: LinExpr, label: str = "") -> BoundsResult:
        lo = self.minimize(objective, sign=1.0)
        if lo.status == STATUS_INFEASIBLE:
            return BoundsResult(label, None, None, None, None, lo.status, lo.status)
        hi = self.minimize(objective, sign=-1.0)
        return BoundsResult(
            label, lo.value, hi.value, lo.certificate, hi.certificate, lo.status, hi.status
        )


def solve(lp: LinearProgram, direction: str = "min") -> SolveOutcome:
    """Cold-start solve of one program in the given direction."""
    if direction not in ("min", "max"):
        raise ValueError(f"direction must be 'min' or 'max', got {direction!r}")
    solver = SimplexSolver(lp.n_vars, lp.equalities, lp.inequalities)
    return solver.minimize(lp.objective, sign=1.0 if direction == "min" else -1.0)


def bound_query(lp: LinearProgram, label: str = "") -> BoundsResult:
    """Minimum and maximum of the objective, with attaining certificates."""
    solver = SimplexSolver(lp.n_vars, lp.equalities, lp.inequalities)
    return solver.bounds(lp.objective, label)
