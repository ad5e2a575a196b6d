"""Translate a model plus regime tables into linear constraints over theta.

The decision vector concatenates one probability block per (margin, scope
value): the distribution over that margin's joint response indices.  Every
builder returns constraints carrying a human-readable provenance tag.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    MarginBoundError,
    QueryScopeError,
    RegimeNotInDataError,
    RegimeOutsideMarginError,
    ScopeMismatchError,
    TooLargeError,
)
from .model import (
    MarginSpec,
    ModelSpec,
    Query,
    Regime,
    RegimeTable,
    WeakEdgeSpec,
    find_table,
    select_margin_for_query,
    validate_model,
    var_name,
)
from .responses import MAX_BLOCK_SIZE, ResponseSpace, margin_event_code, outcome_codes


@dataclass(frozen=True)
class ThetaBlock:
    margin_id: int
    scope_value: tuple[int, ...]
    offset: int
    size: int


class ThetaLayout:
    """Offsets of every (margin, scope value) block in the decision vector."""

    def __init__(self, spec: ModelSpec):
        blocks: list[ThetaBlock] = []
        offset = 0
        for m in spec.margins:
            size = ResponseSpace.for_margin(m).total_size
            if size > MAX_BLOCK_SIZE:
                raise TooLargeError(
                    f"margin {m.label()} needs {size} parameters per block; "
                    f"blocks are capped at {MAX_BLOCK_SIZE}"
                )
            for sv in m.blocks():
                blocks.append(ThetaBlock(m.id, sv, offset, size))
                offset += size
        self.blocks: tuple[ThetaBlock, ...] = tuple(blocks)
        self.total_dim: int = offset
        self._index = {(b.margin_id, b.scope_value): b for b in blocks}

    def block(self, margin_id: int, scope_value: tuple[int, ...] = ()) -> ThetaBlock:
        try:
            return self._index[(margin_id, tuple(scope_value))]
        except KeyError:
            raise KeyError(f"no parameter block for margin M{margin_id}, scope {scope_value}")

    def block_slice(self, margin_id: int, scope_value: tuple[int, ...] = ()) -> slice:
        b = self.block(margin_id, scope_value)
        return slice(b.offset, b.offset + b.size)


@dataclass
class LinExpr:
    """Sparse linear expression: sum of coefficient * theta[index] + const."""

    terms: dict[int, float] = field(default_factory=dict)
    const: float = 0.0

    @classmethod
    def from_indices(cls, indices: Iterable[int], coefficient: float = 1.0) -> "LinExpr":
        return cls({int(i): coefficient for i in indices})

    def add_term(self, index: int, coefficient: float) -> None:
        c = self.terms.get(index, 0.0) + coefficient
        if c == 0.0:
            self.terms.pop(index, None)
        else:
            self.terms[index] = c

    def plus(self, other: "LinExpr") -> "LinExpr":
        out = LinExpr(dict(self.terms), self.const + other.const)
        for i, c in other.terms.items():
            out.add_term(i, c)
        return out

    def minus(self, other: "LinExpr") -> "LinExpr":
        return self.plus(other.scaled(-1.0))

    def scaled(self, factor: float) -> "LinExpr":
        return LinExpr({i: c * factor for i, c in self.terms.items()}, self.const * factor)

    def shifted(self, delta: float) -> "LinExpr":
        return LinExpr(dict(self.terms), self.const + delta)

    def value_at(self, theta: np.ndarray) -> float:
        return float(sum(c * theta[i] for i, c in self.terms.items()) + self.const)

    def dense(self, n: int) -> np.ndarray:
        row = np.zeros(n)
        if self.terms:
            idx = np.fromiter(self.terms.keys(), dtype=np.int64, count=len(self.terms))
            val = np.fromiter(self.terms.values(), dtype=np.float64, count=len(self.terms))
            row[idx] = val
        return row

    def is_zero(self) -> bool:
        return not self.terms and self.const == 0.0


@dataclass
class Constraint:
    """expr = 0 or expr <= 0, with the right-hand side folded into expr.const."""

    expr: LinExpr
    relation: str  # "=" | "<="
    tag: str


def scope_label(scope_value: tuple[int, ...]) -> str:
    return "" if not scope_value else ":scope=" + "".join(str(b) for b in scope_value)


def implied_prob_expr(
    layout: ThetaLayout,
    margin: MarginSpec,
    scope_value: tuple[int, ...],
    regime: Regime,
    event: Mapping[int, int],
) -> LinExpr:
    """Probability of a partial margin assignment under a within-margin regime.

    Coefficient 1 on every joint response index whose propagated outcome
    matches the event on the event's variables (unmentioned margin
    variables are summed over), 0 elsewhere.
    """
    for v in event:
        if v not in margin.vars:
            raise MarginBoundError(
                f"event variable {var_name(v)} outside margin {margin.label()}"
            )
    codes = outcome_codes(margin, regime)
    mask, want = margin_event_code(margin, dict(event))
    matches = np.nonzero((codes & mask) == want)[0]
    block = layout.block(margin.id, scope_value)
    return LinExpr.from_indices(matches + block.offset)


def simplex_constraints(layout: ThetaLayout) -> list[Constraint]:
    """One sum-to-one equality per block.

    Nonnegativity of every coordinate is a structural bound of the linear
    program (all decision variables have lower bound 0), not a row here.
    """
    out = []
    for b in layout.blocks:
        expr = LinExpr.from_indices(range(b.offset, b.offset + b.size)).shifted(-1.0)
        out.append(Constraint(expr, "=", f"simplex:M{b.margin_id}{scope_label(b.scope_value)}"))
    return out


def _assignments(variables: Sequence[int]) -> Iterable[dict[int, int]]:
    """All assignments of the given variables, little-endian enumeration order."""
    for bits in range(1 << len(variables)):
        yield {v: (bits >> t) & 1 for t, v in enumerate(variables)}


def _scope_assignment(margin: MarginSpec, scope_value: tuple[int, ...]) -> dict[int, int]:
    return dict(zip(margin.scope_vars, scope_value))


def _event_label(event: Mapping[int, int]) -> str:
    return "".join(str(event[v]) for v in sorted(event))


def data_binding_constraints(
    layout: ThetaLayout,
    margin: MarginSpec,
    scope_value: tuple[int, ...],
    tables: Sequence[RegimeTable],
    skips: list[str] | None = None,
) -> list[Constraint]:
    """Pin the margin's implied interventional probabilities to the data.

    Applies to every table whose intervened set lies inside the margin;
    regimes touching outside variables have no within-margin counterpart
    and are skipped.  Table probabilities are marginalized onto the margin
    and conditioned on the scope assignment; a scope assignment with zero
    probability under a table skips that binding (recorded in ``skips``).
    """
    out = []
    scope_assign = _scope_assignment(margin, scope_value)
    for table in tables:
        do_vars = table.regime.vars
        if not margin.contains(do_vars):
            continue
        if scope_assign:
            if table.event_prob(scope_assign) == 0.0:
                if skips is not None:
                    skips.append(
                        f"binding:{margin.label()}{scope_label(scope_value)}:{table.regime.label()}:"
                        "zero-probability scope assignment"
                    )
                continue
        free = [v for v in margin.vars if v not in do_vars]
        for event in _assignments(free):
            if scope_assign:
                c = table.conditional_prob(event, scope_assign)
            else:
                c = table.event_prob(event)
            expr = implied_prob_expr(layout, margin, scope_value, table.regime, event)
            tag = (
                f"binding:{margin.label()}{scope_label(scope_value)}:"
                f"{table.regime.label()}:v={_event_label(event)}"
            )
            out.append(Constraint(expr.shifted(-c), "=", tag))
    return out


def coherence_constraints(
    layout: ThetaLayout,
    margin_a: MarginSpec,
    margin_b: MarginSpec,
    overlap: Sequence[int],
) -> list[Constraint]:
    """Equate the two margins' distributions on their overlap, per regime.

    Emits one equality per regime do(d), d an assignment of a proper subset
    D of the overlap, and per full assignment of the remaining overlap
    variables.  do(D = overlap) rows are dropped: with the whole overlap
    forced, both sides reduce to total block probability and the row is
    implied by the simplex constraints.  Other redundancies (rows also
    pinned by data binding) are kept; the solver tolerates them.
    """
    o = sorted(overlap)
    if not (set(o) <= set(margin_a.vars) and set(o) <= set(margin_b.vars)):
        raise MarginBoundError(
            f"overlap {o} not contained in both margins {margin_a.label()}, {margin_b.label()}"
        )
    if margin_a.scope_vars != margin_b.scope_vars:
        raise ScopeMismatchError(
            f"margins {margin_a.label()} and {margin_b.label()} declare different scope variables"
        )
    shared_scope = [sv for sv in margin_a.blocks() if sv in margin_b.blocks()]
    out = []
    for size in range(len(o)):  # proper subsets only
        for dvars in itertools.combinations(o, size):
            rest = [v for v in o if v not in dvars]
            for d in _assignments(list(dvars)):
                regime = Regime.do(d)
                for event in _assignments(rest):
                    for sv in shared_scope:
                        ea = implied_prob_expr(layout, margin_a, sv, regime, event)
                        eb = implied_prob_expr(layout, margin_b, sv, regime, event)
                        expr = ea.minus(eb)
                        if expr.is_zero():
                            continue  # margin paired with itself
                        tag = (
                            f"coherence:{margin_a.label()}|{margin_b.label()}"
                            f"{scope_label(sv)}:{regime.label()}:o={_event_label(event)}"
                        )
                        out.append(Constraint(expr, "=", tag))
    return out


def _within_margin_parents(margin: MarginSpec, v: int) -> list[int]:
    return [u for u in margin.vars if u < v]


def weak_directed_constraints(
    layout: ThetaLayout, margin: MarginSpec, edge: WeakEdgeSpec
) -> list[Constraint]:
    """Bound the child's interventional contrast when flipping one parent.

    For every assignment of the child's other within-margin parents (all
    intervened) the difference of the two child probabilities must stay
    within [-epsilon, epsilon]: two inequalities per assignment and scope
    value.
    """
    j, i, eps = edge.from_var, edge.to_var, edge.epsilon
    if not margin.contains((j, i)):
        raise MarginBoundError(f"edge {edge.label()} endpoints not inside {margin.label()}")
    others = [u for u in _within_margin_parents(margin, i) if u != j]
    out = []
    for v in _assignments(others):
        hi = Regime.do({**v, j: 1})
        lo = Regime.do({**v, j: 0})
        for sv in margin.blocks():
            contrast = implied_prob_expr(layout, margin, sv, hi, {i: 1}).minus(
                implied_prob_expr(layout, margin, sv, lo, {i: 1})
            )
            base = (
                f"weak-dir:{margin.label()}{scope_label(sv)}:{edge.label()}:pa={_event_label(v)}"
            )
            out.append(Constraint(contrast.shifted(-eps), "<=", base + ":hi"))
            out.append(Constraint(contrast.scaled(-1.0).shifted(-eps), "<=", base + ":lo"))
    return out


def weak_bidirected_constraints(
    layout: ThetaLayout,
    margin: MarginSpec,
    edge: WeakEdgeSpec,
    tables: Sequence[RegimeTable],
    skips: list[str] | None = None,
) -> list[Constraint]:
    """Bound the gap between intervening on an ancestor and conditioning on it.

    The conditional term is a constant read off the data table whose regime
    intervenes on exactly the joint parents of the pair; if that regime is
    not in the data the constraint would be polynomial in theta and is
    rejected.  Conditioning events of probability zero skip the instance
    (recorded in ``skips``).
    """
    j, i, eps = edge.from_var, edge.to_var, edge.epsilon
    if not margin.contains((j, i)):
        raise MarginBoundError(f"edge {edge.label()} endpoints not inside {margin.label()}")
    cond = tuple(edge.condition_on_ancestors)
    if cond and cond != margin.scope_vars:
        raise MarginBoundError(
            f"edge {edge.label()}: conditioning set must be empty or equal {margin.label()}'s "
            "scope variables to stay linear"
        )
    pa_ij = sorted(set(_within_margin_parents(margin, i)) | set(_within_margin_parents(margin, j)))
    pa_ij = [u for u in pa_ij if u not in (i, j)]
    out = []
    for v in _assignments(pa_ij):
        data_regime = Regime.do(v)
        table = find_table(tables, data_regime)
        if table is None:
            raise RegimeNotInDataError(
                f"edge {edge.label()} in {margin.label()} needs data regime "
                f"{data_regime.label()}; without it the constraint is polynomial"
            )
        for vj in (0, 1):
            for sv in margin.blocks():
                given = {j: vj, **_scope_assignment(margin, sv)}
                try:
                    c = table.conditional_prob({i: 1}, given)
                except ZeroDivisionError:
                    if skips is not None:
                        skips.append(
                            f"weak-bidir:{margin.label()}{scope_label(sv)}:{edge.label()}:"
                            f"pa={_event_label(v)}:vj={vj}: conditioning event has probability zero"
                        )
                    continue
                expr = implied_prob_expr(
                    layout, margin, sv, Regime.do({**v, j: vj}), {i: 1}
                ).shifted(-c)
                base = (
                    f"weak-bidir:{margin.label()}{scope_label(sv)}:{edge.label()}:"
                    f"pa={_event_label(v)}:vj={vj}"
                )
                out.append(Constraint(expr.shifted(-eps), "<=", base + ":hi"))
                out.append(Constraint(expr.scaled(-1.0).shifted(-eps), "<=", base + ":lo"))
    return out


@dataclass
class ConstraintSystem:
    """Everything except the objective: layout plus assembled constraints."""

    spec: ModelSpec
    layout: ThetaLayout
    equalities: list[Constraint]
    inequalities: list[Constraint]
    skips: list[str]

    @property
    def all_constraints(self) -> list[Constraint]:
        return self.equalities + self.inequalities


def assemble_constraints(spec: ModelSpec, tables: Sequence[RegimeTable]) -> ConstraintSystem:
    """Build the complete constraint set for a validated model."""
    diags = validate_model(spec)
    if diags:
        raise MarginBoundError("invalid model: " + "; ".join(diags))
    for t in tables:
        if t.n_vars != spec.n_vars:
            raise MarginBoundError(
                f"table for {t.regime.label()} covers {t.n_vars} variables, model has {spec.n_vars}"
            )
    layout = ThetaLayout(spec)
    skips: list[str] = []
    equalities = simplex_constraints(layout)
    for m in spec.margins:
        for sv in m.blocks():
            equalities.extend(data_binding_constraints(layout, m, sv, tables, skips))
    for a, b, overlap in spec.coherence_pairs:
        equalities.extend(
            coherence_constraints(layout, spec.margin_by_id(a), spec.margin_by_id(b), overlap)
        )
    inequalities: list[Constraint] = []
    for edge in spec.weak_edges:
        for mid in edge.margins:
            margin = spec.margin_by_id(mid)
            if edge.kind == "directed":
                inequalities.extend(weak_directed_constraints(layout, margin, edge))
            else:
                inequalities.extend(
                    weak_bidirected_constraints(layout, margin, edge, tables, skips)
                )
    return ConstraintSystem(spec, layout, equalities, inequalities, skips)


def query_objective(
    layout: ThetaLayout, spec: ModelSpec, query: Query
) -> tuple[LinExpr, MarginSpec]:
    """Objective expression for a query, over its selected margin's block."""
    margin = select_margin_for_query(spec, query)
    if margin.scope_vars:
        raise QueryScopeError(
            f"query {query.label()} selects {margin.label()}, which has a conditional scope; "
            "objectives are only defined over unscoped margins"
        )
    if query.kind == "prob":
        for v in query.regime.vars:
            if v not in margin.vars:
                raise RegimeOutsideMarginError(
                    f"query regime {query.regime.label()} leaves margin {margin.label()}"
                )
        expr = implied_prob_expr(layout, margin, (), query.regime, {query.target: query.value})
        return expr, margin
    assert query.treatment is not None
    hi = query.base_regime.merged_with(Regime.do({query.treatment: 1}))
    lo = query.base_regime.merged_with(Regime.do({query.treatment: 0}))
    expr = implied_prob_expr(layout, margin, (), hi, {query.target: 1}).minus(
        implied_prob_expr(layout, margin, (), lo, {query.target: 1})
    )
    return expr, margin


@dataclass
class AssembledProgram:
    system: ConstraintSystem
    objective: LinExpr
    margin_used: MarginSpec
    query: Query


def assemble_lp(spec: ModelSpec, tables: Sequence[RegimeTable], query: Query) -> AssembledProgram:
    system = assemble_constraints(spec, tables)
    objective, margin = query_objective(system.layout, spec, query)
    return AssembledProgram(system, objective, margin, query)
