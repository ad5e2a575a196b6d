"""Interval bounds on interventional probabilities in discrete causal models.

Margin-level response-function models are tied together by data-binding,
coherence and weak-edge constraints; tight-under-assumptions bounds come
from minimizing and maximizing the query over the resulting polytope.
"""

from .constraints import (
    AssembledProgram,
    Constraint,
    ConstraintSystem,
    LinExpr,
    ThetaLayout,
    assemble_constraints,
    assemble_lp,
    coherence_constraints,
    data_binding_constraints,
    implied_prob_expr,
    query_objective,
    simplex_constraints,
    weak_bidirected_constraints,
    weak_directed_constraints,
)
from .errors import (
    IterationLimitError,
    MarginBoundError,
    NoEligibleMarginError,
    RegimeNotInDataError,
    RegimeOutsideMarginError,
    ScopeMismatchError,
    StrengthUndefinedError,
    TooLargeError,
    UnsupportedArityError,
)
from .lpwrite import export_lp
from .model import (
    MarginSpec,
    ModelSpec,
    Provenance,
    Query,
    Regime,
    RegimeTable,
    WeakEdgeSpec,
    select_margin_for_query,
    validate_model,
)
from .oracle import (
    CertificateReport,
    check_certificate,
    full_margin_baseline,
    full_margin_solver,
    manski_bounds,
)
from .presets import paper_n4_model, paper_n6_model, preset_model, preset_regimes, single_double_queries, single_queries
from .responses import ResponseSpace, eval_response, outcome_codes, propagate, response_space_size
from .simplex import BoundsResult, LinearProgram, SimplexSolver, SolveOutcome, bound_query, solve
from .simulate import (
    GroundTruthScm,
    induced_margin_theta,
    measure_strengths,
    sample_scm,
    sample_table,
    true_regime_table,
)

__version__ = "0.1.0"
