"""Domain types for variables, regimes, margins and queries.

All observed variables are binary, identified by dense integer indices
``0..n-1``; the causal order is ascending index (a variable can only be
caused by variables with smaller index).  Full joint assignments over n
variables are coded little-endian: assignment code = sum(v_k << k).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NoEligibleMarginError

PROB_TOL = 1e-9
MAX_MARGIN_PARENTS = 5  # response spaces beyond 2**(2**5) functions are rejected


def var_name(index: int) -> str:
    """Human-facing name of a variable: x1, x2, ... (1-based)."""
    return f"x{index + 1}"


def assignment_code(values: Mapping[int, int]) -> tuple[int, int]:
    """(mask, want) bit pair for a partial assignment over global variables."""
    mask = 0
    want = 0
    for v, b in values.items():
        mask |= 1 << v
        if b:
            want |= 1 << v
    return mask, want


@dataclass(frozen=True)
class Regime:
    """A do-intervention: which variables are forced, and to what values.

    The empty regime is observational.  Identity is by (variable set,
    values); construction order does not matter.
    """

    interventions: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted((int(v), int(b) & 1) for v, b in self.interventions))
        seen = [v for v, _ in ordered]
        if len(set(seen)) != len(seen):
            raise ValueError(f"variable intervened twice in regime: {ordered}")
        object.__setattr__(self, "interventions", ordered)

    @classmethod
    def do(cls, assignments: Mapping[int, int] | None = None) -> "Regime":
        return cls(tuple((assignments or {}).items()))

    @property
    def vars(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.interventions)

    def as_dict(self) -> dict[int, int]:
        return dict(self.interventions)

    def value_of(self, v: int) -> int | None:
        for u, b in self.interventions:
            if u == v:
                return b
        return None

    def forces(self, v: int) -> bool:
        return self.value_of(v) is not None

    def merged_with(self, other: "Regime") -> "Regime":
        d = self.as_dict()
        for v, b in other.interventions:
            if v in d and d[v] != b:
                raise ValueError(f"conflicting interventions on {var_name(v)}")
            d[v] = b
        return Regime.do(d)

    def label(self) -> str:
        if not self.interventions:
            return "do()"
        inner = ",".join(f"{var_name(v)}={b}" for v, b in self.interventions)
        return f"do({inner})"

    def to_json_dict(self) -> dict:
        return {"interventions": {str(v): b for v, b in self.interventions}}

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "Regime":
        return cls.do({int(k): int(v) for k, v in d.get("interventions", {}).items()})


@dataclass(frozen=True)
class MarginSpec:
    """One margin model: its variables and optional conditional scope.

    ``vars`` are ascending variable indices.  ``scope_vars`` are variables
    the margin's parameters are conditioned on; they must all precede every
    margin variable in the causal order, and ``scope_values`` lists the
    scope assignments the model includes (one parameter block each).
    """

    id: int
    vars: tuple[int, ...]
    scope_vars: tuple[int, ...] = ()
    scope_values: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", tuple(int(v) for v in self.vars))
        object.__setattr__(self, "scope_vars", tuple(int(v) for v in self.scope_vars))
        object.__setattr__(
            self, "scope_values", tuple(tuple(int(b) & 1 for b in sv) for sv in self.scope_values)
        )

    @property
    def size(self) -> int:
        return len(self.vars)

    def position_of(self, v: int) -> int:
        return self.vars.index(v)

    def contains(self, variables: Iterable[int]) -> bool:
        vs = set(self.vars)
        return all(v in vs for v in variables)

    def blocks(self) -> tuple[tuple[int, ...], ...]:
        """Scope assignments indexing this margin's parameter blocks."""
        return self.scope_values if self.scope_vars else ((),)

    def label(self) -> str:
        return f"M{self.id}"

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "vars": list(self.vars),
            "scope_vars": list(self.scope_vars),
            "scope_values": [list(sv) for sv in self.scope_values],
        }

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "MarginSpec":
        return cls(
            id=int(d["id"]),
            vars=tuple(d["vars"]),
            scope_vars=tuple(d.get("scope_vars", ())),
            scope_values=tuple(tuple(sv) for sv in d.get("scope_values", ())),
        )


@dataclass(frozen=True)
class WeakEdgeSpec:
    """An epsilon-bounded edge assumption inside one or more margins.

    ``directed``: the interventional contrast on the child when flipping
    one parent (all other within-margin parents intervened) is at most
    epsilon.  ``bidirected``: the gap between intervening on an ancestor
    and conditioning on it (the conditional taken from data) is at most
    epsilon.
    """

    kind: str  # "directed" | "bidirected"
    from_var: int
    to_var: int
    epsilon: float = 1.0
    condition_on_ancestors: tuple[int, ...] = ()
    margins: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "condition_on_ancestors", tuple(self.condition_on_ancestors))
        object.__setattr__(self, "margins", tuple(self.margins))

    def label(self) -> str:
        arrow = "->" if self.kind == "directed" else "<->"
        return f"{var_name(self.from_var)}{arrow}{var_name(self.to_var)}"

    def with_epsilon(self, epsilon: float) -> "WeakEdgeSpec":
        return WeakEdgeSpec(
            self.kind, self.from_var, self.to_var, epsilon, self.condition_on_ancestors, self.margins
        )

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "from": self.from_var,
            "to": self.to_var,
            "epsilon": self.epsilon,
            "condition_on_ancestors": list(self.condition_on_ancestors),
            "margins": list(self.margins),
        }

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "WeakEdgeSpec":
        return cls(
            kind=d["kind"],
            from_var=int(d["from"]),
            to_var=int(d["to"]),
            epsilon=float(d.get("epsilon", 1.0)),
            condition_on_ancestors=tuple(d.get("condition_on_ancestors", ())),
            margins=tuple(d.get("margins", ())),
        )


@dataclass(frozen=True)
class ModelSpec:
    """The full model input: margins, coherence pairs, weak edges, regimes."""

    n_vars: int
    margins: tuple[MarginSpec, ...]
    coherence_pairs: tuple[tuple[int, int, tuple[int, ...]], ...] = ()
    weak_edges: tuple[WeakEdgeSpec, ...] = ()
    regimes_available: tuple[Regime, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "margins", tuple(self.margins))
        object.__setattr__(
            self,
            "coherence_pairs",
            tuple((int(a), int(b), tuple(int(v) for v in o)) for a, b, o in self.coherence_pairs),
        )
        object.__setattr__(self, "weak_edges", tuple(self.weak_edges))
        object.__setattr__(self, "regimes_available", tuple(self.regimes_available))

    def margin_by_id(self, margin_id: int) -> MarginSpec:
        for m in self.margins:
            if m.id == margin_id:
                return m
        raise KeyError(f"no margin with id {margin_id}")

    def with_epsilons(self, eps_by_edge: Mapping[str, float]) -> "ModelSpec":
        """Copy of the model with weak-edge epsilons replaced by label."""
        edges = tuple(
            e.with_epsilon(eps_by_edge[e.label()]) if e.label() in eps_by_edge else e
            for e in self.weak_edges
        )
        return ModelSpec(self.n_vars, self.margins, self.coherence_pairs, edges, self.regimes_available)

    def to_json_dict(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "margins": [m.to_json_dict() for m in self.margins],
            "coherence_pairs": [[a, b, list(o)] for a, b, o in self.coherence_pairs],
            "weak_edges": [e.to_json_dict() for e in self.weak_edges],
            "regimes_available": [r.to_json_dict() for r in self.regimes_available],
        }

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(
            n_vars=int(d["n_vars"]),
            margins=tuple(MarginSpec.from_json_dict(m) for m in d["margins"]),
            coherence_pairs=tuple(
                (int(a), int(b), tuple(o)) for a, b, o in d.get("coherence_pairs", ())
            ),
            weak_edges=tuple(WeakEdgeSpec.from_json_dict(e) for e in d.get("weak_edges", ())),
            regimes_available=tuple(
                Regime.from_json_dict(r) for r in d.get("regimes_available", ())
            ),
        )


@dataclass(frozen=True)
class Provenance:
    kind: str  # "exact" | "empirical"
    sample_count: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "empirical"):
            raise ValueError(f"provenance kind must be 'exact' or 'empirical', got {self.kind!r}")

    def to_json_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.sample_count is not None:
            d["sample_count"] = self.sample_count
        return d

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "Provenance":
        return cls(d["kind"], d.get("sample_count"))


@dataclass
class RegimeTable:
    """A probability table over all n variables under one regime.

    ``probs`` is a flat array of length 2**n in assignment-code order.
    Cells that contradict the regime's forced values are exactly zero.
    """

    regime: Regime
    probs: np.ndarray
    provenance: Provenance = field(default_factory=lambda: Provenance("exact"))

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)
        n = self.n_vars
        if 1 << n != self.probs.size:
            raise ValueError(f"probs length {self.probs.size} is not a power of two")
        if np.any(self.probs < -PROB_TOL):
            raise ValueError("negative probability entry")
        total = float(self.probs.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        mask, want = assignment_code(self.regime.as_dict())
        codes = np.arange(self.probs.size)
        bad = (codes & mask) != want
        if np.any(self.probs[bad] != 0.0):
            raise ValueError("nonzero mass on cells contradicting the regime")
        self.probs = self.probs.copy()
        self.probs.flags.writeable = False  # tables are shared freely across threads

    @property
    def n_vars(self) -> int:
        return int(self.probs.size - 1).bit_length()

    def event_prob(self, event: Mapping[int, int]) -> float:
        """Probability of a partial assignment, marginalizing the rest."""
        mask, want = assignment_code(event)
        codes = np.arange(self.probs.size)
        return float(self.probs[(codes & mask) == want].sum())

    def conditional_prob(self, event: Mapping[int, int], given: Mapping[int, int]) -> float:
        """P(event | given); raises ZeroDivisionError when P(given) = 0."""
        denom = self.event_prob(given)
        if denom == 0.0:
            raise ZeroDivisionError("conditioning event has probability zero")
        joint = dict(given)
        for v, b in event.items():
            if v in joint and joint[v] != b:
                return 0.0
            joint[v] = b
        return self.event_prob(joint) / denom

    def to_json_dict(self) -> dict:
        return {
            "regime": self.regime.to_json_dict(),
            "probs": [float(p) for p in self.probs],
            "provenance": self.provenance.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "RegimeTable":
        return cls(
            regime=Regime.from_json_dict(d["regime"]),
            probs=np.asarray(d["probs"], dtype=float),
            provenance=Provenance.from_json_dict(d.get("provenance", {"kind": "exact"})),
        )


def find_table(tables: Sequence[RegimeTable], regime: Regime) -> RegimeTable | None:
    for t in tables:
        if t.regime == regime:
            return t
    return None


@dataclass(frozen=True)
class Query:
    """A bound target: a single interventional probability or an ATE.

    prob: P(target = value | regime), regime over margin variables.
    ate:  P(target=1 | do(treatment=1), base) - P(target=1 | do(treatment=0), base).
    """

    kind: str  # "prob" | "ate"
    target: int
    value: int = 1
    regime: Regime = field(default_factory=Regime)
    treatment: int | None = None
    base_regime: Regime = field(default_factory=Regime)
    margin_id: int | None = None

    def referenced_vars(self) -> tuple[int, ...]:
        if self.kind == "prob":
            return tuple(sorted({self.target, *self.regime.vars}))
        assert self.treatment is not None
        return tuple(sorted({self.target, self.treatment, *self.base_regime.vars}))

    def label(self) -> str:
        if self.kind == "prob":
            return f"P({var_name(self.target)}={self.value}|{self.regime.label()})"
        assert self.treatment is not None
        return f"ATE({var_name(self.target)}~{var_name(self.treatment)}|{self.base_regime.label()})"

    def to_json_dict(self) -> dict:
        d: dict = {"kind": self.kind, "target": self.target, "margin_id": self.margin_id}
        if self.kind == "prob":
            d["value"] = self.value
            d["regime"] = self.regime.to_json_dict()
        else:
            d["treatment"] = self.treatment
            d["base_regime"] = self.base_regime.to_json_dict()
        return d

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "Query":
        if d["kind"] == "prob":
            return cls(
                kind="prob",
                target=int(d["target"]),
                value=int(d.get("value", 1)),
                regime=Regime.from_json_dict(d.get("regime", {})),
                margin_id=d.get("margin_id"),
            )
        return cls(
            kind="ate",
            target=int(d["target"]),
            treatment=int(d["treatment"]),
            base_regime=Regime.from_json_dict(d.get("base_regime", {})),
            margin_id=d.get("margin_id"),
        )


def validate_model(spec: ModelSpec) -> list[str]:
    """Check every structural invariant; returns one diagnostic per violation.

    Total: never raises, any input yields a (possibly empty) list.
    """
    diags: list[str] = []
    n = spec.n_vars
    if n < 1:
        diags.append("n_vars: must be at least 1")

    ids = [m.id for m in spec.margins]
    if len(set(ids)) != len(ids):
        diags.append("margins: margin ids must be unique")

    for m in spec.margins:
        where = f"margin {m.label()}"
        if not m.vars:
            diags.append(f"{where}.vars: margin variable set is empty")
            continue
        if list(m.vars) != sorted(set(m.vars)):
            diags.append(f"{where}.vars: must be strictly ascending variable indices")
        if any(v < 0 or v >= n for v in m.vars):
            diags.append(f"{where}.vars: variable index outside [0, {n})")
        if len(m.vars) > MAX_MARGIN_PARENTS + 1:
            diags.append(f"{where}.vars: margin size {len(m.vars)} exceeds supported maximum "
                         f"{MAX_MARGIN_PARENTS + 1}")
        if set(m.scope_vars) & set(m.vars):
            diags.append(f"{where}.scope_vars: scope overlaps margin variables")
        if m.scope_vars and min(m.vars) <= max(m.scope_vars):
            diags.append(f"{where}.scope_vars: every scope index must be strictly below "
                         "every margin variable index")
        if any(v < 0 or v >= n for v in m.scope_vars):
            diags.append(f"{where}.scope_vars: variable index outside [0, {n})")
        if bool(m.scope_vars) != bool(m.scope_values):
            diags.append(f"{where}.scope_values: must be nonempty iff scope_vars is nonempty")
        for sv in m.scope_values:
            if len(sv) != len(m.scope_vars):
                diags.append(f"{where}.scope_values: assignment width {len(sv)} != "
                             f"{len(m.scope_vars)} scope variables")
        if len(set(m.scope_values)) != len(m.scope_values):
            diags.append(f"{where}.scope_values: duplicate scope assignment")

    by_id = {m.id: m for m in spec.margins}
    for a, b, overlap in spec.coherence_pairs:
        where = f"coherence_pairs (M{a}, M{b})"
        if a not in by_id or b not in by_id:
            diags.append(f"{where}: unknown margin id")
            continue
        inter = set(by_id[a].vars) & set(by_id[b].vars)
        if not set(overlap) <= inter:
            diags.append(f"{where}: overlap not contained in intersection of margin variables")

    for e in spec.weak_edges:
        where = f"weak_edges {e.label()}"
        if e.kind not in ("directed", "bidirected"):
            diags.append(f"{where}.kind: must be 'directed' or 'bidirected'")
        if not e.from_var < e.to_var:
            diags.append(f"{where}: weak edge must point down causal order (from < to)")
        if not 0.0 <= e.epsilon <= 1.0:
            diags.append(f"{where}.epsilon: {e.epsilon} outside [0, 1]")
        if any(s >= e.from_var for s in e.condition_on_ancestors):
            diags.append(f"{where}.condition_on_ancestors: must be ancestors of "
                         f"{var_name(e.from_var)} (smaller index)")
        if not e.margins:
            diags.append(f"{where}.margins: weak edge applies to no margin")
        for mid in e.margins:
            if mid not in by_id:
                diags.append(f"{where}.margins: unknown margin id {mid}")
            elif not by_id[mid].contains((e.from_var, e.to_var)):
                diags.append(f"{where}.margins: both endpoints must lie in margin M{mid}")
            elif e.condition_on_ancestors and tuple(e.condition_on_ancestors) != by_id[mid].scope_vars:
                diags.append(f"{where}.condition_on_ancestors: must equal margin M{mid}'s "
                             "scope_vars (or be empty) to keep the constraint linear")

    for r in spec.regimes_available:
        for v, b in r.interventions:
            if v < 0 or v >= n:
                diags.append(f"regimes_available {r.label()}: variable index outside [0, {n})")
            if b not in (0, 1):
                diags.append(f"regimes_available {r.label()}: forced value must be 0 or 1")

    return diags


def select_margin_for_query(spec: ModelSpec, query: Query) -> MarginSpec:
    """Lowest-id margin containing every variable the query references."""
    if query.margin_id is not None:
        m = spec.margin_by_id(query.margin_id)
        if not m.contains(query.referenced_vars()):
            raise NoEligibleMarginError(
                f"margin M{query.margin_id} does not contain {query.label()}"
            )
        return m
    needed = query.referenced_vars()
    candidates = [m for m in spec.margins if m.contains(needed)]
    if not candidates:
        raise NoEligibleMarginError(f"no margin contains all variables of {query.label()}")
    return min(candidates, key=lambda m: m.id)


def dump_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
