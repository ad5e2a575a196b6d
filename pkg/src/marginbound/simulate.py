"""Ground-truth structural causal models for testing and calibration.

An SCM over n binary variables with a fully connected causal order: the
mechanism of variable i is a random truth table over its i observed
parents, ``c`` confounder bits shared by every variable, and one private
noise bit.  The exogenous space is the uniform distribution over all
``c + n`` bits, so every interventional distribution is exactly
enumerable and all derived quantities are dyadic rationals.

Table input layout for variable i (config index bit positions):
bits 0..i-1 parents, bits i..i+c-1 shared confounder bits, bit i+c the
private noise bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import MarginBoundError, StrengthUndefinedError
from .model import MarginSpec, Provenance, Regime, RegimeTable, WeakEdgeSpec
from .responses import ResponseSpace

MAX_VARS = 10
MAX_CONFOUNDERS = 6


@dataclass
class GroundTruthScm:
    n_vars: int
    n_confounders: int
    tables: tuple[np.ndarray, ...]  # per variable, uint8 outputs per config
    damping: tuple[tuple[int, int, float], ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        for i, t in enumerate(self.tables):
            arity = i + self.n_confounders + 1
            if t.size != 1 << arity:
                raise ValueError(f"table {i} has {t.size} entries, expected {1 << arity}")

    @property
    def n_exo_bits(self) -> int:
        return self.n_confounders + self.n_vars

    def to_json_dict(self) -> dict:
        hexes = []
        for t in self.tables:
            v = 0
            for cfg, bit in enumerate(t):
                if bit:
                    v |= 1 << cfg
            hexes.append(format(v, "x"))
        return {
            "n_vars": self.n_vars,
            "n_confounders": self.n_confounders,
            "seed": self.seed,
            "damping": [[j, i, w] for j, i, w in self.damping],
            "tables": hexes,
        }

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "GroundTruthScm":
        n = int(d["n_vars"])
        c = int(d["n_confounders"])
        tables = []
        for i, h in enumerate(d["tables"]):
            v = int(h, 16)
            arity = i + c + 1
            tables.append(np.array([(v >> cfg) & 1 for cfg in range(1 << arity)], dtype=np.uint8))
        return cls(
            n_vars=n,
            n_confounders=c,
            tables=tuple(tables),
            damping=tuple((int(j), int(i), float(w)) for j, i, w in d.get("damping", ())),
            seed=int(d.get("seed", 0)),
        )


def _apply_damping(table: np.ndarray, i: int, c: int, j: int, w: float, rng) -> None:
    """Cap how often variable i's output flips with input j.

    Within each assignment of the other observed parents, at most a
    ``w`` fraction of the exogenous configurations may produce outputs
    that differ between j=0 and j=1; excess flips are repaired (the j=0
    output is copied over) at deterministically seeded random positions.
    """
    arity = i + c + 1
    cfgs = np.arange(1 << arity)
    base = cfgs[(cfgs >> j) & 1 == 0]  # configs with input j = 0
    partner = base | (1 << j)
    other_parent_bits = [t for t in range(i) if t != j]
    group = np.zeros(base.size, dtype=np.int64)
    for pos, t in enumerate(other_parent_bits):
        group |= ((base >> t) & 1) << pos
    pairs_per_group = 1 << (c + 1)
    cap = int(np.floor(w * pairs_per_group + 1e-12))
    for g in range(1 << len(other_parent_bits)):
        members = np.nonzero(group == g)[0]
        flipped = members[table[base[members]] != table[partner[members]]]
        excess = flipped.size - cap
        if excess > 0:
            repair = rng.permutation(flipped)[:excess]
            table[partner[repair]] = table[base[repair]]


def sample_scm(
    seed: int,
    n: int,
    c: int,
    damping: Mapping[tuple[int, int], float] | None = None,
) -> GroundTruthScm:
    """Draw an SCM with uniformly random truth tables, reproducibly.

    ``damping`` maps edges (j, i) with j < i to the maximum fraction of
    exogenous configurations on which i's mechanism may respond to j
    (w = 0 forces the mechanism to ignore j entirely).
    """
    if not 1 <= n <= MAX_VARS:
        raise MarginBoundError(f"n must be in [1, {MAX_VARS}]")
    if not 0 <= c <= MAX_CONFOUNDERS:
        raise MarginBoundError(f"confounder bits must be in [0, {MAX_CONFOUNDERS}]")
    damp = dict(damping or {})
    for (j, i), w in damp.items():
        if not 0 <= j < i < n:
            raise MarginBoundError(f"damping edge ({j}, {i}) must satisfy 0 <= j < i < n")
        if not 0.0 <= w <= 1.0:
            raise MarginBoundError(f"damping weight {w} outside [0, 1]")
    rng = np.random.default_rng(seed)
    tables = []
    for i in range(n):
        arity = i + c + 1
        table = rng.integers(0, 2, size=1 << arity, dtype=np.uint8)
        for (j, ti), w in sorted(damp.items()):
            if ti == i:
                _apply_damping(table, i, c, j, w, rng)
        tables.append(table)
    return GroundTruthScm(
        n_vars=n,
        n_confounders=c,
        tables=tuple(tables),
        damping=tuple((j, i, w) for (j, i), w in sorted(damp.items())),
        seed=seed,
    )


def _propagate_exo(scm: GroundTruthScm, regime: Regime, exo: np.ndarray) -> np.ndarray:
    """Variable values (len(exo) x n) under the regime, per exogenous code."""
    c = scm.n_confounders
    shared = exo & ((1 << c) - 1)
    vals = np.zeros((exo.size, scm.n_vars), dtype=np.int64)
    for i in range(scm.n_vars):
        forced = regime.value_of(i)
        if forced is not None:
            vals[:, i] = forced
            continue
        idx = (shared << i).copy()
        for t in range(i):
            idx |= vals[:, t] << t
        idx |= ((exo >> (c + i)) & 1) << (i + c)
        vals[:, i] = scm.tables[i][idx]
    return vals


def _codes(vals: np.ndarray) -> np.ndarray:
    codes = np.zeros(vals.shape[0], dtype=np.int64)
    for k in range(vals.shape[1]):
        codes |= vals[:, k] << k
    return codes


def true_regime_table(scm: GroundTruthScm, regime: Regime) -> RegimeTable:
    """Exact distribution over all variables under the regime."""
    exo = np.arange(1 << scm.n_exo_bits, dtype=np.int64)
    codes = _codes(_propagate_exo(scm, regime, exo))
    probs = np.bincount(codes, minlength=1 << scm.n_vars) / exo.size
    return RegimeTable(regime, probs, Provenance("exact"))


def sample_table(scm: GroundTruthScm, regime: Regime, n_samples: int, seed: int) -> RegimeTable:
    """Empirical frequency table from finite draws of the exogenous bits."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    exo = rng.integers(0, 1 << scm.n_exo_bits, size=n_samples, dtype=np.int64)
    codes = _codes(_propagate_exo(scm, regime, exo))
    probs = np.bincount(codes, minlength=1 << scm.n_vars) / n_samples
    return RegimeTable(regime, probs, Provenance("empirical", n_samples))


def induced_margin_theta(scm: GroundTruthScm, margin: MarginSpec) -> np.ndarray:
    """The margin's true response-function distribution implied by the SCM.

    For every exogenous configuration, composing the structural equations
    (with non-margin ancestors substituted out) yields one response
    function per margin variable; the configuration's mass lands on the
    corresponding joint response index.
    """
    if margin.scope_vars:
        raise MarginBoundError("induced parameters are only defined for unscoped margins")
    space = ResponseSpace.for_margin(margin)
    exo = np.arange(1 << scm.n_exo_bits, dtype=np.int64)
    joint = np.zeros(exo.size, dtype=np.int64)
    for pos, v in enumerate(margin.vars):
        digit = np.zeros(exo.size, dtype=np.int64)
        for a in range(1 << pos):
            forced = {margin.vars[s]: (a >> s) & 1 for s in range(pos)}
            vals = _propagate_exo(scm, Regime.do(forced), exo)
            digit |= vals[:, v] << a
        joint += digit * space.strides()[pos]
    theta = np.bincount(joint, minlength=space.total_size) / exo.size
    return theta


def measure_strengths(scm: GroundTruthScm, margin: MarginSpec, edge: WeakEdgeSpec) -> float:
    """Exact value of the edge's constrained contrast: the smallest epsilon
    under which the corresponding constraint family holds for the truth."""
    j, i = edge.from_var, edge.to_var
    if not margin.contains((j, i)):
        raise MarginBoundError(f"edge {edge.label()} endpoints not inside {margin.label()}")
    if margin.scope_vars:
        raise MarginBoundError("strength measurement supports unscoped margins only")
    parents_i = [u for u in margin.vars if u < i]
    gaps: list[float] = []
    if edge.kind == "directed":
        others = [u for u in parents_i if u != j]
        for bits in range(1 << len(others)):
            v = {u: (bits >> t) & 1 for t, u in enumerate(others)}
            p1 = true_regime_table(scm, Regime.do({**v, j: 1})).event_prob({i: 1})
            p0 = true_regime_table(scm, Regime.do({**v, j: 0})).event_prob({i: 1})
            gaps.append(abs(p1 - p0))
    elif edge.kind == "bidirected":
        pa_ij = sorted((set(parents_i) | {u for u in margin.vars if u < j}) - {i, j})
        for bits in range(1 << len(pa_ij)):
            v = {u: (bits >> t) & 1 for t, u in enumerate(pa_ij)}
            cond_table = true_regime_table(scm, Regime.do(v))
            for vj in (0, 1):
                try:
                    conditional = cond_table.conditional_prob({i: 1}, {j: vj})
                except ZeroDivisionError:
                    continue
                interventional = true_regime_table(scm, Regime.do({**v, j: vj})).event_prob({i: 1})
                gaps.append(abs(interventional - conditional))
    else:
        raise MarginBoundError(f"unknown edge kind {edge.kind!r}")
    if not gaps:
        raise StrengthUndefinedError(f"no constraint instances for {edge.label()} in {margin.label()}")
    return max(gaps)
