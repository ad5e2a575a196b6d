"""Bundled experiment configurations.

``paper-n4``: four variables, the four size-3 margins with a cycle of
2-variable overlaps, one weak directed and one weak bidirected edge
between the first and last variable (epsilon defaults to 1, i.e.
inactive until a sweep or an explicit model edit sets it).

``paper-n6``: six variables, all twenty size-3 margins with coherence on
every 2-variable intersection, and a handful of weak edges.  Bidirected
edges are attached only to margins whose adjustment regime is present in
the data menu, which keeps every constraint linear.

Both use the same data-regime menu.
"""

from __future__ import annotations

import itertools

from .model import MarginSpec, ModelSpec, Query, Regime, WeakEdgeSpec, select_margin_for_query

PRESET_NAMES = ("paper-n4", "paper-n6")


def preset_regimes(n: int) -> list[Regime]:
    """Observational plus a fixed menu of single and double interventions."""
    if n < 4:
        raise ValueError("the preset regime menu needs at least 4 variables")
    menu = [Regime.do({})]
    menu += [Regime.do({1: v}) for v in (0, 1)]
    menu += [Regime.do({2: v}) for v in (0, 1)]
    menu += [Regime.do({1: a, 2: b}) for a in (0, 1) for b in (0, 1)]
    menu += [Regime.do({0: 0, 2: v}) for v in (0, 1)]
    return menu


def paper_n4_model() -> ModelSpec:
    margins = (
        MarginSpec(id=1, vars=(0, 1, 2)),
        MarginSpec(id=2, vars=(0, 1, 3)),
        MarginSpec(id=3, vars=(0, 2, 3)),
        MarginSpec(id=4, vars=(1, 2, 3)),
    )
    coherence = (
        (1, 2, (0, 1)),
        (2, 4, (1, 3)),
        (1, 3, (0, 2)),
        (3, 4, (2, 3)),
    )
    weak = (
        WeakEdgeSpec("directed", 0, 3, 1.0, margins=(2, 3)),
        WeakEdgeSpec("bidirected", 0, 3, 1.0, margins=(2, 3)),
    )
    return ModelSpec(4, margins, coherence, weak, tuple(preset_regimes(4)))


def paper_n6_model() -> ModelSpec:
    margins = tuple(
        MarginSpec(id=k + 1, vars=vs)
        for k, vs in enumerate(itertools.combinations(range(6), 3))
    )
    coherence = []
    for a, b in itertools.combinations(margins, 2):
        overlap = tuple(sorted(set(a.vars) & set(b.vars)))
        if len(overlap) == 2:
            coherence.append((a.id, b.id, overlap))

    regimes = tuple(preset_regimes(6))
    available_dos = {r.interventions for r in regimes}

    def containing(j: int, i: int) -> list[int]:
        return [m.id for m in margins if m.contains((j, i))]

    def linear_bidir_margins(j: int, i: int) -> list[int]:
        """Margins where the pair's adjustment regimes exist in the menu."""
        out = []
        for m in margins:
            if not m.contains((j, i)):
                continue
            pa_ij = [u for u in m.vars if u < i and u != j]
            needed = [
                tuple(sorted(zip(pa_ij, [(bits >> t) & 1 for t in range(len(pa_ij))])))
                for bits in range(1 << len(pa_ij))
            ]
            if all(nd in available_dos for nd in needed):
                out.append(m.id)
        return out

    weak = (
        WeakEdgeSpec("directed", 0, 3, 1.0, margins=tuple(containing(0, 3))),
        WeakEdgeSpec("directed", 0, 5, 1.0, margins=tuple(containing(0, 5))),
        WeakEdgeSpec("directed", 2, 4, 1.0, margins=tuple(containing(2, 4))),
        WeakEdgeSpec("bidirected", 0, 3, 1.0, margins=tuple(linear_bidir_margins(0, 3))),
        WeakEdgeSpec("bidirected", 1, 5, 1.0, margins=tuple(linear_bidir_margins(1, 5))),
    )
    return ModelSpec(6, margins, tuple(coherence), weak, regimes)


def preset_model(name: str) -> ModelSpec:
    if name == "paper-n4":
        return paper_n4_model()
    if name == "paper-n6":
        return paper_n6_model()
    raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")


def _expressible(spec: ModelSpec, query: Query) -> bool:
    try:
        select_margin_for_query(spec, query)
        return True
    except Exception:
        return False


def single_double_queries(spec: ModelSpec) -> list[Query]:
    """Every P(target=1 | do(assignment)) with one or two intervened
    variables that fits inside some margin, in a fixed documented order:
    ascending do-variable tuple, then do-values little-endian, then target."""
    out = []
    for size in (1, 2):
        for dvars in itertools.combinations(range(spec.n_vars), size):
            for bits in range(1 << size):
                regime = Regime.do({v: (bits >> t) & 1 for t, v in enumerate(dvars)})
                for target in range(spec.n_vars):
                    if target in dvars:
                        continue
                    q = Query(kind="prob", target=target, value=1, regime=regime)
                    if _expressible(spec, q):
                        out.append(q)
    return out


def single_queries(spec: ModelSpec) -> list[Query]:
    """Every expressible P(target=1 | do(one variable))."""
    out = []
    for v in range(spec.n_vars):
        for b in (0, 1):
            regime = Regime.do({v: b})
            for target in range(spec.n_vars):
                if target == v:
                    continue
                q = Query(kind="prob", target=target, value=1, regime=regime)
                if _expressible(spec, q):
                    out.append(q)
    return out
