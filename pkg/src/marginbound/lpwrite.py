"""Export linear programs as LP-format or fixed-MPS text.

Output is byte-deterministic for a given program: rows are uniquified in
assembly order, then written sorted by name.  Variable names follow the
``t<block>_<index>`` pattern when a parameter layout is supplied (one
block per margin and scope value), otherwise everything is block 0.
Names longer than eight characters degrade fixed MPS to the free-format
dialect, which every mainstream solver accepts.
"""

from __future__ import annotations

import re
from typing import Sequence

from .constraints import Constraint, ThetaLayout
from .simplex import LinearProgram

_NAME_OK = re.compile(r"[^A-Za-z0-9_]")


def _sanitize(tag: str) -> str:
    name = _NAME_OK.sub("_", tag)
    if not name or not name[0].isalpha():
        name = "c_" + name
    return name


def _unique_names(constraints: Sequence[Constraint]) -> list[str]:
    seen: dict[str, int] = {}
    names = []
    for con in constraints:
        base = _sanitize(con.tag)
        k = seen.get(base, 0)
        seen[base] = k + 1
        names.append(base if k == 0 else f"{base}_{k + 1}")
    return names


def _num(x: float) -> str:
    return format(x, ".17g")


def _var_namer(n_vars: int, layout: ThetaLayout | None):
    if layout is None:
        return lambda g: f"t0_{g}"
    bounds = [(bi, b.offset, b.offset + b.size) for bi, b in enumerate(layout.blocks)]

    def name(g: int) -> str:
        for bi, lo, hi in bounds:
            if lo <= g < hi:
                return f"t{bi}_{g - lo}"
        return f"t_{g}"

    return name


def _terms_text(terms: dict[int, float], namer) -> str:
    parts: list[str] = []
    for g in sorted(terms):
        c = terms[g]
        sign = "-" if c < 0 else "+"
        if not parts and sign == "+":
            parts.append(f"{_num(abs(c))} {namer(g)}")
        else:
            parts.append(f"{sign} {_num(abs(c))} {namer(g)}")
    return " ".join(parts) if parts else "0 " + namer(0)


def export_lp(lp: LinearProgram, format: str = "lp_text", layout: ThetaLayout | None = None) -> str:
    """Render the program as a text document in the requested format."""
    if format == "lp_text":
        return _write_lp_text(lp, layout)
    if format == "mps":
        return _write_mps(lp, layout)
    raise ValueError(f"unknown export format {format!r}; use 'lp_text' or 'mps'")


def _rows(lp: LinearProgram) -> tuple[list[tuple[str, Constraint]], list[tuple[str, Constraint]]]:
    cons = lp.equalities + lp.inequalities
    names = _unique_names(cons)
    eq = sorted(zip(names[: len(lp.equalities)], lp.equalities), key=lambda t: t[0])
    ineq = sorted(zip(names[len(lp.equalities) :], lp.inequalities), key=lambda t: t[0])
    return eq, ineq


def _write_lp_text(lp: LinearProgram, layout: ThetaLayout | None) -> str:
    namer = _var_namer(lp.n_vars, layout)
    eq, ineq = _rows(lp)
    lines = ["\\ exported by marginbound", "Minimize"]
    obj = _terms_text(lp.objective.terms, namer) if lp.n_vars else "0 dummy"
    if lp.objective.const:
        obj += f" + {_num(lp.objective.const)}" if lp.objective.const > 0 else f" - {_num(-lp.objective.const)}"
    lines.append(f" obj: {obj}")
    lines.append("Subject To")
    for name, con in eq:
        lines.append(f" {name}: {_terms_text(con.expr.terms, namer)} = {_num(-con.expr.const)}")
    for name, con in ineq:
        lines.append(f" {name}: {_terms_text(con.expr.terms, namer)} <= {_num(-con.expr.const)}")
    lines.append("Bounds")
    for g in range(lp.n_vars):
        lines.append(f" 0 <= {namer(g)}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _write_mps(lp: LinearProgram, layout: ThetaLayout | None) -> str:
    namer = _var_namer(lp.n_vars, layout)
    eq, ineq = _rows(lp)
    lines = ["NAME          MARGINBOUND", "ROWS", " N  obj"]
    for name, _ in eq:
        lines.append(f" E  {name}")
    for name, _ in ineq:
        lines.append(f" L  {name}")
    # field widths follow the longest names so values never touch them
    row_w = max([10] + [len(name) for name, _ in eq + ineq]) + 2
    var_w = max([10] + [len(namer(g)) for g in range(lp.n_vars)]) + 2
    entries: dict[int, list[tuple[str, float]]] = {g: [] for g in range(lp.n_vars)}
    for g, c in lp.objective.terms.items():
        entries[g].append(("obj", c))
    for name, con in eq + ineq:
        for g, c in con.expr.terms.items():
            entries[g].append((name, c))
    lines.append("COLUMNS")
    for g in range(lp.n_vars):
        for row, c in entries[g]:
            lines.append(f"    {namer(g):<{var_w}}{row:<{row_w}}{_num(c)}")
    lines.append("RHS")
    if lp.objective.const:
        lines.append(f"    {'RHS':<{var_w}}{'obj':<{row_w}}{_num(-lp.objective.const)}")
    for name, con in eq + ineq:
        rhs = -con.expr.const
        if rhs != 0.0:
            lines.append(f"    {'RHS':<{var_w}}{name:<{row_w}}{_num(rhs)}")
    lines.append("BOUNDS")  # defaults already give every column [0, +inf)
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
