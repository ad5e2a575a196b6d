"""Exported files are re-read by small independent parsers and cross-solved
with scipy's HiGHS; optima must match the in-memory program."""

import re

import numpy as np
import pytest
from scipy.optimize import linprog

from marginbound.constraints import Constraint, LinExpr, assemble_lp
from marginbound.lpwrite import export_lp
from marginbound.model import Query, Regime
from marginbound.simplex import LinearProgram, solve


def parse_lp_text(text: str):
    """Minimal reader for the LP dialect we emit."""
    lines = [ln.rstrip() for ln in text.splitlines() if ln.strip() and not ln.startswith("\\")]
    section = None
    obj: dict[str, float] = {}
    rows = []  # (name, terms, relation, rhs)
    for ln in lines:
        low = ln.strip().lower()
        if low in ("minimize", "subject to", "bounds", "end"):
            section = low
            continue
        body = ln.strip()
        if section == "minimize":
            _, expr = body.split(":", 1)
            obj = _parse_terms(expr)[0]
        elif section == "subject to":
            name, rest = body.split(":", 1)
            m = re.match(r"(.*?)(<=|=)\s*([-+0-9.eE]+)$", rest.strip())
            terms, _ = _parse_terms(m.group(1))
            rows.append((name.strip(), terms, m.group(2), float(m.group(3))))
    return obj, rows


def _parse_terms(expr: str):
    terms: dict[str, float] = {}
    const = 0.0
    tokens = re.findall(r"([+-]?)\s*([0-9.eE+-]*[0-9.])\s*([A-Za-z_][A-Za-z0-9_]*)?", expr)
    for sign, coef, name in tokens:
        value = float(coef) * (-1.0 if sign == "-" else 1.0)
        if name:
            terms[name] = terms.get(name, 0.0) + value
        else:
            const += value
    return terms, const


def parse_mps(text: str):
    rows_kind: dict[str, str] = {}
    cols: dict[str, dict[str, float]] = {}
    rhs: dict[str, float] = {}
    section = None
    for ln in text.splitlines():
        if not ln.strip():
            continue
        if not ln.startswith(" ") and not ln.startswith("    "):
            section = ln.split()[0]
            continue
        fields = ln.split()
        if section == "ROWS":
            rows_kind[fields[1]] = fields[0]
        elif section == "COLUMNS":
            var = fields[0]
            for k in range(1, len(fields) - 1, 2):
                cols.setdefault(var, {})[fields[k]] = float(fields[k + 1])
        elif section == "RHS":
            for k in range(1, len(fields) - 1, 2):
                rhs[fields[k]] = float(fields[k + 1])
    return rows_kind, cols, rhs


def solve_parsed_with_highs(obj, rows):
    names = sorted({n for terms, *_ in [(obj,)] for n in terms} | {n for _, t, _, _ in rows for n in t})
    index = {n: k for k, n in enumerate(names)}
    c = np.zeros(len(names))
    for n, v in obj.items():
        c[index[n]] = v
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for _, terms, rel, rhs in rows:
        row = np.zeros(len(names))
        for n, v in terms.items():
            row[index[n]] = v
        (A_eq if rel == "=" else A_ub).append(row)
        (b_eq if rel == "=" else b_ub).append(rhs)
    return linprog(
        c=c,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        bounds=(0, None),
        method="highs",
    )


@pytest.fixture(scope="module")
def manski_lp(request):
    from conftest import two_var_table
    from marginbound.model import MarginSpec, ModelSpec

    spec = ModelSpec(2, (MarginSpec(id=1, vars=(0, 1)),))
    table = two_var_table(0.5, 0.8, 0.4)
    q = Query(kind="prob", target=1, value=1, regime=Regime.do({0: 1}))
    prog = assemble_lp(spec, [table], q)
    lp = LinearProgram(prog.system.layout.total_dim, prog.objective, prog.system.equalities, [])
    return lp, prog.system.layout


class TestLpText:
    def test_sections_present_single_var(self):
        lp = LinearProgram(1, LinExpr({0: 1.0}), [], [Constraint(LinExpr({0: 1.0}, -0.7), "<=", "cap")])
        text = export_lp(lp, "lp_text")
        for token in ("Minimize", "obj:", "Subject To", "Bounds", "End"):
            assert token in text

    def test_deterministic_bytes(self, manski_lp):
        lp, layout = manski_lp
        assert export_lp(lp, "lp_text", layout) == export_lp(lp, "lp_text", layout)
        assert export_lp(lp, "mps", layout) == export_lp(lp, "mps", layout)

    def test_roundtrip_matches_solver(self, manski_lp):
        lp, layout = manski_lp
        obj, rows = parse_lp_text(export_lp(lp, "lp_text", layout))
        assert len(rows) == len(lp.equalities)
        ref = solve_parsed_with_highs(obj, rows)
        assert ref.status == 0
        mine = solve(lp, "min")
        assert mine.value == pytest.approx(ref.fun, abs=1e-6)

    def test_empty_program(self):
        lp = LinearProgram(0, LinExpr())
        assert "End" in export_lp(lp, "lp_text")
        assert "ENDATA" in export_lp(lp, "mps")

    def test_unknown_format(self, manski_lp):
        lp, _ = manski_lp
        with pytest.raises(ValueError):
            export_lp(lp, "solvers-r-us")


class TestMps:
    def test_roundtrip_matches_solver(self, manski_lp):
        lp, layout = manski_lp
        rows_kind, cols, rhs = parse_mps(export_lp(lp, "mps", layout))
        names = sorted(cols)
        index = {n: k for k, n in enumerate(names)}
        row_names = [r for r in rows_kind if rows_kind[r] != "N"]
        c = np.zeros(len(names))
        A = np.zeros((len(row_names), len(names)))
        b = np.array([rhs.get(r, 0.0) for r in row_names])
        rel = [rows_kind[r] for r in row_names]
        for var, entries in cols.items():
            for row, value in entries.items():
                if row == "obj":
                    c[index[var]] = value
                else:
                    A[row_names.index(row), index[var]] = value
        ref = linprog(
            c=c,
            A_eq=A[[k for k, r in enumerate(rel) if r == "E"]],
            b_eq=b[[k for k, r in enumerate(rel) if r == "E"]],
            A_ub=A[[k for k, r in enumerate(rel) if r == "L"]] if "L" in rel else None,
            b_ub=b[[k for k, r in enumerate(rel) if r == "L"]] if "L" in rel else None,
            bounds=(0, None),
            method="highs",
        )
        assert ref.status == 0
        mine = solve(lp, "min")
        assert mine.value == pytest.approx(ref.fun, abs=1e-6)

    def test_row_names_are_sanitized(self, manski_lp):
        lp, layout = manski_lp
        text = export_lp(lp, "mps", layout)
        for ln in text.splitlines():
            assert "(" not in ln or ln.startswith("NAME")

    def test_variable_names_follow_block_pattern(self, manski_lp):
        lp, layout = manski_lp
        text = export_lp(lp, "lp_text", layout)
        assert re.search(r"\bt0_0\b", text)
        assert not re.search(r"\bt1_", text)  # single block
