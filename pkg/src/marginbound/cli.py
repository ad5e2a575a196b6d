"""Command-line pipeline: simulate data, bound queries, sweep epsilons,
falsify assumption sets, export programs, verify certificates.

All commands are deterministic given their flags and seeds; CSV output is
byte-identical across reruns.  Exit codes: 0 success, 2 falsified or
infeasible, 1 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import re
import sys
from pathlib import Path

import numpy as np

from .constraints import LinExpr, assemble_constraints, query_objective
from .errors import MarginBoundError
from .lpwrite import export_lp
from .model import (
    ModelSpec,
    Query,
    Regime,
    RegimeTable,
    dump_json,
    load_json,
    validate_model,
    var_name,
)
from .oracle import check_certificate
from .presets import PRESET_NAMES, preset_model, preset_regimes, single_double_queries
from .simplex import SimplexSolver
from .simulate import GroundTruthScm, sample_scm, sample_table, true_regime_table

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FALSIFIED = 2

CSV_HEADER = ["query", "epsilon_tuple", "lower", "upper", "status", "true_value"]


# -- parsing helpers -------------------------------------------------------

_VAR_RE = re.compile(r"x(\d+)$")


def _parse_var(text: str) -> int:
    m = _VAR_RE.match(text.strip())
    if not m or int(m.group(1)) < 1:
        raise ValueError(f"bad variable name {text!r}; expected x1, x2, ...")
    return int(m.group(1)) - 1


def parse_regime(text: str) -> Regime:
    """'do()' or 'do(x2=0,x3=1)'; 'obs' is an alias for do()."""
    text = text.strip()
    if text in ("obs", "do()"):
        return Regime.do({})
    m = re.match(r"do\((.*)\)$", text)
    if not m:
        raise ValueError(f"bad regime {text!r}; expected do(...) or obs")
    assign: dict[int, int] = {}
    for part in m.group(1).split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad intervention {part!r}; expected xK=0 or xK=1")
        name, value = part.split("=", 1)
        v = _parse_var(name)
        b = int(value)
        if b not in (0, 1):
            raise ValueError(f"forced value must be 0 or 1 in {part!r}")
        if v in assign:
            raise ValueError(f"variable {name.strip()} intervened twice")
        assign[v] = b
    return Regime.do(assign)


def regime_slug(regime: Regime) -> str:
    if not regime.interventions:
        return "obs"
    return "_".join(f"{var_name(v)}-{b}" for v, b in regime.interventions)


def parse_query(text: str) -> Query:
    """'P(x4=1|do(x1=0))' or 'ATE(x4~x1)' or 'ATE(x4~x1|do(x3=0))'."""
    text = text.strip()
    m = re.match(r"P\(\s*(x\d+)\s*=\s*([01])\s*\|\s*(do\(.*?\))\s*\)$", text)
    if m:
        return Query(
            kind="prob",
            target=_parse_var(m.group(1)),
            value=int(m.group(2)),
            regime=parse_regime(m.group(3)),
        )
    m = re.match(r"ATE\(\s*(x\d+)\s*~\s*(x\d+)\s*(?:\|\s*(do\(.*?\))\s*)?\)$", text)
    if m:
        return Query(
            kind="ate",
            target=_parse_var(m.group(1)),
            treatment=_parse_var(m.group(2)),
            base_regime=parse_regime(m.group(3)) if m.group(3) else Regime.do({}),
        )
    raise ValueError(f"cannot parse query {text!r}")


_EDGE_RE = re.compile(r"(x\d+)\s*(<->|->)\s*(x\d+)$")


def _parse_edge_label(text: str) -> tuple[str, int, int]:
    m = _EDGE_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad edge {text!r}; expected x1->x4 or x1<->x4")
    kind = "directed" if m.group(2) == "->" else "bidirected"
    return kind, _parse_var(m.group(1)), _parse_var(m.group(3))


def parse_epsilons(text: str) -> dict[str, float]:
    """'x1->x4=0.06;x1<->x4=0.12' -> {label: epsilon}."""
    out: dict[str, float] = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        label, value = part.rsplit("=", 1)
        _parse_edge_label(label)  # syntax check
        out[label.strip().replace(" ", "")] = float(value)
    return out


def parse_edge_grid(text: str) -> tuple[str, list[float]]:
    """'x1->x4=0.02:0.12:0.02' (start:stop:step) or 'x1->x4=0.01,0.05,0.1'."""
    label, _, grid = text.partition("=")
    label = label.strip().replace(" ", "")
    _parse_edge_label(label)
    grid = grid.strip()
    if not grid:
        raise ValueError(f"edge {label} has no epsilon grid")
    if ":" in grid:
        pieces = [float(p) for p in grid.split(":")]
        if len(pieces) != 3:
            raise ValueError(f"grid {grid!r} must be start:stop:step")
        start, stop, step = pieces
        if step <= 0:
            raise ValueError("grid step must be positive")
        values = []
        k = 0
        while start + k * step <= stop + 1e-12:
            values.append(round(start + k * step, 12))
            k += 1
    else:
        values = [float(p) for p in grid.split(",") if p.strip()]
    if not values:
        raise ValueError(f"empty epsilon grid for {label}")
    return label, values


def parse_damping(text: str) -> dict[tuple[int, int], float]:
    """'x1->x4=0.0;x2->x3=0.25' -> {(j, i): w}."""
    out: dict[tuple[int, int], float] = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        label, value = part.rsplit("=", 1)
        kind, j, i = _parse_edge_label(label.strip())
        if kind != "directed":
            raise ValueError("damping applies to directed edges only")
        out[(j, i)] = float(value)
    return out


# -- model/table/scm file plumbing ----------------------------------------

def load_model(arg: str) -> ModelSpec:
    if arg in PRESET_NAMES:
        return preset_model(arg)
    spec = ModelSpec.from_json_dict(load_json(arg))
    diags = validate_model(spec)
    if diags:
        raise MarginBoundError(f"invalid model {arg}: " + "; ".join(diags))
    return spec


def load_tables(arg: str) -> list[RegimeTable]:
    path = Path(arg)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    manifest = load_json(manifest_path)
    base = manifest_path.parent
    tables = []
    for entry in manifest["regimes"]:
        tables.append(RegimeTable.from_json_dict(load_json(base / entry["file"])))
    return tables


def load_scm(arg: str) -> GroundTruthScm:
    return GroundTruthScm.from_json_dict(load_json(arg))


def epsilon_tuple_label(spec: ModelSpec) -> str:
    parts = {}
    for e in spec.weak_edges:
        parts[e.label()] = e.epsilon
    return ";".join(f"{k}={format(v, '.6g')}" for k, v in sorted(parts.items()))


def true_query_value(scm: GroundTruthScm, query: Query) -> float:
    if query.kind == "prob":
        return true_regime_table(scm, query.regime).event_prob({query.target: query.value})
    assert query.treatment is not None
    hi = query.base_regime.merged_with(Regime.do({query.treatment: 1}))
    lo = query.base_regime.merged_with(Regime.do({query.treatment: 0}))
    return true_regime_table(scm, hi).event_prob({query.target: 1}) - true_regime_table(
        scm, lo
    ).event_prob({query.target: 1})


def _fmt(x: float | None) -> str:
    return "" if x is None else format(x, ".12g")


def _write_csv(rows: list[list[str]], out: str | None) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands -----------------------------------------------------------

def cmd_simulate(args) -> int:
    damping = parse_damping(args.damp) if args.damp else None
    scm = sample_scm(args.seed, args.n, args.confounders, damping)
    if args.regimes in PRESET_NAMES:
        regimes = preset_regimes(args.n)
    else:
        regimes = [parse_regime(r) for r in args.regimes.split(";") if r.strip()]
    out = Path(args.out_dir)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    dump_json(scm.to_json_dict(), out / "scm.json")
    entries = []
    for k, regime in enumerate(regimes):
        if args.samples:
            table = sample_table(scm, regime, args.samples, seed=args.seed * 100003 + k)
        else:
            table = true_regime_table(scm, regime)
        rel = f"tables/{regime_slug(regime)}.json"
        dump_json(table.to_json_dict(), out / rel)
        entries.append({"regime": regime.to_json_dict(), "file": rel})
    manifest = {
        "n_vars": args.n,
        "seed": args.seed,
        "confounders": args.confounders,
        "samples": args.samples,
        "regimes": entries,
    }
    dump_json(manifest, out / "manifest.json")
    print(f"wrote scm.json, manifest.json and {len(entries)} table files to {out}")
    return EXIT_OK


def _bound_rows(spec, system, solver, queries, scm, eps_label):
    rows = []
    chart_rows = []
    records = []
    for q in queries:
        truth = true_query_value(scm, q) if scm is not None else None
        try:
            objective, margin = query_objective(system.layout, spec, q)
            res = solver.bounds(objective, q.label())
        except MarginBoundError as exc:
            reason = type(exc).__name__.removesuffix("Error")
            rows.append([q.label(), eps_label, "", "", f"error:{reason}", _fmt(truth)])
            chart_rows.append({"label": q.label(), "lower": None, "upper": None,
                               "status": "error", "true_value": truth})
            records.append({"query": q.label(), "status": f"error:{reason}",
                            "detail": str(exc)})
            continue
        status = "falsified" if res.falsified else "optimal"
        rows.append([q.label(), eps_label, _fmt(res.lower), _fmt(res.upper), status, _fmt(truth)])
        chart_rows.append({"label": q.label(), "lower": res.lower, "upper": res.upper,
                           "status": status, "true_value": truth})
        records.append({
            "query": q.label(),
            "margin": margin.label(),
            "lower": res.lower,
            "upper": res.upper,
            "status": status,
            "true_value": truth,
            "lower_certificate": None if res.lower_certificate is None else res.lower_certificate.tolist(),
            "upper_certificate": None if res.upper_certificate is None else res.upper_certificate.tolist(),
        })
    return rows, chart_rows, records


def cmd_bound(args) -> int:
    spec = load_model(args.model)
    if args.epsilon:
        spec = spec.with_epsilons(parse_epsilons(args.epsilon))
    tables = load_tables(args.tables)
    scm = load_scm(args.scm) if args.scm else None
    if args.query:
        queries = [parse_query(q) for q in args.query]
    elif args.all_single_double:
        queries = single_double_queries(spec)
    else:
        raise MarginBoundError("need --query or --all-single-double")
    system = assemble_constraints(spec, tables)
    solver = SimplexSolver(system.layout.total_dim, system.equalities, system.inequalities,
                           feas_tol=args.feas_tol)
    eps_label = epsilon_tuple_label(spec)
    rows, chart_rows, records = _bound_rows(spec, system, solver, queries, scm, eps_label)
    _write_csv(rows, args.out)
    if args.json_out:
        dump_json({"epsilon_tuple": eps_label, "results": records}, args.json_out)
    if args.plot:
        from .plots import save_bounds_chart

        save_bounds_chart(chart_rows, args.plot, title="query bounds")
    if args.certificate_out:
        if len(queries) != 1:
            raise MarginBoundError("--certificate-out needs exactly one --query")
        rec = records[0]
        dump_json(
            {
                "query": rec["query"],
                "status": rec["status"],
                "lower": rec.get("lower"),
                "upper": rec.get("upper"),
                "theta_lower": rec.get("lower_certificate"),
                "theta_upper": rec.get("upper_certificate"),
            },
            args.certificate_out,
        )
    falsified = any(r[4] == "falsified" for r in rows)
    return EXIT_FALSIFIED if falsified else EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_model(args.model)
    if args.epsilon:
        spec = spec.with_epsilons(parse_epsilons(args.epsilon))
    tables = load_tables(args.tables)
    scm = load_scm(args.scm) if args.scm else None
    grids = [parse_edge_grid(e) for e in args.edge]
    declared = {e.label() for e in spec.weak_edges}
    for label, _ in grids:
        if label not in declared:
            raise MarginBoundError(f"edge {label} not declared in the model's weak edges")
    if args.query:
        queries = [parse_query(q) for q in args.query]
    else:
        queries = single_double_queries(spec)
    rows = []
    per_query: dict[str, list[dict]] = {}
    varying = [k for k, (_, vals) in enumerate(grids) if len(vals) > 1]
    x_of = (lambda pt, idx: pt[varying[0]]) if len(varying) == 1 else (lambda pt, idx: idx)
    x_label = grids[varying[0]][0] if len(varying) == 1 else "grid point"
    any_infeasible = False
    for idx, point in enumerate(itertools.product(*(vals for _, vals in grids))):
        eps = {label: v for (label, _), v in zip(grids, point)}
        spec_pt = spec.with_epsilons(eps)
        eps_label = epsilon_tuple_label(spec_pt)
        system = assemble_constraints(spec_pt, tables)
        solver = SimplexSolver(system.layout.total_dim, system.equalities, system.inequalities,
                               feas_tol=args.feas_tol)
        for q in queries:
            truth = true_query_value(scm, q) if scm is not None else None
            try:
                objective, _ = query_objective(system.layout, spec_pt, q)
                res = solver.bounds(objective, q.label())
            except MarginBoundError as exc:
                reason = type(exc).__name__.removesuffix("Error")
                rows.append([q.label(), eps_label, "", "", f"error:{reason}", _fmt(truth)])
                continue
            status = "infeasible" if res.falsified else "optimal"
            any_infeasible = any_infeasible or res.falsified
            rows.append([q.label(), eps_label, _fmt(res.lower), _fmt(res.upper), status, _fmt(truth)])
            per_query.setdefault(q.label(), []).append(
                {"x": x_of(point, idx), "lower": res.lower, "upper": res.upper, "true_value": truth}
            )
    _write_csv(rows, args.out)
    if args.plot:
        from .plots import save_sweep_chart

        save_sweep_chart(per_query, args.plot, x_label=x_label, title="epsilon sweep")
    return EXIT_FALSIFIED if any_infeasible else EXIT_OK


def _feasible(spec: ModelSpec, tables, drop_groups: set[str], feas_tol: float) -> bool:
    system = assemble_constraints(spec, tables)
    eq = [c for c in system.equalities if _tag_group(c.tag) not in drop_groups]
    ineq = [c for c in system.inequalities if _tag_group(c.tag) not in drop_groups]
    solver = SimplexSolver(system.layout.total_dim, eq, ineq, feas_tol=feas_tol)
    return solver.minimize(LinExpr()).status == "optimal"


def _tag_group(tag: str) -> str:
    parts = tag.split(":")
    if parts[0] == "binding":
        return ":".join(parts[:3])  # margin and regime
    if parts[0] in ("weak-dir", "weak-bidir"):
        return ":".join(parts[:3])  # margin and edge
    if parts[0] == "coherence":
        return ":".join(parts[:2])  # margin pair
    return parts[0]  # simplex stays whole


def cmd_falsify(args) -> int:
    spec = load_model(args.model)
    if args.epsilon:
        spec = spec.with_epsilons(parse_epsilons(args.epsilon))
    tables = load_tables(args.tables)
    if _feasible(spec, tables, set(), args.feas_tol):
        print("verdict: feasible")
        return EXIT_OK
    system = assemble_constraints(spec, tables)
    groups = []
    for c in system.all_constraints:
        g = _tag_group(c.tag)
        if g not in groups and not g.startswith("simplex"):
            groups.append(g)
    # deletion filter: drop every group whose removal keeps the program
    # infeasible; what remains is an irreducible-looking blamed set
    removed: set[str] = set()
    for g in groups:
        if not _feasible(spec, tables, removed | {g}, args.feas_tol):
            removed.add(g)
    blamed = [g for g in groups if g not in removed]
    print("verdict: falsified")
    print("blamed constraint groups:")
    for g in blamed:
        print(f"  - {g}")
    return EXIT_FALSIFIED


def _assemble_single(args) -> tuple:
    spec = load_model(args.model)
    if args.epsilon:
        spec = spec.with_epsilons(parse_epsilons(args.epsilon))
    tables = load_tables(args.tables)
    query = parse_query(args.query)
    system = assemble_constraints(spec, tables)
    objective, margin = query_objective(system.layout, spec, query)
    return spec, tables, query, system, objective, margin


def cmd_export_lp(args) -> int:
    _, _, _, system, objective, _ = _assemble_single(args)
    from .simplex import LinearProgram

    lp = LinearProgram(system.layout.total_dim, objective, system.equalities, system.inequalities)
    fmt = {"lp": "lp_text", "lp_text": "lp_text", "mps": "mps"}[args.format]
    text = export_lp(lp, fmt, system.layout)
    Path(args.out).write_text(text)
    print(f"wrote {args.format} export to {args.out}")
    return EXIT_OK


def cmd_verify_certificate(args) -> int:
    _, _, query, system, objective, _ = _assemble_single(args)
    cert = load_json(args.certificate)
    worst = 0.0
    checked = 0
    for side in ("lower", "upper"):
        theta = cert.get(f"theta_{side}")
        if theta is None:
            continue
        theta = np.asarray(theta, dtype=float)
        if theta.size != system.layout.total_dim:
            print(f"error: theta_{side} has length {theta.size}, expected {system.layout.total_dim}")
            return EXIT_USAGE
        report = check_certificate(theta, system.all_constraints, tol=args.tol)
        value = objective.value_at(theta)
        recorded = cert.get(side)
        drift = abs(value - recorded) if recorded is not None else 0.0
        print(
            f"{side}: max violation {report.max_violation:.3e} ({report.worst_tag or 'none'}), "
            f"objective at certificate {value:.12g}, recorded {recorded}, drift {drift:.3e}"
        )
        for v in report.violations[:5]:
            print(f"  violated: {v.tag} by {v.amount:.3e}")
        if len(report.violations) > 5:
            print(f"  ... and {len(report.violations) - 5} more rows over tolerance")
        worst = max(worst, report.max_violation, 0.0 if drift <= 1e-9 else drift)
        checked += 1
    if checked == 0:
        print("error: certificate file carries no theta_lower/theta_upper")
        return EXIT_USAGE
    ok = worst <= args.tol
    print(f"verdict: {'valid' if ok else 'INVALID'} (worst {worst:.3e}, tol {args.tol:g})")
    return EXIT_OK if ok else EXIT_USAGE


# -- argument wiring --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="marginbound",
        description="Bound interventional probabilities in discrete causal models "
        "via margin-level linear programs.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="sample a ground-truth SCM and write regime tables")
    s.add_argument("--n", type=int, required=True, help="number of observed variables")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--confounders", type=int, default=2, help="shared confounder bits")
    s.add_argument("--regimes", default="paper-n4",
                   help="preset name or semicolon-separated do(...) list")
    s.add_argument("--samples", type=int, default=None,
                   help="draw empirical tables of this size (omit for exact)")
    s.add_argument("--damp", default=None, help="edge damping, e.g. 'x1->x4=0.0'")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simulate)

    def common(sp):
        sp.add_argument("--model", required=True, help="preset name or model JSON path")
        sp.add_argument("--tables", required=True, help="manifest path or directory")
        sp.add_argument("--epsilon", default=None,
                        help="override weak-edge epsilons, e.g. 'x1->x4=0.06;x1<->x4=0.12'")
        sp.add_argument("--feas-tol", type=float, default=1e-7,
                        help="infeasibility threshold on the phase-1 objective; raise it "
                        "when empirical tables make exact data binding unsatisfiable")

    b = sub.add_parser("bound", help="bound one or many queries")
    common(b)
    b.add_argument("--query", action="append", help="e.g. 'P(x4=1|do(x1=0))'; repeatable")
    b.add_argument("--all-single-double", action="store_true",
                   help="every expressible P(xT=1|do(...)) with 1 or 2 interventions")
    b.add_argument("--scm", default=None, help="scm.json for true-value columns")
    b.add_argument("--out", default=None, help="CSV path (default: stdout)")
    b.add_argument("--json-out", default=None, help="full records incl. margins used")
    b.add_argument("--plot", default=None, help="SVG interval chart path")
    b.add_argument("--certificate-out", default=None,
                   help="write the solved certificates (single query only)")
    b.set_defaults(func=cmd_bound)

    w = sub.add_parser("sweep", help="bound queries over weak-edge epsilon grids")
    common(w)
    w.add_argument("--edge", action="append", required=True,
                   help="e.g. 'x1<->x4=0.02:0.2:0.02' or 'x1->x4=0.01,0.05'; repeatable")
    w.add_argument("--query", action="append", help="repeatable; default: all single/double")
    w.add_argument("--scm", default=None)
    w.add_argument("--out", default=None, help="CSV path (default: stdout)")
    w.add_argument("--plot", default=None, help="SVG chart path")
    w.set_defaults(func=cmd_sweep)

    f = sub.add_parser("falsify", help="feasibility check with blame localization")
    common(f)
    f.set_defaults(func=cmd_falsify)

    e = sub.add_parser("export-lp", help="write the assembled program as LP or MPS text")
    common(e)
    e.add_argument("--query", required=True)
    e.add_argument("--format", choices=("lp", "lp_text", "mps"), default="lp")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export_lp)

    v = sub.add_parser("verify-certificate", help="re-check a certificate independently")
    common(v)
    v.add_argument("--query", required=True)
    v.add_argument("--certificate", required=True)
    v.add_argument("--tol", type=float, default=1e-7)
    v.set_defaults(func=cmd_verify_certificate)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2, which we reserve
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (MarginBoundError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
