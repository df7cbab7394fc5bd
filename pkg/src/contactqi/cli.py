"""Command line entry point.

Exit codes: 0 pass, 1 fail, 2 not-applicable or indeterminate, 64 usage
error, 65 unreadable or invalid input data.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import catalog, curvature as cv, qisom, structure as st
from .definitions import DefinitionError, DefinitionSet, ManifoldBlock, load_file, parse_definitions
from .expr import ExprError
from .manifold import ManifoldError
from .reports import PASS, CheckReport, Hypothesis, combined_exit_code

EX_USAGE = 64
EX_DATAERR = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return v


def _read_definitions(source: str) -> DefinitionSet:
    if source.startswith(catalog.SCHEME):
        name = source[len(catalog.SCHEME):]
        try:
            return parse_definitions(catalog.source_text(name), source)
        except catalog.UnknownEntryError as exc:
            raise UsageError(str(exc.args[0])) from None
    path = Path(source)
    if not path.is_file():
        raise UsageError(f"no such file: {source}")
    return load_file(path)


def _resolve_target(name: str) -> ManifoldBlock:
    entry = catalog.load(name)
    return ManifoldBlock(entry.manifold, entry.structure)


def _manifold(args) -> ManifoldBlock:
    defs = _read_definitions(args.manifold)
    if args.name is not None and args.name not in defs.blocks:
        raise UsageError(f"{args.manifold} defines no manifold named {args.name!r}")
    return defs.manifold(args.name)


def _embedding(args) -> qisom.Embedding:
    defs = _read_definitions(args.pair)
    if not defs.embeddings:
        raise UsageError(f"{args.pair} has no [embedding] section")
    E = defs.embedding(resolver=_resolve_target)
    if getattr(args, "A", None) is not None or getattr(args, "B", None) is not None:
        E = E.with_constants(A=args.A, B=args.B)
    return E


def _points(args, M):
    return M.sample_points(args.samples, args.seed, window=tuple(args.window))


def _samples(args, E):
    return qisom.make_samples(E, args.samples, args.pairs, args.seed, args.bound, tuple(args.window))


def _sampling_config(args) -> dict:
    return {"points": args.samples, "seed": args.seed, "window": list(args.window)}


def _stamp(report: CheckReport, args, **extra) -> CheckReport:
    report.seed = args.seed
    report.config = {**_sampling_config(args), **report.config, **extra}
    return report


# ---------------------------------------------------------------------------
# Subcommands


def cmd_verify(args):
    blk = _manifold(args)
    if blk.structure is None:
        raise UsageError(f"{blk.manifold.name} has no [structure] section")
    pts = _points(args, blk.manifold)
    tol = args.tol if args.tol is not None else st.AXIOM_TOL
    return [_stamp(r, args, manifold=blk.manifold.name) for r in st.verify_axioms(blk.structure, pts, tol)]


def cmd_classify(args):
    blk = _manifold(args)
    if blk.structure is None:
        raise UsageError(f"{blk.manifold.name} has no [structure] section")
    M, S = blk.manifold, blk.structure
    pts = _points(args, M)
    bundle = st.source_curvature(M, pts)
    reports = [st.verify_contact(S, pts, args.tol if args.tol is not None else st.CONTACT_TOL)]
    nk = st.classify_nk(S, pts, args.tol if args.tol is not None else st.NK_TOL, bundle=bundle)
    rep = nk.report(len(pts))
    if nk.k is not None:
        rep.metrics.update(st.nk_identities(S, pts, nk.k, bundle=bundle))
    reports.append(rep)
    reports.append(st.verify_sasakian(S, pts, args.tol if args.tol is not None else st.SASAKIAN_TOL,
                                      bundle=bundle))
    ident = st.sasakian_identities(S, pts, bundle=bundle)
    reports[-1].metrics.update({f"identity_{k}": v for k, v in ident.items()})
    return [_stamp(r, args, manifold=M.name) for r in reports]


def cmd_curvature(args):
    blk = _manifold(args)
    M = blk.manifold
    pts = _points(args, M)
    bundle = st.source_curvature(M, pts)
    out = [CheckReport("scalar_curvature", PASS, samples=len(pts), conclusion=PASS,
                       metrics={"min": float(bundle.scalar.min()), "max": float(bundle.scalar.max()),
                                "mean": float(bundle.scalar.mean())})]
    eta = blk.structure.fields(pts).eta if blk.structure is not None else None
    fit_tol = args.tol if args.tol is not None else cv.FIT_TOL
    fit = cv.einstein_fit(M, pts, eta, fit_tol, bundle=bundle)
    out.append(CheckReport("einstein_fit", PASS if fit.einstein else "fail", samples=len(pts), tol=fit_tol,
                           conclusion=PASS if fit.einstein else "fail",
                           metrics={"einstein": fit.einstein, "eta_einstein": fit.eta_einstein,
                                    "a": fit.a, "b": fit.b, "residual": fit.residual}))
    flat_tol = args.tol if args.tol is not None else cv.FLAT_TOL
    for kind in cv.KINDS:
        f = cv.flatness_test(kind, M, pts, flat_tol, bundle=bundle)
        verdict = PASS if f.flat else "fail"
        out.append(CheckReport(f"{kind}_flat", verdict, samples=len(pts), tol=flat_tol, conclusion=verdict,
                               metrics={"residual": f.max_residual}))
    return [_stamp(r, args, manifold=M.name) for r in out], 0


def cmd_embed_check(args):
    E = _embedding(args)
    s = _samples(args, E)
    tol = args.tol if args.tol is not None else qisom.SANDWICH_TOL
    return [qisom.check_embedding(E, s, tol)]


def cmd_estimate(args):
    E = _embedding(args)
    s = _samples(args, E)
    u, v = qisom.sandwich_values(E, s.points, s.X, s.Y)
    est = qisom.best_constants(u, v)
    declared = qisom.b_min(E.A, u, v)
    rep = CheckReport("estimate", PASS, samples=s.count, seed=s.seed, conclusion=PASS,
                      metrics={"A_star": est.A, "B_star": est.B, "resolution": est.resolution,
                               "declared_A": E.A, "declared_B": E.B,
                               "B_min_at_declared_A": declared,
                               "declared_feasible": bool(declared <= E.B)},
                      config=s.config())
    return [rep]


def cmd_quasi_dense(args):
    E = _embedding(args)
    pts = E.source.sample_points(args.samples, args.seed, window=tuple(args.window))
    Z = qisom.field_pool(E.dim, args.fields, args.seed, args.bound)
    X = qisom.field_pool(E.dim, args.fields, args.seed + 1, args.bound, include_zero=args.include_zero)
    res = qisom.check_quasi_dense(E, Z, X, pts)
    rep = res.report(len(pts), args.seed)
    rep.config = {**_sampling_config(args), "fields": args.fields, "coefficient_bound": args.bound,
                  "include_zero": args.include_zero}
    return [rep]


def cmd_theorem(args):
    E = _embedding(args)
    s = _samples(args, E)
    tol = args.tol if args.tol is not None else qisom.SANDWICH_TOL
    ids = qisom.THEOREM_IDS if args.id == "all" else (args.id,)
    return [qisom.check_theorem(t, E, s, tol, force=args.force) for t in ids]


def cmd_catalog(args, out):
    if args.entry is not None:
        try:
            text = catalog.source_text(args.entry)
        except catalog.UnknownEntryError as exc:
            raise UsageError(str(exc.args[0])) from None
        out.write(text)
        return 0
    for entry in catalog.entries():
        extra = f" -> {entry.embedding.target.name}" if entry.embedding is not None else ""
        if args.format == "records":
            out.write(json.dumps({"name": entry.name, "manifold": entry.manifold.name,
                                  "dim": entry.manifold.dim, "structure": entry.structure is not None,
                                  "embedding_target": entry.embedding.target.name if entry.embedding else None,
                                  "provenance": list(entry.provenance)}) + "\n")
            continue
        out.write(f"{entry.name}  (dim {entry.manifold.dim}{extra})\n")
        for note in entry.provenance:
            out.write(f"    {note}\n")
    return 0


# ---------------------------------------------------------------------------
# Output


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _write_text(reports: list[CheckReport], out) -> None:
    out.write(f"{'check':<22} {'verdict':<15} {'lower':>12} {'upper':>12}  details\n")
    for r in reports:
        rec = r.to_record()
        details = []
        for k, v in rec["metrics"].items():
            if isinstance(v, list):
                continue
            details.append(f"{k}={_fmt(v)}")
        if r.conclusion is not None and r.conclusion != r.verdict:
            details.append(f"conclusion={r.conclusion}")
        out.write(f"{r.id:<22} {r.verdict:<15} {_fmt(rec['max_lower_violation']):>12} "
                  f"{_fmt(rec['max_upper_violation']):>12}  {' '.join(details)}\n")
        for h in r.hypotheses:
            mark = "holds" if h.holds else "fails"
            note = "" if h.gating else " (not required)"
            out.write(f"    hypothesis {h.name}: {mark}{note}  {h.detail}\n")
        if "frame_sum" in r.metrics:
            sums = np.asarray(r.metrics["frame_sum"])
            out.write(f"    frame sum per point: {len(sums)} values in [{sums.min():.6g}, {sums.max():.6g}]\n")
    out.write(f"samples={reports[0].samples} seed={reports[0].seed}\n" if reports else "")


def _write_records(reports: list[CheckReport], out) -> None:
    for r in reports:
        out.write(json.dumps(r.to_record(), allow_nan=False) + "\n")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contactqi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, pair: bool):
        if pair:
            p.add_argument("--pair", required=True, help="definition file with an [embedding], or catalog:NAME")
        else:
            p.add_argument("--manifold", required=True, help="definition file or catalog:NAME")
            p.add_argument("--name", help="manifold to use when the file defines several")
        p.add_argument("--samples", type=_positive_int, default=500, help="sample points (default 500)")
        p.add_argument("--seed", type=int, default=42, help="random seed (default 42)")
        p.add_argument("--tol", type=_positive_float, default=None, help="tolerance override")
        p.add_argument("--window", type=float, nargs=2, default=(-5.0, 5.0), metavar=("LO", "HI"),
                       help="sampling window for unbounded coordinates (default -5 5)")
        p.add_argument("--format", choices=("text", "records"), default="text")
        if pair:
            p.add_argument("--pairs", type=_positive_int, default=200, help="vector pairs per point (default 200)")
            p.add_argument("--bound", type=_positive_float, default=1.0,
                           help="coefficient bound for sampled vectors (default 1)")
            p.add_argument("--A", type=float, default=None, help="override the declared A")
            p.add_argument("--B", type=_nonneg_float, default=None, help="override the declared B")

    common(sub.add_parser("verify", help="almost contact metric axioms"), False)
    common(sub.add_parser("classify", help="contact, N(k) and Sasakian tests"), False)
    common(sub.add_parser("curvature", help="scalar curvature, Einstein fit, flatness"), False)
    common(sub.add_parser("embed-check", help="quasi-isometric embedding inequality"), True)
    common(sub.add_parser("estimate", help="best constants A, B on the samples"), True)
    p = sub.add_parser("quasi-dense", help="quasi-density constant D*")
    common(p, True)
    p.add_argument("--fields", type=_positive_int, default=20, help="random constant fields per pool (default 20)")
    p.add_argument("--include-zero", action="store_true", help="add the zero field to the source pool")
    p = sub.add_parser("theorem", help="check one theorem (or all) on an embedding")
    common(p, True)
    p.add_argument("--id", required=True, choices=qisom.THEOREM_IDS + ("all",))
    p.add_argument("--force", action="store_true", help="evaluate the conclusion even if hypotheses fail")
    p = sub.add_parser("catalog", help="list built-in entries, or print one")
    p.add_argument("entry", nargs="?", help="print this entry's definition file")
    p.add_argument("--format", choices=("text", "records"), default="text")
    return parser


COMMANDS = {"verify": cmd_verify, "classify": cmd_classify, "curvature": cmd_curvature,
            "embed-check": cmd_embed_check, "estimate": cmd_estimate, "quasi-dense": cmd_quasi_dense,
            "theorem": cmd_theorem}


def run(argv=None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "catalog":
            return cmd_catalog(args, out)
        if getattr(args, "A", None) is not None and args.A < 1:
            raise UsageError(f"--A must be at least 1, got {args.A}")
        if args.window[0] >= args.window[1]:
            raise UsageError("--window needs LO < HI")
        result = COMMANDS[args.command](args)
        code = None
        if isinstance(result, tuple):
            result, code = result
        (_write_records if args.format == "records" else _write_text)(result, out)
        return combined_exit_code(result) if code is None else code
    except UsageError as exc:
        err.write(f"contactqi: error: {exc}\n")
        return EX_USAGE
    except (DefinitionError, ExprError, ManifoldError, qisom.EmbeddingError, ValueError) as exc:
        err.write(f"contactqi: error: {exc}\n")
        return EX_DATAERR


def main(argv=None) -> int:
    try:
        code = run(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EX_USAGE
    sys.exit(code)


if __name__ == "__main__":
    main()
