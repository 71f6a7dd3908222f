"""Command-line entry point: ``ologmerge import|check|integrate|export|vc``.

Exit codes:
  0  success
  2  malformed input (workbook normal-form violation, syntax error)
  3  some verification condition is Unknown
  4  inconsistent (a literal clash is derivable)
  5  chase did not terminate within bounds
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from .eqlogic import OlogError
from .instance import Bounds, Inconsistent, NonTermination, saturate
from .integrate import VcUnknown, integrate
from .schema import MODEL, SYMBOLIC, all_passed, check_vcs, generate_functoriality_vcs, render_schema
from .sheetio import NormalFormViolation, export_olog, import_olog, parse_workbook, print_workbook
from .syntax import Document, ParseError, load
from .typeside import EXCEL, TypeSide
from .vcemit import consistency_check, inconsistency_report, markdown_report, vc_markdown, write_tptp

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNKNOWN_VC = 3
EXIT_INCONSISTENT = 4
EXIT_NONTERMINATION = 5


def parse_bounds(text: str) -> Bounds:
    """``max_rounds=N,max_fresh=M`` (either key may be omitted)."""
    vals = {}
    for part in filter(None, text.split(",")):
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in ("max_rounds", "max_fresh") or not value.strip().isdigit():
            raise argparse.ArgumentTypeError(f"bad bound {part!r}")
        vals[key] = int(value)
    return Bounds(**vals)


def _say(text: str) -> None:
    print(text, file=sys.stdout)


def _err(text: str) -> None:
    print(text, file=sys.stderr)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _typeside(strings: bool) -> TypeSide:
    return TypeSide(strings=True) if strings else EXCEL


# ---------------------------------------------------------------------------
# import


def cmd_import(args) -> int:
    path = Path(args.workbook)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            w = parse_workbook(path.read_text(), _typeside(args.strings))
            schema, inst = import_olog(w)
        except NormalFormViolation as exc:
            for d in exc.diagnostics:
                _err(f"{path}:{d}")
            return EXIT_INPUT
    for c in caught:
        _err(f"{path}: warning: {c.message}")
    out = Path(args.out) if args.out else path.parent
    stem = path.stem
    prelude = "typeside strings\n" if args.strings else ""
    schema_file = out / f"{stem}.schema.olog"
    inst_file = out / f"{stem}.instance.olog"
    _write(schema_file, prelude + render_schema(schema) + "\n")
    _write(inst_file, f'include "{schema_file.name}"\n' + str(inst) + "\n")
    _say(f"wrote {schema_file}")
    _say(f"wrote {inst_file}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check and vc


def _mappings(doc: Document, names: Optional[Sequence[str]]):
    if not names:
        return list(doc.mappings.values())
    missing = [n for n in names if n not in doc.mappings]
    if missing:
        raise ParseError(f"unknown mapping(s): {', '.join(missing)}")
    return [doc.mappings[n] for n in names]


def _instance_on(doc: Document, schema_name: str, wanted: Optional[str]):
    if wanted:
        inst = doc.instances[wanted]
        return inst if inst.schema.name == schema_name else None
    for inst in doc.instances.values():
        if inst.schema.name == schema_name:
            return inst
    return None


def cmd_check(args) -> int:
    doc = load(args.file, strings=args.strings)
    results = {}
    for m in _mappings(doc, args.mapping):
        vcs = generate_functoriality_vcs(m)
        if args.mode == SYMBOLIC:
            vcs = check_vcs(vcs, SYMBOLIC, target=m.target)
        else:
            inst = _instance_on(doc, m.target.name, args.instance)
            if inst is None:
                _err(f"no instance on {m.target.name} to check {m.name} against")
                return EXIT_INPUT
            vcs = check_vcs(vcs, MODEL, model=saturate(inst, args.bounds))
        results[m.name] = vcs
        if args.emit_tptp:
            for p in write_tptp(vcs, m.target, args.emit_tptp):
                _say(f"wrote {p}")
    _say(vc_markdown(results).rstrip())
    flat = [v for vs in results.values() for v in vs]
    return EXIT_OK if all_passed(flat) else EXIT_UNKNOWN_VC


def cmd_vc(args) -> int:
    doc = load(args.file, strings=args.strings)
    for m in _mappings(doc, args.mapping):
        for p in write_tptp(generate_functoriality_vcs(m), m.target, args.out):
            _say(f"wrote {p}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# integrate


def cmd_integrate(args) -> int:
    doc = load(args.config, strings=args.strings)
    name = args.problem
    if name is None and len(doc.problems) != 1:
        raise ParseError("config must define exactly one problem, or pass --problem")
    spec = doc.problems[name or next(iter(doc.problems))]
    problem = doc.problem(spec.name)
    if args.mode:
        problem.vc_mode = args.mode
    if args.waive_vcs:
        problem.waive_vcs = True
    bounds = args.bounds or spec.bounds
    out = Path(args.out or spec.output or "out")

    try:
        r = integrate(problem, bounds)
    except VcUnknown as exc:
        _write(out / "report.md", markdown_report(problem.name, {"all": exc.vcs}))
        _err(str(exc))
        return EXIT_UNKNOWN_VC
    except Inconsistent as exc:
        rep = inconsistency_report(problem.colimit().schema, exc)
        _write(out / "report.md", markdown_report(problem.name, consistency=rep))
        _err(f"inconsistent: {exc}")
        for i, eq in enumerate(exc.trace, 1):
            _err(f"  {i}. {eq}")
        return EXIT_INCONSISTENT
    except NonTermination as exc:
        _err(f"non-terminating: {exc}")
        return EXIT_NONTERMINATION

    report = consistency_check(r.model)
    _write(out / "colimit.olog", render_schema(r.schema) + "\n")
    _write(out / "integrated.wb", print_workbook(export_olog(r.schema, r.model, problem.name)))
    for node in sorted(r.projected):
        src = problem.diagram.node(node)
        _write(out / "exchanged" / f"{node}.wb", print_workbook(export_olog(src, r.projected[node], node)))
        _write(out / "diffs" / f"{node}.md", r.diffs[node].to_markdown())
    _write(out / "report.md", markdown_report(problem.name, r.vcs, report, r.diffs))
    if args.emit_tptp:
        for e in problem.diagram.edges:
            write_tptp(r.vcs[e.name], e.target, out / "tptp")
    _say(f"{problem.name}: {r.model.summary()}")
    _say(f"consistency: {report.verdict.value}")
    _say(f"wrote {out}")
    return EXIT_OK if report.consistent else EXIT_INCONSISTENT


# ---------------------------------------------------------------------------
# export


def cmd_export(args) -> int:
    doc = load(args.file, strings=args.strings)
    if args.instance:
        inst = doc.instances[args.instance]
    elif len(doc.instances) == 1:
        inst = next(iter(doc.instances.values()))
    else:
        raise ParseError("pass --instance to pick one of: " + ", ".join(doc.instances))
    try:
        model = saturate(inst, args.bounds)
    except Inconsistent as exc:
        _err(f"inconsistent: {exc}")
        return EXIT_INCONSISTENT
    except NonTermination as exc:
        _err(f"non-terminating: {exc}")
        return EXIT_NONTERMINATION
    text = print_workbook(export_olog(inst.schema, model, inst.name))
    if args.out:
        _write(Path(args.out), text)
        _say(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ologmerge", description="Spreadsheets as equational theories: import, check, merge.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, bounds=True):
        sp.add_argument("--strings", action="store_true", help="enable concat and floatToString")
        if bounds:
            sp.add_argument("--bounds", type=parse_bounds, default=None, help="max_rounds=N,max_fresh=M")

    sp = sub.add_parser("import", help="workbook -> schema and instance files")
    sp.add_argument("workbook")
    sp.add_argument("-o", "--out", help="output directory (default: next to the workbook)")
    common(sp, bounds=False)
    sp.set_defaults(func=cmd_import)

    sp = sub.add_parser("check", help="generate and discharge mapping verification conditions")
    sp.add_argument("file")
    sp.add_argument("--mapping", action="append", help="mapping name (repeatable; default all)")
    sp.add_argument("--mode", choices=(SYMBOLIC, MODEL), default=SYMBOLIC)
    sp.add_argument("--instance", help="instance on the target schema, for --mode model")
    sp.add_argument("--emit-tptp", metavar="DIR", help="also write TPTP problems to DIR")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("integrate", help="run an integration problem and write the result bundle")
    sp.add_argument("config")
    sp.add_argument("--problem", help="problem name when the config defines several")
    sp.add_argument("-o", "--out", help="bundle directory (default: the problem's output entry)")
    sp.add_argument("--mode", choices=(SYMBOLIC, MODEL))
    sp.add_argument("--waive-vcs", action="store_true")
    sp.add_argument("--emit-tptp", action="store_true", help="write TPTP problems into the bundle")
    common(sp)
    sp.set_defaults(func=cmd_integrate)

    sp = sub.add_parser("export", help="saturate an instance and print it as a workbook")
    sp.add_argument("file")
    sp.add_argument("--instance")
    sp.add_argument("-o", "--out", help="workbook path (default: stdout)")
    common(sp)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("vc", help="write TPTP problems for mapping verification conditions")
    sp.add_argument("file")
    sp.add_argument("--mapping", action="append")
    sp.add_argument("-o", "--out", default="tptp")
    common(sp, bounds=False)
    sp.set_defaults(func=cmd_vc)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "bounds", None) is None and args.command in ("check", "export"):
        args.bounds = Bounds()
    try:
        return args.func(args)
    except (ParseError, NormalFormViolation, FileNotFoundError, KeyError) as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    except OlogError as exc:
        _err(f"error: {type(exc).__name__}: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
