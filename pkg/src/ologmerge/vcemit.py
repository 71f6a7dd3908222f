"""TPTP emission for verification conditions, and consistency reports."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .eqlogic import (
    App,
    Equation,
    FuncSymbol,
    Lit,
    Null,
    Status,
    Term,
    Var,
    ground_congruence,
    show,
    show_lit,
    show_number,
    subterms,
    substitute,
)
from .instance import Bounds, Inconsistent, Instance, InstanceModel, gen_term, saturate, shrink_trace
from .schema import Schema, VerificationCondition, split_definitional
from .typeside import fold_literals, reduce

# ---------------------------------------------------------------------------
# symbol mangling

_OPERATOR_NAMES = {"+": "plus", "-": "minus", "*": "times"}


def _ident(text: str) -> str:
    """Lowercase identifier made of ``[a-z0-9_]``, never empty."""
    s = _OPERATOR_NAMES.get(text, text)
    s = re.sub(r"[^0-9a-zA-Z]+", "_", s).strip("_").lower()
    return s or "x"


class Mangler:
    """Deterministic map from olog symbols to TPTP lower words.

    Names are assigned in sorted key order, so the same signature always
    yields the same table regardless of the order symbols are met in.
    """

    def __init__(self, symbols: Iterable[FuncSymbol], entities: Iterable[str]) -> None:
        self.table: dict[tuple, str] = {}
        used: set[str] = set()

        def claim(key: tuple, base: str) -> None:
            name, k = base, 2
            while name in used:
                name, k = f"{base}_{k}", k + 1
            used.add(name)
            self.table[key] = name

        for e in sorted(set(entities)):
            claim(("sort", e), f"is_{_ident(e)}")
        syms = sorted(set(symbols), key=lambda f: (f.name, f.arg_sorts, f.result_sort))
        for f in syms:
            if f.arg_sorts:
                claim(("fun", f.key), f"f_{_ident(f.name)}_{'_'.join(_ident(s) for s in f.arg_sorts)}")
            else:
                claim(("fun", f.key), f"c_{_ident(f.name)}")

    def sort(self, entity: str) -> str:
        return self.table[("sort", entity)]

    def fun(self, f: FuncSymbol) -> str:
        key = ("fun", f.key)
        if key not in self.table:
            base = f"c_{_ident(f.name)}" if not f.arg_sorts else f"f_{_ident(f.name)}"
            name, k = base, 2
            taken = set(self.table.values())
            while name in taken:
                name, k = f"{base}_{k}", k + 1
            self.table[key] = name
        return self.table[key]


def _lit_name(lit: Lit) -> str:
    if isinstance(lit.value, bool):
        return "b_true" if lit.value else "b_false"
    if isinstance(lit.value, str):
        body = lit.value.replace("\\", "\\\\").replace('"', '\\"')
        return '"' + body.encode("ascii", "backslashreplace").decode("ascii") + '"'
    text = show_number(lit.value).replace("-", "m").replace(".", "_")
    return f"n_{_ident(lit.sort)}_{text}"


def _var_names(ctx: Sequence[tuple[str, str]]) -> dict[str, str]:
    return {v: f"X{i}" for i, (v, _) in enumerate(ctx, 1)}


def _term(t: Term, m: Mangler, vars: Mapping[str, str]) -> str:
    if isinstance(t, Var):
        return vars[t.name]
    if isinstance(t, Lit):
        return _lit_name(t)
    if isinstance(t, Null):
        return f"null_{_ident(t.sort)}_{_ident(t.name)}"
    head = m.fun(t.symbol)
    if not t.args:
        return head
    return f"{head}({','.join(_term(a, m, vars) for a in t.args)})"


def _formula(eq: Equation, m: Mangler, guards: Iterable[str]) -> str:
    vars = _var_names(eq.ctx)
    body = f"{_term(eq.lhs, m, vars)} = {_term(eq.rhs, m, vars)}"
    if not eq.ctx:
        return body
    binders = ",".join(vars[v] for v, _ in eq.ctx)
    gs = [f"{m.sort(s)}({vars[v]})" for v, s in eq.ctx if s in set(guards)]
    if gs:
        body = f"({' & '.join(gs)}) => {body}" if len(gs) > 1 else f"{gs[0]} => {body}"
    return f"![{binders}]: ({body})"


def _comment(text: str) -> list[str]:
    return ["% " + line.encode("ascii", "backslashreplace").decode("ascii") for line in text.splitlines()]


# ---------------------------------------------------------------------------
# TPTP problems


@dataclass(frozen=True)
class TptpProblem:
    id: str
    axioms: tuple[tuple[str, str], ...]
    conjecture: str
    header: tuple[str, ...] = ()

    @property
    def filename(self) -> str:
        return re.sub(r"[^0-9A-Za-z._-]+", "_", self.id) + ".p"

    def text(self) -> str:
        out = list(self.header)
        out += [f"fof({name}, axiom, {body})." for name, body in self.axioms]
        out.append(f"fof({_ident(self.id)}, conjecture, {self.conjecture}).")
        return "\n".join(out) + "\n"


def _literal_facts(eqs: Iterable[Equation]) -> list[tuple[FuncSymbol, tuple[Lit, ...], Lit]]:
    """Evaluations ``f(c1, c2) = c3`` for every all-literal application that occurs."""
    seen: dict[tuple, tuple] = {}
    for eq in eqs:
        for side in (eq.lhs, eq.rhs):
            for t in subterms(side):
                if isinstance(t, App) and t.args and all(isinstance(a, Lit) for a in t.args):
                    value = fold_literals(t.symbol, t.args)
                    if value is not None:
                        seen[(t.symbol.key, tuple(show_lit(a) for a in t.args))] = (t.symbol, t.args, value)
    return [seen[k] for k in sorted(seen)]


def _distinct_numerals(eqs: Iterable[Equation], facts) -> list[Lit]:
    lits: dict[tuple, Lit] = {}
    for eq in eqs:
        for side in (eq.lhs, eq.rhs):
            for t in subterms(side):
                if isinstance(t, Lit) and not isinstance(t.value, str):
                    lits[(t.sort, _lit_name(t))] = t
    for _, args, value in facts:
        for t in (*args, value):
            if not isinstance(t.value, str):
                lits[(t.sort, _lit_name(t))] = t
    return [lits[k] for k in sorted(lits)]


def build_problem(vc: VerificationCondition, target: Schema) -> TptpProblem:
    """One FOF problem: type side axioms, target schema equations, and the VC as conjecture."""
    ts_syms = [s for s in target.typeside.theory.symbols.values()]
    m = Mangler(list(ts_syms) + list(target.symbols), target.entities)
    ents = set(target.entities)
    axioms: list[tuple[str, str]] = []
    for i, eq in enumerate(target.typeside.axioms, 1):
        axioms.append((f"typeside_{i}", _formula(eq, m, ())))
    for f in target.fks:
        (d,) = f.arg_sorts
        axioms.append((f"fk_{m.fun(f)}", f"![X1]: ({m.sort(d)}(X1) => {m.sort(f.result_sort)}({m.fun(f)}(X1)))"))
    for i, eq in enumerate(target.equations, 1):
        axioms.append((f"schema_{i}", _formula(eq, m, ents)))
    everything = list(target.equations) + list(target.typeside.axioms) + [vc.conjecture]
    facts = _literal_facts(everything)
    for i, (f, args, value) in enumerate(facts, 1):
        lhs = f"{m.fun(f)}({','.join(_lit_name(a) for a in args)})"
        axioms.append((f"literal_{i}", f"{lhs} = {_lit_name(value)}"))
    nums = _distinct_numerals(everything, facts)
    for i, (a, b) in enumerate(((a, b) for j, a in enumerate(nums) for b in nums[j + 1:] if a.sort == b.sort), 1):
        axioms.append((f"distinct_{i}", f"{_lit_name(a)} != {_lit_name(b)}"))
    header = [f"% problem {vc.id}", f"% target schema {target.name}"]
    header += _comment(f"source equation: {vc.source}")
    header += _comment(f"conjecture: {vc.conjecture}")
    header.append("% symbols")
    for key, name in sorted(m.table.items(), key=lambda kv: kv[1]):
        if key[0] == "sort":
            header += _comment(f"  {name}: rows of {key[1]}")
        else:
            fname, args = key[1]
            header += _comment(f"  {name}: {fname}({', '.join(args)})")
    return TptpProblem(vc.id, tuple(axioms), _formula(vc.conjecture, m, ents), tuple(header))


def emit_tptp(vcs: Iterable[VerificationCondition], target: Schema) -> dict[str, str]:
    """Problem text per VC id, in input order."""
    return {vc.id: build_problem(vc, target).text() for vc in vcs}


def write_tptp(vcs: Iterable[VerificationCondition], target: Schema, directory: Union[str, Path]) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for vc in vcs:
        p = build_problem(vc, target)
        path = out / p.filename
        path.write_text(p.text())
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# consistency


class Verdict(str, enum.Enum):
    CONSISTENT = "Consistent"
    INCONSISTENT = "Inconsistent"
    FREE = "FreeTheory"


@dataclass(frozen=True)
class Clash:
    left: Lit
    right: Lit
    trace: tuple[Equation, ...]

    def replays(self) -> bool:
        return ground_congruence(self.trace, (self.left, self.right), depth_cap=None) is Status.PROVED

    def __str__(self) -> str:
        return f"{show(self.left)} = {show(self.right)}"


@dataclass
class ConsistencyReport:
    verdict: Verdict
    clashes: list[Clash] = field(default_factory=list)
    non_definitional: list[Equation] = field(default_factory=list)
    model: Optional[InstanceModel] = None

    @property
    def consistent(self) -> bool:
        return not self.clashes

    def to_markdown(self) -> str:
        out = ["## Consistency", "", f"Verdict: **{self.verdict.value}**", ""]
        if self.verdict is Verdict.FREE:
            out += ["Every schema equation defines a column, so no literal clash can come from the schema.", ""]
        elif self.non_definitional:
            out += [f"Non-definitional equations: {len(self.non_definitional)}", ""]
            out += [f"- `{e}`" for e in self.non_definitional] + [""]
        for c in self.clashes:
            out += [f"### Clash `{c}`", "", "Derivation:", ""]
            out += [f"{i}. `{e}`" for i, e in enumerate(c.trace, 1)] + [""]
        return "\n".join(out)


def _classify(schema: Schema, clashes: list[Clash], model=None) -> ConsistencyReport:
    _, others = split_definitional(schema)
    if clashes:
        verdict = Verdict.INCONSISTENT
    elif not others:
        verdict = Verdict.FREE
    else:
        verdict = Verdict.CONSISTENT
    return ConsistencyReport(verdict, clashes, others, model)


def _model_clashes(m: InstanceModel) -> list[Clash]:
    """Literal clashes still derivable from a model's type algebra or row values."""
    from .eqlogic import EGraph

    g = EGraph(fold=fold_literals)
    for eq in m.type_equations:
        g.union(g.add_term(reduce(eq.lhs)), g.add_term(reduce(eq.rhs)))
    g.rebuild()
    found: dict[tuple, Clash] = {}

    def record(a: Lit, b: Lit, facts: list[Equation]) -> None:
        a, b = sorted((a, b), key=lambda x: (str(type(x.value)), x.value))
        key = (a, b)
        if key not in found:
            found[key] = Clash(a, b, tuple(shrink_trace(facts, (a, b))))

    for a, b in g.clashes:
        record(a, b, list(m.type_equations))
    if found:
        return [found[k] for k in sorted(found, key=lambda k: (show(k[0]), show(k[1])))]

    pres = None
    for eq in m.schema.equations:
        (v, e), = eq.ctx
        for r in m.rows.get(e, []):
            lv, rv = m.evaluate(eq.lhs, {v: r}), m.evaluate(eq.rhs, {v: r})
            lv, rv = reduce(lv), reduce(rv)
            if isinstance(lv, Lit) and isinstance(rv, Lit) and lv != rv:
                if pres is None:
                    pres = list(m.to_instance().equations)
                w = gen_term(r, e)
                inst = Equation((), substitute(eq.lhs, {v: w}), substitute(eq.rhs, {v: w}), eq.sort)
                record(lv, rv, pres + [inst])
    return [found[k] for k in sorted(found, key=lambda k: (show(k[0]), show(k[1])))]


def consistency_check(x: Union[Instance, InstanceModel], bounds: Bounds = Bounds()) -> ConsistencyReport:
    """Classify an instance (saturating it) or an already saturated model.

    NonTermination from the chase propagates.
    """
    if isinstance(x, Instance):
        try:
            model = saturate(x, bounds)
        except Inconsistent as exc:
            a, b = exc.clash
            return _classify(x.schema, [Clash(a, b, tuple(exc.trace))])
        return _classify(x.schema, _model_clashes(model), model)
    return _classify(x.schema, _model_clashes(x), x)


def inconsistency_report(schema: Schema, exc: Inconsistent) -> ConsistencyReport:
    a, b = exc.clash
    return _classify(schema, [Clash(a, b, tuple(exc.trace))])


# ---------------------------------------------------------------------------
# Markdown


def vc_markdown(vcs: Mapping[str, Sequence[VerificationCondition]]) -> str:
    out = ["## Verification conditions", ""]
    if not any(vcs.values()):
        return "\n".join(out + ["None.", ""])
    out += ["| id | status | conjecture | note |", "|---|---|---|---|"]
    for name in vcs:
        for vc in vcs[name]:
            conj = str(vc.conjecture).replace("|", "\\|")
            out.append(f"| {vc.id} | {vc.status.value} | `{conj}` | {vc.note} |")
    return "\n".join(out) + "\n"


def markdown_report(
    title: str,
    vcs: Mapping[str, Sequence[VerificationCondition]] = {},
    consistency: Optional[ConsistencyReport] = None,
    diffs: Mapping[str, object] = {},
) -> str:
    parts = [f"# {title}", "", vc_markdown(vcs)]
    if consistency is not None:
        parts.append(consistency.to_markdown())
    for name in sorted(diffs):
        parts.append(diffs[name].to_markdown())
    return "\n".join(parts).rstrip() + "\n"
