"""Instances, the chase, and functorial data migration (sigma / delta)."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

from .eqlogic import (
    App,
    EGraph,
    Equation,
    FuncSymbol,
    Lit,
    Null,
    OlogError,
    SortMismatch,
    Status,
    Term,
    Var,
    ground_congruence,
    nulls_of,
    show,
    substitute,
    term_sort,
    translate,
)
from .schema import Report, Schema, SchemaMapping
from .typeside import NUMERIC, fold_literals, reduce, ring_normalize


class NonTermination(OlogError):
    def __init__(self, msg: str, rounds: int, fresh: int) -> None:
        super().__init__(msg)
        self.rounds = rounds
        self.fresh = fresh


class Inconsistent(OlogError):
    def __init__(self, clash: tuple[Lit, Lit], trace: list[Equation]) -> None:
        a, b = clash
        super().__init__(f"{show(a)} = {show(b)} is derivable")
        self.clash = clash
        self.trace = trace


class Violation(OlogError):
    pass


@dataclass(frozen=True)
class Bounds:
    max_rounds: int = 10_000
    max_fresh: int = 100_000


def gen_symbol(name: str, sort: str) -> FuncSymbol:
    return FuncSymbol(name, (), sort)


def gen_term(name: str, sort: str) -> App:
    return App(gen_symbol(name, sort), ())


def is_generator(t: Term) -> bool:
    return isinstance(t, App) and not t.args


@dataclass(frozen=True)
class Instance:
    name: str
    schema: Schema
    generators: tuple[tuple[str, str], ...] = ()
    equations: tuple[Equation, ...] = ()

    @classmethod
    def build(
        cls,
        name: str,
        schema: Schema,
        generators: Iterable[tuple[str, str]] = (),
        equations: Iterable = (),
    ) -> "Instance":
        """``equations`` may be Equations or ``(lhs, rhs)`` pairs of ground terms."""
        eqs = []
        for e in equations:
            if not isinstance(e, Equation):
                lhs, rhs = e
                e = Equation((), lhs, rhs, term_sort(lhs))
            eqs.append(e)
        inst = cls(name, schema, tuple(generators), tuple(eqs))
        inst.theory  # validates
        return inst

    @cached_property
    def sort_of(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for g, s in self.generators:
            if g in out:
                raise SortMismatch(f"generator {g} declared twice")
            out[g] = s
        return out

    @cached_property
    def theory(self):
        syms = [gen_symbol(g, s) for g, s in self.generators]
        self.sort_of
        return self.schema.theory.extend(self.name, (), syms, self.equations)

    def gen(self, name: str) -> App:
        return gen_term(name, self.sort_of[name])

    def entity_generators(self) -> list[tuple[str, str]]:
        return [(g, s) for g, s in self.generators if self.schema.is_entity(s)]

    def type_generators(self) -> list[tuple[str, str]]:
        return [(g, s) for g, s in self.generators if not self.schema.is_entity(s)]

    def __str__(self) -> str:
        from .eqlogic import quote_ident as q

        out = [f"instance {q(self.name)} : {q(self.schema.name)} = {{"]
        if self.generators:
            out.append("  generators")
            out += [f"    {q(g)} : {q(s)}" for g, s in self.generators]
        if self.equations:
            out.append("  equations")
            out += [f"    {e}" for e in self.equations]
        out.append("}")
        return "\n".join(out)


# ---------------------------------------------------------------------------
# models


@dataclass
class InstanceModel:
    """Saturated model: named rows, total fks and attrs, and a type algebra."""

    schema: Schema
    rows: dict[str, list[str]]
    fk_values: dict[FuncSymbol, dict[str, str]]
    attr_values: dict[FuncSymbol, dict[str, Term]]
    nulls: dict[str, list[Null]] = field(default_factory=dict)
    type_equations: list[Equation] = field(default_factory=list)
    generator_values: dict[str, object] = field(default_factory=dict)
    row_terms: dict[str, Term] = field(default_factory=dict)

    def row_count(self) -> int:
        return sum(len(r) for r in self.rows.values())

    def fk(self, f: FuncSymbol, row: str) -> str:
        return self.fk_values[f][row]

    def attr(self, f: FuncSymbol, row: str) -> Term:
        return self.attr_values[f][row]

    def value(self, entity: str, column: str, row: str):
        f = self.schema.symbol(column, entity)
        if self.schema.is_entity(f.result_sort):
            return self.fk_values[f][row]
        return self.attr_values[f][row]

    def evaluate(self, t: Term, env: Mapping[str, str] = {}):
        """Row name for entity-sorted terms, reduced value term otherwise."""
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, (Lit, Null)):
            return t
        f = t.symbol
        if not t.args:
            return self.generator_values[f.name]
        args = [self.evaluate(a, env) for a in t.args]
        if f in self.fk_values:
            return self.fk_values[f][args[0]]
        if f in self.attr_values:
            return self.attr_values[f][args[0]]
        return reduce(App(f, tuple(args)))

    def values_equal(self, a, b) -> bool:
        if isinstance(a, str) or isinstance(b, str):
            return a == b
        a, b = reduce(a), reduce(b)
        if a == b:
            return True
        if term_sort(a) != term_sort(b):
            return False
        if term_sort(a) in NUMERIC and ring_normalize(a) == ring_normalize(b):
            return True
        if not (nulls_of(a) or nulls_of(b)) or not self.type_equations:
            return False
        if term_sort(a) in NUMERIC:
            ea, eb = self.expand_nulls(a), self.expand_nulls(b)
            if ea == eb or ring_normalize(ea) == ring_normalize(eb):
                return True
        return ground_congruence(self.type_equations, (a, b), depth_cap=None) is Status.PROVED

    @cached_property
    def null_definitions(self) -> dict[Null, Term]:
        """Type equations oriented as acyclic definitions ``null := term``."""
        defs: dict[Null, Term] = {}
        for eq in self.type_equations:
            for n, body in ((eq.rhs, eq.lhs), (eq.lhs, eq.rhs)):
                if isinstance(n, Null) and n not in defs and n not in nulls_of(self._expand(body, defs)):
                    defs[n] = body
                    break
        return defs

    def expand_nulls(self, t: Term) -> Term:
        """Replace defined nulls by their definitions, leaving only free nulls."""
        return self._expand(t, self.null_definitions)

    @staticmethod
    def _expand(t: Term, defs: Mapping[Null, Term]) -> Term:
        if isinstance(t, Null) and t in defs:
            return InstanceModel._expand(defs[t], defs)
        if isinstance(t, App) and t.args:
            return reduce(App(t.symbol, tuple(InstanceModel._expand(x, defs) for x in t.args)))
        return t

    def check_constraints(self) -> list[str]:
        bad = []
        for eq in self.schema.equations:
            (v, e), = eq.ctx
            for r in self.rows.get(e, []):
                lv, rv = self.evaluate(eq.lhs, {v: r}), self.evaluate(eq.rhs, {v: r})
                if not self.values_equal(lv, rv):
                    bad.append(f"{r}: {eq}")
        return bad

    def canonical(self) -> str:
        """Order-independent serialization, for comparing models."""
        lines = []
        for e in sorted(self.rows):
            for r in sorted(self.rows[e]):
                cells = []
                for f in self.schema.fks_of(e):
                    cells.append(f"{f.name}={self.fk_values[f][r]}")
                for f in self.schema.attrs_of(e):
                    cells.append(f"{f.name}={show(self.attr_values[f][r])}")
                lines.append(f"{e}|{r}|" + "|".join(cells))
        lines += sorted(f"eq|{e}" for e in self.type_equations)
        lines += sorted(f"null|{n.sort}|{n.name}" for ns in self.nulls.values() for n in ns)
        return "\n".join(lines)

    def to_instance(self, name: str = "model") -> Instance:
        """Presentation whose saturation is this model."""
        gens: list[tuple[str, str]] = []
        for e in self.schema.entities:
            gens += [(r, e) for r in self.rows.get(e, [])]
        for s, ns in self.nulls.items():
            gens += [(n.name, s) for n in ns]
        sorts = dict(gens)

        def lift(t: Term) -> Term:
            if isinstance(t, Null):
                return gen_term(t.name, t.sort)
            if isinstance(t, App):
                return App(t.symbol, tuple(lift(a) for a in t.args))
            return t

        eqs = []
        for f, vals in self.fk_values.items():
            for r, v in vals.items():
                eqs.append(Equation((), App(f, (gen_term(r, sorts[r]),)), gen_term(v, sorts[v]), f.result_sort))
        for f, vals in self.attr_values.items():
            for r, v in vals.items():
                lhs = App(f, (gen_term(r, sorts[r]),))
                rv = lift(v)
                if rv != lhs:
                    eqs.append(Equation((), lhs, rv, f.result_sort))
        for eq in self.type_equations:
            eqs.append(Equation((), lift(eq.lhs), lift(eq.rhs), eq.sort))
        return Instance.build(name, self.schema, gens, eqs)

    def summary(self) -> str:
        parts = [f"{e}: {len(r)}" for e, r in self.rows.items()]
        n = sum(len(v) for v in self.nulls.values())
        return f"{self.row_count()} rows ({', '.join(parts)}), {n} nulls, {len(self.type_equations)} type equations"


# ---------------------------------------------------------------------------
# the chase


class _Chase:
    def __init__(self, inst: Instance, bounds: Bounds) -> None:
        self.inst = inst
        self.schema = inst.schema
        self.bounds = bounds
        self.g = EGraph(fold=fold_literals)
        self.asserted: list[tuple[Equation, Optional[int]]] = []
        self.entity_classes: dict[int, str] = {}
        self.done: set[int] = set()
        self.queue: list[int] = []
        self._unions_seen = 0
        self.generator_classes: dict[str, int] = {}
        self.rounds = 0
        self.fresh = 0
        self.eqs_by_entity = {e: self.schema.equations_of(e) for e in self.schema.entities}

    def _note_entity(self, cid: int, sort: str) -> None:
        if self.schema.is_entity(sort):
            self.entity_classes.setdefault(cid, sort)
            self.queue.append(cid)

    def _add(self, t: Term, env=None) -> int:
        before = len(self.g)
        cid = self.g.add_term(t, env)
        if len(self.g) != before:
            for k in range(before, len(self.g)):
                self._note_entity(k, self.g._sort[k])
        return cid

    def run(self) -> InstanceModel:
        g = self.g
        for name, sort in self.inst.generators:
            self.generator_classes[name] = self._add(gen_term(name, sort))
        for eq in self.inst.equations:
            g.union(self._add(reduce(eq.lhs)), self._add(reduce(eq.rhs)))
            self.asserted.append((eq, None))
        self._settle()
        while True:
            pending = self._pending()
            if not pending:
                break
            self.rounds += 1
            if self.rounds > self.bounds.max_rounds:
                raise NonTermination(
                    f"no fixpoint after {self.bounds.max_rounds} rounds", self.rounds, self.fresh
                )
            for cid, ent in pending:
                self._process(cid, ent)
            self._settle()
        return self._extract()

    def _pending(self) -> list[tuple[int, str]]:
        g = self.g
        roots = {}
        for cid in self.queue:
            r = g.find(cid)
            if r not in self.done:
                roots[r] = self.entity_classes[cid]
        self.queue = []
        return sorted(roots.items())

    def _process(self, cid: int, ent: str) -> None:
        g = self.g
        cid = g.find(cid)
        self.done.add(cid)
        for eq in self.eqs_by_entity[ent]:
            env = {eq.ctx[0][0]: cid}
            g.union(self._add(eq.lhs, env), self._add(eq.rhs, env))
            self.asserted.append((eq, cid))
        for f in self.schema.fks_of(ent):
            before = len(g)
            self._add(App(f, (Var("_", ent),)), {"_": cid})
            if len(g) != before:
                self.fresh += 1
        if self.fresh > self.bounds.max_fresh:
            raise NonTermination(
                f"more than {self.bounds.max_fresh} fresh rows", self.rounds, self.fresh
            )
        for f in self.schema.attrs_of(ent):
            self._add(App(f, (Var("_", ent),)), {"_": cid})

    def _settle(self) -> None:
        self.g.rebuild()
        if self.g.unions != self._unions_seen:
            self._unions_seen = self.g.unions
            self.done = {self.g.find(c) for c in self.done}
        if self.g.clashes:
            raise self._inconsistent()

    # -- extraction

    def _entity_reps(self) -> dict[int, tuple[tuple, str, Term]]:
        """Least (size, name) witness term per entity class."""
        g = self.g
        best: dict[int, tuple[tuple, str, Term]] = {}
        nodes = [
            (head, kids, cid)
            for (head, kids), cid in g.hashcons.items()
            if isinstance(head, FuncSymbol) and self.schema.is_entity(head.result_sort)
        ]
        changed = True
        while changed:
            changed = False
            for head, kids, cid in nodes:
                root = g.find(cid)
                if kids:
                    child = best.get(g.find(kids[0]))
                    if child is None:
                        continue
                    (size, _), name, term = child
                    name = f"{name}.{head.name}"
                    cand = ((size + 1, name), name, App(head, (term,)))
                else:
                    cand = ((1, head.name), head.name, App(head, ()))
                old = best.get(root)
                if old is None or cand[0] < old[0]:
                    best[root] = cand
                    changed = True
        return best

    def _inconsistent(self) -> Inconsistent:
        a, b = self.g.clashes[0]
        clash = tuple(sorted((a, b), key=lambda x: (str(type(x.value)), x.value)))
        reps = self._entity_reps()
        trace = []
        for eq, cid in self.asserted:
            if cid is None:
                trace.append(eq)
                continue
            root = self.g.find(cid)
            if root not in reps:
                continue
            w = reps[root][2]
            v = eq.ctx[0][0]
            trace.append(Equation((), substitute(eq.lhs, {v: w}), substitute(eq.rhs, {v: w}), eq.sort))
        return Inconsistent(clash, shrink_trace(trace, clash))

    def _extract(self) -> InstanceModel:
        g = self.g
        schema = self.schema
        ent_reps = self._entity_reps()
        gen_index = {name: i for i, (name, _) in enumerate(self.inst.generators)}

        rows: dict[str, list[str]] = {e: [] for e in schema.entities}
        row_of: dict[int, str] = {}
        row_terms: dict[str, Term] = {}
        for root, (key, name, term) in ent_reps.items():
            row_of[root] = name
            row_terms[name] = term
            rows[g.sort_of(root)].append(name)

        def row_order(name: str):
            head = row_terms[name]
            while head.args:
                head = head.args[0]
            return (gen_index.get(head.symbol.name, len(gen_index)), len(name.split(".")), name)

        for e in rows:
            rows[e].sort(key=row_order)

        # type classes: literal < generator < operation < attribute null
        best: dict[int, tuple[tuple, Term]] = {}
        type_nodes = []
        for (head, kids), cid in g.hashcons.items():
            sort = head.result_sort if isinstance(head, FuncSymbol) else head.sort
            if schema.is_entity(sort):
                continue
            type_nodes.append((head, kids, cid))
        changed = True
        while changed:
            changed = False
            for head, kids, cid in type_nodes:
                cand = self._type_candidate(head, kids, best, row_of)
                if cand is None:
                    continue
                root = g.find(cid)
                old = best.get(root)
                if old is None or cand[0] < old[0]:
                    best[root] = cand
                    changed = True

        fk_values: dict[FuncSymbol, dict[str, str]] = {f: {} for f in schema.fks}
        attr_values: dict[FuncSymbol, dict[str, Term]] = {f: {} for f in schema.attrs}
        for root, name in row_of.items():
            ent = g.sort_of(root)
            for f in schema.fks_of(ent):
                fk_values[f][name] = row_of[g.lookup_term(App(f, (Var("_", ent),)), {"_": root})]
            for f in schema.attrs_of(ent):
                cid = g.lookup_term(App(f, (Var("_", ent),)), {"_": root})
                attr_values[f][name] = reduce(best[g.find(cid)][1])

        nulls: dict[str, list[Null]] = {}
        for root, (key, term) in best.items():
            if isinstance(term, Null):
                nulls.setdefault(term.sort, []).append(term)
        for ns in nulls.values():
            ns.sort(key=lambda n: n.name)

        type_eqs = []
        seen = set()
        for head, kids, cid in type_nodes:
            if not isinstance(head, FuncSymbol) or not kids:
                continue
            if schema.is_entity(g.sort_of(kids[0])):
                continue
            if any(g.find(k) not in best for k in kids):
                continue
            term = App(head, tuple(best[g.find(k)][1] for k in kids))
            rep = best[g.find(cid)][1]
            if not nulls_of(term) or reduce(term) == reduce(rep):
                continue
            eq = Equation((), reduce(term), reduce(rep), head.result_sort)
            if str(eq) not in seen:
                seen.add(str(eq))
                type_eqs.append(eq)
        type_eqs.sort(key=str)

        gen_values: dict[str, object] = {}
        for name, cid in self.generator_classes.items():
            root = g.find(cid)
            gen_values[name] = row_of[root] if root in row_of else reduce(best[root][1])

        return InstanceModel(schema, rows, fk_values, attr_values, nulls, type_eqs, gen_values, row_terms)

    def _type_candidate(self, head, kids, best, row_of):
        g = self.g
        if isinstance(head, Lit):
            return ((0, 0, ""), head)
        if isinstance(head, Null):
            return ((1, 1, head.name), head)
        if not kids:
            return ((1, 1, head.name), Null(head.name, head.result_sort))
        first = g.find(kids[0])
        if len(kids) == 1 and first in row_of:
            name = f"{row_of[first]}.{head.name}"
            return ((3, 1, name), Null(name, head.result_sort))
        sub = []
        for k in kids:
            b = best.get(g.find(k))
            if b is None:
                return None
            sub.append(b)
        tier = max([2] + [b[0][0] for b in sub])
        size = 1 + sum(b[0][1] for b in sub)
        term = App(head, tuple(b[1] for b in sub))
        return ((tier, size, show(term)), term)


def shrink_trace(trace: list[Equation], clash: tuple[Lit, Lit], limit: int = 300) -> list[Equation]:
    """Greedily drop equations not needed to derive the clash."""
    if len(trace) > limit:
        return trace
    kept = list(trace)
    i = 0
    while i < len(kept):
        trial = kept[:i] + kept[i + 1:]
        if ground_congruence(trial, clash, depth_cap=None) is Status.PROVED:
            kept = trial
        else:
            i += 1
    return kept


def saturate(i: Instance, bounds: Bounds = Bounds()) -> InstanceModel:
    """Initial model of ``i``; raises NonTermination or Inconsistent."""
    i.theory
    return _Chase(i, bounds).run()


# ---------------------------------------------------------------------------
# migration


def _generator_map(F: SchemaMapping, i: Instance) -> dict[FuncSymbol, tuple[tuple, Term]]:
    return {
        gen_symbol(g, s): ((), gen_term(g, F.map_entity(s)))
        for g, s in i.generators
    }


def sigma(F: SchemaMapping, i: Instance, name: Optional[str] = None) -> Instance:
    """Push an instance forward along ``F`` by substitution (no saturation)."""
    from .eqlogic import TheoryMorphism

    m = F.morphism
    mm = TheoryMorphism(
        i.theory, F.target.theory, m.sort_map, {**m.symbol_map, **_generator_map(F, i)}, m.fixed
    )
    gens = [(g, F.map_entity(s)) for g, s in i.generators]
    eqs = [
        Equation((), translate(mm, (), e.lhs), translate(mm, (), e.rhs), F.map_entity(e.sort))
        for e in i.equations
    ]
    return Instance.build(name or f"{F.name}({i.name})", F.target, gens, eqs)


def delta(F: SchemaMapping, m: InstanceModel) -> InstanceModel:
    """Pull a model on the target of ``F`` back to its source."""
    S = F.source
    rows = {e: list(m.rows.get(F.map_entity(e), [])) for e in S.entities}
    fk_values: dict[FuncSymbol, dict[str, str]] = {}
    attr_values: dict[FuncSymbol, dict[str, Term]] = {}
    for f in S.symbols:
        params, body = F.symbol_map[f]
        vals = {r: m.evaluate(body, {params[0]: r}) for r in rows[f.arg_sorts[0]]}
        if S.is_entity(f.result_sort):
            fk_values[f] = vals
        else:
            attr_values[f] = {r: reduce(v) for r, v in vals.items()}
    return InstanceModel(
        S, rows, fk_values, attr_values, dict(m.nulls), list(m.type_equations), {}, {}
    )


def coproduct(instances: Sequence[Instance], name: str = "coproduct") -> Instance:
    """Disjoint union; generator ``g`` of instance ``I`` becomes ``I.g``."""
    if not instances:
        raise ValueError("coproduct of no instances needs a schema")
    schema = instances[0].schema
    gens, eqs = [], []
    for inst in instances:
        if inst.schema != schema:
            raise SortMismatch(f"{inst.name} is on {inst.schema.name}, not {schema.name}")
        ren = {
            gen_symbol(g, s): ((), gen_term(f"{inst.name}.{g}", s)) for g, s in inst.generators
        }
        gens += [(f"{inst.name}.{g}", s) for g, s in inst.generators]
        for e in inst.equations:
            eqs.append(Equation((), rename_generators(e.lhs, ren), rename_generators(e.rhs, ren), e.sort))
    return Instance.build(name, schema, gens, eqs)


def rename_generators(t: Term, ren: Mapping[FuncSymbol, tuple[tuple, Term]]) -> Term:
    if isinstance(t, App):
        if not t.args and t.symbol in ren:
            return ren[t.symbol][1]
        return App(t.symbol, tuple(rename_generators(a, ren) for a in t.args))
    return t


# ---------------------------------------------------------------------------
# data mappings


@dataclass(frozen=True)
class DataMapping:
    source: Instance
    target: Instance
    assignment: Mapping[str, Term]

    def apply(self, t: Term) -> Term:
        if isinstance(t, App):
            if not t.args:
                return self.assignment[t.symbol.name]
            return App(t.symbol, tuple(self.apply(a) for a in t.args))
        return t


def check_data_mapping(
    h: DataMapping, target_model: Optional[InstanceModel] = None, bounds: Bounds = Bounds()
) -> Report:
    """Every source equation must hold in the target after substitution."""
    rep = Report(f"data mapping {h.source.name} -> {h.target.name}")
    if h.source.schema != h.target.schema:
        rep.errors.append(SortMismatch("instances are on different schemas"))
        return rep
    for g, s in h.source.generators:
        if g not in h.assignment:
            rep.errors.append(Violation(f"generator {g} is unassigned"))
            continue
        try:
            got = h.target.theory and _sort_in(h.target, h.assignment[g])
        except OlogError as exc:
            rep.errors.append(exc)
            continue
        if got != s:
            rep.errors.append(SortMismatch(f"{g}:{s} sent to a term of sort {got}"))
    if not rep.ok:
        return rep
    model = target_model or saturate(h.target, bounds)
    for eq in h.source.equations:
        lv = model.evaluate(h.apply(eq.lhs))
        rv = model.evaluate(h.apply(eq.rhs))
        if not model.values_equal(lv, rv):
            rep.errors.append(Violation(f"{eq} fails: {_show_val(lv)} vs {_show_val(rv)}"))
    return rep


def _sort_in(inst: Instance, t: Term) -> str:
    from .eqlogic import typecheck_term

    return typecheck_term(inst.theory, (), t)


def _show_val(v) -> str:
    return v if isinstance(v, str) else show(v)
