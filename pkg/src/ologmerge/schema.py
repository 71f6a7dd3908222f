"""Schemas, schema mappings and functoriality verification conditions."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

from .eqlogic import (
    ENTITY,
    TYPE,
    App,
    Equation,
    FuncSymbol,
    OlogError,
    SortMismatch,
    Sort,
    Status,
    Term,
    Theory,
    TheoryMorphism,
    UnknownSort,
    UnknownSymbol,
    UnmappedSymbol,
    Var,
    check_equation,
    free_vars,
    show,
    translate,
    translate_equation,
    typecheck_term,
)
from .typeside import EXCEL, TypeSide, decide_equal_symbolic


class NonUnarySymbol(OlogError):
    pass


class BadConstraintShape(OlogError):
    pass


class UnmappedEntity(OlogError):
    pass


class EvaluationError(OlogError):
    pass


@dataclass
class Report:
    """Validation outcome; ``errors`` holds exception instances, never raised here."""

    subject: str
    errors: list[OlogError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_first(self) -> None:
        if self.errors:
            raise self.errors[0]

    def __str__(self) -> str:
        if self.ok:
            return f"{self.subject}: ok"
        lines = [f"{self.subject}: {len(self.errors)} error(s)"]
        lines += [f"  {type(e).__name__}: {e}" for e in self.errors]
        return "\n".join(lines)


def _ctx(var: str, entity: str) -> tuple[tuple[str, str], ...]:
    return ((var, entity),)


@dataclass(frozen=True)
class Schema:
    name: str
    entities: tuple[str, ...]
    fks: tuple[FuncSymbol, ...] = ()
    attrs: tuple[FuncSymbol, ...] = ()
    equations: tuple[Equation, ...] = ()
    typeside: TypeSide = EXCEL
    # equations kept as boolean witness columns even when they could define one
    constraints: frozenset[Equation] = frozenset()

    @classmethod
    def build(
        cls,
        name: str,
        entities: Iterable[str],
        fks: Iterable[tuple[str, str, str]] = (),
        attrs: Iterable[tuple[str, str, str]] = (),
        equations: Iterable[Equation] = (),
        typeside: TypeSide = EXCEL,
        constraints: Iterable[Equation] = (),
    ) -> "Schema":
        """Symbols are given as ``(name, domain entity, codomain)`` triples."""
        return cls(
            name,
            tuple(entities),
            tuple(FuncSymbol(n, (d,), c) for n, d, c in fks),
            tuple(FuncSymbol(n, (d,), c) for n, d, c in attrs),
            tuple(equations),
            typeside,
            frozenset(constraints),
        )

    @cached_property
    def theory(self) -> Theory:
        return self.typeside.theory.extend(
            self.name,
            [Sort(e, ENTITY) for e in self.entities],
            self.fks + self.attrs,
            self.equations,
        )

    @property
    def types(self) -> tuple[str, ...]:
        return self.typeside.types

    @property
    def symbols(self) -> tuple[FuncSymbol, ...]:
        return self.fks + self.attrs

    def is_entity(self, sort: str) -> bool:
        return sort in self.entities

    def symbol(self, name: str, entity: str) -> FuncSymbol:
        for f in self.symbols:
            if f.name == name and f.arg_sorts == (entity,):
                return f
        raise UnknownSymbol(f"{entity} has no column {name!r}")

    def fks_of(self, entity: str) -> list[FuncSymbol]:
        return [f for f in self.fks if f.arg_sorts[0] == entity]

    def attrs_of(self, entity: str) -> list[FuncSymbol]:
        return [f for f in self.attrs if f.arg_sorts[0] == entity]

    def equations_of(self, entity: str) -> list[Equation]:
        return [e for e in self.equations if e.ctx and e.ctx[0][1] == entity]

    def with_equations(self, extra: Iterable[Equation], name: Optional[str] = None) -> "Schema":
        s = replace(self, name=name or self.name, equations=self.equations + tuple(extra))
        return s

    def __str__(self) -> str:
        return render_schema(self)


def render_schema(s: Schema) -> str:
    from .eqlogic import quote_ident

    q = quote_ident
    out = [f"schema {q(s.name)} = {{"]
    if s.entities:
        out.append("  entities")
        out.append("    " + " ".join(q(e) for e in s.entities))
    if s.fks:
        out.append("  foreign_keys")
        out += [f"    {q(f.name)} : {q(f.arg_sorts[0])} -> {q(f.result_sort)}" for f in s.fks]
    if s.attrs:
        out.append("  attributes")
        out += [f"    {q(f.name)} : {q(f.arg_sorts[0])} -> {q(f.result_sort)}" for f in s.attrs]
    plain = [e for e in s.equations if e not in s.constraints]
    if plain:
        out.append("  equations")
        out += [f"    {e}" for e in plain]
    kept = [e for e in s.equations if e in s.constraints]
    if kept:
        out.append("  constraints")
        out += [f"    {e}" for e in kept]
    out.append("}")
    return "\n".join(out)


def validate_schema(s: Schema) -> Report:
    rep = Report(f"schema {s.name}")
    ents = set(s.entities)
    if len(ents) != len(s.entities):
        rep.errors.append(SortMismatch("entity declared twice"))
    clash = ents & set(s.types)
    if clash:
        rep.errors.append(SortMismatch(f"entity names shadow types: {sorted(clash)}"))
    for f in s.fks:
        if f.arity != 1 or f.arg_sorts[0] not in ents:
            rep.errors.append(NonUnarySymbol(f"fk {f.name} must take one entity"))
        elif f.result_sort not in ents:
            rep.errors.append(NonUnarySymbol(f"fk {f.name} targets non-entity {f.result_sort}"))
    for f in s.attrs:
        if f.arity != 1 or f.arg_sorts[0] not in ents:
            rep.errors.append(NonUnarySymbol(f"attribute {f.name} must take one entity"))
        elif f.result_sort not in s.types:
            rep.errors.append(NonUnarySymbol(f"attribute {f.name} targets non-type {f.result_sort}"))
    seen = set()
    for f in s.symbols:
        if f.key in seen:
            rep.errors.append(SortMismatch(f"{f.name} declared twice on {f.arg_sorts[0]}"))
        seen.add(f.key)
    for eq in s.equations:
        if len(eq.ctx) != 1 or eq.ctx[0][1] not in ents:
            rep.errors.append(BadConstraintShape(f"constraint needs one entity variable: {eq}"))
            continue
    if rep.ok:
        try:
            s.theory
        except OlogError as exc:
            rep.errors.append(exc)
    return rep


def _attrs_in(t: Term) -> set[FuncSymbol]:
    out: set[FuncSymbol] = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, App):
            out.add(u.symbol)
            stack.extend(u.args)
    return out


def split_definitional(s: Schema) -> tuple[dict[FuncSymbol, Equation], list[Equation]]:
    """Separate equations that define an attribute column from the rest.

    An equation ``x.a = t`` (either orientation) defines ``a`` when ``a`` is not
    yet defined and the definitions stay acyclic. Definitions are returned
    oriented with the attribute on the left; all other equations are
    constraints, rendered as boolean witness columns in a workbook.
    """
    attrs = set(s.attrs)
    defs: dict[FuncSymbol, Equation] = {}
    deps: dict[FuncSymbol, set[FuncSymbol]] = {}
    others: list[Equation] = []

    def reaches(start: set[FuncSymbol], goal: FuncSymbol) -> bool:
        seen, stack = set(), list(start)
        while stack:
            f = stack.pop()
            if f == goal:
                return True
            if f not in seen:
                seen.add(f)
                stack.extend(deps.get(f, ()))
        return False

    for eq in s.equations:
        placed = False
        if len(eq.ctx) == 1 and eq not in s.constraints:
            v = eq.ctx[0][0]
            for lhs, rhs in ((eq.lhs, eq.rhs), (eq.rhs, eq.lhs)):
                if not (isinstance(lhs, App) and lhs.symbol in attrs and lhs.args == (Var(v, eq.ctx[0][1]),)):
                    continue
                f = lhs.symbol
                used = _attrs_in(rhs) & attrs
                if f in defs or f in used or reaches(used, f):
                    continue
                defs[f] = Equation(eq.ctx, lhs, rhs, eq.sort)
                deps[f] = used
                placed = True
                break
        if not placed:
            others.append(eq)
    return defs, others


# ---------------------------------------------------------------------------
# mappings

Image = tuple[tuple[str, ...], Term]


@dataclass(frozen=True)
class SchemaMapping:
    """Entities go to entities; fks and attrs go to terms in one bound variable."""

    name: str
    source: Schema
    target: Schema
    entity_map: Mapping[str, str]
    symbol_map: Mapping[FuncSymbol, Image]

    @cached_property
    def morphism(self) -> TheoryMorphism:
        fixed = frozenset(self.source.typeside.theory.symbols.values())
        return TheoryMorphism(
            self.source.theory, self.target.theory, dict(self.entity_map), dict(self.symbol_map), fixed
        )

    def map_entity(self, e: str) -> str:
        if e in self.entity_map:
            return self.entity_map[e]
        if e in self.source.types:
            return e
        raise UnmappedEntity(e)

    def apply(self, t: Term, ctx=()) -> Term:
        return translate(self.morphism, ctx, t)

    def image(self, f: FuncSymbol, var: str = "x") -> Term:
        """``F(f)`` as a term in the variable ``var``."""
        params, body = self.symbol_map[f]
        from .eqlogic import substitute

        return substitute(body, {params[0]: Var(var, self.map_entity(f.arg_sorts[0]))})

    @classmethod
    def identity(cls, s: Schema, name: Optional[str] = None) -> "SchemaMapping":
        return cls(
            name or f"id_{s.name}",
            s,
            s,
            {e: e for e in s.entities},
            {f: (("x",), App(f, (Var("x", f.arg_sorts[0]),))) for f in s.symbols},
        )

    def then(self, g: "SchemaMapping") -> "SchemaMapping":
        """Composite: first self, then g."""
        ents = {e: g.map_entity(t) for e, t in self.entity_map.items()}
        syms = {}
        for f, (params, body) in self.symbol_map.items():
            ctx = ((params[0], self.map_entity(f.arg_sorts[0])),)
            syms[f] = (params, translate(g.morphism, ctx, body))
        return SchemaMapping(f"{self.name};{g.name}", self.source, g.target, ents, syms)

    def __str__(self) -> str:
        from .eqlogic import quote_ident as q

        out = [f"mapping {q(self.name)} : {q(self.source.name)} -> {q(self.target.name)} = {{"]
        for e in self.source.entities:
            out.append(f"  entity {q(e)} -> {q(self.map_entity(e))}")
            for f in self.source.fks_of(e) + self.source.attrs_of(e):
                if f in self.symbol_map:
                    params, body = self.symbol_map[f]
                    out.append(f"    {q(f.name)} -> lambda {q(params[0])}, {show(body)}")
        out.append("}")
        return "\n".join(out)


def validate_mapping(m: SchemaMapping) -> Report:
    rep = Report(f"mapping {m.name}")
    src, tgt = m.source, m.target
    for e in src.entities:
        if e not in m.entity_map:
            rep.errors.append(UnmappedEntity(f"{e} has no image"))
        elif m.entity_map[e] not in tgt.entities:
            rep.errors.append(UnknownSort(f"{e} -> {m.entity_map[e]}, not an entity of {tgt.name}"))
    for e in m.entity_map:
        if e not in src.entities:
            rep.errors.append(UnknownSort(f"{e} is not an entity of {src.name}"))
    if not rep.ok:
        return rep
    for f in src.symbols:
        if f not in m.symbol_map:
            rep.errors.append(UnmappedSymbol(f"{f.name} on {f.arg_sorts[0]} has no image"))
            continue
        params, body = m.symbol_map[f]
        if len(params) != 1:
            rep.errors.append(SortMismatch(f"image of {f.name} must bind one variable"))
            continue
        ctx = ((params[0], m.map_entity(f.arg_sorts[0])),)
        try:
            got = typecheck_term(tgt.theory, ctx, body)
        except OlogError as exc:
            rep.errors.append(exc)
            continue
        want = m.map_entity(f.result_sort)
        if got != want:
            rep.errors.append(SortMismatch(f"image of {f.name} has sort {got}, expected {want}"))
    for f in m.symbol_map:
        if f not in src.symbols:
            rep.errors.append(UnknownSymbol(f"{f.name} is not a symbol of {src.name}"))
    return rep


# ---------------------------------------------------------------------------
# verification conditions


@dataclass(frozen=True)
class RowFailure:
    row: str
    lhs: Term
    rhs: Term

    def __str__(self) -> str:
        return f"row {self.row}: {show(self.lhs)} != {show(self.rhs)}"


@dataclass(frozen=True)
class VerificationCondition:
    id: str
    source: Equation
    conjecture: Equation
    status: Status = Status.UNKNOWN
    note: str = ""
    failures: tuple[RowFailure, ...] = ()
    rows_checked: int = 0

    def __str__(self) -> str:
        extra = f" ({self.note})" if self.note else ""
        return f"{self.id}: {self.status.value}{extra}\n  {self.conjecture}"


def generate_functoriality_vcs(m: SchemaMapping) -> list[VerificationCondition]:
    return [
        VerificationCondition(f"{m.name}.conj{i}", eq, translate_equation(m.morphism, eq))
        for i, eq in enumerate(m.source.equations, 1)
    ]


SYMBOLIC = "symbolic"
MODEL = "model"


def check_vc_symbolic(vc: VerificationCondition, target: Schema, max_steps: int = 10_000) -> VerificationCondition:
    check_equation(target.theory, vc.conjecture)
    d = decide_equal_symbolic(target.theory, vc.conjecture, max_steps=max_steps)
    return replace(vc, status=d.status, note=d.note)


def check_vc_on_model(vc: VerificationCondition, model) -> VerificationCondition:
    """Evaluate the conjecture on every row of its entity (``model`` is an InstanceModel)."""
    eq = vc.conjecture
    check_equation(model.schema.theory, eq)
    if len(eq.ctx) != 1 or not model.schema.is_entity(eq.ctx[0][1]):
        if eq.ctx:
            return replace(vc, status=Status.UNKNOWN, note="conjecture is not over one entity variable")
        rows: Sequence[Optional[str]] = [None]
    else:
        rows = model.rows.get(eq.ctx[0][1], [])
    failures = []
    for r in rows:
        env = {} if r is None else {eq.ctx[0][0]: r}
        lv, rv = model.evaluate(eq.lhs, env), model.evaluate(eq.rhs, env)
        if not model.values_equal(lv, rv):
            failures.append(RowFailure(r or "", lv, rv))
    if failures:
        note = f"{len(failures)} of {len(rows)} rows differ"
        return replace(vc, status=Status.UNKNOWN, note=note, failures=tuple(failures), rows_checked=len(rows))
    return replace(vc, status=Status.PROVED_ON_MODEL, note="", failures=(), rows_checked=len(rows))


def check_vcs(
    vcs: Iterable[VerificationCondition],
    mode: str = SYMBOLIC,
    target: Optional[Schema] = None,
    model=None,
    max_steps: int = 10_000,
) -> list[VerificationCondition]:
    """Set VC statuses. ``mode`` is ``"symbolic"`` (needs ``target``) or ``"model"`` (needs ``model``)."""
    out = []
    for vc in vcs:
        if mode == SYMBOLIC:
            if target is None:
                raise ValueError("symbolic mode needs the target schema")
            out.append(check_vc_symbolic(vc, target, max_steps))
        elif mode == MODEL:
            if model is None:
                raise ValueError("model mode needs a model")
            out.append(check_vc_on_model(vc, model))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return out


def all_passed(vcs: Iterable[VerificationCondition]) -> bool:
    return all(v.status is not Status.UNKNOWN for v in vcs)
