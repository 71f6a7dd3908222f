"""Schema colimits, row-merge rules, integration and data exchange."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .eqlogic import (
    App,
    Equation,
    FuncSymbol,
    Lit,
    Null,
    OlogError,
    SortMismatch,
    Status,
    Term,
    Var,
    check_equation,
    quote_ident,
    show,
    substitute,
    translate,
    translate_equation,
    typecheck_term,
)
from .instance import (
    Bounds,
    DataMapping,
    Instance,
    InstanceModel,
    check_data_mapping,
    coproduct,
    delta,
    gen_term,
    rename_generators,
    gen_symbol,
    saturate,
    sigma,
)
from .schema import (
    MODEL,
    SYMBOLIC,
    Report,
    Schema,
    SchemaMapping,
    VerificationCondition,
    check_vcs,
    generate_functoriality_vcs,
    validate_mapping,
)
from .typeside import reduce


class VcUnknown(OlogError):
    def __init__(self, vcs: list[VerificationCondition]) -> None:
        bad = [v for v in vcs if v.status is Status.UNKNOWN]
        super().__init__(f"{len(bad)} verification condition(s) not discharged: " + ", ".join(v.id for v in bad))
        self.vcs = vcs


@dataclass(frozen=True)
class SchemaDiagram:
    nodes: tuple[Schema, ...]
    edges: tuple[SchemaMapping, ...] = ()

    def __post_init__(self) -> None:
        names = [s.name for s in self.nodes]
        if len(set(names)) != len(names):
            raise SortMismatch("diagram nodes must have distinct names")
        by_name = dict(zip(names, self.nodes))
        for e in self.edges:
            for end in (e.source, e.target):
                if by_name.get(end.name) != end:
                    raise SortMismatch(f"edge {e.name} endpoint {end.name} is not a node")
            if e.source.typeside != e.target.typeside:
                raise SortMismatch("all schemas must share the type side")

    @classmethod
    def span(cls, left: SchemaMapping, right: SchemaMapping) -> "SchemaDiagram":
        return cls((left.source, left.target, right.target), (left, right))

    def node(self, name: str) -> Schema:
        for s in self.nodes:
            if s.name == name:
                return s
        raise KeyError(name)

    def out_edges(self, name: str) -> list[SchemaMapping]:
        return [e for e in self.edges if e.source.name == name]

    @property
    def sinks(self) -> list[Schema]:
        return [s for s in self.nodes if not self.out_edges(s.name)]


@dataclass(frozen=True)
class Colimit:
    schema: Schema
    injections: Mapping[str, SchemaMapping]

    def with_equations(self, extra: Iterable[Equation]) -> "Colimit":
        s = self.schema.with_equations(extra)
        s.theory
        return Colimit(s, {k: replace(m, target=s) for k, m in self.injections.items()})


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict = {}

    def find(self, a):
        self.parent.setdefault(a, a)
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> None:
        a, b = self.find(a), self.find(b)
        if a != b:
            self.parent[max(a, b)] = min(a, b)


def colimit_schemas(
    d: SchemaDiagram, rename: Mapping[str, str] = {}, name: str = "Colimit"
) -> Colimit:
    """Pushout-style colimit; only sink nodes contribute symbols and equations.

    Merged entities are named ``A_x__B_y`` and the rest ``A_x``; attribute
    names get a ``A_`` prefix only when two sources collide on one entity.
    ``rename`` maps these default entity names to chosen ones.
    """
    for e in d.edges:
        validate_mapping(e).raise_first()
    order = {s.name: i for i, s in enumerate(d.nodes)}
    uf = _UnionFind()
    for s in d.nodes:
        for ent in s.entities:
            uf.find((order[s.name], ent))
    for e in d.edges:
        for ent in e.source.entities:
            uf.union((order[e.source.name], ent), (order[e.target.name], e.map_entity(ent)))

    sink_idx = {order[s.name] for s in d.sinks}
    classes: dict = {}
    for key in sorted(uf.parent):
        classes.setdefault(uf.find(key), []).append(key)
    ent_name: dict = {}
    defaults = set()
    for root, members in classes.items():
        shown = [m for m in members if m[0] in sink_idx] or members
        default = "__".join(f"{d.nodes[i].name}_{ent}" for i, ent in shown)
        defaults.add(default)
        ent_name[root] = rename.get(default, default)
    finals = list(ent_name.values())
    if len(set(finals)) != len(finals):
        raise SortMismatch("two colimit entities share a name; adjust the rename map")
    unknown = set(rename) - defaults
    if unknown:
        raise SortMismatch(f"rename map names unknown entities: {sorted(unknown)}")

    def iota_ent(node: int, ent: str) -> str:
        if ent in d.nodes[node].types:
            return ent
        return ent_name[uf.find((node, ent))]

    # symbol naming with collision-only prefixes
    claims: dict[tuple[str, str], list[tuple[int, FuncSymbol]]] = {}
    for s in d.sinks:
        i = order[s.name]
        for f in s.symbols:
            claims.setdefault((iota_ent(i, f.arg_sorts[0]), f.name), []).append((i, f))
    new_sym: dict[tuple[int, FuncSymbol], FuncSymbol] = {}
    for (ent, fname), owners in claims.items():
        for i, f in owners:
            label = fname if len(owners) == 1 else f"{d.nodes[i].name}_{fname}"
            new_sym[(i, f)] = FuncSymbol(label, (ent,), iota_ent(i, f.result_sort))
    labels = [(f.arg_sorts[0], f.name) for f in new_sym.values()]
    if len(set(labels)) != len(labels):
        raise SortMismatch("symbol prefixing still collides; rename a column")

    entities = list(dict.fromkeys(ent_name[uf.find(k)] for k in sorted(uf.parent) if k[0] in sink_idx))
    fks = [f for (i, _), f in new_sym.items() if f.result_sort in entities]
    attrs = [f for (i, _), f in new_sym.items() if f.result_sort not in entities]

    def sink_injection(s: Schema, target: Schema) -> SchemaMapping:
        i = order[s.name]
        return SchemaMapping(
            f"{name}_in_{s.name}",
            s,
            target,
            {e: iota_ent(i, e) for e in s.entities},
            {f: (("x",), App(new_sym[(i, f)], (Var("x", iota_ent(i, f.arg_sorts[0])),))) for f in s.symbols},
        )

    base = Schema(name, tuple(entities), tuple(fks), tuple(attrs), (), d.nodes[0].typeside)
    inj = {s.name: sink_injection(s, base) for s in d.sinks}
    eqs: list[Equation] = []
    for s in d.sinks:
        eqs += [translate_equation(inj[s.name].morphism, e) for e in s.equations]

    # non-sink nodes inject through their first edge; other edges give identifications
    def node_injection(n: str) -> SchemaMapping:
        if n in inj:
            return inj[n]
        first = d.out_edges(n)[0]
        inj[n] = first.then(node_injection(first.target.name))
        inj[n] = replace(inj[n], name=f"{name}_in_{n}")
        return inj[n]

    for s in d.nodes:
        if s.name in {t.name for t in d.sinks}:
            continue
        own = node_injection(s.name)
        for e in d.out_edges(s.name)[1:]:
            other = e.then(node_injection(e.target.name))
            for f in s.symbols:
                v = Var("x", own.map_entity(f.arg_sorts[0]))
                lhs, rhs = other.image(f, "x"), own.image(f, "x")
                if lhs != rhs:
                    eqs.append(Equation((("x", v.sort),), lhs, rhs, own.map_entity(f.result_sort)))

    schema = replace(base, equations=tuple(_dedupe(eqs)))
    schema.theory
    return Colimit(schema, {k: replace(m, target=schema) for k, m in inj.items()})


def _dedupe(eqs: Iterable[Equation]) -> list[Equation]:
    seen, out = set(), []
    for e in eqs:
        if e not in seen:
            seen.add(e)
            out.append(e)
    return out


# ---------------------------------------------------------------------------
# merge rules


@dataclass(frozen=True)
class HornRule:
    """``forall ctx, body_1 and ... and body_n -> head`` over entity variables."""

    ctx: tuple[tuple[str, str], ...]
    body: tuple[tuple[Term, Term], ...]
    head: tuple[Term, Term]
    name: str = ""

    def check(self, schema: Schema) -> None:
        if not self.ctx:
            raise SortMismatch("a rule needs at least one variable")
        for v, s in self.ctx:
            if not schema.is_entity(s):
                raise SortMismatch(f"rule variable {v} must range over an entity")
        for lhs, rhs in self.body + (self.head,):
            a = typecheck_term(schema.theory, self.ctx, lhs)
            b = typecheck_term(schema.theory, self.ctx, rhs)
            if a != b:
                raise SortMismatch(f"{show(lhs)} and {show(rhs)} have sorts {a} and {b}")

    def __str__(self) -> str:
        binders = " ".join(f"{quote_ident(v)}:{quote_ident(s)}" for v, s in self.ctx)
        body = " and ".join(f"{show(a)} = {show(b)}" for a, b in self.body)
        return f"forall {binders}, {body} -> {show(self.head[0])} = {show(self.head[1])}"


def _strict_equal(model: InstanceModel, a, b) -> bool:
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    return reduce(a) == reduce(b)


def rule_matches(model: InstanceModel, rule: HornRule) -> Iterable[dict[str, str]]:
    """Row assignments satisfying the body; values compared after reduce, nulls by identity."""
    names = [v for v, _ in rule.ctx]
    from .eqlogic import free_vars

    # check each body atom as soon as its variables are bound
    atoms_at: dict[int, list] = {}
    for lhs, rhs in rule.body:
        vs = free_vars(lhs) | free_vars(rhs)
        k = max((names.index(v) for v in vs), default=0)
        atoms_at.setdefault(k, []).append((lhs, rhs))

    # index the last variable by a key when an atom compares one term in it with one in earlier vars
    def extend(env: dict[str, str], k: int):
        if k == len(names):
            yield dict(env)
            return
        v, s = rule.ctx[k]
        for r in model.rows.get(s, []):
            env[v] = r
            if all(_strict_equal(model, model.evaluate(a, env), model.evaluate(b, env)) for a, b in atoms_at.get(k, [])):
                yield from extend(env, k + 1)
            del env[v]

    return extend({}, 0)


def apply_merge_rules(
    inst: Instance,
    model: InstanceModel,
    rules: Sequence[HornRule],
    bounds: Bounds = Bounds(),
) -> tuple[Instance, InstanceModel]:
    """Fire rules to a fixpoint, re-saturating after each pass.

    Returns the extended presentation and its model.
    """
    for r in rules:
        r.check(inst.schema)
    derived: list[Equation] = []
    seen: set = set()
    rounds = 0
    while True:
        new = []
        for rule in rules:
            for env in rule_matches(model, rule):
                lhs, rhs = rule.head
                if _strict_equal(model, model.evaluate(lhs, env), model.evaluate(rhs, env)):
                    continue
                witness = {v: model.row_terms[env[v]] for v, _ in rule.ctx}
                eq = Equation((), substitute(lhs, witness), substitute(rhs, witness), _sort(inst, rule, lhs))
                if eq not in seen:
                    seen.add(eq)
                    new.append(eq)
        if not new:
            return inst, model
        rounds += 1
        if rounds > bounds.max_rounds:
            from .instance import NonTermination

            raise NonTermination("merge rules did not reach a fixpoint", rounds, 0)
        derived += new
        inst = replace(inst, equations=inst.equations + tuple(new))
        model = saturate(inst, bounds)


def _sort(inst: Instance, rule: HornRule, t: Term) -> str:
    return typecheck_term(inst.schema.theory, rule.ctx, t)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class IntegrationProblem:
    diagram: SchemaDiagram
    instances: Mapping[str, Instance]
    rules: Sequence[HornRule] = ()
    extra_equations: Sequence[Equation] = ()
    rename: Mapping[str, str] = field(default_factory=dict)
    vc_mode: str = MODEL
    waive_vcs: bool = False
    name: str = "Integrated"

    def __post_init__(self) -> None:
        for node, inst in self.instances.items():
            if inst.schema != self.diagram.node(node):
                raise SortMismatch(f"instance {inst.name} is not on schema {node}")

    def colimit(self) -> Colimit:
        c = colimit_schemas(self.diagram, self.rename, self.name)
        return c.with_equations(self.extra_equations) if self.extra_equations else c


@dataclass
class DiffReport:
    source: str
    rows_gained: dict[str, int] = field(default_factory=dict)
    rows_merged: dict[str, int] = field(default_factory=dict)
    values_filled: dict[str, int] = field(default_factory=dict)
    values_changed: dict[str, int] = field(default_factory=dict)
    nulls_introduced: dict[str, int] = field(default_factory=dict)
    details: list[str] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not any(
            sum(d.values())
            for d in (self.rows_gained, self.rows_merged, self.values_filled, self.values_changed, self.nulls_introduced)
        )

    def to_markdown(self) -> str:
        out = [f"## Exchange diff for {self.source}", ""]
        if self.is_empty:
            return "\n".join(out + ["No changes.", ""])
        out += ["| entity | rows gained | rows merged | values filled | values changed | nulls introduced |", "|---|---|---|---|---|---|"]
        ents = sorted(set().union(self.rows_gained, self.rows_merged, self.values_filled, self.values_changed, self.nulls_introduced))
        for e in ents:
            cells = [d.get(e, 0) for d in (self.rows_gained, self.rows_merged, self.values_filled, self.values_changed, self.nulls_introduced)]
            if any(cells):
                out.append(f"| {e} | " + " | ".join(str(c) for c in cells) + " |")
        if self.details:
            out += ["", "Changed values:", ""] + [f"- {d}" for d in self.details]
        return "\n".join(out) + "\n"


@dataclass
class IntegrationResult:
    colimit: Colimit
    presentation: Instance
    model: InstanceModel
    vcs: dict[str, list[VerificationCondition]]
    source_models: dict[str, InstanceModel]
    projected: dict[str, InstanceModel]
    inclusions: dict[str, DataMapping]
    inclusion_reports: dict[str, Report]
    diffs: dict[str, DiffReport]

    @property
    def schema(self) -> Schema:
        return self.colimit.schema


def discharge_vcs(
    p: IntegrationProblem, source_models: Mapping[str, InstanceModel]
) -> dict[str, list[VerificationCondition]]:
    out = {}
    for e in p.diagram.edges:
        vcs = generate_functoriality_vcs(e)
        if p.vc_mode == SYMBOLIC:
            vcs = check_vcs(vcs, SYMBOLIC, target=e.target)
        model = source_models.get(e.target.name)
        if model is not None:
            # symbolic failures fall back to checking the data
            todo = [v for v in vcs if v.status is Status.UNKNOWN]
            done = {v.id: v for v in check_vcs(todo, MODEL, model=model)}
            vcs = [done.get(v.id, v) for v in vcs]
        out[e.name] = vcs
    return out


def integrate(p: IntegrationProblem, bounds: Bounds = Bounds()) -> IntegrationResult:
    source_models = {n: saturate(i, bounds) for n, i in p.instances.items()}
    vcs = discharge_vcs(p, source_models)
    flat = [v for vs in vcs.values() for v in vs]
    if not p.waive_vcs and any(v.status is Status.UNKNOWN for v in flat):
        raise VcUnknown(flat)

    col = p.colimit()
    pushed = [sigma(col.injections[n], i, name=n) for n, i in p.instances.items()]
    pres = coproduct(pushed, name=p.name) if pushed else Instance.build(p.name, col.schema)
    model = saturate(pres, bounds)
    pres, model = apply_merge_rules(pres, model, p.rules, bounds)

    inclusions, reports = {}, {}
    for inst in pushed:
        h = DataMapping(inst, pres, {g: gen_term(f"{inst.name}.{g}", s) for g, s in inst.generators})
        inclusions[inst.name] = h
        reports[inst.name] = check_data_mapping(h, model)

    projected = {n: delta(col.injections[n], model) for n in p.instances}
    diffs = {
        n: diff_models(n, source_models[n], projected[n], model, p.instances[n]) for n in p.instances
    }
    return IntegrationResult(col, pres, model, vcs, source_models, projected, inclusions, reports, diffs)


def _is_known(v) -> bool:
    return isinstance(v, Lit)


def diff_models(
    source: str,
    before: InstanceModel,
    after: InstanceModel,
    integrated: InstanceModel,
    inst: Instance,
) -> DiffReport:
    """Compare a source model with its projection of the integrated model.

    Original rows are located through their witness terms, with generator
    ``g`` renamed to ``source.g`` as in the coproduct.
    """
    ren = {gen_symbol(g, s): ((), gen_term(f"{source}.{g}", s)) for g, s in inst.generators}
    rep = DiffReport(source)
    row_map: dict[str, str] = {}
    for rows in before.rows.values():
        for r in rows:
            row_map[r] = integrated.evaluate(rename_generators(before.row_terms[r], ren))
    schema = before.schema
    for e in schema.entities:
        old = before.rows.get(e, [])
        image = {row_map[r] for r in old}
        rep.rows_gained[e] = len([r for r in after.rows.get(e, []) if r not in image])
        rep.rows_merged[e] = len(old) - len(image)
        filled = changed = introduced = 0
        for r in old:
            r1 = row_map[r]
            for f in schema.fks_of(e):
                if row_map.get(before.fk_values[f][r]) != after.fk_values[f][r1]:
                    changed += 1
                    rep.details.append(f"{r}.{f.name}: {before.fk_values[f][r]} -> {after.fk_values[f][r1]}")
            for f in schema.attrs_of(e):
                v0, v1 = before.attr_values[f][r], after.attr_values[f][r1]
                k0, k1 = _is_known(v0), _is_known(v1)
                if k0 and k1:
                    if v0 != v1:
                        changed += 1
                        rep.details.append(f"{r}.{f.name}: {show(v0)} -> {show(v1)}")
                elif k1:
                    filled += 1
                elif k0:
                    introduced += 1
        rep.values_filled[e] = filled
        rep.values_changed[e] = changed
        rep.nulls_introduced[e] = introduced
    return rep


def exchange(r: IntegrationResult) -> dict[str, DiffReport]:
    return r.diffs
