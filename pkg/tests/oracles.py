"""Independent oracles for the property tests.

The initiality oracle never touches the library's chase or e-graph: it
enumerates generator paths up to a fixed length, closes a naive union-find
under the presentation's equations and congruence, and reads the least
congruence off the result.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ologmerge.eqlogic import Lit, Null
from ologmerge.instance import InstanceModel

Path = tuple[str, ...]


@dataclass
class Spec:
    """A presentation over Float attributes and no arithmetic."""

    entities: list[str]
    fks: list[tuple[str, str, str]]  # name, source entity, target entity
    attrs: list[tuple[str, str]]  # name, entity
    path_eqs: list[tuple[str, Path, Path]] = field(default_factory=list)  # entity, lhs path, rhs path
    attr_eqs: list[tuple[str, str, Path, str]] = field(default_factory=list)  # x.a = x.path.b
    gens: list[tuple[str, str]] = field(default_factory=list)
    gen_eqs: list[tuple[str, Path, str, Path]] = field(default_factory=list)  # g.p = h.q
    gen_attr_eqs: list[tuple[str, Path, str, object]] = field(default_factory=list)  # g.p.a = lit or (h, q, b)

    def fk(self, name: str) -> tuple[str, str, str]:
        return next(f for f in self.fks if f[0] == name)

    def end(self, start: str, path: Path) -> str:
        e = start
        for f in path:
            _, src, dst = self.fk(f)
            assert src == e
            e = dst
        return e

    def to_text(self) -> str:
        out = ["schema S = {", "  entities " + " ".join(self.entities)]
        if self.fks:
            out.append("  foreign_keys")
            out += [f"    {n} : {s} -> {t}" for n, s, t in self.fks]
        if self.attrs:
            out.append("  attributes")
            out += [f"    {n} : {e} -> Float" for n, e in self.attrs]
        eqs = [f"    forall x:{e}, {_path('x', p)} = {_path('x', q)}" for e, p, q in self.path_eqs]
        eqs += [f"    forall x:{e}, x.{a} = {_path('x', p)}.{b}" for e, a, p, b in self.attr_eqs]
        if eqs:
            out.append("  equations")
            out += eqs
        out.append("}")
        out += ["instance I : S = {", "  generators"]
        out += [f"    {g} : {e}" for g, e in self.gens]
        ieqs = [f"    {_path(g, p)} = {_path(h, q)}" for g, p, h, q in self.gen_eqs]
        for g, p, a, rhs in self.gen_attr_eqs:
            r = str(rhs) if not isinstance(rhs, tuple) else f"{_path(rhs[0], rhs[1])}.{rhs[2]}"
            ieqs.append(f"    {_path(g, p)}.{a} = {r}")
        if ieqs:
            out.append("  equations")
            out += ieqs
        out.append("}")
        return "\n".join(out) + "\n"


def _path(root: str, p: Path) -> str:
    return ".".join((root,) + tuple(p))


# ---------------------------------------------------------------------------
# random presentations


def random_spec(rng: random.Random) -> Spec:
    """Small schema: a DAG of fks plus self loops closed by an equation, so the chase terminates."""
    n = rng.randint(1, 3)
    ents = [f"E{i}" for i in range(n)]
    fks, path_eqs = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.6:
                fks.append((f"f{i}{j}", ents[i], ents[j]))
    for i in range(n):
        if rng.random() < 0.4:
            name = f"l{i}"
            fks.append((name, ents[i], ents[i]))
            kind = rng.choice(["involution", "identity", "idempotent"])
            if kind == "involution":
                path_eqs.append((ents[i], (name, name), ()))
            elif kind == "identity":
                path_eqs.append((ents[i], (name,), ()))
            else:
                path_eqs.append((ents[i], (name, name), (name,)))
    # commuting triangle
    if n == 3 and {"f01", "f12", "f02"} <= {f[0] for f in fks} and rng.random() < 0.5:
        path_eqs.append((ents[0], ("f01", "f12"), ("f02",)))
    attrs = [(f"a{i}", e) for i, e in enumerate(ents) if rng.random() < 0.7]
    attr_eqs = []
    for a, e in attrs:
        outs = [f for f in fks if f[1] == e and f[2] != e]
        cands = [(f, b) for f in outs for b, e2 in attrs if e2 == f[2]]
        if cands and rng.random() < 0.4:
            (fname, _, _), b = rng.choice(cands)
            attr_eqs.append((e, a, (fname,), b))
    gens = [(f"g{k}", rng.choice(ents)) for k in range(rng.randint(1, 4))]
    spec = Spec(ents, fks, attrs, path_eqs, attr_eqs, gens)

    def rand_path(e: str, max_len: int = 2) -> Path:
        p: list[str] = []
        for _ in range(rng.randint(0, max_len)):
            outs = [f for f in fks if f[1] == e]
            if not outs:
                break
            f = rng.choice(outs)
            p.append(f[0])
            e = f[2]
        return tuple(p)

    for _ in range(rng.randint(0, 3)):
        g, e = rng.choice(gens)
        p = rand_path(e)
        target = spec.end(e, p)
        others = [(h, eh) for h, eh in gens]
        h, eh = rng.choice(others)
        q = rand_path(eh)
        if spec.end(eh, q) == target and (g, p) != (h, q):
            spec.gen_eqs.append((g, p, h, q))
    for _ in range(rng.randint(0, 3)):
        g, e = rng.choice(gens)
        p = rand_path(e)
        end = spec.end(e, p)
        here = [a for a, ea in attrs if ea == end]
        if not here:
            continue
        a = rng.choice(here)
        if rng.random() < 0.7:
            spec.gen_attr_eqs.append((g, p, a, rng.choice([1, 2, 3])))
        else:
            h, eh = rng.choice(gens)
            q = rand_path(eh)
            there = [b for b, eb in attrs if eb == spec.end(eh, q)]
            if there:
                spec.gen_attr_eqs.append((g, p, a, (h, q, rng.choice(there))))
    return spec


# ---------------------------------------------------------------------------
# brute-force least congruence


@dataclass
class OracleResult:
    clash: Optional[frozenset]  # two distinct literals forced equal
    cls: dict  # node -> class id
    literal: dict  # class id -> literal value
    paths: list[tuple[str, Path]]  # entity-sorted nodes, shortest first


def least_congruence(spec: Spec, depth: int) -> OracleResult:
    sort = dict(spec.gens)
    parent: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b) -> bool:
        if a not in parent or b not in parent:
            return False
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[max(ra, rb, key=repr)] = min(ra, rb, key=repr)
        return True

    # nodes: ("e", g, path) entity terms, ("a", attr, g, path) attr terms, ("lit", v)
    ent_nodes: list[tuple[str, Path]] = []
    frontier = [(g, ()) for g, _ in spec.gens]
    while frontier:
        nxt = []
        for g, p in frontier:
            ent_nodes.append((g, p))
            if len(p) < depth:
                e = spec.end(sort[g], p)
                nxt += [(g, p + (f,)) for f, s, _ in spec.fks if s == e]
        frontier = nxt
    end_of = {(g, p): spec.end(sort[g], p) for g, p in ent_nodes}
    for g, p in ent_nodes:
        parent[("e", g, p)] = ("e", g, p)
        for a, ea in spec.attrs:
            if ea == end_of[(g, p)]:
                parent[("a", a, g, p)] = ("a", a, g, p)
    lits = {v for *_, v in spec.gen_attr_eqs if not isinstance(v, tuple)}
    for v in lits:
        parent[("lit", v)] = ("lit", v)

    changed = True
    while changed:
        changed = False
        for g, p, h, q in spec.gen_eqs:
            changed |= union(("e", g, p), ("e", h, q))
        for g, p, a, rhs in spec.gen_attr_eqs:
            other = ("lit", rhs) if not isinstance(rhs, tuple) else ("a", rhs[2], rhs[0], rhs[1])
            changed |= union(("a", a, g, p), other)
        for g, p in ent_nodes:
            e = end_of[(g, p)]
            for es, lhs, rhs in spec.path_eqs:
                if es == e:
                    changed |= union(("e", g, p + lhs), ("e", g, p + rhs))
            for es, a, path, b in spec.attr_eqs:
                if es == e:
                    changed |= union(("a", a, g, p), ("a", b, g, p + path))
        # congruence: equal arguments give equal applications
        table: dict = {}
        for g, p in ent_nodes:
            if not p:
                continue
            key = (p[-1], find(("e", g, p[:-1])))
            node = ("e", g, p)
            if key in table:
                changed |= union(table[key], node)
            else:
                table[key] = node
        for node in list(parent):
            if node[0] == "a":
                key = ("attr", node[1], find(("e", node[2], node[3])))
                if key in table:
                    changed |= union(table[key], node)
                else:
                    table[key] = node

    cls = {n: find(n) for n in parent}
    literal: dict = {}
    clash = None
    for v in sorted(lits):
        c = cls[("lit", v)]
        if c in literal and literal[c] != v:
            clash = frozenset((literal[c], v))
        literal.setdefault(c, v)
    return OracleResult(clash, cls, literal, ent_nodes)


def compare_with_model(spec: Spec, model: InstanceModel, oracle: OracleResult, depth: int) -> list[str]:
    """Differences between a saturated model and the oracle on paths of length <= depth."""
    problems = []
    row_of = {}
    for g, p in oracle.paths:
        if len(p) > depth:
            continue
        r = model.generator_values[g]
        for f in p:
            r = model.fk(model.schema.symbol(f, spec.fk(f)[1]), r)
        row_of[(g, p)] = r
    # rows are exactly the oracle classes
    for (t, rt), (u, ru) in itertools.combinations(row_of.items(), 2):
        same = oracle.cls[("e",) + t] == oracle.cls[("e",) + u]
        if same != (rt == ru):
            problems.append(f"{t} vs {u}: oracle {'=' if same else '!='}, model {'=' if rt == ru else '!='}")
    hit = set(row_of.values())
    for e, rows in model.rows.items():
        for r in rows:
            if r not in hit:
                problems.append(f"model row {r} of {e} is not reached by any path")
    # attribute values
    seen_null: dict = {}
    for (g, p), r in row_of.items():
        e = spec.end(dict(spec.gens)[g], p)
        for a, ea in spec.attrs:
            if ea != e:
                continue
            c = oracle.cls[("a", a, g, p)]
            v = model.attr(model.schema.symbol(a, e), r)
            if c in oracle.literal:
                want = Lit(Fraction(oracle.literal[c]), "Float")
                if v != want:
                    problems.append(f"{g}.{p}.{a}: model {v}, oracle {want.value}")
            elif not isinstance(v, Null):
                problems.append(f"{g}.{p}.{a}: model {v}, oracle expects a null")
            else:
                seen_null.setdefault(c, set()).add(v)
    nulls_by_class = {c: vs for c, vs in seen_null.items()}
    for c, vs in nulls_by_class.items():
        if len(vs) != 1:
            problems.append(f"one oracle class holds nulls {sorted(n.name for n in vs)}")
    owners: dict = {}
    for c, vs in nulls_by_class.items():
        for v in vs:
            if v in owners and owners[v] != c:
                problems.append(f"null {v.name} stands for two oracle classes")
            owners[v] = c
    return problems


# ---------------------------------------------------------------------------
# graph homomorphisms for the colimit universal property


def graph_homs(src, tgt):
    """All maps sending entities to entities and each fk to an fk or to the identity path.

    ``src`` and ``tgt`` are Schemas without equations.  Attributes go to
    same-typed attributes of the image entity.  Yields ``(entity_map, symbol_image)``
    where a symbol image is a target fk/attr name or ``None`` for the identity path.
    """
    ents = list(src.entities)
    for choice in itertools.product(tgt.entities, repeat=len(ents)):
        emap = dict(zip(ents, choice))
        options = []
        for f in src.fks:
            d, c = emap[f.arg_sorts[0]], emap[f.result_sort]
            opts = [g.name for g in tgt.fks if g.arg_sorts[0] == d and g.result_sort == c]
            if d == c:
                opts.append(None)
            options.append(opts)
        for f in src.attrs:
            d = emap[f.arg_sorts[0]]
            options.append([g.name for g in tgt.attrs if g.arg_sorts[0] == d and g.result_sort == f.result_sort])
        syms = list(src.fks) + list(src.attrs)
        for pick in itertools.product(*options):
            yield emap, dict(zip(syms, pick))


def random_graph_schema(rng: random.Random, name: str, max_entities: int = 3, attrs: bool = True):
    from ologmerge.schema import Schema

    n = rng.randint(1, max_entities)
    ents = [f"{name}{i}" for i in range(n)]
    fks = []
    for k in range(rng.randint(0, 3)):
        fks.append((f"{name.lower()}f{k}", rng.choice(ents), rng.choice(ents)))
    ats = [(f"{name.lower()}a{k}", rng.choice(ents), "Float") for k in range(rng.randint(0, 1 if attrs else 0))]
    return Schema.build(name, ents, fks, ats)


def mapping_from_hom(name: str, src, tgt, hom):
    """SchemaMapping for a graph hom as yielded by ``graph_homs``."""
    from ologmerge.eqlogic import App, Var
    from ologmerge.schema import SchemaMapping

    emap, smap = hom
    syms = {}
    for f, image in smap.items():
        x = Var("x", emap[f.arg_sorts[0]])
        if image is None:
            syms[f] = (("x",), x)
        else:
            syms[f] = (("x",), App(tgt.symbol(image, emap[f.arg_sorts[0]]), (x,)))
    return SchemaMapping(name, src, tgt, emap, syms)


def path_of(t) -> tuple[str, ...]:
    """Symbol names from the variable outwards, for terms built from unary symbols."""
    from ologmerge.eqlogic import Var

    out = []
    while not isinstance(t, Var):
        out.append(t.symbol.name)
        (t,) = t.args
    return tuple(reversed(out))


def push_path(hom, start_entity: str, path: tuple[str, ...], schema) -> tuple[str, ...]:
    """Image of a path of ``schema`` symbols under a graph hom (None images vanish)."""
    emap, smap = hom
    out, e = [], start_entity
    by_key = {(f.name, f.arg_sorts[0]): f for f in schema.symbols}
    for name in path:
        f = by_key[(name, e)]
        image = smap[f]
        if image is not None:
            out.append(image)
        e = f.result_sort
    return tuple(out)


def random_span(rng: random.Random):
    """Random O -> A, O -> B with graph-hom legs; None when no legs exist."""
    O = random_graph_schema(rng, "O", 2)
    A = random_graph_schema(rng, "A", 3)
    B = random_graph_schema(rng, "B", 3)
    legs = []
    for tgt in (A, B):
        homs = list(graph_homs(O, tgt))
        if not homs:
            return None
        legs.append(mapping_from_hom(f"F{tgt.name}", O, tgt, rng.choice(homs)))
    return legs[0], legs[1]


def _restrict(u, inj, src, colim_schema):
    """``u`` composed with the injection ``inj`` as a graph hom on ``src``."""
    emap = {e: u[0][inj.map_entity(e)] for e in src.entities}
    smap = {}
    for f in src.symbols:
        path = push_path(u, inj.map_entity(f.arg_sorts[0]), path_of(inj.image(f)), colim_schema)
        assert len(path) <= 1
        smap[f] = path[0] if path else None
    return emap, smap


def _key(hom) -> tuple:
    emap, smap = hom
    return (tuple(sorted(emap.items())), tuple(sorted((f.name, f.arg_sorts, v or "") for f, v in smap.items())))


def check_universal_property(F, G, colimit, T) -> tuple[int, list[str]]:
    """Count commuting cocones into the free schema ``T``; each must factor uniquely."""
    A, B, O = F.target, G.target, F.source
    P = colimit.schema
    iA, iB = colimit.injections[A.name], colimit.injections[B.name]
    factorings: dict = {}
    for u in graph_homs(P, T):
        ok = all(
            push_path(u, eq.ctx[0][1], path_of(eq.lhs), P) == push_path(u, eq.ctx[0][1], path_of(eq.rhs), P)
            for eq in P.equations
        )
        if ok:
            k = (_key(_restrict(u, iA, A, P)), _key(_restrict(u, iB, B, P)))
            factorings[k] = factorings.get(k, 0) + 1

    def commutes(hA, hB) -> bool:
        for e in O.entities:
            if hA[0][F.map_entity(e)] != hB[0][G.map_entity(e)]:
                return False
        for f in O.symbols:
            pa = push_path(hA, F.map_entity(f.arg_sorts[0]), path_of(F.image(f)), A)
            pb = push_path(hB, G.map_entity(f.arg_sorts[0]), path_of(G.image(f)), B)
            if pa != pb:
                return False
        return True

    problems, cocones = [], 0
    homs_b = list(graph_homs(B, T))
    for hA in graph_homs(A, T):
        for hB in homs_b:
            if not commutes(hA, hB):
                continue
            cocones += 1
            n = factorings.get((_key(hA), _key(hB)), 0)
            if n != 1:
                problems.append(f"cocone {_key(hA)} / {_key(hB)} factors {n} times")
    return cocones, problems
