"""Text format for schemas, mappings, instances and integration problems.

Example::

    schema P = {
      entities Person
      attributes Age : Person -> Integer
    }
    instance I : P = {
      generators p1 p2 : Person  x : Integer
      equations p1.Age = 20; p2.Age = x
    }

Identifiers are bare (``Age``) or double-quoted (``"Burst Rating"``); string
literals use single quotes.  Unary symbols apply postfix (``x.Age``) or as
calls (``Age(x)``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import LarkError, UnexpectedInput

from .eqlogic import (
    App,
    Equation,
    Lit,
    OlogError,
    SortMismatch,
    Term,
    UnboundVariable,
    UnknownSymbol,
    Var,
    num,
    term_sort,
)
from .instance import Bounds, Instance, gen_term
from .schema import MODEL, SYMBOLIC, Schema, SchemaMapping
from .typeside import EXCEL, NUMERIC, STRING, BOOL, TypeSide, op

GRAMMAR = r"""
start: item*
?item: schema_def | mapping_def | instance_def | problem_def | include | typeside_opt

include: "include" QNAME
typeside_opt: "typeside" name+

schema_def: "schema" name "=" "{" ssec* "}"
?ssec: "entities" name* -> entities
     | "foreign_keys" sig* -> fks
     | "attributes" sig* -> attrs
     | "equations" eqn* -> equations
     | "constraints" eqn* -> constraints
sig: name+ ":" name "->" name

eqn: [forall] term "=" term ";"?
forall: "forall" binder+ ","
binder: name+ ":" name

mapping_def: "mapping" name ":" name "->" name "=" "{" mitem* "}"
?mitem: "entity" name "->" name -> ment
      | name "->" lam -> msym
      | name "." name "->" lam -> mqsym
lam: "lambda" name ("," | ".") term

instance_def: "instance" name ":" name "=" "{" isec* "}"
?isec: "generators" binder* -> gens
     | "equations" eqn* -> equations

problem_def: "problem" name "=" "{" psec* "}"
?psec: "schemas" name* -> p_schemas
     | "mappings" name* -> p_mappings
     | "instances" name* -> p_instances
     | "rename" "{" rename_item* "}" -> p_rename
     | "rules" "{" rule* "}" -> p_rules
     | "extra_equations" "{" eqn* "}" -> p_extra
     | "bounds" bound* -> p_bounds
     | "mode" name -> p_mode
     | "waive_vcs" boolean -> p_waive
     | "output" name -> p_output
rename_item: name "->" name
bound: name "=" INT
rule: "forall" binder+ "," conj "->" term "=" term ";"?
conj: atom_eq ("and" atom_eq)*
atom_eq: term "=" term
boolean: "true" -> true | "false" -> false

?term: sum
?sum: product
    | sum "+" product -> add
    | sum "-" product -> sub
?product: unary
    | product "*" unary -> mul
?unary: postfix
    | "-" unary -> neg
?postfix: atom
    | postfix "." name -> dot
?atom: NUMBER -> number
    | SQSTRING -> string
    | "true" -> true
    | "false" -> false
    | name "(" term ("," term)* ")" -> call
    | "-" "(" term "," term ")" -> minus_call
    | "+" "(" term "," term ")" -> plus_call
    | "*" "(" term "," term ")" -> times_call
    | name -> ident
    | "(" term ")"

name: NAME | QNAME
NAME: /[A-Za-z_][A-Za-z0-9_]*/
QNAME: /"(\\.|[^"\\])*"/
SQSTRING: /'([^']|'')*'/
NUMBER: /\d+(\.\d*)?|\.\d+/
INT: /\d+/
COMMENT: /(#|\/\/)[^\n]*/
%ignore COMMENT
%ignore /\s+/
"""

_PARSER = Lark(GRAMMAR, parser="lalr", maybe_placeholders=True)


class ParseError(OlogError):
    pass


def unquote(tok: str) -> str:
    if tok.startswith('"'):
        body = tok[1:-1]
        out, i = [], 0
        while i < len(body):
            if body[i] == "\\" and i + 1 < len(body):
                i += 1
            out.append(body[i])
            i += 1
        return "".join(out)
    return tok


# raw terms are tuples: ("num", text) ("str", s) ("bool", b) ("id", n)
# ("dot", t, n) ("call", n, args) ("op", sym, a, b) ("neg", t)


@v_args(inline=True)
class _ToRaw(Transformer):
    def name(self, tok):
        return unquote(str(tok))

    def number(self, tok):
        return ("num", str(tok))

    def string(self, tok):
        return ("str", str(tok)[1:-1].replace("''", "'"))

    def true(self):
        return ("bool", True)

    def false(self):
        return ("bool", False)

    def ident(self, n):
        return ("id", n)

    def dot(self, t, n):
        return ("dot", t, n)

    def call(self, n, *args):
        return ("call", n, list(args))

    def add(self, a, b):
        return ("op", "+", a, b)

    def sub(self, a, b):
        return ("op", "-", a, b)

    def mul(self, a, b):
        return ("op", "*", a, b)

    plus_call = add
    minus_call = sub
    times_call = mul

    def neg(self, a):
        return ("neg", a)

    def binder(self, *parts):
        names, sort = parts[:-1], parts[-1]
        return [(n, sort) for n in names]

    def forall(self, *binders):
        return [b for group in binders for b in group]

    def eqn(self, ctx, lhs, rhs):
        return ("eqn", ctx or [], lhs, rhs)

    def sig(self, *parts):
        *names, dom, cod = parts
        return [(n, dom, cod) for n in names]

    def lam(self, v, body):
        return (v, body)

    def atom_eq(self, a, b):
        return (a, b)

    def conj(self, *atoms):
        return list(atoms)

    def rule(self, *parts):
        *binders, body, lhs, rhs = parts
        return ("rule", [b for g in binders for b in g], body, (lhs, rhs))

    def rename_item(self, a, b):
        return (a, b)

    def bound(self, n, v):
        return (n, int(v))


@dataclass
class ProblemSpec:
    """Unelaborated problem block; see ``Document.problem``."""

    name: str
    schemas: list[str] = field(default_factory=list)
    mappings: list[str] = field(default_factory=list)
    instances: list[str] = field(default_factory=list)
    rename: dict[str, str] = field(default_factory=dict)
    rules: list = field(default_factory=list)
    extra: list = field(default_factory=list)
    bounds: Bounds = Bounds()
    mode: str = MODEL
    waive_vcs: bool = False
    output: Optional[str] = None


@dataclass
class Document:
    schemas: dict[str, Schema] = field(default_factory=dict)
    mappings: dict[str, SchemaMapping] = field(default_factory=dict)
    instances: dict[str, Instance] = field(default_factory=dict)
    problems: dict[str, ProblemSpec] = field(default_factory=dict)
    typeside: TypeSide = EXCEL
    base_dir: Path = Path(".")

    def problem(self, name: Optional[str] = None):
        """Elaborate a problem block into an ``IntegrationProblem``."""
        from .integrate import IntegrationProblem, SchemaDiagram, colimit_schemas

        if name is None:
            if len(self.problems) != 1:
                raise ParseError("document must contain exactly one problem")
            name = next(iter(self.problems))
        spec = self.problems[name]
        maps = [self.mappings[m] for m in spec.mappings]
        node_names = list(spec.schemas)
        for m in maps:
            for s in (m.source.name, m.target.name):
                if s not in node_names:
                    node_names.append(s)
        insts = {}
        for i in spec.instances:
            inst = self.instances[i]
            insts[inst.schema.name] = inst
            if inst.schema.name not in node_names:
                node_names.append(inst.schema.name)
        diagram = SchemaDiagram(tuple(self.schemas[n] for n in node_names), tuple(maps))
        base = colimit_schemas(diagram, spec.rename, spec.name)
        extra = [elab_equation(base.schema, e, {}) for e in spec.extra]
        target = base.with_equations(extra).schema
        rules = [elab_rule(target, r) for r in spec.rules]
        return IntegrationProblem(
            diagram,
            insts,
            rules,
            extra,
            dict(spec.rename),
            spec.mode,
            spec.waive_vcs,
            spec.name,
        )


def parse_document(text: str, base_dir: Union[str, Path] = ".", doc: Optional[Document] = None, strings: bool = False) -> Document:
    try:
        tree = _PARSER.parse(text)
    except UnexpectedInput as exc:
        raise ParseError(f"line {exc.line}, column {exc.column}: unexpected input") from None
    except LarkError as exc:
        raise ParseError(str(exc)) from None
    tree = _ToRaw().transform(tree)
    doc = doc or Document(typeside=TypeSide(strings) if strings else EXCEL, base_dir=Path(base_dir))
    for item in tree.children:
        kind = item.data
        if kind == "include":
            path = Path(base_dir) / unquote(str(item.children[0]))
            parse_document(path.read_text(), path.parent, doc)
        elif kind == "typeside_opt":
            if "strings" in item.children:
                doc.typeside = TypeSide(strings=True)
        elif kind == "schema_def":
            s = _schema(item, doc.typeside)
            doc.schemas[s.name] = s
        elif kind == "mapping_def":
            m = _mapping(item, doc)
            doc.mappings[m.name] = m
        elif kind == "instance_def":
            i = _instance(item, doc)
            doc.instances[i.name] = i
        elif kind == "problem_def":
            p = _problem(item)
            doc.problems[p.name] = p
    return doc


def load(path: Union[str, Path], strings: bool = False) -> Document:
    path = Path(path)
    return parse_document(path.read_text(), path.parent, strings=strings)


def _schema(tree, typeside: TypeSide) -> Schema:
    name, *sections = tree.children
    ents, fks, attrs, raw_eqs, raw_cons = [], [], [], [], []
    for sec in sections:
        if sec.data == "entities":
            ents += sec.children
        elif sec.data == "fks":
            fks += [t for group in sec.children for t in group]
        elif sec.data == "attrs":
            attrs += [t for group in sec.children for t in group]
        elif sec.data == "constraints":
            raw_cons += sec.children
        else:
            raw_eqs += sec.children
    s = Schema.build(name, ents, fks, attrs, (), typeside)
    cons = [elab_equation(s, e, {}) for e in raw_cons]
    s = s.with_equations([elab_equation(s, e, {}) for e in raw_eqs] + cons)
    s = replace(s, constraints=frozenset(cons))
    s.theory
    return s


def _mapping(tree, doc: Document) -> SchemaMapping:
    name, src, tgt, *items = tree.children
    S, T = doc.schemas[src], doc.schemas[tgt]
    ents, syms, current = {}, {}, None
    for it in items:
        if it.data == "ment":
            current, image = it.children
            ents[current] = image
            continue
        if it.data == "mqsym":
            current, fname, (v, body) = it.children
        else:
            fname, (v, body) = it.children
            if current is None:
                raise ParseError(f"{fname} appears before any entity line in {name}")
        if current not in ents:
            raise ParseError(f"entity {current} is not mapped in {name}")
        f = S.symbol(fname, current)
        syms[f] = ((v,), elab_term(T, body, {v: ents[current]}))
    return SchemaMapping(name, S, T, ents, syms)


def _instance(tree, doc: Document) -> Instance:
    name, sname, *sections = tree.children
    S = doc.schemas[sname]
    gens, raw = [], []
    for sec in sections:
        if sec.data == "gens":
            gens += [b for group in sec.children for b in group]
        else:
            raw += sec.children
    sorts = dict(gens)
    eqs = [elab_equation(S, e, {}, generators=sorts) for e in raw]
    return Instance.build(name, S, gens, eqs)


def _problem(tree) -> ProblemSpec:
    name, *sections = tree.children
    p = ProblemSpec(name)
    for sec in sections:
        kids = sec.children
        if sec.data == "p_schemas":
            p.schemas += kids
        elif sec.data == "p_mappings":
            p.mappings += kids
        elif sec.data == "p_instances":
            p.instances += kids
        elif sec.data == "p_rename":
            p.rename.update(dict(kids))
        elif sec.data == "p_rules":
            p.rules += kids
        elif sec.data == "p_extra":
            p.extra += kids
        elif sec.data == "p_bounds":
            vals = dict(kids)
            bad = set(vals) - {"max_rounds", "max_fresh"}
            if bad:
                raise ParseError(f"unknown bounds {sorted(bad)}")
            p.bounds = Bounds(**{**p.bounds.__dict__, **vals})
        elif sec.data == "p_mode":
            if kids[0] not in (MODEL, SYMBOLIC):
                raise ParseError(f"mode must be {MODEL} or {SYMBOLIC}")
            p.mode = kids[0]
        elif sec.data == "p_waive":
            p.waive_vcs = kids[0] == ("bool", True)
        elif sec.data == "p_output":
            p.output = kids[0]
    return p


# ---------------------------------------------------------------------------
# elaboration


def _is_lit(raw) -> bool:
    if raw[0] in ("num", "str", "bool"):
        return True
    if raw[0] == "neg":
        return _is_lit(raw[1])
    if raw[0] == "op":
        return _is_lit(raw[2]) and _is_lit(raw[3])
    if raw[0] == "call" and raw[1] in ("MAX", "MIN"):
        return all(_is_lit(a) for a in raw[2])
    return False


class _Elab:
    def __init__(self, schema: Schema, ctx: dict[str, str], generators: dict[str, str]) -> None:
        self.schema = schema
        self.ctx = ctx
        self.generators = generators

    def term(self, raw, expected: Optional[str] = None) -> Term:
        kind = raw[0]
        if kind == "num":
            sort = expected if expected in NUMERIC else "Float"
            return num(raw[1], sort)
        if kind == "str":
            return Lit(raw[1], STRING)
        if kind == "bool":
            return Lit(raw[1], BOOL)
        if kind == "id":
            n = raw[1]
            if n in self.ctx:
                return Var(n, self.ctx[n])
            if n in self.generators:
                return gen_term(n, self.generators[n])
            raise UnboundVariable(f"{n} is neither a variable nor a generator")
        if kind == "dot":
            base = self.term(raw[1])
            return self._apply_unary(raw[2], base)
        if kind == "neg":
            inner = self.term(raw[1], expected)
            if isinstance(inner, Lit):
                return Lit(-inner.value, inner.sort)
            s = term_sort(inner)
            return App(op("-", s), (Lit(Fraction(0), s), inner))
        if kind == "op":
            return self._binary(raw[1], raw[2], raw[3], expected)
        if kind == "call":
            name, args = raw[1], raw[2]
            if name in ("MAX", "MIN") and len(args) >= 2:
                out = self._binary(name, args[0], args[1], expected)
                for a in args[2:]:
                    rhs = self.term(a, term_sort(out))
                    out = App(op(name, term_sort(out)), (out, rhs))
                return out
            if len(args) == 1:
                return self._apply_unary(name, self.term(args[0]))
            return self._typeside_call(name, args)
        raise ParseError(f"cannot elaborate {raw!r}")

    def _apply_unary(self, name: str, base: Term) -> Term:
        s = term_sort(base)
        if self.schema.is_entity(s):
            return App(self.schema.symbol(name, s), (base,))
        th = self.schema.typeside.theory
        f = th.symbols.get((name, (s,)))
        if f is None:
            raise UnknownSymbol(f"no unary {name!r} on {s}")
        return App(f, (base,))

    def _typeside_call(self, name: str, args) -> Term:
        th = self.schema.typeside.theory
        terms = [self.term(a) for a in args]
        f = th.lookup(name, [term_sort(t) for t in terms])
        return App(f, tuple(terms))

    def _binary(self, name, a, b, expected) -> Term:
        if _is_lit(a) and not _is_lit(b):
            rb = self.term(b, expected)
            ra = self.term(a, term_sort(rb))
        else:
            ra = self.term(a, expected)
            rb = self.term(b, term_sort(ra))
        s = term_sort(ra)
        if term_sort(rb) != s:
            raise SortMismatch(f"{name} applied to {s} and {term_sort(rb)}")
        if s not in NUMERIC:
            raise SortMismatch(f"{name} needs numeric arguments, got {s}")
        return App(op(name, s), (ra, rb))

    def equation(self, lhs_raw, rhs_raw) -> tuple[Term, Term]:
        if _is_lit(lhs_raw) and not _is_lit(rhs_raw):
            rhs = self.term(rhs_raw)
            lhs = self.term(lhs_raw, term_sort(rhs))
        else:
            lhs = self.term(lhs_raw)
            rhs = self.term(rhs_raw, term_sort(lhs))
        return lhs, rhs


def elab_term(schema: Schema, raw, ctx: dict[str, str], generators: dict[str, str] = {}) -> Term:
    return _Elab(schema, ctx, generators).term(raw)


def elab_equation(schema: Schema, raw, ctx: dict[str, str], generators: dict[str, str] = {}) -> Equation:
    _, binders, lhs_raw, rhs_raw = raw
    full = {**ctx, **dict(binders)}
    lhs, rhs = _Elab(schema, full, generators).equation(lhs_raw, rhs_raw)
    return Equation(tuple(binders), lhs, rhs, term_sort(lhs))


def elab_rule(schema: Schema, raw):
    from .integrate import HornRule

    _, binders, body, head = raw
    el = _Elab(schema, dict(binders), {})
    rule = HornRule(
        tuple(binders),
        tuple(el.equation(a, b) for a, b in body),
        el.equation(*head),
    )
    rule.check(schema)
    return rule


def parse_term(schema: Schema, text: str, ctx: dict[str, str] = {}, generators: dict[str, str] = {}) -> Term:
    """Parse a single term, e.g. ``x."Casing Section"."Burst Rating"``."""
    doc = _PARSER.parse(f"schema _ = {{ equations {text} = 0 }}")
    raw = _ToRaw().transform(doc).children[0].children[1].children[0]
    return elab_term(schema, raw[2], ctx, generators)


def parse_equation(schema: Schema, text: str, generators: dict[str, str] = {}) -> Equation:
    doc = _PARSER.parse(f"schema _ = {{ equations {text} }}")
    raw = _ToRaw().transform(doc).children[0].children[1].children[0]
    return elab_equation(schema, raw, {}, generators)
