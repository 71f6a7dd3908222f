"""Multi-sorted equational logic.

Terms, contexts, equations and theories, substitution, translation along
derived signature morphisms, and a congruence-closure engine (``EGraph``)
that the rest of the package uses to decide ground provable equality.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union


class OlogError(Exception):
    """Base class of every error raised by this package."""


class UnknownSymbol(OlogError):
    pass


class UnknownSort(OlogError):
    pass


class ArityMismatch(OlogError):
    pass


class SortMismatch(OlogError):
    pass


class UnboundVariable(OlogError):
    pass


class MissingBinding(OlogError):
    pass


class UnmappedSymbol(OlogError):
    pass


class UnmappedSort(OlogError):
    pass


class Status(str, enum.Enum):
    PROVED = "Proved"
    PROVED_ON_MODEL = "ProvedOnModel"
    UNKNOWN = "Unknown"


TYPE = "type"
ENTITY = "entity"


@dataclass(frozen=True)
class Sort:
    name: str
    kind: str = TYPE


@dataclass(frozen=True)
class FuncSymbol:
    name: str
    arg_sorts: tuple[str, ...]
    result_sort: str

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)

    @property
    def key(self) -> tuple[str, tuple[str, ...]]:
        return (self.name, self.arg_sorts)


@dataclass(frozen=True)
class Var:
    name: str
    sort: str


@dataclass(frozen=True)
class App:
    symbol: FuncSymbol
    args: tuple["Term", ...] = ()

    def __post_init__(self) -> None:
        if len(self.args) != self.symbol.arity:
            raise ArityMismatch(
                f"{self.symbol.name} expects {self.symbol.arity} arguments, got {len(self.args)}"
            )


@dataclass(frozen=True)
class Lit:
    """Literal constant. Numbers are exact ``Fraction`` values."""

    value: Union[Fraction, str, bool]
    sort: str


@dataclass(frozen=True)
class Null:
    """Labelled null: a fresh type-sorted value standing for missing data."""

    name: str
    sort: str


Term = Union[Var, App, Lit, Null]
Context = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Equation:
    ctx: Context
    lhs: Term
    rhs: Term
    sort: str

    @property
    def is_ground(self) -> bool:
        return not self.ctx and not free_vars(self.lhs) and not free_vars(self.rhs)

    def __str__(self) -> str:
        if not self.ctx:
            return f"{show(self.lhs)} = {show(self.rhs)}"
        binders = " ".join(f"{quote_ident(v)}:{quote_ident(s)}" for v, s in self.ctx)
        return f"forall {binders}, {show(self.lhs)} = {show(self.rhs)}"


def num(value: Union[int, str, Fraction], sort: str = "Float") -> Lit:
    """Exact numeric literal; strings are parsed as decimals (``".052"``)."""
    if isinstance(value, str):
        value = Fraction(value)
    return Lit(Fraction(value), sort)


def var(name: str, sort: str) -> Var:
    return Var(name, sort)


def app(symbol: FuncSymbol, *args: Term) -> App:
    return App(symbol, tuple(args))


# ---------------------------------------------------------------------------
# structural helpers


def term_sort(t: Term) -> str:
    if isinstance(t, App):
        return t.symbol.result_sort
    return t.sort


def term_size(t: Term) -> int:
    if isinstance(t, App):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


def term_depth(t: Term) -> int:
    if isinstance(t, App) and t.args:
        return 1 + max(term_depth(a) for a in t.args)
    return 1


def term_key(t: Term) -> tuple:
    """Total order on terms: size, then kind and name, then arguments."""
    if isinstance(t, App):
        return (term_size(t), 3, t.symbol.name, t.symbol.arg_sorts, tuple(term_key(a) for a in t.args))
    if isinstance(t, Lit):
        return (1, 0, t.sort, _lit_order(t.value), ())
    if isinstance(t, Null):
        return (1, 2, t.name, t.sort, ())
    return (1, 1, t.name, t.sort, ())


def _lit_order(value: object) -> tuple:
    if isinstance(value, bool):
        return (0, int(value), "")
    if isinstance(value, Fraction):
        return (1, value, "")
    return (2, 0, value)


def free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset([t.name])
    if isinstance(t, App):
        out: frozenset[str] = frozenset()
        for a in t.args:
            out |= free_vars(a)
        return out
    return frozenset()


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


def nulls_of(t: Term) -> set[Null]:
    return {s for s in subterms(t) if isinstance(s, Null)}


def is_literal(t: Term) -> bool:
    return isinstance(t, Lit)


# ---------------------------------------------------------------------------
# rendering

_BARE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
KEYWORDS = frozenset(
    "forall lambda true false schema mapping instance typeside entities foreign_keys "
    "attributes equations generators entity problem include schemas mappings instances "
    "rename rules extra_equations bounds mode waive_vcs output and".split()
)
INFIX = {"+": 1, "-": 1, "*": 2}


def quote_ident(name: str) -> str:
    if _BARE.match(name) and name not in KEYWORDS:
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def show_number(value: Fraction) -> str:
    """Exact decimal rendering; the arithmetic used here never leaves the decimals."""
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{value} has no finite decimal expansion")
    places = max(twos, fives)
    scaled = value * 10**places
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}".rstrip("0").rstrip(".")


def show_lit(lit: Lit) -> str:
    if isinstance(lit.value, bool):
        return "true" if lit.value else "false"
    if isinstance(lit.value, Fraction):
        return show_number(lit.value)
    return "'" + lit.value.replace("'", "''") + "'"


def show(t: Term, prec: int = 0) -> str:
    if isinstance(t, Var):
        return quote_ident(t.name)
    if isinstance(t, Null):
        return quote_ident(t.name)
    if isinstance(t, Lit):
        text = show_lit(t)
        if prec > 0 and text.startswith("-"):
            return f"({text})"
        return text
    sym = t.symbol
    if sym.name in INFIX and sym.arity == 2:
        p = INFIX[sym.name]
        left = show(t.args[0], p)
        right = show(t.args[1], p + 1)
        text = f"{left} {sym.name} {right}"
        return f"({text})" if p < prec else text
    if sym.arity == 0:
        return quote_ident(sym.name)
    if sym.arity == 1 and sym.name not in INFIX and not sym.name.isupper():
        return f"{show(t.args[0], 3)}.{quote_ident(sym.name)}"
    return f"{quote_ident(sym.name)}({', '.join(show(a) for a in t.args)})"


# ---------------------------------------------------------------------------
# theories


@dataclass(frozen=True)
class Theory:
    name: str
    sorts: Mapping[str, Sort]
    symbols: Mapping[tuple[str, tuple[str, ...]], FuncSymbol]
    equations: tuple[Equation, ...] = ()
    parent: Optional["Theory"] = field(default=None, compare=False, repr=False)

    @classmethod
    def build(
        cls,
        name: str,
        sorts: Iterable[Sort],
        symbols: Iterable[FuncSymbol],
        equations: Iterable[Equation] = (),
        parent: Optional["Theory"] = None,
    ) -> "Theory":
        sort_map: dict[str, Sort] = dict(parent.sorts) if parent else {}
        for s in sorts:
            old = sort_map.get(s.name)
            if old is not None and old != s:
                raise SortMismatch(f"sort {s.name} redeclared with kind {s.kind}")
            sort_map[s.name] = s
        sym_map: dict[tuple[str, tuple[str, ...]], FuncSymbol] = dict(parent.symbols) if parent else {}
        for f in symbols:
            for s in (*f.arg_sorts, f.result_sort):
                if s not in sort_map:
                    raise UnknownSort(f"symbol {f.name} uses undeclared sort {s}")
            old = sym_map.get(f.key)
            if old is not None and old != f:
                raise SortMismatch(f"symbol {f.name} bound to two result sorts")
            sym_map[f.key] = f
        eqs = tuple(parent.equations) if parent else ()
        th = cls(name, sort_map, sym_map, eqs, parent)
        new_eqs = tuple(equations)
        for eq in new_eqs:
            check_equation(th, eq)
        return cls(name, sort_map, sym_map, eqs + new_eqs, parent)

    def extend(
        self,
        name: str,
        sorts: Iterable[Sort] = (),
        symbols: Iterable[FuncSymbol] = (),
        equations: Iterable[Equation] = (),
    ) -> "Theory":
        return Theory.build(name, sorts, symbols, equations, parent=self)

    def has_symbol(self, f: FuncSymbol) -> bool:
        return self.symbols.get(f.key) == f

    def lookup(self, name: str, arg_sorts: Sequence[str]) -> FuncSymbol:
        f = self.symbols.get((name, tuple(arg_sorts)))
        if f is None:
            if not any(k[0] == name for k in self.symbols):
                raise UnknownSymbol(f"unknown symbol {name!r}")
            raise SortMismatch(f"no symbol {name!r} accepts ({', '.join(arg_sorts)})")
        return f

    def named(self, name: str) -> list[FuncSymbol]:
        return [f for k, f in self.symbols.items() if k[0] == name]


def check_equation(theory: Theory, eq: Equation) -> None:
    names = [v for v, _ in eq.ctx]
    if len(set(names)) != len(names):
        raise SortMismatch(f"variable declared twice in {eq}")
    for _, s in eq.ctx:
        if s not in theory.sorts:
            raise UnknownSort(s)
    ls = typecheck_term(theory, eq.ctx, eq.lhs)
    rs = typecheck_term(theory, eq.ctx, eq.rhs)
    if ls != rs or ls != eq.sort:
        raise SortMismatch(f"sides of {eq} have sorts {ls} and {rs}")


def typecheck_term(theory: Theory, ctx: Context, t: Term) -> str:
    if isinstance(t, Var):
        for v, s in ctx:
            if v == t.name:
                if s != t.sort:
                    raise SortMismatch(f"variable {v} used at {t.sort}, declared {s}")
                return s
        raise UnboundVariable(t.name)
    if isinstance(t, (Lit, Null)):
        if t.sort not in theory.sorts:
            raise UnknownSort(t.sort)
        return t.sort
    f = t.symbol
    if not theory.has_symbol(f):
        if not theory.named(f.name):
            raise UnknownSymbol(f.name)
        raise SortMismatch(f"{f.name} is not declared at ({', '.join(f.arg_sorts)})")
    for a, expected in zip(t.args, f.arg_sorts):
        got = typecheck_term(theory, ctx, a)
        if got != expected:
            raise SortMismatch(f"argument of {f.name} has sort {got}, expected {expected}")
    return f.result_sort


def substitute(t: Term, env: Mapping[str, Term]) -> Term:
    """Simultaneous substitution. Capture cannot occur: terms have no binders."""
    if isinstance(t, Var):
        if t.name not in env:
            raise MissingBinding(t.name)
        repl = env[t.name]
        if term_sort(repl) != t.sort:
            raise SortMismatch(f"{t.name}:{t.sort} bound to a term of sort {term_sort(repl)}")
        return repl
    if isinstance(t, App) and t.args:
        return App(t.symbol, tuple(substitute(a, env) for a in t.args))
    return t


def map_terms(t: Term, fn: Callable[[Term], Optional[Term]]) -> Term:
    """Bottom-up rewrite: ``fn`` returns a replacement or None to keep the node."""
    if isinstance(t, App) and t.args:
        t = App(t.symbol, tuple(map_terms(a, fn) for a in t.args))
    out = fn(t)
    return t if out is None else out


# ---------------------------------------------------------------------------
# morphisms


@dataclass(frozen=True)
class TheoryMorphism:
    """Derived signature morphism.

    ``symbol_map`` sends a symbol to ``(bound variable names, body)``; symbols in
    ``fixed`` (and sorts absent from ``sort_map``, when they exist in the target)
    are carried over unchanged.
    """

    source: Theory
    target: Theory
    sort_map: Mapping[str, str]
    symbol_map: Mapping[FuncSymbol, tuple[tuple[str, ...], Term]]
    fixed: frozenset = frozenset()

    def map_sort(self, s: str) -> str:
        if s in self.sort_map:
            return self.sort_map[s]
        src = self.source.sorts.get(s)
        if src is not None and src.kind == TYPE and s in self.target.sorts:
            return s
        raise UnmappedSort(s)

    def map_ctx(self, ctx: Context) -> Context:
        return tuple((v, self.map_sort(s)) for v, s in ctx)


def translate(m: TheoryMorphism, ctx: Context, t: Term) -> Term:
    if isinstance(t, Var):
        return Var(t.name, m.map_sort(t.sort))
    if isinstance(t, (Lit, Null)):
        return t
    args = tuple(translate(m, ctx, a) for a in t.args)
    f = t.symbol
    if f in m.symbol_map:
        params, body = m.symbol_map[f]
        if len(params) != len(args):
            raise ArityMismatch(f"image of {f.name} binds {len(params)} variables")
        return substitute(body, dict(zip(params, args)))
    if f in m.fixed:
        return App(f, args)
    raise UnmappedSymbol(f.name)


def translate_equation(m: TheoryMorphism, eq: Equation) -> Equation:
    return Equation(
        m.map_ctx(eq.ctx),
        translate(m, eq.ctx, eq.lhs),
        translate(m, eq.ctx, eq.rhs),
        m.map_sort(eq.sort),
    )


# ---------------------------------------------------------------------------
# congruence closure

Node = tuple  # (head, child class ids); head is FuncSymbol, Lit or Null
Fold = Callable[[FuncSymbol, Sequence[Lit]], Optional[Lit]]


class EGraph:
    """Union-find over hash-consed term nodes, closed under congruence.

    Classes that contain a literal carry it; ``fold`` evaluates an operator
    node whose arguments are all literal-valued, and merging two classes with
    distinct literals is recorded in ``clashes`` instead of being refused.
    """

    def __init__(self, fold: Optional[Fold] = None) -> None:
        self._parent: list[int] = []
        self._sort: list[str] = []
        self._lit: list[Optional[Lit]] = []
        self.hashcons: dict[Node, int] = {}
        self.fold = fold
        self.clashes: list[tuple[Lit, Lit]] = []
        self._dirty = False
        self.unions = 0

    def __len__(self) -> int:
        return len(self._parent)

    def find(self, a: int) -> int:
        parent = self._parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def sort_of(self, a: int) -> str:
        return self._sort[self.find(a)]

    def lit(self, a: int) -> Optional[Lit]:
        return self._lit[self.find(a)]

    def add_node(self, head, children: Sequence[int] = (), sort: Optional[str] = None) -> int:
        node = (head, tuple(self.find(c) for c in children))
        hit = self.hashcons.get(node)
        if hit is not None:
            return self.find(hit)
        cid = len(self._parent)
        self._parent.append(cid)
        if sort is None:
            sort = head.result_sort if isinstance(head, FuncSymbol) else head.sort
        self._sort.append(sort)
        self._lit.append(head if isinstance(head, Lit) else None)
        self.hashcons[node] = cid
        self._try_fold(node, cid)
        return self.find(cid)

    def add_term(self, t: Term, env: Optional[Mapping[str, int]] = None) -> int:
        if isinstance(t, Var):
            if env is None or t.name not in env:
                raise UnboundVariable(t.name)
            return self.find(env[t.name])
        if isinstance(t, (Lit, Null)):
            return self.add_node(t)
        return self.add_node(t.symbol, [self.add_term(a, env) for a in t.args])

    def lookup_term(self, t: Term, env: Optional[Mapping[str, int]] = None) -> Optional[int]:
        """Class of ``t`` if it is already represented, without adding nodes."""
        if isinstance(t, Var):
            return self.find(env[t.name]) if env and t.name in env else None
        if isinstance(t, (Lit, Null)):
            hit = self.hashcons.get((t, ()))
            return None if hit is None else self.find(hit)
        kids = []
        for a in t.args:
            k = self.lookup_term(a, env)
            if k is None:
                return None
            kids.append(k)
        hit = self.hashcons.get((t.symbol, tuple(kids)))
        return None if hit is None else self.find(hit)

    def union(self, a: int, b: int) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if b < a:
            a, b = b, a
        la, lb = self._lit[a], self._lit[b]
        if la is not None and lb is not None and la != lb:
            self.clashes.append((la, lb))
        if la is None:
            self._lit[a] = lb
        self._parent[b] = a
        self._dirty = True
        self.unions += 1
        return True

    def _try_fold(self, node: Node, cid: int) -> None:
        head, kids = node
        if self.fold is None or not kids or not isinstance(head, FuncSymbol):
            return
        lits = [self._lit[self.find(k)] for k in kids]
        if any(x is None for x in lits):
            return
        value = self.fold(head, lits)
        if value is not None:
            self.union(cid, self.add_node(value))

    def rebuild(self) -> None:
        """Restore the congruence invariant after unions."""
        while self._dirty:
            self._dirty = False
            fresh: dict[Node, int] = {}
            for (head, kids), cid in list(self.hashcons.items()):
                node = (head, tuple(self.find(k) for k in kids))
                cid = self.find(cid)
                other = fresh.get(node)
                if other is None:
                    fresh[node] = cid
                elif self.find(other) != cid:
                    self.union(other, cid)
            self.hashcons = fresh
            for node, cid in list(fresh.items()):
                self._try_fold(node, cid)

    def classes(self) -> dict[int, list[Node]]:
        out: dict[int, list[Node]] = {}
        for node, cid in self.hashcons.items():
            out.setdefault(self.find(cid), []).append(node)
        return out

    def equivalent(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)


def _coerce_equation(e) -> tuple[Term, Term]:
    if isinstance(e, Equation):
        if not e.is_ground:
            raise UnboundVariable(f"equation {e} is not ground")
        return e.lhs, e.rhs
    lhs, rhs = e
    return lhs, rhs


def ground_congruence(
    equations: Iterable,
    goal: tuple[Term, Term],
    depth_cap: Optional[int] = 6,
) -> Status:
    """Decide ``equations |- goal`` for ground equations, modulo literal arithmetic.

    Returns ``Status.UNKNOWN`` when the goal is not derivable or when any input
    term is deeper than ``depth_cap``.
    """
    from .typeside import fold_literals, reduce

    pairs = [_coerce_equation(e) for e in equations]
    terms = [t for pair in pairs for t in pair] + list(goal)
    for t in terms:
        if free_vars(t):
            raise UnboundVariable(f"{show(t)} is not ground")
        if depth_cap is not None and term_depth(t) > depth_cap:
            return Status.UNKNOWN
    g = EGraph(fold=fold_literals)
    for lhs, rhs in pairs:
        g.union(g.add_term(reduce(lhs)), g.add_term(reduce(rhs)))
    a = g.add_term(reduce(goal[0]))
    b = g.add_term(reduce(goal[1]))
    g.rebuild()
    return Status.PROVED if g.equivalent(a, b) else Status.UNKNOWN
