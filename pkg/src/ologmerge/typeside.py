"""The built-in theory of spreadsheet functions.

Sorts ``Float``, ``Integer``, ``String`` and ``Bool``; binary ``+ - * MAX MIN``
on the numeric sorts; exact ground arithmetic; polynomial normal forms used to
discharge equations symbolically.

MAX/MIN axioms fixed here: both are commutative, associative and idempotent,
``MAX(x + z, y + z) = MAX(x, y) + z``, and ``MIN(x, y) = -MAX(-x, -y)``.
Division is not part of the type side.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

from .eqlogic import (
    App,
    Context,
    Equation,
    FuncSymbol,
    Lit,
    Null,
    OlogError,
    Sort,
    Status,
    Term,
    Theory,
    Var,
    free_vars,
    map_terms,
    show,
    show_number,
    substitute,
    subterms,
    term_key,
    term_sort,
)

FLOAT = "Float"
INTEGER = "Integer"
STRING = "String"
BOOL = "Bool"
NUMERIC = (FLOAT, INTEGER)
ARITH = ("+", "-", "*", "MAX", "MIN")
TYPESIDE_NAME = "Excel"


class NonFloatSort(OlogError):
    pass


class RewriteBoundExceeded(OlogError):
    pass


def op(name: str, sort: str = FLOAT) -> FuncSymbol:
    return FuncSymbol(name, (sort, sort), sort)


CONCAT = FuncSymbol("concat", (STRING, STRING), STRING)
FLOAT_TO_STRING = FuncSymbol("floatToString", (FLOAT,), STRING)


def is_arith(f: FuncSymbol) -> bool:
    return f.name in ARITH and f.result_sort in NUMERIC and f.arity == 2


def _axioms(sort: str) -> list[Equation]:
    x, y, z = Var("x", sort), Var("y", sort), Var("z", sort)
    plus, minus, times = op("+", sort), op("-", sort), op("*", sort)
    mx, mn = op("MAX", sort), op("MIN", sort)
    zero, one, neg1 = Lit(Fraction(0), sort), Lit(Fraction(1), sort), Lit(Fraction(-1), sort)

    def a(f, *args):
        return App(f, tuple(args))

    def eq(ctx, lhs, rhs):
        return Equation(tuple((v.name, sort) for v in ctx), lhs, rhs, sort)

    return [
        eq((x, y, z), a(plus, a(plus, x, y), z), a(plus, x, a(plus, y, z))),
        eq((x, y), a(plus, x, y), a(plus, y, x)),
        eq((x,), a(plus, zero, x), x),
        eq((x, y, z), a(times, a(times, x, y), z), a(times, x, a(times, y, z))),
        eq((x, y), a(times, x, y), a(times, y, x)),
        eq((x,), a(times, one, x), x),
        eq((x, y, z), a(times, x, a(plus, y, z)), a(plus, a(times, x, y), a(times, x, z))),
        eq((x, y), a(minus, x, y), a(plus, x, a(times, neg1, y))),
        eq((x,), a(plus, x, a(times, neg1, x)), zero),
        eq((x, y), a(mx, x, y), a(mx, y, x)),
        eq((x, y, z), a(mx, a(mx, x, y), z), a(mx, x, a(mx, y, z))),
        eq((x,), a(mx, x, x), x),
        eq((x, y, z), a(plus, a(mx, x, y), z), a(mx, a(plus, x, z), a(plus, y, z))),
        eq((x, y), a(mn, x, y), a(mn, y, x)),
        eq((x, y, z), a(mn, a(mn, x, y), z), a(mn, x, a(mn, y, z))),
        eq((x,), a(mn, x, x), x),
        eq((x, y, z), a(plus, a(mn, x, y), z), a(mn, a(plus, x, z), a(plus, y, z))),
        eq(
            (x, y),
            a(mn, x, y),
            a(minus, zero, a(mx, a(minus, zero, x), a(minus, zero, y))),
        ),
    ]


@dataclass(frozen=True)
class TypeSide:
    """The type side as a theory; ``strings`` enables concat/floatToString."""

    strings: bool = False

    @cached_property
    def theory(self) -> Theory:
        sorts = [Sort(FLOAT), Sort(INTEGER), Sort(STRING), Sort(BOOL)]
        symbols = [op(name, s) for s in NUMERIC for name in ARITH]
        if self.strings:
            symbols += [CONCAT, FLOAT_TO_STRING]
        return Theory.build(TYPESIDE_NAME, sorts, symbols, self.axioms)

    @property
    def axioms(self) -> list[Equation]:
        return [eq for s in NUMERIC for eq in _axioms(s)]

    @property
    def types(self) -> tuple[str, ...]:
        return (FLOAT, INTEGER, STRING, BOOL)

    def is_typeside_symbol(self, f: FuncSymbol) -> bool:
        return self.theory.has_symbol(f)


EXCEL = TypeSide()


# ---------------------------------------------------------------------------
# ground evaluation


def fold_literals(f: FuncSymbol, args: Sequence[Lit]) -> Optional[Lit]:
    """Evaluate ``f`` on literal arguments, or None if ``f`` is uninterpreted."""
    if is_arith(f):
        a, b = args[0].value, args[1].value
        if not isinstance(a, Fraction) or not isinstance(b, Fraction):
            return None
        if f.name == "+":
            v = a + b
        elif f.name == "-":
            v = a - b
        elif f.name == "*":
            v = a * b
        elif f.name == "MAX":
            v = max(a, b)
        else:
            v = min(a, b)
        return Lit(v, f.result_sort)
    if f == CONCAT and all(isinstance(x.value, str) for x in args):
        return Lit(args[0].value + args[1].value, STRING)
    if f == FLOAT_TO_STRING and isinstance(args[0].value, Fraction):
        return Lit(show_number(args[0].value), STRING)
    return None


def reduce(t: Term) -> Term:
    """Evaluate every literal-only arithmetic subterm exactly."""

    def step(s: Term) -> Optional[Term]:
        if isinstance(s, App) and s.args and all(isinstance(a, Lit) for a in s.args):
            return fold_literals(s.symbol, s.args)
        return None

    return map_terms(t, step)


# ---------------------------------------------------------------------------
# polynomials

Monomial = tuple  # sorted tuple of atom terms, repeated for powers


def _mono_key(m: Monomial) -> tuple:
    return (len(m), tuple(term_key(a) for a in m))


@dataclass(frozen=True)
class Polynomial:
    """Finite map from monomials to non-zero exact coefficients."""

    terms: tuple[tuple[Monomial, Fraction], ...]
    sort: str = FLOAT

    @classmethod
    def from_dict(cls, coeffs: Mapping[Monomial, Fraction], sort: str = FLOAT) -> "Polynomial":
        items = [(m, Fraction(c)) for m, c in coeffs.items() if c != 0]
        items.sort(key=lambda mc: _mono_key(mc[0]))
        return cls(tuple(items), sort)

    @classmethod
    def const(cls, c, sort: str = FLOAT) -> "Polynomial":
        return cls.from_dict({(): Fraction(c)}, sort)

    @classmethod
    def atom(cls, t: Term, sort: str = FLOAT) -> "Polynomial":
        return cls.from_dict({(t,): Fraction(1)}, sort)

    @cached_property
    def coeffs(self) -> dict[Monomial, Fraction]:
        return dict(self.terms)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.coeffs)
        for m, c in other.terms:
            out[m] = out.get(m, Fraction(0)) + c
        return Polynomial.from_dict(out, self.sort)

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple((m, -c) for m, c in self.terms), self.sort)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = tuple(sorted(m1 + m2, key=term_key))
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Polynomial.from_dict(out, self.sort)

    @property
    def is_const(self) -> bool:
        return all(not m for m, _ in self.terms)

    @property
    def constant(self) -> Fraction:
        return self.coeffs.get((), Fraction(0))

    def atoms(self) -> set[Term]:
        return {a for m, _ in self.terms for a in m}

    def to_term(self) -> Term:
        """Canonical term for this polynomial (sum of scaled monomials)."""
        s = self.sort
        if not self.terms:
            return Lit(Fraction(0), s)
        parts: list[Term] = []
        for m, c in self.terms:
            if not m:
                parts.append(Lit(c, s))
                continue
            body: Term = m[0]
            for a in m[1:]:
                body = App(op("*", s), (body, a))
            if c != 1:
                body = App(op("*", s), (Lit(c, s), body))
            parts.append(body)
        out = parts[0]
        for p in parts[1:]:
            out = App(op("+", s), (out, p))
        return out

    def evaluate(self, env: Mapping[Term, Fraction]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms:
            v = c
            for a in m:
                v *= env[a]
            total += v
        return total

    def __str__(self) -> str:
        return show(self.to_term())


def _max_symbol(n: int, sort: str) -> FuncSymbol:
    return FuncSymbol("MAX", (sort,) * n, sort)


def _max_atom_args(t: Term) -> Optional[list[Polynomial]]:
    if isinstance(t, App) and t.symbol.name == "MAX" and t.symbol.result_sort in NUMERIC:
        return [_normalize(a) for a in t.args]
    return None


def _canonical_max(args: list[Polynomial], sort: str) -> Polynomial:
    flat: list[Polynomial] = []
    stack = list(args)
    while stack:
        p = stack.pop(0)
        for m, c in p.terms:
            if len(m) == 1 and c == 1:
                inner = _max_atom_args(m[0])
                if inner is not None:
                    rest = p - Polynomial.atom(m[0], sort)
                    stack = [q + rest for q in inner] + stack
                    break
        else:
            flat.append(p)
    uniq = {p.terms: p for p in flat}
    polys = list(uniq.values())
    if len(polys) == 1:
        return polys[0]
    if all(p.is_const for p in polys):
        return Polynomial.const(max(p.constant for p in polys), sort)
    monos = {m for p in polys for m, _ in p.terms}
    shift = Polynomial.from_dict(
        {m: min(p.coeffs.get(m, Fraction(0)) for p in polys) for m in monos}, sort
    )
    shifted = sorted({(p - shift).terms: p - shift for p in polys}.values(), key=lambda p: tuple(_mono_key(m) + (c,) for m, c in p.terms))
    atom = App(_max_symbol(len(shifted), sort), tuple(p.to_term() for p in shifted))
    return shift + Polynomial.atom(atom, sort)


def _normalize(t: Term) -> Polynomial:
    s = term_sort(t)
    if isinstance(t, Lit):
        return Polynomial.const(t.value, s)
    if isinstance(t, App) and t.symbol.result_sort in NUMERIC and t.symbol.name in ARITH:
        if t.symbol.name == "MAX" and t.symbol.arity != 2:
            return _canonical_max([_normalize(a) for a in t.args], s)
        a, b = (_normalize(x) for x in t.args)
        name = t.symbol.name
        if name == "+":
            return a + b
        if name == "-":
            return a - b
        if name == "*":
            return a * b
        if name == "MAX":
            return _canonical_max([a, b], s)
        return -_canonical_max([-a, -b], s)
    if isinstance(t, App) and t.args:
        # uninterpreted symbol: canonicalize numeric arguments inside the atom
        args = tuple(
            _normalize(x).to_term() if term_sort(x) in NUMERIC else x for x in t.args
        )
        return Polynomial.atom(App(t.symbol, args), s)
    return Polynomial.atom(t, s)


def ring_normalize(t: Term, theory: Optional[Theory] = None, ctx: Context = ()) -> Polynomial:
    """Canonical polynomial of a numeric term.

    MAX/MIN and uninterpreted applications become atoms after their own
    arguments are normalized.
    """
    if theory is not None:
        from .eqlogic import typecheck_term

        s = typecheck_term(theory, ctx, t)
    else:
        s = term_sort(t)
    if s not in NUMERIC:
        raise NonFloatSort(f"{show(t)} has sort {s}")
    return _normalize(t)


def terms_equal(a: Term, b: Term) -> bool:
    """Sound (incomplete) equality check for reduced values."""
    a, b = reduce(a), reduce(b)
    if a == b:
        return True
    if term_sort(a) in NUMERIC and term_sort(a) == term_sort(b):
        return _normalize(a) == _normalize(b)
    return False


# ---------------------------------------------------------------------------
# symbolic decision


@dataclass(frozen=True)
class Decision:
    status: Status
    note: str = ""

    @property
    def proved(self) -> bool:
        return self.status is Status.PROVED


def match(pattern: Term, t: Term, binding: dict[str, Term]) -> bool:
    if isinstance(pattern, Var):
        if pattern.sort != term_sort(t):
            return False
        bound = binding.get(pattern.name)
        if bound is None:
            binding[pattern.name] = t
            return True
        return bound == t
    if isinstance(pattern, App):
        if not isinstance(t, App) or t.symbol != pattern.symbol:
            return False
        return all(match(p, a, binding) for p, a in zip(pattern.args, t.args))
    return pattern == t


@dataclass(frozen=True)
class RewriteRule:
    lhs: Term
    rhs: Term

    def apply(self, t: Term) -> Optional[Term]:
        b: dict[str, Term] = {}
        if match(self.lhs, t, b):
            return substitute(self.rhs, b)
        return None


def orient(equations: Iterable[Equation]) -> list[RewriteRule]:
    """Left-to-right rules from definitional-looking equations.

    Equations whose left side is a variable or an arithmetic operation, whose
    right side has extra variables, or whose left side reappears inside the
    right side are skipped.
    """
    rules = []
    for eq in equations:
        lhs, rhs = eq.lhs, eq.rhs
        if not isinstance(lhs, App) or is_arith(lhs.symbol) or lhs.symbol.name in ARITH:
            continue
        if not free_vars(rhs) <= free_vars(lhs):
            continue
        rule = RewriteRule(lhs, rhs)
        if any(match(lhs, s, {}) for s in subterms(rhs)):
            continue
        rules.append(rule)
    return rules


class _Rewriter:
    def __init__(self, rules: list[RewriteRule], max_steps: int) -> None:
        self.by_head: dict[FuncSymbol, list[RewriteRule]] = {}
        for r in rules:
            self.by_head.setdefault(r.lhs.symbol, []).append(r)
        self.steps = 0
        self.max_steps = max_steps
        self.cache: dict[Term, Term] = {}

    def normal_form(self, t: Term) -> Term:
        hit = self.cache.get(t)
        if hit is not None:
            return hit
        out = t
        if isinstance(t, App) and t.args:
            out = App(t.symbol, tuple(self.normal_form(a) for a in t.args))
        if isinstance(out, App):
            for rule in self.by_head.get(out.symbol, ()):
                new = rule.apply(out)
                if new is not None:
                    self.steps += 1
                    if self.steps > self.max_steps:
                        raise RewriteBoundExceeded(f"more than {self.max_steps} rewrite steps")
                    out = self.normal_form(new)
                    break
        self.cache[t] = out
        return out


def decide_equal_symbolic(
    theory: Theory,
    eq: Equation,
    max_steps: int = 10_000,
    extra_rules: Iterable[RewriteRule] = (),
) -> Decision:
    """Try to prove ``eq`` from the equations of ``theory``.

    Definitional equations are used as left-to-right rewrite rules, then both
    sides are compared as polynomials (numeric sorts) or syntactically.  A
    ``PROVED`` answer is always sound; failure is reported as ``UNKNOWN``.
    """
    schema_eqs = [e for e in theory.equations if not _is_typeside_axiom(e)]
    rw = _Rewriter(orient(schema_eqs) + list(extra_rules), max_steps)
    try:
        lhs = reduce(rw.normal_form(eq.lhs))
        rhs = reduce(rw.normal_form(eq.rhs))
    except RewriteBoundExceeded as exc:
        return Decision(Status.UNKNOWN, str(exc))
    if lhs == rhs:
        return Decision(Status.PROVED)
    if eq.sort in NUMERIC:
        goal = _normalize(lhs) - _normalize(rhs)
        if not goal.terms:
            return Decision(Status.PROVED)
        try:
            known = _instantiated_differences(schema_eqs, eq, rw)
        except RewriteBoundExceeded as exc:
            return Decision(Status.UNKNOWN, str(exc))
        if _in_linear_span(goal, known):
            return Decision(Status.PROVED, "linear combination of schema equations")
    return Decision(Status.UNKNOWN, f"normal forms differ: {show(lhs)} vs {show(rhs)}")


def _entity_subterms(t: Term, out: dict[Term, str]) -> None:
    if isinstance(t, Var) and t.sort not in NUMERIC and t.sort not in (STRING, BOOL):
        out[t] = t.sort
    elif isinstance(t, App) and t.args:
        if t.symbol.result_sort not in NUMERIC and t.symbol.result_sort not in (STRING, BOOL):
            out[t] = t.symbol.result_sort
        for a in t.args:
            _entity_subterms(a, out)


def _instantiated_differences(schema_eqs: list[Equation], goal: Equation, rw: "_Rewriter") -> list[Polynomial]:
    """``lhs - rhs`` of each one-variable numeric schema equation, at each entity subterm of the goal."""
    at: dict[Term, str] = {}
    _entity_subterms(goal.lhs, at)
    _entity_subterms(goal.rhs, at)
    out = []
    for e in schema_eqs:
        if e.sort not in NUMERIC or len(e.ctx) != 1:
            continue
        (v, sort), = e.ctx
        for t, s in at.items():
            if s == sort:
                env = {v: t}
                l = reduce(rw.normal_form(substitute(e.lhs, env)))
                r = reduce(rw.normal_form(substitute(e.rhs, env)))
                d = _normalize(l) - _normalize(r)
                if d.terms:
                    out.append(d)
    return out


def _in_linear_span(goal: Polynomial, gens: list[Polynomial]) -> bool:
    """Whether ``goal`` is a rational linear combination of ``gens`` (Gaussian elimination)."""
    pivots: dict[Monomial, dict[Monomial, Fraction]] = {}

    def reduce_row(row: dict[Monomial, Fraction]) -> dict[Monomial, Fraction]:
        row = dict(row)
        for m, prow in pivots.items():
            c = row.get(m)
            if c:
                for k, v in prow.items():
                    row[k] = row.get(k, Fraction(0)) - c * v
                row = {k: v for k, v in row.items() if v}
        return row

    for g in gens:
        row = reduce_row(g.coeffs)
        if not row:
            continue
        m = min(row, key=_mono_key)
        lead = row[m]
        row = {k: v / lead for k, v in row.items()}
        for pm, prow in pivots.items():
            c = prow.get(m)
            if c:
                for k, v in row.items():
                    prow[k] = prow.get(k, Fraction(0)) - c * v
                pivots[pm] = {k: v for k, v in prow.items() if v}
        pivots[m] = row
    return not reduce_row(goal.coeffs)


def _is_typeside_axiom(eq: Equation) -> bool:
    return all(s in NUMERIC or s in (STRING, BOOL) for _, s in eq.ctx) and eq.ctx != ()
