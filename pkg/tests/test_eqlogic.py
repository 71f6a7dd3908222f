from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from ologmerge.eqlogic import (
    App,
    Equation,
    FuncSymbol,
    Lit,
    MissingBinding,
    Sort,
    SortMismatch,
    Status,
    Theory,
    TheoryMorphism,
    UnboundVariable,
    UnknownSymbol,
    Var,
    ENTITY,
    ground_congruence,
    num,
    show,
    substitute,
    translate,
    typecheck_term,
)
from ologmerge.syntax import load
from ologmerge.typeside import EXCEL, FLOAT, STRING, op

TH = EXCEL.theory


def test_typecheck_float_expression():
    t = App(op("+"), (Var("x", FLOAT), num("0.052")))
    assert typecheck_term(TH, (("x", FLOAT),), t) == FLOAT


def test_typecheck_unbound_variable():
    with pytest.raises(UnboundVariable):
        typecheck_term(TH, (), Var("v", FLOAT))


def test_typecheck_sort_mismatch():
    t = App(op("MAX"), (num("3.5"), Lit("abc", STRING)))
    with pytest.raises((SortMismatch, UnknownSymbol)):
        typecheck_term(TH, (), t)


def test_theory_rejects_symbol_with_two_result_sorts():
    s = Sort("S", ENTITY)
    with pytest.raises(SortMismatch):
        Theory.build("T", [s], [FuncSymbol("f", ("S",), "S"), FuncSymbol("f", ("S",), FLOAT)], parent=TH)


def test_substitute_examples():
    x, y = Var("x", FLOAT), Var("y", FLOAT)
    got = substitute(App(op("+"), (x, y)), {"x": num(1), "y": num("2.2")})
    assert got == App(op("+"), (num(1), num("2.2")))
    S = "S"
    g = FuncSymbol("g", (S,), S)
    f = FuncSymbol("f", (S,), S)
    v, w = Var("v", S), Var("w", S)
    assert substitute(App(f, (v,)), {"v": App(g, (App(g, (w,)),))}) == App(f, (App(g, (App(g, (w,)),)),))
    assert substitute(num(7), {}) == num(7)
    with pytest.raises(MissingBinding):
        substitute(v, {})


def test_translate_identity_and_overlap_symbols():
    doc = load(FIXTURES / "masp" / "problem.olog")
    ma = doc.mappings["MA"]
    O = ma.source
    pb = O.symbol("pb", "Step1")
    x = Var("x", "Step1")
    got = ma.apply(App(pb, (x,)), (("x", "Step1"),))
    assert show(got) == 'x."Casing Section"."Burst Rating"'
    c = O.symbol("pointohfivetwo", "Step1")
    assert ma.apply(App(c, (x,)), (("x", "Step1"),)) == Lit(Fraction("0.052"), FLOAT)
    ident = TheoryMorphism(O.theory, O.theory, {e: e for e in O.entities}, {}, frozenset(O.theory.symbols.values()))
    t = App(pb, (x,))
    assert translate(ident, (("x", "Step1"),), t) == t


def test_ground_congruence_examples():
    S = "S"
    a, b, c = (App(FuncSymbol(n, (), S), ()) for n in "abc")
    f = FuncSymbol("f", (S,), S)
    eqs = [(a, b), (App(f, (b,)), c)]
    assert ground_congruence(eqs, (App(f, (a,)), c)) is Status.PROVED
    assert ground_congruence([], (App(op("+"), (num(1), num("2.2"))), num("3.2"))) is Status.PROVED
    assert ground_congruence([], (num(20), num(30))) is Status.UNKNOWN


# ---------------------------------------------------------------------------
# properties

S = "S"
CONSTS = [App(FuncSymbol(n, (), S), ()) for n in ("a", "b", "c")]
UNARY = [FuncSymbol(n, (S,), S) for n in ("f", "g")]
BINARY = FuncSymbol("h", (S, S), S)


def ground_terms(depth: int):
    if depth == 0:
        return st.sampled_from(CONSTS)
    sub = ground_terms(depth - 1)
    return st.one_of(
        st.sampled_from(CONSTS),
        st.builds(lambda f, t: App(f, (t,)), st.sampled_from(UNARY), sub),
        st.builds(lambda l, r: App(BINARY, (l, r)), sub, sub),
    )


def _subterms(t, out):
    out.add(t)
    for a in t.args:
        _subterms(a, out)


def brute_force_congruence(eqs, goal) -> bool:
    """Least congruence over the subterm-closed universe, by naive fixpoint on a partition."""
    universe: set = set()
    for l, r in list(eqs) + [goal]:
        _subterms(l, universe)
        _subterms(r, universe)
    terms = sorted(universe, key=show)
    block = {t: i for i, t in enumerate(terms)}
    changed = True
    while changed:
        changed = False
        pairs = list(eqs)
        for s in terms:
            for t in terms:
                if s.symbol == t.symbol and s.args and all(block[x] == block[y] for x, y in zip(s.args, t.args)):
                    pairs.append((s, t))
        for l, r in pairs:
            if block[l] != block[r]:
                old, new = block[r], block[l]
                for t in terms:
                    if block[t] == old:
                        block[t] = new
                changed = True
    return block[goal[0]] == block[goal[1]]


pairs = st.tuples(ground_terms(2), ground_terms(2))


@settings(max_examples=150, deadline=None)
@given(st.lists(pairs, max_size=4), pairs)
def test_ground_congruence_matches_brute_force(eqs, goal):
    want = brute_force_congruence(eqs, goal)
    got = ground_congruence(eqs, goal, depth_cap=None) is Status.PROVED
    assert got == want


@settings(max_examples=80, deadline=None)
@given(st.lists(pairs, min_size=1, max_size=5), pairs, st.randoms(use_true_random=False))
def test_ground_congruence_is_order_independent(eqs, goal, rnd):
    shuffled = list(eqs)
    rnd.shuffle(shuffled)
    assert ground_congruence(eqs, goal, None) == ground_congruence(shuffled, goal, None)


F_SYM = FuncSymbol("F", (S,), S)
G_SYM = FuncSymbol("G", (S,), S)
K_SYM = FuncSymbol("K", (S, S), S)


def open_terms(depth: int):
    leaves = st.sampled_from([Var("x", S), Var("y", S)] + CONSTS[:1])
    if depth == 0:
        return leaves
    sub = open_terms(depth - 1)
    return st.one_of(
        leaves,
        st.builds(lambda t: App(F_SYM, (t,)), sub),
        st.builds(lambda t: App(G_SYM, (t,)), sub),
        st.builds(lambda l, r: App(K_SYM, (l, r)), sub, sub),
    )


def _morphism():
    src = Theory.build("Src", [Sort(S, ENTITY)], [F_SYM, G_SYM, K_SYM, CONSTS[0].symbol])
    T = "T"
    u = FuncSymbol("u", (T,), T)
    p = FuncSymbol("p", (T, T), T)
    a = FuncSymbol("a", (), T)
    tgt = Theory.build("Tgt", [Sort(T, ENTITY)], [u, p, a])
    z, w = Var("z", T), Var("w", T)
    return TheoryMorphism(
        src,
        tgt,
        {S: T},
        {
            F_SYM: (("z",), App(u, (App(u, (z,)),))),
            G_SYM: (("z",), z),
            K_SYM: (("z", "w"), App(p, (w, App(u, (z,))))),
            CONSTS[0].symbol: ((), App(a, ())),
        },
    )


@settings(max_examples=150, deadline=None)
@given(open_terms(3), open_terms(2), open_terms(2))
def test_translate_commutes_with_substitute(t, ex, ey):
    m = _morphism()
    ctx = (("x", S), ("y", S))
    env = {"x": ex, "y": ey}
    lhs = translate(m, (), substitute(t, env))
    rhs = substitute(translate(m, ctx, t), {k: translate(m, ctx, v) for k, v in env.items()})
    assert lhs == rhs


@given(open_terms(3))
def test_typecheck_is_deterministic(t):
    th = Theory.build("Src", [Sort(S, ENTITY)], [F_SYM, G_SYM, K_SYM, CONSTS[0].symbol])
    ctx = (("x", S), ("y", S))
    assert typecheck_term(th, ctx, t) == typecheck_term(th, ctx, t) == S


def test_equation_str_is_readable():
    x = Var("x", FLOAT)
    eq = Equation((("x", FLOAT),), App(op("+"), (x, num(0))), x, FLOAT)
    assert str(eq) == "forall x:Float, x + 0 = x"
