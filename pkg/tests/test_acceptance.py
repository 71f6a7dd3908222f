"""Acceptance criteria 1 to 9, one test each.

Each test is tagged with its criterion number; the terminal summary prints
one PASS/FAIL line per criterion.  Run alone with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import glob
import random
import time
from fractions import Fraction

import pytest

from conftest import FIXTURES
from oracles import (
    Spec,
    check_universal_property,
    compare_with_model,
    least_congruence,
    random_graph_schema,
    random_span,
    random_spec,
)
from ologmerge.eqlogic import App, Lit, Null, Status, Var, ground_congruence
from ologmerge.instance import Bounds, Inconsistent, Instance, NonTermination, gen_term, saturate
from ologmerge.integrate import SchemaDiagram, colimit_schemas, integrate
from ologmerge.schema import MODEL, SYMBOLIC, check_vcs, generate_functoriality_vcs, split_definitional
from ologmerge.sheetio import (
    canonical_workbook,
    export_olog,
    import_olog,
    parse_workbook,
    print_workbook,
    roundtrip,
    witness_values,
)
from ologmerge.syntax import load, parse_document
from ologmerge.typeside import ring_normalize
from ologmerge.vcemit import Verdict, consistency_check, emit_tptp, inconsistency_report

MASP = FIXTURES / "masp" / "problem.olog"


@pytest.fixture(scope="module")
def masp_doc():
    return load(MASP)


# ---------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_functoriality_of_case_study_mappings(masp_doc, detail):
    t0 = time.perf_counter()
    models = {"A": saturate(masp_doc.instances["DA"]), "B": saturate(masp_doc.instances["DB"])}
    results = {}
    for name in ("MA", "MB"):
        m = masp_doc.mappings[name]
        vcs = generate_functoriality_vcs(m)
        results[name] = (
            check_vcs(vcs, SYMBOLIC, target=m.target),
            check_vcs(vcs, MODEL, model=models[m.target.name]),
        )
    elapsed = time.perf_counter() - t0

    n_vcs = sum(len(s) for s, _ in results.values())
    on_model_failures = sum(len(v.failures) for _, om in results.values() for v in om)
    rows_checked = min(v.rows_checked for _, om in results.values() for v in om)
    unknown_symbolic = [v.id for s, _ in results.values() for v in s if v.status is Status.UNKNOWN]
    casingburst = [v for v in results["MA"][0] if "casingburst" in str(v.source)]
    detail(
        f"{n_vcs} VCs, OnModel failures {on_model_failures}, symbolic unknown {unknown_symbolic or 'none'}, "
        f"casingburst {casingburst[0].status.value if casingburst else 'missing'}, {elapsed:.2f}s"
    )
    assert n_vcs == 6
    assert all(v.status is Status.PROVED_ON_MODEL for _, om in results.values() for v in om)
    assert on_model_failures == 0 and rows_checked > 0
    assert len(casingburst) == 1 and casingburst[0].status is Status.PROVED
    assert elapsed < 5.0


@pytest.mark.criterion(2)
def test_row_merge_arithmetic(masp_doc, detail):
    spec = masp_doc.problems["MASP"]
    problem = masp_doc.problem("MASP")
    t0 = time.perf_counter()
    r = integrate(problem, spec.bounds)
    elapsed = time.perf_counter() - t0

    a_rows = len(r.source_models["A"].rows["MASP Calc. Step 1"])
    b_rows = len(r.source_models["B"].rows["Burst Calculation Key"])
    merged = len(r.model.rows["MASP Calc. Step 1"])
    esk_gain = r.diffs["B"].rows_gained.get("Exposed Shoe Key", 0)
    detail(
        f"A step-1 {a_rows}, B step-1 {b_rows}, merged {merged}, A diff empty {r.diffs['A'].is_empty}, "
        f"Exposed Shoe Key +{esk_gain}, {elapsed:.2f}s"
    )
    assert (a_rows, b_rows) == (30, 6)
    assert merged == 30
    assert r.diffs["A"].is_empty
    assert esk_gain == 4
    assert elapsed < 10.0


@pytest.mark.criterion(3)
def test_consistency_detection(detail):
    bad = load(FIXTURES / "cli" / "alice_bob.olog")
    with pytest.raises(Inconsistent) as info:
        integrate(bad.problem())
    report = inconsistency_report(bad.problem().colimit().schema, info.value)
    (clash,) = report.clashes
    values = {clash.left.value, clash.right.value}
    replays = clash.replays()
    # without the merge rule the two rows stay apart
    direct = consistency_check(bad.instances["Staff"])

    good = load(FIXTURES / "cli" / "alice_bob_ok.olog")
    ok_result = integrate(good.problem())
    ok_report = consistency_check(ok_result.model)
    detail(
        f"clash {clash}, trace of {len(clash.trace)} steps replays {replays}; "
        f"equal ages give consistent={ok_report.consistent} ({ok_report.verdict.value})"
    )
    assert report.verdict is Verdict.INCONSISTENT
    assert values == {Fraction(20), Fraction(30)}
    assert replays
    assert ground_congruence(clash.trace, (Lit(Fraction(20), "Float"), Lit(Fraction(30), "Float")), None) is Status.PROVED
    assert direct.consistent  # the clash needs the merge rule
    assert ok_report.consistent and ok_report.verdict in (Verdict.CONSISTENT, Verdict.FREE)


PQ = Spec(
    entities=["A", "B"],
    fks=[("p", "A", "B"), ("q", "B", "A")],
    attrs=[],
    gens=[("a", "A")],
)


@pytest.mark.criterion(4)
def test_chase_nontermination_guard(detail):
    inst = parse_document(PQ.to_text()).instances["I"]
    with pytest.raises(NonTermination):
        saturate(inst, Bounds(max_rounds=100, max_fresh=100))

    closed = Spec(PQ.entities, PQ.fks, [], path_eqs=[("A", ("p", "q"), ()), ("B", ("q", "p"), ())], gens=PQ.gens)
    model = saturate(parse_document(closed.to_text()).instances["I"])
    oracle = least_congruence(closed, depth=8)
    classes = {oracle.cls[("e", g, p)] for g, p in oracle.paths}
    problems = compare_with_model(closed, model, oracle, depth=6)
    detail(f"model rows {model.row_count()}, oracle classes {len(classes)}, disagreements {len(problems)}")
    assert model.row_count() == 2 and len(classes) == 2
    assert not problems


NON_FREE = """
schema O = { entities E attributes x h : E -> Float }
schema A = { entities E attributes x f : E -> Float equations forall e:E, e.f = e.x * e.x }
schema B = { entities E attributes x g : E -> Float equations forall e:E, e.g = e.x * e.x * e.x }
mapping FA : O -> A = { entity E -> E  x -> lambda e. e.x  h -> lambda e. e.f }
mapping FB : O -> B = { entity E -> E  x -> lambda e. e.x  h -> lambda e. e.g }
"""


def _non_free_colimit():
    doc = parse_document(NON_FREE)
    return colimit_schemas(SchemaDiagram.span(doc.mappings["FA"], doc.mappings["FB"]), {"A_E__B_E": "E"}, "AB")


@pytest.mark.criterion(5)
def test_non_free_colimit(detail):
    col = _non_free_colimit()
    s = col.schema
    e = "E"
    x, f, g = (s.symbol(n, e) for n in ("A_x", "f", "g"))
    defs, others = split_definitional(s)
    v = Var("e", e)
    sq = s.equations_of(e)
    square = next(q.rhs for q in sq if q.lhs == App(f, (v,)))
    cube = next(q.rhs for q in sq if q.lhs == App(g, (v,)))
    forms_differ = ring_normalize(square) != ring_normalize(cube)

    gens = [("r0", e), ("r1", e), ("r2", e)]
    eqs = [
        (App(x, (gen_term("r0", e),)), Lit(Fraction(0), "Float")),
        (App(x, (gen_term("r1", e),)), Lit(Fraction(1), "Float")),
    ]
    inst = Instance.build("conforming", s, gens, eqs)
    model = saturate(inst)
    wb = export_olog(s, model)
    witnesses = witness_values(s, model)
    all_true = bool(witnesses) and all(all(vals) for vals in witnesses.values())
    per_row = all(
        model.values_equal(model.attr(f, r), model.attr(g, r)) for r in model.rows[e]
    )
    non_conforming = Instance.build("two", s, [("r", e)], [(App(x, (gen_term("r", e),)), Lit(Fraction(2), "Float"))])
    with pytest.raises(Inconsistent):
        saturate(non_conforming)
    detail(
        f"non-definitional equations {len(others)}, witness columns {len(witnesses)} all true {all_true}, "
        f"x^2 and x^3 normal forms differ {forms_differ}"
    )
    assert others and all_true and per_row and forms_differ
    assert "Bool" in print_workbook(wb)


@pytest.mark.criterion(6)
def test_initiality_oracle_equivalence(detail):
    rng = random.Random(20261019)
    checked = inconsistent = 0
    mismatches = []
    while checked < 100:
        spec = random_spec(rng)
        inst = parse_document(spec.to_text()).instances["I"]
        oracle = least_congruence(spec, depth=8)
        try:
            model = saturate(inst, Bounds(max_rounds=500, max_fresh=500))
        except Inconsistent as exc:
            checked += 1
            inconsistent += 1
            got = frozenset(int(v.value) for v in exc.clash)
            if oracle.clash != got:
                mismatches.append(f"clash {set(got)} vs oracle {oracle.clash}")
            continue
        if model.row_count() > 8:
            continue
        checked += 1
        if oracle.clash is not None:
            mismatches.append(f"oracle clash {oracle.clash} but chase succeeded")
        mismatches += compare_with_model(spec, model, oracle, depth=6)
    detail(f"{checked} instances ({inconsistent} inconsistent), {len(mismatches)} mismatches")
    assert not mismatches


WORKBOOKS = sorted(glob.glob(str(FIXTURES / "workbooks" / "*.wb")))


@pytest.mark.criterion(7)
def test_workbook_roundtrip(detail):
    failures = []
    for path in WORKBOOKS:
        w = parse_workbook(open(path).read())
        if print_workbook(roundtrip(w)) != print_workbook(canonical_workbook(w)):
            failures.append(path)
    person = parse_workbook((FIXTURES / "workbooks" / "person_ages.wb").read_text())
    schema, inst = import_olog(person)
    model = saturate(inst)
    ages = {r: model.value("Person", "Age", r) for r in model.rows["Person"]}
    n_nulls = sum(len(v) for v in model.nulls.values())
    detail(f"{len(WORKBOOKS)} workbooks, {len(failures)} failures, Person type equations {len(model.type_equations)}")
    assert len(WORKBOOKS) >= 10 and not failures
    assert ages["p1"] == Lit(Fraction(20), "Integer")
    assert isinstance(ages["p2"], Null) and isinstance(ages["p3"], Null)
    assert n_nulls == 2 and len(model.type_equations) == 1


@pytest.mark.criterion(8)
def test_colimit_universal_property(detail):
    rng = random.Random(8)
    spans = cocones = 0
    problems = []
    while spans < 50:
        legs = random_span(rng)
        if legs is None:
            continue
        F, G = legs
        col = colimit_schemas(SchemaDiagram.span(F, G))
        spans += 1
        for _ in range(3):
            n, bad = check_universal_property(F, G, col, random_graph_schema(rng, "T", 3))
            cocones += n
            problems += bad
    detail(f"{spans} spans, {cocones} cocones, {len(problems)} failures")
    assert cocones > 0 and not problems


def _tptp_corpus():
    out = {}
    doc = load(MASP)
    for m in doc.mappings.values():
        out.update(emit_tptp(generate_functoriality_vcs(m), m.target))
    for name in ("wrong_constant", "right_constant"):
        d = load(FIXTURES / "cli" / f"{name}.olog")
        for m in d.mappings.values():
            out.update({f"{name}/{k}": v for k, v in emit_tptp(generate_functoriality_vcs(m), m.target).items()})
    nf = parse_document(NON_FREE)
    for m in nf.mappings.values():
        out.update({f"nonfree/{k}": v for k, v in emit_tptp(generate_functoriality_vcs(m), m.target).items()})
    col = _non_free_colimit()
    for node, inj in col.injections.items():
        out.update({f"colimit/{k}": v for k, v in emit_tptp(generate_functoriality_vcs(inj), col.schema).items()})
    strings = parse_document(
        """
        typeside strings
        schema S = { entities W attributes name label : W -> String
                     equations forall w:W, w.label = concat(w.name, 'x"y') }
        schema T = { entities V attributes n l : V -> String
                     equations forall v:V, v.l = concat(v.n, 'x"y') }
        mapping M : S -> T = { entity W -> V  name -> lambda v. v.n  label -> lambda v. v.l }
        """
    )
    m = strings.mappings["M"]
    out.update({f"strings/{k}": v for k, v in emit_tptp(generate_functoriality_vcs(m), m.target).items()})
    return out


@pytest.mark.criterion(9)
def test_tptp_validity(tptp_parser, detail):
    corpus = _tptp_corpus()
    failures = []
    for key, text in corpus.items():
        try:
            tptp_parser.parse(text)
        except Exception as exc:  # any parser error is a validity failure
            failures.append(f"{key}: {type(exc).__name__}")
    detail(f"{len(corpus)} problem files, {len(failures)} rejected")
    assert len(corpus) >= 11 and not failures


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
