import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from oracles import random_spec
from ologmerge.eqlogic import FuncSymbol
from ologmerge.instance import Inconsistent
from ologmerge.integrate import integrate
from ologmerge.schema import generate_functoriality_vcs
from ologmerge.sheetio import import_olog, parse_workbook
from ologmerge.syntax import load, parse_document
from ologmerge.vcemit import (
    Mangler,
    Verdict,
    consistency_check,
    emit_tptp,
    inconsistency_report,
    markdown_report,
    write_tptp,
)


@pytest.fixture(scope="module")
def masp():
    return load(FIXTURES / "masp" / "problem.olog")


def test_three_overlap_vcs_give_three_files(masp, tmp_path):
    ma = masp.mappings["MA"]
    paths = write_tptp(generate_functoriality_vcs(ma), ma.target, tmp_path)
    assert len(paths) == 3 and all(p.suffix == ".p" for p in paths)
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(p.name for p in paths)


def test_empty_vc_list_gives_no_files(masp, tmp_path):
    assert write_tptp([], masp.schemas["A"], tmp_path) == []
    assert list(tmp_path.iterdir()) == []


def test_emitted_problems_parse(masp, tptp_parser):
    for name in ("MA", "MB"):
        m = masp.mappings[name]
        for text in emit_tptp(generate_functoriality_vcs(m), m.target).values():
            tptp_parser.parse(text)
            assert "fof(" in text and ", conjecture," in text


def test_emission_is_deterministic(masp):
    m = masp.mappings["MB"]
    vcs = generate_functoriality_vcs(m)
    assert emit_tptp(vcs, m.target) == emit_tptp(list(vcs), m.target)


def test_mangling_is_injective_and_stable():
    syms = [FuncSymbol("a b", ("E",), "Float"), FuncSymbol("a_b", ("E",), "Float"), FuncSymbol("a b", ("F",), "Float")]
    m1, m2 = Mangler(syms, ["E", "F"]), Mangler(list(reversed(syms)), ["F", "E"])
    names = [m1.fun(f) for f in syms]
    assert len(set(names)) == 3
    assert names == [m2.fun(f) for f in syms]
    assert m1.sort("E") != m1.sort("F")


def test_alice_bob_is_inconsistent():
    doc = load(FIXTURES / "cli" / "alice_bob.olog")
    with pytest.raises(Inconsistent) as info:
        integrate(doc.problem())
    report = inconsistency_report(doc.problem().colimit().schema, info.value)
    assert report.verdict is Verdict.INCONSISTENT and not report.consistent
    (clash,) = report.clashes
    assert str(clash) == "20 = 30" and clash.replays()
    assert "20 = 30" in report.to_markdown()


def test_case_study_model_is_consistent(masp):
    r = integrate(masp.problem("MASP"), masp.problems["MASP"].bounds)
    report = consistency_check(r.model)
    assert report.verdict is Verdict.CONSISTENT and report.consistent
    text = markdown_report("MASP", r.vcs, report, r.diffs)
    assert "Consistent" in text


def test_definitional_sheet_is_free():
    _, inst = import_olog(parse_workbook((FIXTURES / "workbooks" / "burst_lookup.wb").read_text()))
    assert consistency_check(inst).verdict is Verdict.FREE


def _report(seed: int):
    spec = random_spec(random.Random(seed))
    return consistency_check(parse_document(spec.to_text()).instances["I"])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_verdicts_are_stable_sound_and_ordered(seed):
    first, second = _report(seed), _report(seed)
    assert first.verdict is second.verdict
    assert [str(c) for c in first.clashes] == [str(c) for c in second.clashes]
    assert [c.trace for c in first.clashes] == [c.trace for c in second.clashes]
    for c in first.clashes:
        assert c.replays()
    if first.verdict is Verdict.FREE:
        assert first.consistent
    assert (first.verdict is Verdict.INCONSISTENT) == bool(first.clashes)
