import filecmp

from conftest import FIXTURES
from ologmerge.cli import (
    EXIT_INCONSISTENT,
    EXIT_INPUT,
    EXIT_NONTERMINATION,
    EXIT_OK,
    EXIT_UNKNOWN_VC,
    main,
)

CLI = FIXTURES / "cli"
MASP = FIXTURES / "masp" / "problem.olog"


def _tree(root):
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file())


def test_integrate_case_study_ok(tmp_path):
    out = tmp_path / "bundle"
    assert main(["integrate", str(MASP), "-o", str(out), "--emit-tptp"]) == EXIT_OK
    files = _tree(out)
    for want in ("colimit.olog", "integrated.wb", "report.md", "exchanged/A.wb", "diffs/B.md"):
        assert want in files
    assert any(f.startswith("tptp/") and f.endswith(".p") for f in files)


def test_integrate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["integrate", str(MASP), "-o", str(a)]) == EXIT_OK
    assert main(["integrate", str(MASP), "-o", str(b)]) == EXIT_OK
    assert _tree(a) == _tree(b)
    _, mismatch, errors = filecmp.cmpfiles(a, b, _tree(a), shallow=False)
    assert mismatch == [] and errors == []


def test_integrate_inconsistent(tmp_path, capsys):
    out = tmp_path / "bad"
    assert main(["integrate", str(CLI / "alice_bob.olog"), "-o", str(out)]) == EXIT_INCONSISTENT
    assert "20 = 30" in capsys.readouterr().err + (out / "report.md").read_text()


def test_integrate_consistent_variant(tmp_path):
    assert main(["integrate", str(CLI / "alice_bob_ok.olog"), "-o", str(tmp_path / "ok")]) == EXIT_OK


def test_integrate_nontermination(tmp_path):
    assert main(["integrate", str(CLI / "pq_cycle.olog"), "-o", str(tmp_path / "pq")]) == EXIT_NONTERMINATION


def test_integrate_unknown_vc_and_waiver(tmp_path):
    cfg = tmp_path / "wrong.olog"
    cfg.write_text(
        f'include "{CLI / "wrong_constant.olog"}"\n'
        "instance D : Tgt = { generators t : T }\n"
        "problem W = { mappings F instances D }\n"
    )
    assert main(["integrate", str(cfg), "-o", str(tmp_path / "w")]) == EXIT_UNKNOWN_VC
    assert main(["integrate", str(cfg), "-o", str(tmp_path / "w2"), "--waive-vcs"]) == EXIT_OK


def test_check_and_vc(tmp_path):
    assert main(["check", str(MASP), "--mapping", "MA", "--emit-tptp", str(tmp_path / "t")]) == EXIT_OK
    assert len(list((tmp_path / "t").glob("*.p"))) == 3
    assert main(["vc", str(MASP), "-o", str(tmp_path / "v")]) == EXIT_OK
    assert len(list((tmp_path / "v").glob("*.p"))) == 6
    assert main(["check", str(CLI / "wrong_constant.olog")]) == EXIT_UNKNOWN_VC
    assert main(["check", str(CLI / "right_constant.olog")]) == EXIT_OK


def test_import_writes_two_files(tmp_path):
    wb = FIXTURES / "workbooks" / "person_ages.wb"
    assert main(["import", str(wb), "-o", str(tmp_path)]) == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == ["person_ages.instance.olog", "person_ages.schema.olog"]
    out = tmp_path / "person.wb"
    assert main(["export", str(tmp_path / "person_ages.instance.olog"), "-o", str(out)]) == EXIT_OK
    assert "Integer" in out.read_text()


def test_bad_input_exit_code(tmp_path, capsys):
    assert main(["import", str(CLI / "broken.wb"), "-o", str(tmp_path)]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "line" in err
    assert main(["check", str(tmp_path / "missing.olog")]) == EXIT_INPUT
