import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
TPTP_GRAMMAR_PACKAGE = "tptp_lark_parser"

sys.path.insert(0, str(Path(__file__).resolve().parent))

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _criteria[marker.args[0]] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {status}" + (f" ({detail})" if detail else ""))


@pytest.fixture
def detail(record_property):
    """Attach a one-line summary to the criterion's pass/fail line."""

    def note(text: str) -> None:
        record_property("detail", text)

    return note


@pytest.fixture(scope="session")
def tptp_parser():
    from importlib.resources import files

    from lark import Lark

    grammar = (files(TPTP_GRAMMAR_PACKAGE) / "resources" / "TPTP.lark").read_text()
    return Lark(grammar, start="tptp_file", parser="lalr")
