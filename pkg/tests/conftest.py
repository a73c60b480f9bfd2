import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

FIXTURES = HERE / "fixtures"


@pytest.fixture
def load():
    """Parse a fixture file; returns (document, first equation)."""
    from uode.solver import Uode
    from uode.textio import parse_ode

    def _load(name):
        doc = parse_ode((FIXTURES / name).read_text())
        e = doc.equations[0]
        return doc, Uode(e.terms, e.inhom)
    return _load


@pytest.fixture
def load_solution():
    from uode.solution import ExplicitSolution
    from uode.textio import parse

    def _load(doc, name):
        s = parse((FIXTURES / name).read_text(), doc)
        return ExplicitSolution(dict(s.assignments), list(s.params), s.residual)
    return _load


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
