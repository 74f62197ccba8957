import functools
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
sys.path.insert(0, str(Path(__file__).resolve().parent))

from execreport.cfa import load_cfa  # noqa: E402
from execreport.verifier import verify  # noqa: E402

# name -> (file, entry, phase-one options)
FIXTURE_RUNS = {
    "fig1": ("fig1.mc", "test_min", {"loop_bound": 3}),
    "fig2": ("fig2_scaled.mc", "main", {"opaque_multiplication": True}),
    "trivial": ("trivial_safe.mc", "main", {}),
}


def source(name: str) -> str:
    return (FIXTURES / FIXTURE_RUNS[name][0]).read_text()


@functools.lru_cache(maxsize=None)
def fixture_cfa(name: str):
    file, entry, _ = FIXTURE_RUNS[name]
    return load_cfa((FIXTURES / file).read_text(), entry=entry)


@functools.lru_cache(maxsize=None)
def fixture_verify(name: str):
    return verify(fixture_cfa(name), **FIXTURE_RUNS[name][2])


def edge_by_text(cfa, text: str, nth: int = 0):
    matches = sorted((e for e in cfa.edges.values() if e.text == text), key=lambda e: (e.source, e.id))
    return matches[nth]


def path_by_texts(cfa, texts):
    """Follow the edges with the given statement texts from the entry."""
    loc, path = cfa.entry, []
    for text in texts:
        (edge,) = [e for e in cfa.outgoing(loc) if e.text == text]
        path.append(edge.id)
        loc = edge.target
    return tuple(path)


@pytest.fixture
def fig1():
    return fixture_cfa("fig1")


@pytest.fixture
def fig2():
    return fixture_cfa("fig2")


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
