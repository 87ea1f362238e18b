import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from mtkb.terms import Compound, Integer, String, Symbol, Variable  # noqa: E402

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SYMBOL_NAMES = st.from_regex(r"[A-Za-z][A-Za-z0-9\-_]{0,8}", fullmatch=True).filter(
    lambda s: not s.lstrip("-").isdigit())

symbols = SYMBOL_NAMES.map(Symbol)
integers = st.integers(-(2 ** 63), 2 ** 63 - 1).map(Integer)
strings = st.text(st.characters(blacklist_categories=("Cs",)), max_size=12).map(String)
variables = st.from_regex(r"[a-z][a-z0-9]{0,4}", fullmatch=True).map(lambda n: Variable("?" + n))

ground_atoms = st.one_of(symbols, integers, strings)
atoms = st.one_of(ground_atoms, variables)


def compounds_of(leaves, max_leaves=12):
    return st.recursive(
        leaves,
        lambda children: st.lists(children, min_size=1, max_size=4).map(Compound),
        max_leaves=max_leaves,
    ).filter(lambda t: isinstance(t, Compound))


terms = st.recursive(atoms, lambda c: st.lists(c, min_size=1, max_size=4).map(Compound),
                     max_leaves=16)
ground_terms = st.recursive(ground_atoms,
                            lambda c: st.lists(c, min_size=1, max_size=4).map(Compound),
                            max_leaves=16)
ground_facts = st.tuples(symbols, st.lists(ground_terms, min_size=1, max_size=3)).map(
    lambda pa: Compound((pa[0], *pa[1])))
patterns = st.tuples(symbols, st.lists(terms, min_size=1, max_size=3)).map(
    lambda pa: Compound((pa[0], *pa[1])))


@pytest.fixture
def kb():
    from mtkb import KB
    k = KB()
    yield k
    k.close()


@pytest.fixture
def disk_kb(tmp_path):
    from mtkb import KB
    k = KB(tmp_path / "store", sync=False)
    yield k
    k.close()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
