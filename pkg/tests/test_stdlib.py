import pytest

from setint import stdlib
from setint.engine import is_sat, prove
from setint.parser import parse_formula


@pytest.mark.parametrize("name", stdlib.NAMES)
def test_shipped_files_load(name):
    prog = stdlib.load(name)
    assert prog.definitions or prog.checks


def test_unknown_name():
    with pytest.raises(FileNotFoundError):
        stdlib.data_text("missing")


def test_prelude_operators():
    names = {d.name for d in stdlib.prelude().definitions}
    assert {"smin", "smax", "snth", "mxlb_mnub", "max_int"} <= names


def test_elevator_operations_present():
    names = {d.name for d in stdlib.load("elevator").definitions}
    for op in ("initLift", "addRequest", "nextRequest", "closeDoor", "startLift", "passFloor",
               "stopLift", "openDoor", "liftInv1", "n_liftInv7"):
        assert op in names


def test_lemma_count():
    assert len(stdlib.load("elevator_lemmas").checks) == 56


@pytest.mark.parametrize("query, sat", [
    ("smin({4,2,7},M) & M = 2", True),
    ("smin({4,2,7},M) & M = 4", False),
    ("smax({4,2,7},7)", True),
    ("snth({9,3,5},2,E) & E neq 5", False),
    ("mxlb_mnub({1,5,9},4,L,Mx,U,Mn) & Mx = 1 & Mn = 5", True),
    ("mxlb_mnub({1,5,9},5,L,Mx,U,Mn)", False),
    ("max_int({1,2,3,7},1,3)", True),
    ("max_int({1,2,3,7},1,2)", False),
])
def test_prelude_meaning(query, sat):
    assert is_sat(parse_formula(query)) == sat


def test_min_le_max():
    assert prove(parse_formula("smin(S,M) & smax(S,N) & N < M")).theorem
