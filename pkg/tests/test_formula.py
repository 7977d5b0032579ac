from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sat2csp.formula import (ClauseWidthError, CnfFormula, DimacsHeaderError, LiteralRangeError,
                             RepeatedVariableError, clause_vars, eval_fraction, formula_from_json,
                             formula_to_json, max_sat_bruteforce, parse_dimacs, to_dimacs)
from sat2csp._bits import CapExceeded

from oracles import max_sat_reverse, value_of


@st.composite
def formulas(draw, max_vars=8, max_clauses=10):
    n = draw(st.integers(1, max_vars))
    m = draw(st.integers(1, max_clauses))
    clauses = []
    for _ in range(m):
        width = draw(st.integers(1, min(3, n)))
        vars_ = draw(st.lists(st.integers(0, n - 1), min_size=width, max_size=width, unique=True))
        clauses.append([(v, draw(st.booleans())) for v in vars_])
    return CnfFormula.from_clauses(clauses)


def test_parse_two_vars_one_clause():
    f = parse_dimacs("p cnf 2 1\n1 -2 0")
    assert f.num_vars == 2 and f.clauses == (((0, True), (1, False)),)


def test_parse_unit_clauses():
    f = parse_dimacs("p cnf 1 2\n1 0\n-1 0")
    assert f.num_vars == 1 and f.num_clauses == 2


def test_parse_literal_out_of_range_reports_line():
    with pytest.raises(LiteralRangeError) as exc:
        parse_dimacs("p cnf 2 1\n1 2 3 0")
    assert exc.value.line == 2


def test_parse_errors_are_distinct():
    with pytest.raises(DimacsHeaderError):
        parse_dimacs("p dnf 2 1\n1 0")
    with pytest.raises(ClauseWidthError):
        parse_dimacs("p cnf 4 1\n1 2 3 4 0")
    with pytest.raises(RepeatedVariableError):
        parse_dimacs("p cnf 2 1\n1 -1 2 0")


def test_parse_compacts_unused_variables():
    f = parse_dimacs("c comment\np cnf 5 2\n1 5 0\n-5 0\n")
    assert f.num_vars == 2
    assert f.clauses == (((0, True), (1, True)), ((1, False),))


def test_clause_vars_examples():
    f = CnfFormula.from_clauses([[1, 2], [2, 3]])
    assert clause_vars(f, []) == frozenset()
    assert clause_vars(f, [0]) == {0, 1}
    assert clause_vars(f, range(f.num_clauses)) == set(range(f.num_vars))
    with pytest.raises(IndexError):
        clause_vars(f, [2])


def test_eval_fraction_contradiction_is_half():
    f = CnfFormula.from_clauses([[1], [-1]])
    assert eval_fraction(f, (0,)) == eval_fraction(f, (1,)) == Fraction(1, 2)


def test_max_sat_examples():
    assert max_sat_bruteforce(CnfFormula.from_clauses([[1]])) == (1, (1,))
    assert max_sat_bruteforce(CnfFormula.from_clauses([[1], [-1]])) == (Fraction(1, 2), (0,))


def test_max_sat_cap():
    f = CnfFormula.from_clauses([[i + 1] for i in range(5)])
    with pytest.raises(CapExceeded):
        max_sat_bruteforce(f, cap=4)


def test_max_sat_frozen_twelve_vars():
    # value frozen from the reverse-order oracle in tests/oracles.py
    f = parse_dimacs("""p cnf 12 70
-6 3 -7 0
-6 10 1 0
7 2 -4 0
-2 -4 10 0
-4 1 9 0
-2 -10 5 0
10 -11 4 0
1 -10 -4 0
8 10 12 0
4 2 10 0
-8 5 10 0
6 -3 8 0
9 10 6 0
-8 2 -11 0
-1 -5 10 0
7 11 6 0
2 8 -1 0
7 12 -8 0
3 7 9 0
7 4 -3 0
1 8 10 0
-9 -6 -10 0
9 -10 -1 0
11 9 7 0
7 1 4 0
6 -10 -1 0
6 10 1 0
-11 5 6 0
8 12 11 0
-6 5 8 0
-9 -6 -3 0
-5 11 2 0
-3 -6 4 0
-4 -10 -12 0
4 -12 -9 0
5 -8 12 0
12 6 11 0
-6 -4 -8 0
-8 11 -6 0
-7 4 -8 0
2 -7 -8 0
3 -12 -1 0
-3 -10 11 0
9 -12 -3 0
2 -9 -3 0
4 -1 -5 0
6 5 -9 0
-6 -8 -10 0
9 -3 -12 0
-3 10 1 0
10 -2 -9 0
8 2 9 0
-2 -9 -8 0
-8 -6 10 0
-5 8 -9 0
-12 -9 5 0
8 3 7 0
4 7 2 0
3 -11 -6 0
-4 2 -7 0
-4 3 7 0
-6 12 -2 0
8 -1 -7 0
-2 12 4 0
-1 -3 -5 0
11 -5 -7 0
12 -6 2 0
-2 -5 1 0
-4 2 5 0
-9 7 -5 0
""")
    value, witness = max_sat_bruteforce(f)
    assert value == Fraction(69, 70)
    assert witness == (0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 1)
    assert (value, witness) == max_sat_reverse(f.clauses, f.num_vars)


@settings(max_examples=60, deadline=None)
@given(formulas())
def test_max_sat_matches_reverse_enumeration(f):
    assert max_sat_bruteforce(f) == max_sat_reverse(f.clauses, f.num_vars)


@settings(max_examples=60, deadline=None)
@given(formulas(), st.randoms(use_true_random=False))
def test_eval_fraction_matches_recount(f, rnd):
    bits = tuple(rnd.randint(0, 1) for _ in range(f.num_vars))
    v = eval_fraction(f, bits)
    assert v == value_of(f.clauses, bits)
    assert (v == 1) == all(f.clause_satisfied(i, bits) for i in range(f.num_clauses))
    assert max_sat_bruteforce(f)[0] >= v


@settings(max_examples=60, deadline=None)
@given(formulas())
def test_dimacs_and_json_roundtrip(f):
    again = parse_dimacs(to_dimacs(f))
    assert again == f and parse_dimacs(to_dimacs(again)) == f
    assert formula_from_json(formula_to_json(f)) == f


@settings(max_examples=60, deadline=None)
@given(formulas())
def test_occurrence_bound_is_true_maximum(f):
    counts = [sum(any(v == x for v, _ in c) for c in f.clauses) for x in range(f.num_vars)]
    assert f.occurrence_bound == max(counts)
    assert min(counts) >= 1


def test_partial_assignment_satisfaction():
    f = CnfFormula.from_clauses([[1, -2]])
    assert f.clause_satisfied(0, {1: 0})
    assert not f.clause_satisfied(0, {0: 0})
