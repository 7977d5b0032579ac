from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from sat2csp._bits import CapExceeded
from sat2csp.csp import csp_opt_bruteforce, labeling_value
from sat2csp.formula import CnfFormula, clause_vars, eval_fraction, max_sat_bruteforce
from sat2csp.reduction import (ReductionArtifact, ReductionParams, build_2csp, check_set_translation,
                               decode_assignment, variable_sets)
from sat2csp.setsys import SetSystem, sample_random
from sat2csp.synth import gen_planted

from oracles import clause_true

PARAMS = ReductionParams(alpha=Fraction(1, 2), gamma=Fraction(1, 4), mu=Fraction(1, 4),
                         zeta=Fraction(1, 16), ell=2, r=1, h=2, k=4)


@st.composite
def planted_setups(draw):
    n = draw(st.integers(4, 9))
    m = draw(st.integers(max(2, -(-n // 3)), n))
    f, psi = gen_planted(n, m, 3, draw(st.integers(0, 10_000)))
    k = draw(st.integers(1, 4))
    T = sample_random(m, k, draw(st.sampled_from([0.3, 0.5])), draw(st.integers(0, 10_000)))
    return f, psi, T


def test_all_empty_subsets():
    f = CnfFormula.from_clauses([[1, 2], [-1]])
    art = build_2csp(f, SetSystem(2, (frozenset(),) * 3))
    assert art.instance.alphabets == (((),),) * 3
    assert labeling_value(art.instance, (0, 0, 0)) == 1


def test_unit_clause_twice():
    f = CnfFormula.from_clauses([[1]])
    art = build_2csp(f, SetSystem(1, (frozenset({0}), frozenset({0}))))
    assert art.instance.alphabets == ((((0, 1),),),) * 2
    assert labeling_value(art.instance, (0, 0)) == 1


def test_alphabet_order_is_lexicographic():
    f = CnfFormula.from_clauses([[1, 2]])
    art = build_2csp(f, SetSystem(1, (frozenset({0}),)))
    assert art.instance.alphabets[0] == (((0, 0), (1, 1)), ((0, 1), (1, 0)), ((0, 1), (1, 1)))


def test_empty_alphabet_is_flagged_not_raised():
    f = CnfFormula.from_clauses([[1], [-1]])
    art = build_2csp(f, SetSystem(2, (frozenset({0, 1}), frozenset({0}))))
    assert art.instance.unsat_trivial and art.instance.alphabets[0] == ()


def test_variable_cap():
    f, _ = gen_planted(24, 8, 1, 0)
    with pytest.raises(CapExceeded):
        build_2csp(f, SetSystem(8, (frozenset(range(8)),)), cap=20)


@settings(max_examples=60, deadline=None)
@given(planted_setups())
def test_restrictions_of_planted_assignment_satisfy_everything(setup):
    f, psi, T = setup
    art = build_2csp(f, T)
    assert labeling_value(art.instance, art.restriction_labeling(psi)) == 1


@settings(max_examples=60, deadline=None)
@given(planted_setups())
def test_alphabet_and_constraint_soundness(setup):
    f, _, T = setup
    art = build_2csp(f, T)
    assert art.var_sets == variable_sets(f, T)
    for i, S in enumerate(T.sets):
        vars_i = sorted(clause_vars(f, S))
        expected = []
        for bits in product((0, 1), repeat=len(vars_i)):
            full = dict(zip(vars_i, bits))
            if all(clause_true(f.clauses[c], full) for c in S):
                expected.append(tuple(zip(vars_i, bits)))
        assert list(art.instance.alphabets[i]) == expected
    k = T.k
    for u in range(k):
        for v in range(u + 1, k):
            for a, la in enumerate(art.instance.alphabets[u]):
                for b, lb in enumerate(art.instance.alphabets[v]):
                    da, db = dict(la), dict(lb)
                    agree = all(da[x] == db[x] for x in da.keys() & db.keys())
                    assert art.instance.allows(u, a, v, b) == agree


@settings(max_examples=40, deadline=None)
@given(planted_setups())
def test_completeness(setup):
    f, _, T = setup
    assert max_sat_bruteforce(f)[0] == 1
    assert csp_opt_bruteforce(build_2csp(f, T).instance)[0] == 1


def test_artifact_json_roundtrip():
    f, psi = gen_planted(9, 6, 3, 2)
    art = build_2csp(f, sample_random(6, 3, 0.5, 2), params=PARAMS)
    again = ReductionArtifact.from_json(art.to_json())
    assert again.instance.alphabets == art.instance.alphabets and again.params == PARAMS
    assert again.restriction_labeling(psi) == art.restriction_labeling(psi)


def test_decode_planted_restrictions():
    f, psi = gen_planted(12, 12, 3, 0)
    art = build_2csp(f, sample_random(12, 4, 0.5, 1), params=PARAMS)
    g, report = decode_assignment(art, art.restriction_labeling(psi), best_effort=True)
    assert report["status"] == "ok" and report["nu"] == 0
    assert report["decoding_bound"]["bound"] == 1 - PARAMS.mu
    covered = set().union(*(art.var_sets.sets[i] for i in report["decoder"]["subcollection"]))
    assert all(g[x] == psi[x] for x in covered)
    assert all(g[x] == 0 for x in range(f.num_vars) if x not in covered)


def test_decode_declines_below_threshold():
    f, psi = gen_planted(12, 12, 3, 0)
    art = build_2csp(f, sample_random(12, 4, 0.5, 1), params=PARAMS)
    g, report = decode_assignment(art, art.restriction_labeling(psi))
    assert g is None and report["status"] == "below-threshold"
    assert report["soundness_threshold"]["holds"] is False
    with pytest.raises(ValueError):
        decode_assignment(build_2csp(f, sample_random(12, 4, 0.5, 1)), (0,) * 4)


def _flip_one(art, psi, vertex):
    """Labeling of restrictions with one bit flipped in ``vertex``'s label, if that is still a label."""
    lab = list(art.restriction_labeling(psi))
    for x in art.variables[vertex]:
        flipped = list(psi)
        flipped[x] ^= 1
        label = tuple((y, flipped[y]) for y in art.variables[vertex])
        if label in art.instance.alphabets[vertex]:
            lab[vertex] = art.instance.alphabets[vertex].index(label)
            return tuple(lab), x
    return None, None


def test_decode_one_flipped_bit():
    checked = 0
    for seed in range(40):
        f, psi = gen_planted(12, 12, 3, seed)
        art = build_2csp(f, sample_random(12, 5, 0.7, seed), params=PARAMS)
        lab, flipped = _flip_one(art, psi, seed % 5)
        if lab is None:
            continue
        g, report = decode_assignment(art, lab, best_effort=True)
        if report["status"] != "ok":
            continue
        checked += 1
        covered = set().union(*(art.var_sets.sets[i] for i in report["decoder"]["subcollection"]))
        assert all(g[x] == psi[x] for x in covered if x != flipped)
        assert eval_fraction(f, g) >= 1 - PARAMS.mu - 3 * report["nu"] * f.occurrence_bound / PARAMS.gamma
        assert report["decoding_bound"]["holds"]
    assert checked >= 20


def test_set_translation_full_sets_is_trivial():
    f, _ = gen_planted(9, 9, 3, 0)
    report = check_set_translation((f, SetSystem(9, (frozenset(range(9)),) * 3)), 2, 2, 0, 2, 1, 0)
    assert report["holds"]
    assert report["uniform"]["premise"] and report["uniform"]["conclusion"]
    assert report["disperser"]["premise"] and report["disperser"]["conclusion"]


def test_set_translation_vacuous_at_mu_one():
    f, _ = gen_planted(9, 9, 3, 1)
    report = check_set_translation((f, SetSystem(9, (frozenset(),) * 2)), 1, 1, 1, 1, 1, 1)
    assert report["uniform"]["conclusion"] and report["holds"]


def test_set_translation_on_random_formulas():
    premises = 0
    for seed in range(50):
        f, _ = gen_planted(35, 30, 3, seed)
        assert f.occurrence_bound <= 3
        T = sample_random(30, 4, 0.6, seed)
        report = check_set_translation((f, T), 2, 2, Fraction(1, 10), 2, Fraction(1, 2), Fraction(1, 10))
        assert report["holds"], report["counterexamples"]
        premises += report["uniform"]["premise"] + report["disperser"]["premise"]
    assert premises > 0


def test_set_translation_accepts_artifact():
    f, _ = gen_planted(9, 6, 3, 3)
    art = build_2csp(f, sample_random(6, 3, 0.5, 3))
    assert check_set_translation(art, 1, 2, Fraction(1, 4), 2, Fraction(1, 4), Fraction(1, 4)) == \
        check_set_translation((f, art.clause_sets), 1, 2, Fraction(1, 4), 2, Fraction(1, 4), Fraction(1, 4))


@settings(max_examples=60, deadline=None)
@given(planted_setups(), st.randoms(use_true_random=False))
def test_decode_bound_whenever_t_star_is_uniform(setup, rnd):
    f, _, T = setup
    art = build_2csp(f, T, params=PARAMS)
    lab = tuple(rnd.randrange(len(a)) for a in art.instance.alphabets)
    g, report = decode_assignment(art, lab, best_effort=True)
    if report["status"] == "ok" and report["t_star_uniform"]:
        bound = 1 - PARAMS.mu - 3 * report["nu"] * f.occurrence_bound / PARAMS.gamma
        assert eval_fraction(f, g) >= bound
