import random
from fractions import Fraction

import pytest

from pompom.core import Property
from pompom.errors import HypothesisError, ValidationError
from pompom.formula import Constraint, ProbFormula
from pompom.structures import (
    Constellation,
    DiscerningSet,
    Pompom,
    build_scm,
    default_thresholds,
    extract_discerning_pompoms,
    extract_revealing_pompoms,
    find_constellation,
    pompom_violations,
    verify_constellation,
)

from helpers import BIN, random_uniform_support, uniform_formula

DISJOINT = [(2 * j, 2 * j + 1) for j in range(8)]
SUNFLOWER = [(0, j) for j in range(1, 9)]


def test_default_thresholds():
    assert default_thresholds(16, 2) == [4, 4, 16]
    assert default_thresholds(27, 3) == [3, 3, 9, 27]


def test_scm_disjoint_pairs():
    scm = build_scm(DISJOINT, 16, 2)
    assert scm.cores == ((), (), ())
    assert scm.matches[0] == () and scm.matches[1] == ()
    assert set(scm.matches[2]) == set(DISJOINT)
    assert scm.invariant_violations() == []


def test_scm_sunflower():
    scm = build_scm(SUNFLOWER, 16, 2)
    assert scm.cores[0] == (0,) and scm.cores[1] == (0,)
    assert scm.matches[0] == ()
    assert set(scm.matches[1]) == set(SUNFLOWER)
    assert scm.leftover == () and scm.invariant_violations() == []


def test_scm_empty_support():
    scm = build_scm([], 10, 2)
    assert all(not s for s in scm.sets) and all(not m for m in scm.matches)


def test_scm_rejects_wrong_size():
    with pytest.raises(ValidationError):
        build_scm([(0, 1, 2)], 5, 2)


def test_scm_core_bound_attained():
    # complete graph on 5 vertices at n = 16: every vertex has degree 4 = sqrt(16)
    K5 = [(a, b) for a in range(5) for b in range(a + 1, 5)]
    scm = build_scm(K5, 16, 2)
    assert len(scm.cores[0]) == 5
    assert scm.invariant_violations() == []


def test_scm_random_invariants():
    rng = random.Random(0)
    for _ in range(100):
        n = rng.randint(4, 40)
        q = rng.randint(1, min(3, n))
        sup = random_uniform_support(rng, n, q, rng.randint(1, 2 * n))
        assert build_scm(sup, n, q).invariant_violations() == []


def test_constellation_sunflower():
    P = uniform_formula(16, SUNFLOWER)
    c = find_constellation(build_scm(P.support_sets(), 16, 2), P)
    assert c.level == 1 and c.core == (0,) and set(c.family) == set(SUNFLOWER)
    assert verify_constellation(c, P, 16, 2).ok


def test_constellation_disjoint():
    P = uniform_formula(16, DISJOINT)
    c = find_constellation(build_scm(P.support_sets(), 16, 2), P)
    assert c.level == 2 and c.core == ()
    assert verify_constellation(c, P, 16, 2).ok


def test_constellation_none_when_level_zero_heavy():
    # every pair inside a 5-clique at n = 16 lands in match_0
    K5 = [(a, b) for a in range(5) for b in range(a + 1, 5)]
    P = uniform_formula(16, K5)
    scm = build_scm(P.support_sets(), 16, 2)
    assert scm.level_weights(P)[0] == 1
    assert find_constellation(scm, P) is None


def test_constellation_oversized_core():
    P = uniform_formula(16, SUNFLOWER)
    c = Constellation(1, tuple(range(10)), tuple(SUNFLOWER), Fraction(1))
    assert not verify_constellation(c, P, 16, 2).core_size


def test_constellation_crowded_outside_index():
    P = uniform_formula(16, DISJOINT)
    c = find_constellation(build_scm(P.support_sets(), 16, 2), P)
    crowded = tuple(c.family) + ((0, 3), (0, 5), (0, 7), (0, 9))
    bad = Constellation(c.level, c.core, crowded, c.eta)
    report = verify_constellation(bad, P, 16, 2)
    assert not report.outside_multiplicity and 0 in report.details["crowded_indices"]


def test_constellation_json_round_trip():
    c = Constellation(1, (0,), tuple(SUNFLOWER), Fraction(1, 2), 3)
    assert Constellation.from_json(c.to_json()) == c


def test_find_constellation_checks_formula():
    P = uniform_formula(16, DISJOINT)
    with pytest.raises(ValidationError):
        find_constellation(build_scm(SUNFLOWER, 16, 2), P)


def test_pompom_invariants():
    W = Pompom((0,), ((0, 1), (0, 2)), 1)
    assert pompom_violations(W) == []
    with pytest.raises(ValidationError):
        Pompom((0,), ((0, 1), (1, 2)), 1)
    with pytest.raises(ValidationError):
        Pompom((), ((0, 1),), 1)


def sunflower_constellation(n=10):
    fam = tuple((0, j) for j in range(1, n))
    return Constellation(1, (0,), fam, Fraction(1))


def test_revealing_i1_one_per_outside_index():
    n = 10
    L = Property.from_strings(n, BIN, ["0" * n])
    R = extract_revealing_pompoms(sunflower_constellation(n), (1,) * n, L, Fraction(1, 2), size_target=4)
    assert set(R.pompoms) == {(0,), (1,)}
    for W in R.pompoms.values():
        assert len(W) == 4 and pompom_violations(W) == []
        outs = [W.outside(Q) for Q in W.members]
        assert len({o[0] for o in outs}) == 4


def test_revealing_empty_core():
    n = 8
    L = Property.from_strings(n, BIN, ["0" * n])
    c = Constellation(2, (), tuple(DISJOINT[:4]), Fraction(1))
    R = extract_revealing_pompoms(c, (1,) * n, L, Fraction(1, 2), size_target=10, strict=False)
    assert list(R.pompoms) == [()]
    assert len(R.pompoms[()]) == 4 and R.shortfall == {(): 6}
    with pytest.raises(HypothesisError):
        extract_revealing_pompoms(c, (1,) * n, L, Fraction(1, 2), size_target=10)


def test_discerning_perfect_packing():
    P = uniform_formula(16, DISJOINT)
    c = find_constellation(build_scm(P.support_sets(), 16, 2), P)
    D = extract_discerning_pompoms(c, P, Fraction(1, 2), size_target=2)
    assert len(D.pompoms) == 4 and D.violations(P, 2) == []
    assert DiscerningSet.from_json(D.to_json()).members() == D.members()


def test_discerning_needs_uniform():
    cons = (Constraint.constant((0, 1), 2), Constraint.constant((2, 3), 2))
    P = ProbFormula(4, BIN, cons, (Fraction(1, 3), Fraction(2, 3)))
    c = Constellation(2, (), P.support_sets(), Fraction(1))
    with pytest.raises(ValidationError):
        extract_discerning_pompoms(c, P, Fraction(1, 2), size_target=1)


def test_discerning_shortfall():
    P = uniform_formula(16, SUNFLOWER)
    c = find_constellation(build_scm(P.support_sets(), 16, 2), P)
    with pytest.raises(HypothesisError):
        extract_discerning_pompoms(c, P, Fraction(1, 2), size_target=9)
