import itertools
import math
import random
from fractions import Fraction

import pytest

from pompom.core import Property
from pompom.errors import CapExceededError, HypothesisError, ValidationError
from pompom.formula import Constraint, ProbFormula, condition, satisfaction
from pompom.transforms import (
    amplify,
    combinatorial_delta,
    combinatorialize,
    dyadic_ceiling,
    effective_one_sided,
    effective_two_sided,
    equitable_multiplier,
    majority_error,
    make_equitable,
    make_zero_one,
    pad_queries,
    prune_to_equitable_band,
    quantize,
    reduce_support_linear,
)
from pompom.witness import one_sided_formula

from helpers import BIN, random_formula, uniform_formula

H = Fraction(1, 2)


def single(value, n=1) -> ProbFormula:
    return ProbFormula(n, BIN, (Constraint((0,), (value, value)),), (Fraction(1),))


def test_zero_one_rounding():
    c = Constraint((0,), (Fraction(49, 100), H))
    P = ProbFormula(1, BIN, (c,), (1,))
    assert make_zero_one(P).constraints[0].table == (0, 1)
    Z = make_zero_one(P)
    assert make_zero_one(Z) == Z


def test_zero_one_doubles_at_most():
    rng = random.Random(1)
    for _ in range(20):
        P = random_formula(rng, 5, 4, 2)
        Z = make_zero_one(P)
        for w in BIN.words(5):
            assert satisfaction(Z, w) <= 2 * satisfaction(P, w)
            assert 1 - satisfaction(Z, w) <= 2 * (1 - satisfaction(P, w))


def test_dyadic_ceiling():
    assert dyadic_ceiling(Fraction(3, 10)) == H
    assert dyadic_ceiling(Fraction(1, 4)) == Fraction(1, 4)
    assert dyadic_ceiling(Fraction(1)) == 1
    with pytest.raises(ValidationError):
        dyadic_ceiling(Fraction(0))


def two_weights(a, b) -> ProbFormula:
    return ProbFormula(2, BIN, (Constraint.constant((0,), 2), Constraint.constant((1,), 2)), (a, b))


def test_quantize_examples():
    Q = quantize(two_weights(Fraction(3, 10), Fraction(7, 10)))
    assert Q.weights == (Fraction(1, 3), Fraction(2, 3))
    cons = tuple(Constraint.constant((j,), 2) for j in range(3))
    P = ProbFormula(3, BIN, cons, (Fraction(1, 4), Fraction(1, 4), H))
    assert quantize(P) == P
    U = uniform_formula(3, [(0,), (1,), (2,)])
    assert quantize(U) == U


def test_make_equitable_examples():
    U = uniform_formula(3, [(0,), (1,), (2,)])
    assert make_equitable(U) == U
    E = make_equitable(two_weights(Fraction(1, 3), Fraction(2, 3)))
    assert E.support_sets() == [(1,)] and E.weights == (1,)


def test_make_equitable_multiplier_exhaustive():
    rng = random.Random(8)
    for _ in range(40):
        P = random_formula(rng, 5, rng.randint(2, 6), rng.randint(1, 2))
        beta = P.equitability()
        E = make_equitable(P)
        assert E.is_uniform()
        mult = equitable_multiplier(beta)
        for w in BIN.words(5):
            assert float(satisfaction(E, w)) <= mult * float(satisfaction(P, w)) + 1e-12
            assert float(1 - satisfaction(E, w)) <= mult * float(1 - satisfaction(P, w)) + 1e-12


def test_prune_drops_light_constraint():
    n, alpha, eps, q = 4, 2.0, H, 1
    light = Fraction(1, 8) / (alpha * n)  # 1/(8 alpha n) is below 1/(4 alpha n)
    rest = (1 - light) / 3
    cons = tuple(Constraint.constant((j,), 2) for j in range(4))
    P = ProbFormula(n, BIN, cons, (Fraction(light), rest, rest, rest))
    out = prune_to_equitable_band(P, eps, q, alpha, Fraction(1, 10))
    assert (0,) not in out.support_sets() and len(out.support()) == 3


def test_prune_keeps_open_band():
    U = uniform_formula(4, [(j,) for j in range(4)])
    assert prune_to_equitable_band(U, H, 1, 2.0, Fraction(1, 10)) == U


def test_prune_ratio_bound():
    rng = random.Random(3)
    n, q, eps, alpha = 6, 2, H, 3.0
    for _ in range(30):
        P = random_formula(rng, n, 8, q)
        try:
            out = prune_to_equitable_band(P, eps, q, alpha, Fraction(1, 10))
        except HypothesisError:
            continue
        assert out.equitability() < 8 * q * alpha / float(eps)


def test_prune_rejects_large_delta():
    with pytest.raises(ValidationError):
        prune_to_equitable_band(uniform_formula(2, [(0,), (1,)]), H, 1, 2.0, Fraction(1, 8))


def test_linearize_single_support():
    out, rep = reduce_support_linear(single(Fraction(1, 3), 2), Fraction(1, 5), seed=0)
    assert rep.verified and out.support_sets() == [(0,)] and out.weights == (1,)


def test_linearize_verified_bound():
    rng = random.Random(4)
    P = random_formula(rng, 5, 6, 2)
    delta = Fraction(1, 5)
    out, rep = reduce_support_linear(P, delta, seed=3)
    assert rep.r == 125 and len(out.support()) <= 125
    if rep.verified:
        assert all(abs(satisfaction(out, w) - satisfaction(P, w)) <= delta for w in BIN.words(5))


def test_linearize_is_deterministic():
    rng = random.Random(4)
    P = random_formula(rng, 5, 6, 2)
    a = reduce_support_linear(P, Fraction(1, 5), seed=9)
    b = reduce_support_linear(P, Fraction(1, 5), seed=9)
    assert a[0] == b[0] and a[1] == b[1]


def test_amplify_identity():
    rng = random.Random(6)
    P = random_formula(rng, 4, 3, 2)
    assert amplify(P, 1) == P


def test_amplify_reject_if_any():
    A = amplify(single(H), 3, "reject_if_any")
    assert satisfaction(A, (0,)) == Fraction(1, 8)


def test_amplify_majority():
    A = amplify(single(Fraction(2, 5)), 3, "majority")
    assert satisfaction(A, (0,)) == 3 * Fraction(2, 5) ** 2 * Fraction(3, 5) + Fraction(2, 5) ** 3
    assert satisfaction(A, (0,)) == Fraction(44, 125)
    assert majority_error(3, Fraction(2, 5)) == Fraction(44, 125)


def test_amplify_cap():
    P = uniform_formula(6, [(j,) for j in range(6)])
    with pytest.raises(CapExceededError):
        amplify(P, 4, cap=100)


def test_pad_queries_preserves_satisfaction():
    rng = random.Random(2)
    P = random_formula(rng, 5, 4, 2)
    Q = pad_queries(P, 3)
    assert Q.q == 3
    assert all(satisfaction(P, w) == satisfaction(Q, w) for w in BIN.words(5))


def test_combinatorial_delta_example():
    value = combinatorial_delta(Fraction(1, 100), 2, 2, H)
    assert value == pytest.approx(0.16 * math.log2(640000))


def test_combinatorialize_pipeline():
    n = 4
    L = Property.from_strings(n, BIN, ["0000"])
    P = one_sided_formula(L, [(j,) for j in range(n)])
    out, trace = combinatorialize(P, H, Fraction(1, 20), 1, seed=0)
    assert trace.names == ["linearize", "prune", "equitable", "zero_one"]
    assert out.is_combinatorial()
    assert len(out.support()) <= out.support_bound
    again, trace2 = combinatorialize(P, H, Fraction(1, 20), 1, seed=0)
    assert again == out and trace2.to_json() == trace.to_json()


def test_combinatorialize_trivial_for_large_delta():
    P = uniform_formula(3, [(0,), (1,)])
    out, trace = combinatorialize(P, H, Fraction(1, 16), 1)
    assert trace.names == ["trivial"] and all(satisfaction(out, w) == 1 for w in BIN.words(3))


def test_combinatorialize_reports_stage():
    P = uniform_formula(4, [(j,) for j in range(4)])
    with pytest.raises(HypothesisError) as info:
        combinatorialize(P, H, Fraction(1, 20), 1, overrides={"prune_high": Fraction(1, 100)})
    assert info.value.stage == "prune"


def test_effective_one_sided():
    n = 4
    L = Property.from_strings(n, BIN, ["0000"])
    P = one_sided_formula(L, list(itertools.combinations(range(n), 2)))
    out, rep = effective_one_sided(P, L, H, Fraction(1, 4), 2, seed=0, reps=4)
    assert rep.worst_far_acceptance <= rep.threshold
    assert len(out.support()) <= rep.support_bound
    assert all(satisfaction(out, u) == 1 for u in L.members)


def test_effective_two_sided_trace():
    n = 4
    L = Property.from_strings(n, BIN, ["0000"])
    P = one_sided_formula(L, [(j,) for j in range(n)])
    out, trace = effective_two_sided(P, H, Fraction(1, 10), 1, seed=0, overrides={"amplify_reps": 3})
    assert trace.names[0] == "amplify_majority"
    assert trace.declared["q_prime"] == 3 and trace.declared["reps"] == 3
    assert trace.declared["amplified_delta"] == majority_error(3, Fraction(1, 10))
    assert out.is_combinatorial()


def test_condition_multiplier():
    rng = random.Random(12)
    for _ in range(20):
        P = random_formula(rng, 4, 4, 2)
        sub = P.support_sets()[: rng.randint(1, len(P.support()))]
        eta = P.weight_of(sub)
        C = condition(P, sub)
        for w in BIN.words(4):
            assert satisfaction(C, w) <= satisfaction(P, w) / eta
