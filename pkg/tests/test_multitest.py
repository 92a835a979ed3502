import math
from fractions import Fraction

import pytest

from pompom.core import Property
from pompom.errors import ValidationError
from pompom.evaluation import exact_sampler_acceptance
from pompom.multitest import MultiTestPlan, one_sided_reps, run_multitest, two_sided_reps, union_tester
from pompom.sampler import synthesize_one_sided_sampler

from helpers import BIN

H = Fraction(1, 2)


def block_word(n, block, size):
    return tuple(1 if block * size <= j < (block + 1) * size else 0 for j in range(n))


def block_testers(r, n, size, p):
    return [
        synthesize_one_sided_sampler(Property(n, BIN, frozenset([block_word(n, b, size)])), Fraction(1, 10), 1, p=p)
        for b in range(r)
    ]


def test_rep_counts():
    assert one_sided_reps(8) == 4
    assert two_sided_reps(8) == 30
    assert two_sided_reps(1) == 1


def test_plan_validation():
    T = block_testers(2, 8, 2, H)
    with pytest.raises(ValidationError):
        MultiTestPlan(T, [1])
    other = block_testers(1, 8, 2, Fraction(1, 3))
    with pytest.raises(ValidationError):
        MultiTestPlan(T + other, [1, 1, 1])


def test_plan_json_round_trip():
    plan = MultiTestPlan.default(block_testers(3, 9, 3, H))
    again = MultiTestPlan.from_json(plan.to_json())
    assert again.to_json() == plan.to_json()


def test_single_tester_matches_amplified_rate():
    n, p, k, trials = 6, Fraction(1, 4), 3, 6000
    T = block_testers(1, n, 2, p)[0]
    w = (0,) * n  # two mismatches against the member
    plan = MultiTestPlan([T], [k])
    rate = sum(run_multitest(plan, w, s).answers[0] for s in range(trials)) / trials
    amplified = 1 - (1 - p) ** k
    alone = synthesize_one_sided_sampler(T.prop, Fraction(1, 10), 1, p=amplified)
    exact = float(exact_sampler_acceptance(alone, w))
    assert abs(rate - exact) <= 3 * math.sqrt(exact * (1 - exact) / trials)


def test_two_testers_closed_form():
    n, size, p, k, trials = 12, 3, Fraction(1, 5), 2, 6000
    T = block_testers(2, n, size, p)
    plan = MultiTestPlan(T, [k, k])
    w = block_word(n, 0, size)
    rejects = sum(not run_multitest(plan, w, s).answers[1] for s in range(trials)) / trials
    amplified = 1 - (1 - float(p)) ** k
    expected = 1 - (1 - amplified) ** (2 * size)
    assert abs(rejects - expected) <= 3 * math.sqrt(expected * (1 - expected) / trials)
    assert all(run_multitest(plan, w, s).answers[0] for s in range(200))


def test_member_always_accepted():
    T = block_testers(4, 16, 4, H)
    plan = MultiTestPlan.default(T)
    for s in range(50):
        assert run_multitest(plan, block_word(16, 2, 4), s).answers[2]
        assert union_tester(T, block_word(16, 2, 4), s)


def test_far_word_rejected_by_union():
    T = block_testers(4, 16, 4, H)
    w = (1,) * 16
    rate = sum(union_tester(T, w, s) for s in range(500)) / 500
    assert rate <= 0.5


def test_empty_union_rejects():
    assert union_tester([], (0, 1), 0) is False


def test_queried_indices_do_not_depend_on_r():
    n, size, p = 40, 5, Fraction(1, 10)
    T = block_testers(8, n, size, p)
    for s in range(20):
        big = run_multitest(MultiTestPlan(T, [4] * 8), (0,) * n, s)
        small = run_multitest(MultiTestPlan(T[:1], [4]), (0,) * n, s)
        assert big.queried == small.queried
