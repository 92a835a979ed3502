import math
import random
from fractions import Fraction

import pytest

from pompom.core import PartialPropertyPair, Property
from pompom.errors import CapExceededError, ValidationError
from pompom.evaluation import (
    check_deviation_bound,
    check_support_weight_lemma,
    evaluate_test_quality,
    exact_sampler_acceptance,
    monte_carlo_acceptance,
    render_calc_table,
    tail_bounds,
    tight_delta,
    verify_appendix_calculations,
)
from pompom.sampler import SampleTester, sampling_threshold, synthesize_one_sided_sampler
from pompom.witness import one_sided_formula

from helpers import BIN, random_property

H = Fraction(1, 2)


def test_hoeffding_value():
    assert tail_bounds("hoeffding", m=100, t=0.1) == pytest.approx(2 * math.exp(-2))
    assert tail_bounds("hoeffding", m=100, t=0.1) == pytest.approx(0.2707, abs=1e-4)


def test_chernoff_vacuous_limit():
    assert tail_bounds("chernoff_upper", gamma=1e-9, p=0.5, m=100) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        tail_bounds("bernstein", m=1)


def test_deviation_constant_sequence():
    rep = check_deviation_bound([0.3] * 1000, 0.5, 2, 2000, seed=1)
    assert rep.failures == 0


def test_deviation_full_sample():
    g = [j % 2 for j in range(1000)]
    assert check_deviation_bound(g, 1.0, 2, 500, seed=1).failure_rate == 0


def test_deviation_precondition():
    with pytest.raises(ValidationError):
        check_deviation_bound([0, 1] * 50, 0.1, 2, 10)


def test_deviation_deterministic():
    g = [j % 2 for j in range(1000)]
    a = check_deviation_bound(g, 0.5, 2, 3000, seed=4)
    b = check_deviation_bound(g, 0.5, 2, 3000, seed=4)
    assert a == b


def zeros_tester(n=10, p=H):
    L = Property.from_strings(n, BIN, ["0" * n])
    return synthesize_one_sided_sampler(L, H, 1, p=p), L


def test_exact_acceptance_members_and_closed_form():
    T, L = zeros_tester()
    assert exact_sampler_acceptance(T, (0,) * 10) == 1
    assert exact_sampler_acceptance(T, (1,) * 5 + (0,) * 5) == Fraction(1, 32)


def test_exact_acceptance_matches_subset_loop():
    rng = random.Random(2)
    for _ in range(10):
        n = 6
        L = random_property(rng, n, 4)
        p = Fraction(rng.randint(1, 9), 10)
        T = synthesize_one_sided_sampler(L, H, 1, p=p)
        w = tuple(rng.randint(0, 1) for _ in range(n))
        total = Fraction(0)
        for mask in range(1 << n):
            U = [j for j in range(n) if mask >> j & 1]
            if any(all(u[j] == w[j] for j in U) for u in L.members):
                total += p ** len(U) * (1 - p) ** (n - len(U))
        assert exact_sampler_acceptance(T, w) == total


def test_exact_acceptance_cap():
    T, _ = zeros_tester(n=12)
    with pytest.raises(CapExceededError):
        exact_sampler_acceptance(T, (0,) * 12, cap=10)


def test_monte_carlo_agrees_with_exact():
    rng = random.Random(5)
    for seed in range(5):
        L = random_property(rng, 7, 5)
        T = synthesize_one_sided_sampler(L, H, 1, p=Fraction(1, 3))
        w = tuple(rng.randint(0, 1) for _ in range(7))
        exact = float(exact_sampler_acceptance(T, w))
        rep = monte_carlo_acceptance(T, w, 20_000, seed)
        assert abs(rep.estimate - exact) <= max(rep.half_width, 1e-9)


def test_monte_carlo_deterministic_tester():
    T, _ = zeros_tester(p=1)
    rep = monte_carlo_acceptance(T, (1,) + (0,) * 9, 100, 0)
    assert rep.estimate == 0 and rep.half_width == 0
    assert monte_carlo_acceptance(T, (0,) * 10, 100, 0).estimate == 1
    T2, _ = zeros_tester()
    assert monte_carlo_acceptance(T2, (1,) * 10, 500, 3) == monte_carlo_acceptance(T2, (1,) * 10, 500, 3)


def singleton_test(n=4):
    L = Property.from_strings(n, BIN, ["0" * n])
    return one_sided_formula(L, [(j,) for j in range(n)]), PartialPropertyPair.full(L)


def test_support_weight_empty_family():
    P, pair = singleton_test()
    assert check_support_weight_lemma(P, pair, H, []).holds


def test_support_weight_small_family_is_light():
    P, pair = singleton_test(6)
    eps = Fraction(2, 3)  # eps/2-far from 0^6 means at least 3 ones
    delta = tight_delta(P, pair, eps / 2)
    rep = check_support_weight_lemma(P, pair, eps, [(0,)], sided="one")
    assert rep.applies and rep.weight <= delta and rep.holds


def test_support_weight_full_support_contrapositive():
    P, pair = singleton_test(6)
    rep = check_support_weight_lemma(P, pair, Fraction(2, 3), P.support_sets(), sided="one")
    assert rep.union_size > Fraction(2, 3) * 6 / 2 and not rep.applies


def test_calc_point_above_threshold():
    t = sampling_threshold(2, 2, 0.5, "one")
    (row,) = verify_appendix_calculations({"withi": [(2, 2, 0.5, 1, t + 1)]})
    assert row.status == "pass" and row.endpoint_ok


def test_calc_point_below_threshold_skipped():
    t = sampling_threshold(2, 2, 0.5, "one")
    (row,) = verify_appendix_calculations({"withi": [(2, 2, 0.5, 1, t / 2)]})
    assert row.status == "skipped" and row.steps == []


def test_calc_slack_monotone_in_n():
    for calc, side, q in (("withi", "one", 2), ("devuse", "two", 3)):
        t = sampling_threshold(q, 2, 0.5, side)
        for i in range(1, q + 1):
            # far enough out that the sampling rate is below 1 and the bound is not degenerate
            pts = [(2, q, 0.5, i, t * m) for m in (1e6, 1e8, 1e10)]
            rows = verify_appendix_calculations({calc: pts})
            slacks = [r.slack for r in rows]
            assert all(s > 0 for s in slacks)
            if i < q:
                assert all(a <= b * (1 + 1e-12) for a, b in zip(slacks, slacks[1:])), (calc, i, slacks)


def test_calc_slack_at_top_level_shrinks_to_limit():
    # at i = q both ends of the miss-probability chain stop growing with n; the
    # 1 - x <= e^-x step tightens as x -> 0, so the slack falls toward a positive limit
    t = sampling_threshold(2, 2, 0.5, "one")
    rows = verify_appendix_calculations({"withi": [(2, 2, 0.5, 2, t * m) for m in (1e6, 1e8, 1e10, 1e14)]})
    slacks = [r.slack for r in rows]
    assert slacks == sorted(slacks, reverse=True) and slacks[-1] > 0


def test_calc_table_renders():
    rows = verify_appendix_calculations({"withi": [(2, 2, 0.5, 1, 1e9)]})
    text = render_calc_table(rows)
    assert text.splitlines()[0].startswith("calc") and len(text.splitlines()) == 2


def test_quality_of_formula_and_sampler():
    P, pair = singleton_test(4)
    rep = evaluate_test_quality(P, pair, H)
    assert rep.min_inner == 1 and rep.max_far == Fraction(1, 4)
    T = synthesize_one_sided_sampler(pair.outer, H, 1, p=H)
    rep = evaluate_test_quality(T, pair, H)
    assert rep.min_inner == 1
    assert rep.max_far == Fraction(1, 8)
    assert isinstance(T, SampleTester)
