import itertools
import random
from fractions import Fraction

from pompom.core import Property
from pompom.formula import satisfaction
from pompom.witness import (
    is_super_witness,
    is_witness,
    is_witness_by_extension,
    one_sided_formula,
    witnesses_in_support,
)

from helpers import BIN, random_property


def subsets(n):
    for r in range(n + 1):
        yield from itertools.combinations(range(n), r)


def test_witness_basic():
    L = Property.from_strings(3, BIN, ["000"])
    assert is_witness({0}, BIN.encode("100"), L)
    assert not is_witness({0}, BIN.encode("000"), L)


def test_witness_matches_extension_oracle():
    rng = random.Random(1)
    for _ in range(40):
        n = rng.randint(1, 5)
        L = random_property(rng, n)
        w = tuple(rng.randint(0, 1) for _ in range(n))
        for Q in subsets(n):
            assert is_witness(Q, w, L) == is_witness_by_extension(Q, w, L)


def test_super_witness_with_empty_helper():
    L = Property.from_strings(3, BIN, ["000", "011"])
    w = BIN.encode("100")
    assert is_witness({0}, w, L)
    assert is_super_witness({0}, w, L, Y=())


def test_super_witness_everything_language():
    n = 3
    L = Property(n, BIN, frozenset(BIN.words(n)))
    assert not is_super_witness((), (0, 1, 0), L)


def test_super_witness_helper_set():
    # w = 10, L = {00, 11}: X = {0} alone is not a witness (11 agrees),
    # and no Y disjoint from X can fix that since position 1 is free.
    L = Property.from_strings(2, BIN, ["00", "11"])
    w = BIN.encode("10")
    assert not is_witness((0,), w, L)
    assert not is_super_witness((0,), w, L, Y=(1,))
    assert is_super_witness((0, 1), w, L)


def test_witnesses_in_support():
    n = 4
    L = Property.from_strings(n, BIN, ["0000"])
    P = one_sided_formula(L, [(0,), (1,), (2, 3)])
    found, weight = witnesses_in_support(P, (0, 0, 0, 0), L)
    assert found == [] and weight == 0
    found, weight = witnesses_in_support(P, (1, 1, 1, 1), L)
    assert len(found) == 3 and weight == 1


def test_one_sided_formula_is_complete():
    rng = random.Random(4)
    for _ in range(10):
        L = random_property(rng, 4)
        P = one_sided_formula(L, [(0, 1), (2, 3), (1, 2)])
        assert all(satisfaction(P, u) == 1 for u in L.members)
        for w in BIN.words(4):
            _, weight = witnesses_in_support(P, w, L)
            assert satisfaction(P, w) == 1 - weight
