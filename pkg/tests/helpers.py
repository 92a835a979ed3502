"""Random instance builders shared by the test modules."""
from __future__ import annotations

import itertools
import random
from fractions import Fraction

from pompom.core import Alphabet, Property
from pompom.formula import Constraint, ProbFormula

BIN = Alphabet.binary()


def random_property(rng: random.Random, n: int, max_members: int = 8, k: int = 2) -> Property:
    words = list(Alphabet.of_size(k).words(n))
    size = rng.randint(1, min(max_members, len(words)))
    return Property(n, Alphabet.of_size(k), frozenset(rng.sample(words, size)))


def random_weights(rng: random.Random, m: int, denom: int = 12) -> list:
    raw = [rng.randint(1, denom) for _ in range(m)]
    total = sum(raw)
    return [Fraction(x, total) for x in raw]


def random_formula(rng: random.Random, n: int, m: int, q: int, k: int = 2, zero_one: bool = False) -> ProbFormula:
    """``m`` distinct ``q``-sets with random rational tables and weights."""
    pool = list(itertools.combinations(range(n), q))
    queries = rng.sample(pool, min(m, len(pool)))
    constraints = []
    for Q in queries:
        size = k ** q
        if zero_one:
            table = [rng.randint(0, 1) for _ in range(size)]
        else:
            table = [Fraction(rng.randint(0, 6), 6) for _ in range(size)]
        constraints.append(Constraint(Q, tuple(table)))
    return ProbFormula(n, Alphabet.of_size(k), tuple(constraints), tuple(random_weights(rng, len(constraints))))


def uniform_formula(n: int, sets, table_fn=None, k: int = 2) -> ProbFormula:
    """Uniform weights over ``sets``; tables default to constant 1."""
    sets = [tuple(sorted(Q)) for Q in sets]
    if table_fn is None:
        cons = tuple(Constraint.constant(Q, k, 1) for Q in sets)
    else:
        cons = tuple(Constraint.from_function(Q, k, table_fn) for Q in sets)
    return ProbFormula(n, Alphabet.of_size(k), cons, tuple(Fraction(1, len(sets)) for _ in sets))


def random_uniform_support(rng: random.Random, n: int, q: int, m: int) -> list:
    """``m`` distinct ``q``-subsets of ``range(n)``, biased toward shared indices."""
    out = set()
    hubs = rng.sample(range(n), max(1, min(n, rng.randint(1, 4))))
    tries = 0
    while len(out) < m and tries < 50 * m:
        tries += 1
        if rng.random() < 0.5:
            base = rng.sample(hubs, rng.randint(0, min(q, len(hubs))))
        else:
            base = []
        rest = [j for j in range(n) if j not in base]
        Q = tuple(sorted(base + rng.sample(rest, q - len(base))))
        out.add(Q)
    return sorted(out)
