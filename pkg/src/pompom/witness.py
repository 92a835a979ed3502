"""Witness and super-witness checks against explicit properties."""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from .core import DEFAULT_ENUM_CAP, IndexSet, Property, check_enumeration, restrict, substitute
from .errors import ValidationError
from .formula import Constraint, ProbFormula, as_fraction


def is_witness(Q: Iterable[int], w: Sequence[int], prop: Property) -> bool:
    """True iff no member of ``prop`` agrees with ``w`` on every index of ``Q``."""
    Q = tuple(sorted(set(Q)))
    target = restrict(w, Q)
    for u in prop.members:
        if all(u[i] == a for i, a in zip(Q, target)):
            return False
    return True


def is_witness_by_extension(Q: Iterable[int], w: Sequence[int], prop: Property, cap: int = DEFAULT_ENUM_CAP) -> bool:
    """Literal reading of the definition: every extension of ``w_Q`` lies outside ``prop``.

    Exponential in ``n - |Q|``; kept as an independent oracle.
    """
    Q = tuple(sorted(set(Q)))
    free = [i for i in range(len(w)) if i not in set(Q)]
    check_enumeration(prop.alphabet.size, len(free), cap)
    for tail in itertools.product(range(prop.alphabet.size), repeat=len(free)):
        if substitute(w, tail, free) in prop.members:
            return False
    return True


def _super_witness_for(X, Y, w, prop, candidates, cap) -> bool:
    check_enumeration(prop.alphabet.size, len(Y), cap)
    pool = tuple(sorted(set(X) | set(Y)))
    pool_set = set(pool)
    inside = None
    if candidates is not None:
        inside = [tuple(sorted(Q)) for Q in candidates if set(Q) <= pool_set]
    for sigma in itertools.product(range(prop.alphabet.size), repeat=len(Y)):
        u = substitute(w, sigma, Y)
        if inside is None:
            # any witness inside X|Y implies X|Y itself is a witness
            if not is_witness(pool, u, prop):
                return False
        elif not any(is_witness(Q, u, prop) for Q in inside):
            return False
    return True


def is_super_witness(
    X: Iterable[int],
    w: Sequence[int],
    prop: Property,
    Y: Optional[Iterable[int]] = None,
    *,
    candidates: Optional[Iterable[Iterable[int]]] = None,
    candidate_cores: Optional[Iterable[Iterable[int]]] = None,
    cap: int = DEFAULT_ENUM_CAP,
) -> bool:
    """Check whether ``X`` is a super-witness against ``w``.

    Parameters
    ----------
    Y : explicit helper set disjoint from ``X``.  When omitted, ``Y = {}`` is
        tried first and then every entry of ``candidate_cores`` (minus ``X``).
    candidates : restrict the witnesses searched inside ``X | Y`` to these
        query sets.  Without it the whole of ``X | Y`` is tested, which is
        equivalent by monotonicity.
    """
    X = tuple(sorted(set(X)))
    if candidates is not None:
        candidates = [tuple(sorted(set(Q))) for Q in candidates]
    if Y is not None:
        Y = tuple(sorted(set(Y)))
        if set(Y) & set(X):
            raise ValidationError("helper set Y must be disjoint from X")
        return _super_witness_for(X, Y, w, prop, candidates, cap)
    tried = [()]
    for core in candidate_cores or ():
        tried.append(tuple(sorted(set(core) - set(X))))
    seen = set()
    for Yc in tried:
        if Yc in seen:
            continue
        seen.add(Yc)
        if _super_witness_for(X, Yc, w, prop, candidates, cap):
            return True
    return False


def witnesses_in_support(P: ProbFormula, w: Sequence[int], prop: Property) -> Tuple[List[IndexSet], Fraction]:
    """Support sets of ``P`` that witness against ``w``, with their total weight."""
    found, weight = [], Fraction(0)
    for i in P.support():
        Q = P.constraints[i].query
        if is_witness(Q, w, prop):
            found.append(Q)
            weight += P.weights[i]
    return found, weight


def one_sided_constraint(Q: Iterable[int], prop: Property) -> Constraint:
    """Constraint rejecting exactly the assignments that make ``Q`` a witness."""
    Q = tuple(sorted(set(Q)))
    seen = {restrict(u, Q) for u in prop.members}
    return Constraint.from_function(Q, prop.alphabet.size, lambda v: 1 if tuple(v) in seen else 0)


def one_sided_formula(prop: Property, queries, weights=None, support_bound=None) -> ProbFormula:
    """Canonical 1-sided formula over the given query sets (uniform if ``weights`` is None)."""
    queries = [tuple(sorted(set(Q))) for Q in queries]
    if len(set(queries)) != len(queries):
        raise ValidationError("query sets of a 1-sided formula must be distinct")
    if weights is None:
        weights = [Fraction(1, len(queries))] * len(queries)
    constraints = tuple(one_sided_constraint(Q, prop) for Q in queries)
    return ProbFormula(
        prop.n,
        prop.alphabet,
        constraints,
        tuple(as_fraction(x) for x in weights),
        support_bound=support_bound,
        one_sided=True,
    )
