"""Set-family structures over the support of a query distribution.

``build_scm`` runs the level-by-level sets/core/match construction,
``find_constellation`` picks a heavy level from it, and the two extractors
pull pompoms (families disjoint outside a shared core) out of a
constellation.  Candidate sets are always processed in lexicographic order of
their sorted index tuples, so every greedy step is deterministic.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import DEFAULT_ENUM_CAP, IndexSet, Property, check_enumeration, substitute
from .errors import HypothesisError, ValidationError
from .formula import ProbFormula, as_fraction
from .witness import is_witness

Family = Tuple[IndexSet, ...]


def level_threshold(n: int, i: int, q: int) -> int:
    """Smallest integer ``t`` with ``t >= n**(i/q)``, computed exactly."""
    if i == 0:
        return 1
    target = n ** i
    t = max(1, int(round(target ** (1.0 / q))))
    while t ** q < target:
        t += 1
    while t > 1 and (t - 1) ** q >= target:
        t -= 1
    return t


def default_thresholds(n: int, q: int) -> List[int]:
    # the level-0 core uses the same n**(1/q) cutoff as level 1
    return [level_threshold(n, 1, q)] + [level_threshold(n, i, q) for i in range(1, q + 1)]


def _family(sets: Iterable[Iterable[int]]) -> Family:
    return tuple(sorted({tuple(sorted(set(Q))) for Q in sets}))


def _core(sets: Family, threshold: int) -> IndexSet:
    counts = Counter(j for Q in sets for j in Q)
    return tuple(sorted(j for j, c in counts.items() if c >= threshold))


@dataclass(frozen=True)
class ScmDecomposition:
    n: int
    q: int
    support: Family
    thresholds: Tuple[int, ...]
    sets: Tuple[Family, ...]
    cores: Tuple[IndexSet, ...]
    matches: Tuple[Family, ...]
    leftover: Family

    def level_weights(self, P: ProbFormula) -> List[Fraction]:
        wm = P.weight_map()
        return [sum((wm[Q] for Q in m), Fraction(0)) for m in self.matches]

    def invariant_violations(self, eta=None) -> List[str]:
        """Structural checks on the decomposition; an empty list means all hold.

        ``eta`` is the support-size ratio (``|support| <= eta*n``); it defaults
        to ``|support|/n``.  The level-0 core bound is checked as ``<=``: it can
        be attained exactly (complete graphs on ``n**(1/q)+1`` vertices).
        """
        out = []
        n, q = self.n, self.q
        for i in range(1, q + 1):
            if not set(self.sets[i]) <= set(self.sets[i - 1]):
                out.append(f"sets_{i} not contained in sets_{i-1}")
            if set(self.sets[i]) != set(self.sets[i - 1]) - set(self.matches[i - 1]):
                out.append(f"sets_{i} != sets_{i-1} minus match_{i-1}")
            if not set(self.cores[i]) <= set(self.cores[i - 1]):
                out.append(f"core_{i} not contained in core_{i-1}")
        for i, j in itertools.combinations(range(q + 1), 2):
            if set(self.matches[i]) & set(self.matches[j]):
                out.append(f"match_{i} and match_{j} intersect")
        covered = set(self.leftover).union(*map(set, self.matches))
        if covered != set(self.support):
            out.append("match families and leftover do not partition the support")
        if self.leftover:
            out.append(f"{len(self.leftover)} sets left over after the last level")
        for i in range(q + 1):
            core = set(self.cores[i])
            for Q in self.matches[i]:
                if len(core & set(Q)) != q - i:
                    out.append(f"match_{i} member {Q} meets core_{i} in {len(core & set(Q))} indices")
            for Q in self.sets[i]:
                if len(core & set(Q)) > q - i:
                    out.append(f"sets_{i} member {Q} meets core_{i} in more than {q - i} indices")
            if i >= 1:
                prev = set(self.cores[i - 1])
                for Q in self.matches[i]:
                    if (set(Q) - core) & prev:
                        out.append(f"match_{i} member {Q} has an outside index in core_{i-1}")
        if self.support and self.thresholds == tuple(default_thresholds(n, q)):
            eta = Fraction(len(self.support), n) if eta is None else as_fraction(eta)
            for i in range(q + 1):
                level = max(i, 1)
                bound = eta * q  # |core_i| vs bound * n**(1 - level/q)
                size = len(self.cores[i])
                # compare size**q with (bound**q) * n**(q-level) exactly
                lhs, rhs = Fraction(size) ** q, bound ** q * n ** (q - level)
                ok = lhs <= rhs if i == 0 else lhs < rhs
                if not ok:
                    out.append(f"|core_{i}| = {size} exceeds eta*q*n^(1-{level}/q)")
        return out

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "q": self.q,
            "index_base": 0,
            "thresholds": list(self.thresholds),
            "levels": [
                {
                    "i": i,
                    "sets": [list(Q) for Q in self.sets[i]],
                    "core": list(self.cores[i]),
                    "match": [list(Q) for Q in self.matches[i]],
                }
                for i in range(self.q + 1)
            ],
            "leftover": [list(Q) for Q in self.leftover],
        }


def build_scm(support: Iterable[Iterable[int]], n: int, q: int, thresholds: Optional[Sequence[int]] = None) -> ScmDecomposition:
    """Run the sets/core/match construction for levels ``0..q``.

    ``thresholds[i]`` is the membership count that puts an index into
    ``core_i``; defaults are ``ceil(n**(1/q))`` for level 0 and
    ``ceil(n**(i/q))`` for level ``i >= 1``.
    """
    fam = _family(support)
    for Q in fam:
        if len(Q) != q:
            raise ValidationError(f"set {Q} has size {len(Q)}, expected {q}")
        if Q and (Q[0] < 0 or Q[-1] >= n):
            raise ValidationError(f"set {Q} not contained in [0, {n})")
    if thresholds is None:
        thresholds = default_thresholds(n, q)
    thresholds = tuple(int(t) for t in thresholds)
    if len(thresholds) != q + 1:
        raise ValidationError(f"need {q + 1} thresholds, got {len(thresholds)}")
    sets, cores, matches = [], [], []
    current = fam
    for i in range(q + 1):
        if i > 0:
            done = set(matches[-1])
            current = tuple(Q for Q in current if Q not in done)
        core = _core(current, thresholds[i])
        cs = set(core)
        match = tuple(Q for Q in current if len(cs.intersection(Q)) == q - i)
        sets.append(current)
        cores.append(core)
        matches.append(match)
    last = set(matches[-1])
    leftover = tuple(Q for Q in sets[-1] if Q not in last)
    return ScmDecomposition(n, q, fam, thresholds, tuple(sets), tuple(cores), tuple(matches), leftover)


@dataclass(frozen=True)
class Constellation:
    level: int
    core: IndexSet
    family: Family
    eta: Fraction
    outside_limit: Optional[int] = None  # max memberships allowed outside the core, if not n**((i-1)/q)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "core": list(self.core),
            "family": [list(Q) for Q in self.family],
            "eta": str(self.eta),
            "outside_limit": self.outside_limit,
            "index_base": 0,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Constellation":
        return cls(
            int(data["level"]),
            tuple(int(j) for j in data["core"]),
            _family(data["family"]),
            as_fraction(data["eta"]),
            data.get("outside_limit"),
        )


def _check_scm_matches(scm: ScmDecomposition, P: ProbFormula) -> None:
    if set(scm.support) != set(P.support_sets()):
        raise ValidationError("decomposition was not built from this formula's support")


def find_constellation(scm: ScmDecomposition, P: ProbFormula, eta=None) -> Optional[Constellation]:
    """Smallest level ``i >= 1`` whose match family carries weight ``>= 1/(q+1)``.

    Returns ``None`` when the level-0 match family is heavier than ``1/(q+1)``
    or no level qualifies.  ``eta`` is the core-size constant of the result,
    defaulting to ``q*|support|/n``.
    """
    _check_scm_matches(scm, P)
    q, n = scm.q, scm.n
    weights = scm.level_weights(P)
    need = Fraction(1, q + 1)
    if weights[0] > need:
        return None
    eta = Fraction(q * len(scm.support), n) if eta is None else as_fraction(eta)
    defaults = scm.thresholds == tuple(default_thresholds(n, q))
    for i in range(1, q + 1):
        if weights[i] >= need:
            limit = None if defaults or i == 1 else scm.thresholds[i - 1] - 1
            return Constellation(i, scm.cores[i], scm.matches[i], eta, limit)
    return None


@dataclass
class ConstellationReport:
    core_size: bool
    weight: bool
    core_overlap: bool
    outside_multiplicity: bool
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.core_size and self.weight and self.core_overlap and self.outside_multiplicity

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "core_size": self.core_size,
            "weight": self.weight,
            "core_overlap": self.core_overlap,
            "outside_multiplicity": self.outside_multiplicity,
            "details": self.details,
        }


def verify_constellation(c: Constellation, P: ProbFormula, n: int, q: int) -> ConstellationReport:
    """Check the four defining conditions independently."""
    i = c.level
    details = {}
    # 1. |C| < eta * n**(1 - i/q), compared exactly after raising to the q-th power
    size = len(c.core)
    core_ok = c.eta > 0 and (Fraction(size) / c.eta) ** q < Fraction(n) ** (q - i)
    details["core_size"] = size
    # 2. weight
    support = set(P.support_sets())
    outside_support = [Q for Q in c.family if Q not in support]
    weight = P.weight_of([Q for Q in c.family if Q in support]) if c.family else Fraction(0)
    weight_ok = not outside_support and weight >= Fraction(1, q + 1)
    details["weight"] = str(weight)
    if outside_support:
        details["not_in_support"] = [list(Q) for Q in outside_support]
    # 3. every member meets the core in q - i indices
    cs = set(c.core)
    bad_overlap = [list(Q) for Q in c.family if len(cs.intersection(Q)) != q - i]
    details["bad_overlap"] = bad_overlap
    # 4. outside indices lie in few members
    counts = Counter(j for Q in c.family for j in Q if j not in cs)
    if i > 1:
        if c.outside_limit is None:
            crowded = sorted(j for j, k in counts.items() if k ** q > n ** (i - 1))
        else:
            crowded = sorted(j for j, k in counts.items() if k > c.outside_limit)
    else:
        crowded = []
    details["crowded_indices"] = crowded
    return ConstellationReport(core_ok, weight_ok, not bad_overlap, not crowded, details)


# -- pompoms ------------------------------------------------------------------


@dataclass(frozen=True)
class Pompom:
    core: IndexSet
    members: Family
    level: int

    def __post_init__(self):
        cs = set(self.core)
        used = set()
        for Q in self.members:
            out = set(Q) - cs
            if len(out) != self.level:
                raise ValidationError(f"member {Q} has {len(out)} indices outside the core, expected {self.level}")
            if out & used:
                raise ValidationError(f"member {Q} overlaps another member outside the core")
            used |= out

    def __len__(self):
        return len(self.members)

    def outside(self, Q: IndexSet) -> IndexSet:
        cs = set(self.core)
        return tuple(j for j in Q if j not in cs)

    def to_json(self) -> dict:
        return {"core": list(self.core), "level": self.level, "members": [list(Q) for Q in self.members]}

    @classmethod
    def from_json(cls, data: dict) -> "Pompom":
        members = tuple(tuple(sorted(int(j) for j in Q)) for Q in data["members"])
        return cls(tuple(int(j) for j in data["core"]), members, int(data["level"]))


def pompom_violations(W: Pompom) -> List[str]:
    """Re-check the pompom invariants pairwise (independent of the constructor)."""
    out = []
    cs = set(W.core)
    for Q in W.members:
        if len(set(Q) - cs) != W.level:
            out.append(f"{Q}: wrong outside size")
    for A, B in itertools.combinations(W.members, 2):
        if (set(A) - cs) & (set(B) - cs):
            out.append(f"{A} and {B} overlap outside the core")
    return out


def default_pompom_size(epsilon, n: int, q: int, i: int) -> int:
    """``ceil(epsilon * n**(1-(i-1)/q) / (3i))``."""
    return max(1, math.ceil(float(as_fraction(epsilon)) * n ** (1 - (i - 1) / q) / (3 * i)))


def _greedy_pompom(candidates: Iterable[IndexSet], core: IndexSet, limit: int) -> List[IndexSet]:
    cs = set(core)
    used, picked = set(), []
    for Q in candidates:
        if len(picked) >= limit:
            break
        out = set(Q) - cs
        if out & used:
            continue
        picked.append(Q)
        used |= out
    return picked


@dataclass
class RevealingSet:
    core: IndexSet
    level: int
    size_target: int
    pompoms: Dict[Tuple[int, ...], Pompom]
    shortfall: Dict[Tuple[int, ...], int] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.shortfall

    def to_json(self, alphabet=None) -> dict:
        def key(sigma):
            return alphabet.decode(sigma) if alphabet is not None else ",".join(map(str, sigma))

        return {
            "core": list(self.core),
            "level": self.level,
            "size_target": self.size_target,
            "pompoms": {key(s): [list(Q) for Q in W.members] for s, W in self.pompoms.items()},
            "shortfall": {key(s): k for s, k in self.shortfall.items()},
        }


def extract_revealing_pompoms(
    c: Constellation,
    w: Sequence[int],
    prop: Property,
    epsilon,
    size_target: Optional[int] = None,
    *,
    strict: bool = True,
    cap_sigma: int = DEFAULT_ENUM_CAP,
) -> RevealingSet:
    """For every assignment to the core, a pompom of witnesses against the substituted word.

    Members of ``c.family`` that witness against ``w`` with ``sigma`` written
    on the core are packed greedily (pairwise disjoint outside the core) up to
    ``size_target``.  Any assignment that falls short raises
    :class:`HypothesisError` unless ``strict`` is False, in which case the
    shortfall is recorded on the result.
    """
    n = prop.n
    q = len(c.family[0]) if c.family else c.level
    if size_target is None:
        size_target = default_pompom_size(epsilon, n, q, c.level)
    check_enumeration(prop.alphabet.size, len(c.core), cap_sigma)
    pompoms, shortfall = {}, {}
    for sigma in prop.alphabet.words(len(c.core)):
        u = substitute(w, sigma, c.core)
        wit = [Q for Q in c.family if is_witness(Q, u, prop)]
        picked = _greedy_pompom(wit, c.core, size_target)
        pompoms[sigma] = Pompom(c.core, tuple(picked), c.level)
        if len(picked) < size_target:
            shortfall[sigma] = size_target - len(picked)
    result = RevealingSet(c.core, c.level, size_target, pompoms, shortfall)
    if shortfall and strict:
        raise HypothesisError(
            f"{len(shortfall)} core assignments have fewer than {size_target} disjoint witnesses",
            result.to_json(prop.alphabet),
        )
    return result


@dataclass
class DiscerningSet:
    core: IndexSet
    level: int
    size_target: int
    pompoms: List[Pompom]
    weight: Fraction

    def members(self) -> List[IndexSet]:
        return [Q for W in self.pompoms for Q in W.members]

    def violations(self, P: ProbFormula, q: int) -> List[str]:
        out = []
        for k, W in enumerate(self.pompoms):
            if tuple(W.core) != tuple(self.core):
                out.append(f"pompom {k} has a different core")
            if len(W) != self.size_target:
                out.append(f"pompom {k} has {len(W)} members, expected {self.size_target}")
            out.extend(f"pompom {k}: {v}" for v in pompom_violations(W))
        mem = self.members()
        if len(set(mem)) != len(mem):
            out.append("a set appears in two pompoms")
        if P.weight_of(mem) < Fraction(1, 2 * (q + 1)):
            out.append("union weight below 1/(2(q+1))")
        return out

    def to_json(self) -> dict:
        return {
            "core": list(self.core),
            "level": self.level,
            "size_target": self.size_target,
            "weight": str(self.weight),
            "pompoms": [[list(Q) for Q in W.members] for W in self.pompoms],
            "index_base": 0,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DiscerningSet":
        core = tuple(int(j) for j in data["core"])
        level = int(data["level"])
        pompoms = [
            Pompom(core, tuple(tuple(sorted(int(j) for j in Q)) for Q in members), level)
            for members in data["pompoms"]
        ]
        return cls(core, level, int(data["size_target"]), pompoms, as_fraction(data["weight"]))


def extract_discerning_pompoms(
    c: Constellation,
    P: ProbFormula,
    epsilon,
    size_target: Optional[int] = None,
) -> DiscerningSet:
    """Peel full-size pompoms off the constellation until little weight is left.

    Extraction continues while the remaining family weighs more than
    ``1/(2(q+1))``; a round that cannot fill a pompom raises
    :class:`HypothesisError`.
    """
    if not P.is_uniform():
        raise ValidationError("discerning pompoms need a formula that is uniform over its support")
    q = P.q
    if q == "mixed":
        raise ValidationError("discerning pompoms need a q-uniform formula")
    if size_target is None:
        size_target = default_pompom_size(epsilon, P.n, q, c.level)
    if size_target < 1:
        raise ValidationError("size_target must be at least 1")
    support = set(P.support_sets())
    remaining = [Q for Q in c.family if Q in support]
    stop = Fraction(1, 2 * (q + 1))
    pompoms: List[Pompom] = []
    while remaining and P.weight_of(remaining) > stop:
        picked = _greedy_pompom(remaining, c.core, size_target)
        if len(picked) < size_target:
            raise HypothesisError(
                f"round {len(pompoms) + 1}: only {len(picked)} of {size_target} disjoint members available",
                {
                    "round": len(pompoms) + 1,
                    "found": len(picked),
                    "size_target": size_target,
                    "remaining_weight": str(P.weight_of(remaining)),
                    "extracted": len(pompoms),
                },
            )
        pompoms.append(Pompom(c.core, tuple(picked), c.level))
        taken = set(picked)
        remaining = [Q for Q in remaining if Q not in taken]
    members = [Q for W in pompoms for Q in W.members]
    weight = P.weight_of(members) if members else Fraction(0)
    return DiscerningSet(c.core, c.level, size_target, pompoms, weight)
