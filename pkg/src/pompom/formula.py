"""Probabilistic constraints and formulas.

A non-adaptive test is represented as a distribution over constraints
``(Q, S)``: ``Q`` is a sorted query set and ``S`` an explicit table of
acceptance probabilities, one entry per assignment in ``alphabet**|Q|``
(canonical lexicographic order).  All weights and table entries are exact
``Fraction`` values.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import (
    DEFAULT_ENUM_CAP,
    Alphabet,
    IndexSet,
    PartialPropertyPair,
    Word,
    check_enumeration,
    check_index_set,
    check_word,
    is_far,
)
from .errors import ValidationError


def assignment_index(v: Sequence[int], k: int) -> int:
    """Position of assignment ``v`` in the canonical enumeration of ``k**len(v)``."""
    idx = 0
    for a in v:
        idx = idx * k + a
    return idx


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        # floats coming from JSON are taken at their shortest decimal repr
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class Constraint:
    query: IndexSet
    table: Tuple[Fraction, ...]

    def __post_init__(self):
        q = tuple(sorted(set(int(i) for i in self.query)))
        if len(q) != len(self.query):
            raise ValidationError(f"query set {self.query} has repeated indices")
        table = tuple(as_fraction(x) for x in self.table)
        if any(x < 0 or x > 1 for x in table):
            raise ValidationError(f"satisfaction values must lie in [0, 1] (query {q})")
        object.__setattr__(self, "query", q)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_function(cls, query: Iterable[int], alphabet_size: int, fn) -> "Constraint":
        """Tabulate ``fn(assignment)`` over every assignment to ``query``."""
        query = tuple(sorted(set(query)))
        alphabet = Alphabet.of_size(alphabet_size)
        return cls(query, tuple(as_fraction(fn(v)) for v in alphabet.words(len(query))))

    @classmethod
    def constant(cls, query: Iterable[int], alphabet_size: int, value=1) -> "Constraint":
        query = tuple(sorted(set(query)))
        return cls(query, (as_fraction(value),) * (alphabet_size ** len(query)))

    @property
    def size(self) -> int:
        return len(self.query)

    def value(self, v: Sequence[int], k: int) -> Fraction:
        return self.table[assignment_index(v, k)]

    def evaluate(self, w: Sequence[int], k: int) -> Fraction:
        """``S(w_Q)`` for a full word ``w``."""
        return self.table[assignment_index([w[i] for i in self.query], k)]

    def is_zero_one(self) -> bool:
        return all(x == 0 or x == 1 for x in self.table)

    def check_alphabet(self, k: int) -> None:
        if len(self.table) != k ** len(self.query):
            raise ValidationError(
                f"table for query {self.query} has {len(self.table)} entries, "
                f"expected {k}**{len(self.query)}"
            )


@dataclass(frozen=True)
class ProbFormula:
    """Constraints with pairwise-distinct query sets and an exact distribution over them.

    Constraints of weight zero may be present; the support is the set of
    positive-weight constraints.  ``one_sided`` marks formulas whose tables are
    the canonical witness-based ones.
    """

    n: int
    alphabet: Alphabet
    constraints: Tuple[Constraint, ...]
    weights: Tuple[Fraction, ...]
    support_bound: Optional[int] = None
    one_sided: bool = False

    def __post_init__(self):
        constraints = tuple(self.constraints)
        weights = tuple(as_fraction(x) for x in self.weights)
        if len(constraints) != len(weights):
            raise ValidationError("one weight per constraint is required")
        if not constraints:
            raise ValidationError("a formula needs at least one constraint")
        k = self.alphabet.size
        seen = set()
        for c in constraints:
            c.check_alphabet(k)
            check_index_set(c.query, self.n)
            if c.query in seen:
                raise ValidationError(f"duplicate query set {c.query}; merge duplicates first")
            seen.add(c.query)
        if any(x < 0 for x in weights):
            raise ValidationError("weights must be nonnegative")
        total = sum(weights, Fraction(0))
        if total != 1:
            raise ValidationError(f"weights sum to {total}, not 1")
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "weights", weights)
        if self.support_bound is not None and len(self.support()) > self.support_bound:
            raise ValidationError(
                f"support size {len(self.support())} exceeds declared bound {self.support_bound}"
            )

    # -- views -----------------------------------------------------------

    def support(self) -> List[int]:
        """Positions of the positive-weight constraints."""
        return [i for i, x in enumerate(self.weights) if x > 0]

    def support_sets(self) -> List[IndexSet]:
        return [self.constraints[i].query for i in self.support()]

    def support_formula(self) -> "ProbFormula":
        """The same formula with zero-weight constraints dropped."""
        keep = self.support()
        if len(keep) == len(self.constraints):
            return self
        return self.replace(
            constraints=tuple(self.constraints[i] for i in keep),
            weights=tuple(self.weights[i] for i in keep),
        )

    def weight_map(self) -> Dict[IndexSet, Fraction]:
        return {c.query: x for c, x in zip(self.constraints, self.weights)}

    def constraint_map(self) -> Dict[IndexSet, Constraint]:
        return {c.query: c for c in self.constraints}

    def weight_of(self, queries: Iterable[Iterable[int]]) -> Fraction:
        wm = self.weight_map()
        total = Fraction(0)
        for Q in set(tuple(sorted(Q)) for Q in queries):
            if Q not in wm:
                raise ValidationError(f"query set {Q} is not a constraint of the formula")
            total += wm[Q]
        return total

    @property
    def q(self):
        """Common query-set size, or ``"mixed"``."""
        sizes = {c.size for c in self.constraints}
        return sizes.pop() if len(sizes) == 1 else "mixed"

    def is_zero_one(self) -> bool:
        return all(self.constraints[i].is_zero_one() for i in self.support())

    def equitability(self) -> Fraction:
        """Smallest beta with mu(C1) <= beta * mu(C2) over the support."""
        sup = [self.weights[i] for i in self.support()]
        return max(sup) / min(sup)

    def is_uniform(self) -> bool:
        sup = {self.weights[i] for i in self.support()}
        return len(sup) == 1

    def is_combinatorial(self) -> bool:
        return self.is_zero_one() and self.is_uniform()

    def replace(self, **changes) -> "ProbFormula":
        fields = dict(
            n=self.n,
            alphabet=self.alphabet,
            constraints=self.constraints,
            weights=self.weights,
            support_bound=self.support_bound,
            one_sided=self.one_sided,
        )
        fields.update(changes)
        return ProbFormula(**fields)

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        k = self.alphabet.size
        out = {
            "n": self.n,
            "alphabet": list(self.alphabet.symbols),
            "index_base": 0,
            "constraints": [
                {
                    "Q": list(c.query),
                    "S": {
                        self.alphabet.decode(v): str(x)
                        for v, x in zip(self.alphabet.words(c.size), c.table)
                    },
                }
                for c in self.constraints
            ],
            "mu": [str(x) for x in self.weights],
        }
        if self.support_bound is not None:
            out["support_bound"] = self.support_bound
        if self.one_sided:
            out["one_sided"] = True
        assert all(len(c["S"]) == k ** len(c["Q"]) for c in out["constraints"])
        return out

    @classmethod
    def from_json(cls, data: dict, merge: bool = False) -> "ProbFormula":
        try:
            alphabet = Alphabet(tuple(data["alphabet"]))
            n = int(data["n"])
            if len(data["constraints"]) != len(data["mu"]):
                raise ValidationError("constraints and mu have different lengths")
            raw = []
            for entry, mu in zip(data["constraints"], data["mu"]):
                Q = tuple(sorted(int(i) for i in entry["Q"]))
                table = _table_from_json(entry["S"], alphabet, len(Q))
                raw.append((Constraint(Q, table), as_fraction(mu)))
        except KeyError as exc:
            raise ValidationError(f"formula JSON missing field {exc.args[0]!r}") from None
        extra = dict(support_bound=data.get("support_bound"), one_sided=bool(data.get("one_sided", False)))
        if merge:
            return merge_duplicate_queries(raw, n, alphabet, **extra)
        return cls(n, alphabet, tuple(c for c, _ in raw), tuple(x for _, x in raw), **extra)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _table_from_json(S: dict, alphabet: Alphabet, size: int) -> Tuple[Fraction, ...]:
    table = []
    for v in alphabet.words(size):
        key = alphabet.decode(v)
        if key not in S:
            raise ValidationError(f"satisfaction table missing assignment {key!r}")
        table.append(as_fraction(S[key]))
    if len(S) != len(table):
        raise ValidationError("satisfaction table has entries outside the alphabet")
    return tuple(table)


@dataclass(frozen=True)
class TestDeclaration:
    """Claimed parameters of a (partial) test."""

    __test__ = False  # keep pytest from collecting this

    pair: PartialPropertyPair
    epsilon: Fraction
    delta: Fraction
    q: Optional[int] = None
    sided: str = "two"

    def __post_init__(self):
        eps, delta = as_fraction(self.epsilon), as_fraction(self.delta)
        if not 0 < eps <= 1:
            raise ValidationError("epsilon must lie in (0, 1]")
        if not 0 <= delta < Fraction(1, 2):
            raise ValidationError("delta must lie in [0, 1/2)")
        if self.sided not in ("one", "two"):
            raise ValidationError("sided must be 'one' or 'two'")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", delta)


class Sureness(enum.Enum):
    SURE_HIGH = "sure_high"
    SURE_LOW = "sure_low"
    UNSURE = "unsure"


def satisfaction(P: ProbFormula, w: Sequence[int]) -> Fraction:
    """Expected value of ``S(w_Q)`` under the formula's distribution."""
    w = check_word(w, P.n, P.alphabet.size)
    k = P.alphabet.size
    total = Fraction(0)
    for c, x in zip(P.constraints, P.weights):
        if x:
            total += x * c.evaluate(w, k)
    return total


def merge_duplicate_queries(raw, n: int, alphabet: Alphabet, **extra) -> ProbFormula:
    """Combine constraints sharing a query set into one weighted-average constraint.

    ``raw`` is a sequence of ``(Constraint, weight)`` pairs whose weights sum to
    one.  Satisfaction is preserved on every word.  Order of first appearance
    is kept.
    """
    raw = list(raw)
    if not raw:
        raise ValidationError("cannot build a formula from no constraints")
    groups: Dict[IndexSet, List[Tuple[Constraint, Fraction]]] = {}
    for c, x in raw:
        groups.setdefault(c.query, []).append((c, as_fraction(x)))
    constraints, weights = [], []
    for Q, members in groups.items():
        total = sum((x for _, x in members), Fraction(0))
        if len(members) == 1:
            constraints.append(members[0][0])
        elif total == 0:
            constraints.append(members[0][0])
        else:
            size = len(members[0][0].table)
            table = tuple(
                sum((x * c.table[j] for c, x in members), Fraction(0)) / total for j in range(size)
            )
            constraints.append(Constraint(Q, table))
        weights.append(total)
    return ProbFormula(n, alphabet, tuple(constraints), tuple(weights), **extra)


def condition(P: ProbFormula, subset: Iterable[Iterable[int]]) -> ProbFormula:
    """Restrict the formula to the constraints whose query sets are in ``subset``."""
    keep = {tuple(sorted(Q)) for Q in subset}
    mass = P.weight_of(keep)
    if mass == 0:
        raise ValidationError("cannot condition on an event of weight zero")
    constraints, weights = [], []
    for c, x in zip(P.constraints, P.weights):
        if c.query in keep:
            constraints.append(c)
            weights.append(x / mass)
    return P.replace(constraints=tuple(constraints), weights=tuple(weights))


def sureness(P: ProbFormula, w: Sequence[int], delta) -> Sureness:
    delta = as_fraction(delta)
    if not 0 <= delta < Fraction(1, 2):
        raise ValidationError("delta must lie in [0, 1/2)")
    s = satisfaction(P, w)
    if s >= 1 - delta:
        return Sureness.SURE_HIGH
    if s <= delta:
        return Sureness.SURE_LOW
    return Sureness.UNSURE


@dataclass
class ValidityReport:
    valid: bool
    min_inner: Optional[Fraction] = None
    min_inner_word: Optional[Word] = None
    max_far: Optional[Fraction] = None
    max_far_word: Optional[Word] = None
    far_count: int = 0
    notes: List[str] = field(default_factory=list)

    def __bool__(self):
        return self.valid

    def to_json(self, alphabet: Alphabet) -> dict:
        def word(w):
            return None if w is None else alphabet.decode(w)

        return {
            "valid": self.valid,
            "min_inner": None if self.min_inner is None else str(self.min_inner),
            "min_inner_word": word(self.min_inner_word),
            "max_far": None if self.max_far is None else str(self.max_far),
            "max_far_word": word(self.max_far_word),
            "far_count": self.far_count,
            "notes": self.notes,
        }


def is_valid_test(P: ProbFormula, decl: TestDeclaration, cap: int = DEFAULT_ENUM_CAP) -> ValidityReport:
    """Exhaustively check completeness on L' and soundness on epsilon-far words."""
    pair = decl.pair
    if pair.n != P.n or pair.alphabet.size != P.alphabet.size:
        raise ValidationError("formula and declaration describe different word spaces")
    check_enumeration(P.alphabet.size, P.n, cap)
    report = ValidityReport(valid=True)
    for w in sorted(pair.inner.members):
        s = satisfaction(P, w)
        if report.min_inner is None or s < report.min_inner:
            report.min_inner, report.min_inner_word = s, w
    for w in P.alphabet.words(P.n):
        if not is_far(w, pair.outer, decl.epsilon):
            continue
        report.far_count += 1
        s = satisfaction(P, w)
        if report.max_far is None or s > report.max_far:
            report.max_far, report.max_far_word = s, w
    if report.min_inner is not None:
        need = Fraction(1) if decl.sided == "one" else 1 - decl.delta
        if report.min_inner < need:
            report.valid = False
            report.notes.append(f"completeness: satisfaction {report.min_inner} < {need}")
    if report.max_far is not None and report.max_far > decl.delta:
        report.valid = False
        report.notes.append(f"soundness: satisfaction {report.max_far} > {decl.delta}")
    return report


def load_formula(path, merge: bool = False) -> ProbFormula:
    with open(path) as fh:
        return ProbFormula.from_json(json.load(fh), merge=merge)
