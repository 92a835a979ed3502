"""Words, alphabets, properties and index-set helpers.

Words are plain tuples of symbol indices (0-based positions into the
alphabet).  Index sets are 0-based as well; anything that orders an index set
uses ascending order, so ``restrict`` and ``substitute`` always agree.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Sequence, Tuple

from .errors import CapExceededError, InfiniteDistanceError, ValidationError

Word = Tuple[int, ...]
IndexSet = Tuple[int, ...]

#: Default cap on |alphabet|**n for exhaustive enumeration.
DEFAULT_ENUM_CAP = 2 ** 20


@dataclass(frozen=True)
class Alphabet:
    symbols: Tuple[str, ...]

    def __post_init__(self):
        syms = tuple(str(s) for s in self.symbols)
        if not syms:
            raise ValidationError("alphabet must contain at least one symbol")
        if len(set(syms)) != len(syms):
            raise ValidationError(f"alphabet symbols must be distinct: {syms}")
        object.__setattr__(self, "symbols", syms)

    @classmethod
    def binary(cls) -> "Alphabet":
        return cls(("0", "1"))

    @classmethod
    def of_size(cls, k: int) -> "Alphabet":
        return cls(tuple(str(i) for i in range(k)))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self):
        return len(self.symbols)

    @property
    def compact(self) -> bool:
        """True when every symbol is one character, so words print as plain strings."""
        return all(len(s) == 1 for s in self.symbols)

    def encode(self, text: str | Sequence[str]) -> Word:
        """Turn a string (or a sequence of symbols) into a word."""
        if isinstance(text, str):
            parts = list(text) if self.compact else (text.split(",") if text else [])
        else:
            parts = [str(t) for t in text]
        index = {s: i for i, s in enumerate(self.symbols)}
        try:
            return tuple(index[p] for p in parts)
        except KeyError as exc:
            raise ValidationError(f"symbol {exc.args[0]!r} not in alphabet {self.symbols}") from None

    def decode(self, word: Sequence[int]) -> str:
        sep = "" if self.compact else ","
        return sep.join(self.symbols[a] for a in word)

    def words(self, length: int) -> Iterator[Word]:
        """All words of the given length in canonical (lexicographic) order."""
        return itertools.product(range(self.size), repeat=length)


def check_word(w: Sequence[int], n: Optional[int] = None, alphabet_size: Optional[int] = None) -> Word:
    w = tuple(int(a) for a in w)
    if n is not None and len(w) != n:
        raise ValidationError(f"word has length {len(w)}, expected {n}")
    if alphabet_size is not None and any(a < 0 or a >= alphabet_size for a in w):
        raise ValidationError(f"word {w} uses a letter outside alphabet of size {alphabet_size}")
    return w


def check_index_set(Q: Iterable[int], n: int) -> IndexSet:
    """Sorted, duplicate-free tuple of indices, each in ``range(n)``."""
    Q = tuple(sorted(set(int(i) for i in Q)))
    if Q and (Q[0] < 0 or Q[-1] >= n):
        raise ValidationError(f"index set {Q} not contained in [0, {n})")
    return Q


def enumeration_size(alphabet_size: int, length: int) -> int:
    return alphabet_size ** length


def check_enumeration(alphabet_size: int, length: int, cap: int = DEFAULT_ENUM_CAP) -> None:
    size = enumeration_size(alphabet_size, length)
    if size > cap:
        raise CapExceededError(f"{alphabet_size}^{length} = {size} words exceeds enumeration cap {cap}")


@dataclass(frozen=True)
class Property:
    """An explicit finite property L of words of length ``n``.

    ``members`` is authoritative.  A ``predicate`` may ride along for
    generators; :meth:`check_predicate` confirms the two agree.
    """

    n: int
    alphabet: Alphabet
    members: frozenset = field(default_factory=frozenset)
    predicate: Optional[Callable[[Word], bool]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        members = frozenset(check_word(m, self.n, self.alphabet.size) for m in self.members)
        object.__setattr__(self, "members", members)

    @classmethod
    def from_predicate(cls, n: int, alphabet: Alphabet, predicate, cap: int = DEFAULT_ENUM_CAP):
        check_enumeration(alphabet.size, n, cap)
        members = frozenset(w for w in alphabet.words(n) if predicate(w))
        return cls(n, alphabet, members, predicate)

    @classmethod
    def from_strings(cls, n: int, alphabet: Alphabet, strings: Iterable[str]) -> "Property":
        return cls(n, alphabet, frozenset(alphabet.encode(s) for s in strings))

    def __contains__(self, w) -> bool:
        return tuple(w) in self.members

    def __len__(self):
        return len(self.members)

    def sorted_members(self) -> list:
        return sorted(self.members)

    def check_predicate(self, cap: int = DEFAULT_ENUM_CAP) -> bool:
        if self.predicate is None:
            return True
        check_enumeration(self.alphabet.size, self.n, cap)
        return all(bool(self.predicate(w)) == (w in self.members) for w in self.alphabet.words(self.n))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "alphabet": list(self.alphabet.symbols),
            "members": sorted(self.alphabet.decode(m) for m in self.members),
            "index_base": 0,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Property":
        try:
            alphabet = Alphabet(tuple(data["alphabet"]))
            return cls.from_strings(int(data["n"]), alphabet, data["members"])
        except KeyError as exc:
            raise ValidationError(f"property JSON missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class PartialPropertyPair:
    """The pair (L', L) with L' a subset of L."""

    inner: Property
    outer: Property

    def __post_init__(self):
        if self.inner.n != self.outer.n or self.inner.alphabet != self.outer.alphabet:
            raise ValidationError("inner and outer properties live over different word spaces")
        if not self.inner.members <= self.outer.members:
            raise ValidationError("inner property must be a subset of the outer property")

    @classmethod
    def full(cls, prop: Property) -> "PartialPropertyPair":
        return cls(prop, prop)

    @property
    def n(self) -> int:
        return self.outer.n

    @property
    def alphabet(self) -> Alphabet:
        return self.outer.alphabet

    def is_nontrivial(self, epsilon, cap: int = DEFAULT_ENUM_CAP) -> bool:
        """Some word of L' exists and some word is epsilon-far from L."""
        if not self.inner.members:
            return False
        return any(True for _ in far_words(self.outer, epsilon, cap))


def hamming_distance(w: Sequence[int], v: Sequence[int]) -> Fraction:
    """Normalized Hamming distance as an exact rational."""
    if len(w) != len(v):
        raise ValidationError(f"length mismatch: {len(w)} vs {len(v)}")
    if not w:
        return Fraction(0)
    return Fraction(sum(1 for a, b in zip(w, v) if a != b), len(w))


def _mismatches(w: Sequence[int], v: Sequence[int]) -> int:
    return sum(1 for a, b in zip(w, v) if a != b)


def distance_to_property(w: Sequence[int], prop: Property) -> Fraction:
    if not prop.members:
        raise InfiniteDistanceError("distance to an empty property is infinite")
    w = check_word(w, prop.n, prop.alphabet.size)
    if w in prop.members:
        return Fraction(0)
    if prop.n == 0:
        return Fraction(0)
    return Fraction(min(_mismatches(w, v) for v in prop.members), prop.n)


def is_far(w: Sequence[int], prop: Property, epsilon) -> bool:
    """True when no member agrees with ``w`` outside some set of at most epsilon*n indices.

    With normalized Hamming distance this is ``distance > epsilon`` (strict).
    An empty property makes every word far.
    """
    if not prop.members:
        return True
    return distance_to_property(w, prop) > Fraction(epsilon)


def far_words(prop: Property, epsilon, cap: int = DEFAULT_ENUM_CAP) -> Iterator[Word]:
    check_enumeration(prop.alphabet.size, prop.n, cap)
    for w in prop.alphabet.words(prop.n):
        if is_far(w, prop, epsilon):
            yield w


def restrict(w: Sequence[int], Q: Iterable[int]) -> Word:
    """Sub-word of ``w`` at the sorted positions of ``Q``."""
    idx = sorted(set(Q))
    if idx and (idx[0] < 0 or idx[-1] >= len(w)):
        raise ValidationError(f"index set {idx} out of range for word of length {len(w)}")
    return tuple(w[i] for i in idx)


def substitute(w: Sequence[int], sigma: Sequence[int], C: Iterable[int]) -> Word:
    """Replace the sub-word of ``w`` on ``C`` with ``sigma`` (placed in sorted order of ``C``)."""
    idx = sorted(set(C))
    if len(idx) != len(sigma):
        raise ValidationError(f"|sigma| = {len(sigma)} but |C| = {len(idx)}")
    if idx and (idx[0] < 0 or idx[-1] >= len(w)):
        raise ValidationError(f"index set {idx} out of range for word of length {len(w)}")
    out = list(w)
    for i, a in zip(idx, sigma):
        out[i] = a
    return tuple(out)


def load_property(path) -> Property:
    with open(path) as fh:
        return Property.from_json(json.load(fh))
