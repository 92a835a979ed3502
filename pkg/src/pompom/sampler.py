"""Sample-based testers: every index is queried independently with rate ``p``.

A 1-sided sampler rejects exactly when the sampled index set is a witness
against the input.  A 2-sided sampler carries a combinatorial formula, a core
``C`` and a discerning set ``J`` of pompoms; it accepts when some assignment
to ``C`` has average pompom acceptance strictly above 1/2 on the sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import DEFAULT_ENUM_CAP, IndexSet, PartialPropertyPair, Property, check_enumeration, check_word, substitute
from .errors import HypothesisError, ValidationError
from .formula import ProbFormula, as_fraction
from .structures import (
    DiscerningSet,
    Pompom,
    build_scm,
    extract_discerning_pompoms,
    find_constellation,
    verify_constellation,
)
from .witness import is_witness

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class SampleDraw:
    U: IndexSet
    seed: int
    p: float


def sample_mask(p, n: int, seed: int) -> np.ndarray:
    """Boolean inclusion mask; index ``j`` is in when its uniform draw is below ``p``.

    Raising ``p`` with the same seed can only add indices.
    """
    p = float(p)
    if not 0 <= p <= 1:
        raise ValidationError(f"sampling rate {p} outside [0, 1]")
    return np.random.default_rng(seed).random(n) < p


def draw_sample(p, n: int, seed: int) -> SampleDraw:
    mask = sample_mask(p, n, seed)
    return SampleDraw(tuple(int(j) for j in np.flatnonzero(mask)), int(seed), float(p))


@dataclass(frozen=True)
class SamplingRate:
    p: float
    alpha: float
    side: str
    threshold: float
    above_threshold: bool
    clamped: bool


def sampling_threshold(q: int, alphabet_size: int, epsilon, side: str) -> float:
    L = math.log2(alphabet_size)
    eps = float(as_fraction(epsilon))
    if side == "one":
        return (24 * q * (q + 1) ** 2 * L ** 2 / eps) ** q
    return (24 * q ** 10 * L ** 2 / eps) ** q


def sampling_alpha(q: int, alphabet_size: int, epsilon, side: str) -> float:
    eps = float(as_fraction(epsilon))
    ln = math.log(alphabet_size)
    if side == "one":
        return 15 * ln * q * (q + 1) ** 2 / eps
    return 1e3 * ln * q ** 4 / eps


def compute_sampling_rate(q: int, alphabet_size: int, epsilon, n: int, side: str = "one") -> SamplingRate:
    """``alpha * n**(-1/q**2)`` clamped to ``[0, 1]``, plus the size-threshold flag."""
    if side not in ("one", "two"):
        raise ValidationError("side must be 'one' or 'two'")
    if q < 1 or n < 1 or alphabet_size < 1:
        raise ValidationError("q, n and alphabet size must be positive")
    alpha = sampling_alpha(q, alphabet_size, epsilon, side)
    raw = alpha * n ** (-1.0 / q ** 2)
    p = min(1.0, max(0.0, raw))
    threshold = sampling_threshold(q, alphabet_size, epsilon, side)
    return SamplingRate(p, alpha, side, threshold, n > threshold, raw != p)


# -- 1-sided ------------------------------------------------------------------


def one_sided_accepts(prop: Property, w: Sequence[int], U: Sequence[int]) -> bool:
    return not is_witness(U, w, prop)


def run_one_sided_sampler(prop: Property, w: Sequence[int], p, seed: int) -> Tuple[bool, SampleDraw]:
    """Draw ``U`` and reject iff it is a witness against ``w``."""
    w = check_word(w, prop.n, prop.alphabet.size)
    draw = draw_sample(p, prop.n, seed)
    return one_sided_accepts(prop, w, draw.U), draw


# -- 2-sided ------------------------------------------------------------------


def gamma(sigma: Sequence[int], U: Sequence[int], W: Pompom, P: ProbFormula, w: Sequence[int]) -> Fraction:
    """Average acceptance of ``w`` with ``sigma`` on the core over members fully outside-sampled."""
    if len(sigma) != len(W.core):
        raise ValidationError(f"|sigma| = {len(sigma)} but the core has {len(W.core)} indices")
    cmap = P.constraint_map()
    wmap = P.weight_map()
    for Q in W.members:
        if Q not in cmap or wmap[Q] == 0:
            raise ValidationError(f"pompom member {Q} is not in the formula's support")
    Uset = set(U)
    u = substitute(w, sigma, W.core)
    k = P.alphabet.size
    inside = [Q for Q in W.members if set(W.outside(Q)) <= Uset]
    if not inside:
        return HALF
    return sum((cmap[Q].evaluate(u, k) for Q in inside), Fraction(0)) / len(inside)


@dataclass
class SampleTester:
    """A synthesized sampling tester.

    ``side == "one"`` needs ``prop``; ``side == "two"`` needs ``formula`` and
    ``discerning`` (whose core is the tester's core).
    """

    p: Fraction
    side: str
    n: int
    prop: Optional[Property] = None
    formula: Optional[ProbFormula] = None
    discerning: Optional[DiscerningSet] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p = as_fraction(self.p)
        if not 0 <= self.p <= 1:
            raise ValidationError("p must lie in [0, 1]")
        if self.side == "one":
            if self.prop is None:
                raise ValidationError("a 1-sided tester needs a property")
        elif self.side == "two":
            if self.formula is None or self.discerning is None:
                raise ValidationError("a 2-sided tester needs a formula and a discerning set")
        else:
            raise ValidationError("side must be 'one' or 'two'")

    @property
    def alphabet(self):
        return self.prop.alphabet if self.side == "one" else self.formula.alphabet

    @property
    def core(self) -> IndexSet:
        return self.discerning.core if self.discerning is not None else ()

    def decider(self, w: Sequence[int], cap_sigma: int = DEFAULT_ENUM_CAP) -> "Decider":
        return Decider(self, w, cap_sigma)

    def to_json(self) -> dict:
        out = {"p": str(self.p), "side": self.side, "n": self.n, "index_base": 0}
        if self.side == "one":
            out["property"] = self.prop.to_json()
        else:
            out["formula"] = self.formula.to_json()
            out["formula_fingerprint"] = self.formula.fingerprint()
            out["core"] = list(self.core)
            out["discerning"] = self.discerning.to_json()
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SampleTester":
        try:
            side = data["side"]
            meta = dict(data.get("meta") or {})
            if side == "one":
                return cls(as_fraction(data["p"]), side, int(data["n"]), prop=Property.from_json(data["property"]), meta=meta)
            return cls(
                as_fraction(data["p"]),
                side,
                int(data["n"]),
                formula=ProbFormula.from_json(data["formula"]),
                discerning=DiscerningSet.from_json(data["discerning"]),
                meta=meta,
            )
        except KeyError as exc:
            raise ValidationError(f"tester JSON missing field {exc.args[0]!r}") from None


class Decider:
    """Decision rule of a tester for one fixed input word, reusable across samples.

    For 2-sided testers the member acceptance values are tabulated once per
    core assignment, so each sample only costs a membership scan.
    """

    def __init__(self, T: SampleTester, w: Sequence[int], cap_sigma: int = DEFAULT_ENUM_CAP):
        self.T = T
        self.w = check_word(w, T.n, T.alphabet.size)
        if T.side == "two":
            D = T.discerning
            k = T.alphabet.size
            check_enumeration(k, len(D.core), cap_sigma)
            cmap = T.formula.constraint_map()
            self.sigmas = list(T.alphabet.words(len(D.core)))
            # per pompom: list of (outside index tuple, per-sigma values)
            self.tables = []
            subs = [substitute(self.w, s, D.core) for s in self.sigmas]
            for W in D.pompoms:
                rows = []
                for Q in W.members:
                    c = cmap[Q]
                    rows.append((W.outside(Q), [c.evaluate(u, k) for u in subs]))
                self.tables.append(rows)

    def gammas(self, U: Sequence[int]) -> Dict[Tuple[int, ...], Fraction]:
        Uset = set(U)
        sums = [Fraction(0)] * len(self.sigmas)
        J = len(self.tables)
        for rows in self.tables:
            inside = [vals for out, vals in rows if Uset.issuperset(out)]
            if not inside:
                for s in range(len(sums)):
                    sums[s] += HALF
                continue
            m = len(inside)
            for s in range(len(sums)):
                sums[s] += sum((v[s] for v in inside), Fraction(0)) / m
        return {sig: (total / J if J else HALF) for sig, total in zip(self.sigmas, sums)}

    def accepts(self, U: Sequence[int]) -> bool:
        if self.T.side == "one":
            return one_sided_accepts(self.T.prop, self.w, U)
        return any(g > HALF for g in self.gammas(U).values())


def run_two_sided_sampler(
    T: SampleTester, w: Sequence[int], seed: int, cap_sigma: int = DEFAULT_ENUM_CAP
) -> Tuple[bool, SampleDraw, Dict[Tuple[int, ...], Fraction]]:
    """Draw ``U``; accept iff some core assignment has gamma strictly above 1/2."""
    if T.side != "two":
        raise ValidationError("expected a 2-sided tester")
    d = Decider(T, w, cap_sigma)
    draw = draw_sample(T.p, T.n, seed)
    g = d.gammas(draw.U)
    return any(v > HALF for v in g.values()), draw, g


def run_sampler(T: SampleTester, w: Sequence[int], seed: int, cap_sigma: int = DEFAULT_ENUM_CAP) -> Tuple[bool, SampleDraw]:
    draw = draw_sample(T.p, T.n, seed)
    return Decider(T, w, cap_sigma).accepts(draw.U), draw


def synthesize_one_sided_sampler(prop: Property, epsilon, q: int, p=None) -> SampleTester:
    if p is None:
        p = compute_sampling_rate(q, prop.alphabet.size, epsilon, prop.n, "one").p
    return SampleTester(as_fraction(p), "one", prop.n, prop=prop)


def synthesize_two_sided_sampler(
    P: ProbFormula,
    pair: Optional[PartialPropertyPair],
    epsilon,
    q: Optional[int] = None,
    overrides: Optional[Mapping] = None,
) -> SampleTester:
    """SCM -> constellation -> discerning set, packaged with the sampling rate.

    Override keys: ``thresholds`` (list of ``q+1`` ints), ``eta``,
    ``size_target``, ``p``.  Only the support of ``P`` drives the structure.
    """
    ov = dict(overrides or {})
    if not P.is_combinatorial():
        raise ValidationError("2-sided synthesis needs a combinatorial formula")
    if pair is not None and (pair.n != P.n or pair.alphabet.size != P.alphabet.size):
        raise ValidationError("formula and property pair describe different word spaces")
    fq = P.q
    if fq == "mixed":
        raise ValidationError("2-sided synthesis needs equal-size query sets")
    q = fq if q is None else int(q)
    if q != fq:
        raise ValidationError(f"declared q={q} but the formula queries {fq} indices")
    scm = build_scm(P.support_sets(), P.n, q, ov.get("thresholds"))
    c = find_constellation(scm, P, ov.get("eta"))
    if c is None:
        raise HypothesisError(
            "no constellation: level-0 match weight exceeds 1/(q+1) or no level is heavy enough",
            {"level_weights": [str(x) for x in scm.level_weights(P)]},
        )
    report = verify_constellation(c, P, P.n, q)
    if not report.ok:
        raise HypothesisError("constellation failed verification", report.to_json())
    D = extract_discerning_pompoms(c, P, epsilon, ov.get("size_target"))
    if "p" in ov:
        p = as_fraction(ov["p"])
    else:
        p = as_fraction(compute_sampling_rate(q, P.alphabet.size, epsilon, P.n, "two").p)
    meta = {"level": c.level, "core_size": len(c.core), "pompoms": len(D.pompoms), "weight": str(D.weight)}
    return SampleTester(p, "two", P.n, formula=P, discerning=D, meta=meta)
