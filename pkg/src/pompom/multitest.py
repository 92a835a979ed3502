"""Answering many sampling testers from one shared sample."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from .core import check_word
from .errors import ValidationError
from .formula import as_fraction
from .rng import generator
from .sampler import Decider, SampleTester


def one_sided_reps(r: int) -> int:
    return max(1, math.ceil(math.log2(2 * r)))


def two_sided_reps(r: int) -> int:
    return max(1, math.ceil(10 * math.log2(r))) if r > 1 else 1


@dataclass
class MultiTestPlan:
    testers: List[SampleTester]
    reps: List[int]
    delta: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if len(self.reps) != len(self.testers):
            raise ValidationError("one repetition count per tester is required")
        if any(int(k) < 1 for k in self.reps):
            raise ValidationError("repetition counts must be at least 1")
        self.reps = [int(k) for k in self.reps]
        self.delta = as_fraction(self.delta)
        if self.testers:
            t0 = self.testers[0]
            for T in self.testers[1:]:
                if T.p != t0.p:
                    raise ValidationError("all testers in a plan must share one sampling rate")
                if T.n != t0.n or T.alphabet.size != t0.alphabet.size:
                    raise ValidationError("all testers in a plan must share (n, alphabet)")

    @classmethod
    def default(cls, testers: Sequence[SampleTester], delta=Fraction(1, 2)) -> "MultiTestPlan":
        """Repetitions ``ceil(log 2r)`` for 1-sided testers and ``ceil(10 log r)`` for 2-sided ones."""
        r = len(testers)
        reps = [one_sided_reps(r) if T.side == "one" else two_sided_reps(r) for T in testers]
        return cls(list(testers), reps, delta)

    @property
    def n(self) -> int:
        return self.testers[0].n

    @property
    def p(self) -> Fraction:
        return self.testers[0].p

    def to_json(self) -> dict:
        return {
            "delta": str(self.delta),
            "reps": list(self.reps),
            "testers": [T.to_json() for T in self.testers],
        }

    @classmethod
    def from_json(cls, data: dict) -> "MultiTestPlan":
        testers = [SampleTester.from_json(t) for t in data["testers"]]
        reps = data.get("reps") or cls.default(testers).reps
        return cls(testers, reps, as_fraction(data.get("delta", "1/2")))


@dataclass
class MultiTestResult:
    answers: List[bool]
    queried: tuple
    draws: int
    seed: int
    details: List[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "answers": ["accept" if a else "reject" for a in self.answers],
            "queried": list(self.queried),
            "queried_count": len(self.queried),
            "draws": self.draws,
            "seed": self.seed,
        }


def shared_draws(p, n: int, draws: int, seed: int) -> np.ndarray:
    """``draws`` independent inclusion masks over ``[n]``, one row each."""
    return generator(seed, "multitest", 0).random((draws, n)) < float(p)


def run_multitest(plan: MultiTestPlan, w: Sequence[int], seed: int = 0) -> MultiTestResult:
    """Evaluate every tester of the plan on one shared set of draws.

    A tester with ``k`` repetitions reads the first ``k`` draws.  1-sided
    testers decide on the union of those draws (a witness anywhere in it
    rejects); 2-sided testers take a strict majority over the ``k`` draws.
    """
    if not plan.testers:
        return MultiTestResult([], (), 0, seed)
    n = plan.n
    w = check_word(w, n, plan.testers[0].alphabet.size)
    R = max(plan.reps)
    masks = shared_draws(plan.p, n, R, seed)
    queried = tuple(int(j) for j in np.flatnonzero(masks.any(axis=0)))
    answers, details = [], []
    for T, k in zip(plan.testers, plan.reps):
        d = Decider(T, w)
        if T.side == "one":
            U = tuple(int(j) for j in np.flatnonzero(masks[:k].any(axis=0)))
            ok = d.accepts(U)
            details.append({"union_size": len(U)})
        else:
            votes = [d.accepts(tuple(int(j) for j in np.flatnonzero(masks[t]))) for t in range(k)]
            ok = 2 * sum(votes) > k
            details.append({"votes": sum(votes), "reps": k})
        answers.append(ok)
    return MultiTestResult(answers, queried, R, seed, details)


def union_tester(testers: Sequence[SampleTester], w: Sequence[int], seed: int = 0, reps: Optional[Sequence[int]] = None) -> bool:
    """Accept iff at least one tester accepts on the shared sample; no testers means reject."""
    if not testers:
        return False
    plan = MultiTestPlan(list(testers), list(reps)) if reps is not None else MultiTestPlan.default(testers)
    return any(run_multitest(plan, w, seed).answers)
