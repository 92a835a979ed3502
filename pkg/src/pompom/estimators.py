"""scikit-learn style wrappers around the synthesized sampling testers.

Words are rows of an integer array (letters are alphabet indices).
``predict`` returns 1 for accept and 0 for reject; ``predict_proba`` returns
``[P(reject), P(accept)]`` per row, exact when the word length allows it.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .core import Alphabet, Property
from .evaluation import EXACT_CAP, exact_sampler_acceptance, monte_carlo_acceptance
from .formula import ProbFormula
from .rng import derive_seed
from .sampler import Decider, draw_sample, synthesize_one_sided_sampler, synthesize_two_sided_sampler


class _SamplingTesterMixin:
    def _check_words(self, X):
        X = check_array(X, dtype=np.int64, ensure_min_samples=1)
        if X.shape[1] != self.tester_.n:
            raise ValueError(f"expected words of length {self.tester_.n}, got {X.shape[1]}")
        return X

    def predict(self, X):
        check_is_fitted(self, "tester_")
        X = self._check_words(X)
        out = np.empty(len(X), dtype=int)
        for row, w in enumerate(X):
            draw = draw_sample(self.tester_.p, self.tester_.n, derive_seed(self.random_state, "predict", row))
            out[row] = int(Decider(self.tester_, tuple(w)).accepts(draw.U))
        return out

    def predict_proba(self, X):
        check_is_fitted(self, "tester_")
        X = self._check_words(X)
        exact = self.tester_.n <= EXACT_CAP[self.tester_.side]
        probs = []
        for row, w in enumerate(X):
            if exact:
                a = float(exact_sampler_acceptance(self.tester_, tuple(w)))
            else:
                seed = derive_seed(self.random_state, "proba", row)
                a = monte_carlo_acceptance(self.tester_, tuple(w), self.trials, seed).estimate
            probs.append((1 - a, a))
        return np.array(probs)


class OneSidedSamplingTester(_SamplingTesterMixin, BaseEstimator):
    """Reject exactly when the sample is a witness against the input.

    ``fit(X)`` takes the members of the property, one word per row.
    """

    def __init__(self, epsilon=0.5, q=2, p=None, alphabet_size=None, random_state=0, trials=10_000):
        self.epsilon = epsilon
        self.q = q
        self.p = p
        self.alphabet_size = alphabet_size
        self.random_state = random_state
        self.trials = trials

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.int64, ensure_min_samples=1)
        k = self.alphabet_size or max(2, int(X.max()) + 1)
        prop = Property(X.shape[1], Alphabet.of_size(k), frozenset(tuple(int(a) for a in row) for row in X))
        self.property_ = prop
        self.tester_ = synthesize_one_sided_sampler(prop, Fraction(str(self.epsilon)), self.q, self.p)
        return self


class TwoSidedSamplingTester(_SamplingTesterMixin, BaseEstimator):
    """Sampling tester synthesized from a combinatorial formula.

    ``fit(P)`` takes a :class:`ProbFormula` (or its JSON dict); only its
    support and tables are used.
    """

    def __init__(self, epsilon=0.5, q=None, overrides=None, random_state=0, trials=10_000):
        self.epsilon = epsilon
        self.q = q
        self.overrides = overrides
        self.random_state = random_state
        self.trials = trials

    def fit(self, P, y=None):
        if isinstance(P, dict):
            P = ProbFormula.from_json(P)
        self.formula_ = P
        self.tester_ = synthesize_two_sided_sampler(P, None, Fraction(str(self.epsilon)), self.q, self.overrides)
        return self
