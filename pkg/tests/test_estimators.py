from fractions import Fraction

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pompom.estimators import OneSidedSamplingTester, TwoSidedSamplingTester

from helpers import uniform_formula


def test_one_sided_estimator():
    X = np.zeros((1, 10), dtype=int)
    est = OneSidedSamplingTester(epsilon=0.5, q=1, p=0.5).fit(X)
    words = np.array([[0] * 10, [1] * 5 + [0] * 5])
    proba = est.predict_proba(words)
    assert proba[0, 1] == 1.0 and proba[1, 1] == pytest.approx(1 / 32)
    assert est.predict(words)[0] == 1
    assert est.tester_.p == Fraction(1, 2)


def test_estimator_params_and_clone():
    est = OneSidedSamplingTester(epsilon=0.25, q=2, p=0.3, random_state=7)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((1, 3), dtype=int))


def test_estimator_rejects_wrong_length():
    est = OneSidedSamplingTester(p=0.5).fit(np.zeros((1, 4), dtype=int))
    with pytest.raises(ValueError):
        est.predict(np.zeros((1, 5), dtype=int))


def test_two_sided_estimator():
    P = uniform_formula(16, [(2 * j, 2 * j + 1) for j in range(8)])
    est = TwoSidedSamplingTester(epsilon=0.5, overrides={"size_target": 2, "p": "1"}).fit(P.to_json())
    words = np.zeros((2, 16), dtype=int)
    assert list(est.predict(words)) == [1, 1]
    assert est.tester_.discerning.level == 2
