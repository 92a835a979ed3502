"""Exact and Monte Carlo evaluation of testers, concentration bounds, and
numeric checks of the chained inequalities behind the sampling rates."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .core import DEFAULT_ENUM_CAP, PartialPropertyPair, Property, check_enumeration, check_word, is_far
from .errors import CapExceededError, ValidationError
from .formula import ProbFormula, as_fraction, satisfaction
from .rng import generator
from .sampler import SampleTester, sampling_alpha, sampling_threshold

Z99 = 2.576
EXACT_CAP = {"one": 20, "two": 12}
MC_CHUNK = 4096


# -- concentration bounds -----------------------------------------------------


def tail_bounds(kind: str, **params) -> float:
    """``chernoff_upper``/``chernoff_lower`` take ``gamma, p, m``; ``hoeffding`` takes ``m, t``."""
    if kind in ("chernoff_upper", "chernoff_lower"):
        g, p, m = float(params["gamma"]), float(params["p"]), float(params["m"])
        if not 0 < g <= 1:
            raise ValidationError("gamma must lie in (0, 1]")
        if not 0 <= p <= 1 or m < 0:
            raise ValidationError("need p in [0, 1] and m >= 0")
        return math.exp(-g * g * p * m / (3 if kind == "chernoff_upper" else 2))
    if kind == "hoeffding":
        m, t = float(params["m"]), float(params["t"])
        if t < 0 or m < 0:
            raise ValidationError("need t >= 0 and m >= 0")
        return 2 * math.exp(-2 * m * t * t)
    raise ValidationError(f"unknown bound {kind!r}")


@dataclass
class DeviationReport:
    failure_rate: float
    failures: int
    trials: int
    allowed: float
    passed: bool
    mean: float
    p: float
    c: float
    eta: float
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def deviation_precondition(p: float, c: float, eta: float, m: int) -> bool:
    return c > 1 and p >= 10 * c / (eta * eta * m)


def check_deviation_bound(
    gammas: Sequence[float], p: float, c: float, trials: int, seed: int = 0, eta: float = 0.2
) -> DeviationReport:
    """Empirical rate at which the sampled average leaves ``mean +- eta``.

    The sample average is 1/2 on an empty sample.  Refuses to run when
    ``p < 10c/(eta**2 m)`` or ``c <= 1``.
    """
    g = np.asarray(gammas, dtype=float)
    m = len(g)
    if m == 0 or np.any((g < 0) | (g > 1)):
        raise ValidationError("need a nonempty sequence of values in [0, 1]")
    if not deviation_precondition(p, c, eta, m):
        raise ValidationError(f"p={p} is below 10c/(eta^2 m) = {10 * c / (eta * eta * m):.6g} or c <= 1")
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    mean = float(g.mean())
    failures = 0
    for chunk, start in enumerate(range(0, trials, MC_CHUNK)):
        size = min(MC_CHUNK, trials - start)
        mask = generator(seed, "devbound", chunk).random((size, m)) < p
        counts = mask.sum(axis=1)
        sums = mask @ g
        avg = np.where(counts > 0, sums / np.maximum(counts, 1), 0.5)
        failures += int(np.count_nonzero(np.abs(avg - mean) > eta))
    rate = failures / trials
    bound = math.exp(-c)
    allowed = bound + 3 * math.sqrt(bound / trials)
    return DeviationReport(rate, failures, trials, allowed, rate <= allowed, mean, p, c, eta, seed)


# -- acceptance of testers ----------------------------------------------------


@dataclass
class EvalReport:
    target: str
    method: str
    estimate: Union[Fraction, float]
    trials: Optional[int] = None
    half_width: Optional[float] = None
    std_error: Optional[float] = None
    seed: Optional[int] = None

    def to_json(self) -> dict:
        out = asdict(self)
        if isinstance(self.estimate, Fraction):
            out["estimate"] = str(self.estimate)
            out["estimate_float"] = float(self.estimate)
        return out


def _popcount_table(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros_like(masks)
    for j in range(n):
        pc += (masks >> j) & 1
    return pc


def _exact_from_counts(accept_by_size: Sequence[int], n: int, p: Fraction) -> Fraction:
    total = Fraction(0)
    for k, cnt in enumerate(accept_by_size):
        if cnt:
            total += cnt * p ** k * (1 - p) ** (n - k)
    return total


def _diff_mask(u, w) -> int:
    m = 0
    for j, (a, b) in enumerate(zip(u, w)):
        if a != b:
            m |= 1 << j
    return m


def exact_sampler_acceptance(T: SampleTester, w: Sequence[int], cap: Optional[int] = None) -> Fraction:
    """Sum of ``p^|U| (1-p)^(n-|U|)`` over every subset ``U`` the tester accepts on."""
    n = T.n
    cap = EXACT_CAP[T.side] if cap is None else cap
    if n > cap:
        raise CapExceededError(f"exact enumeration over 2^{n} samples exceeds cap 2^{cap}")
    w = check_word(w, n, T.alphabet.size)
    pc = _popcount_table(n)
    if T.side == "one":
        masks = np.arange(1 << n, dtype=np.int64)
        ok = np.zeros(1 << n, dtype=bool)
        # U accepts iff it misses every mismatch position of some member
        for d in {_diff_mask(u, w) for u in T.prop.members}:
            ok |= (masks & d) == 0
        counts = np.bincount(pc[ok], minlength=n + 1)
    else:
        d = T.decider(w)
        counts = [0] * (n + 1)
        for mask in range(1 << n):
            U = [j for j in range(n) if mask >> j & 1]
            if d.accepts(U):
                counts[len(U)] += 1
    return _exact_from_counts([int(c) for c in counts], n, T.p)


def monte_carlo_acceptance(T: SampleTester, w: Sequence[int], trials: int, seed: int = 0) -> EvalReport:
    """Fraction of accepting draws with a 99% normal-approximation half-width."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    n = T.n
    w = check_word(w, n, T.alphabet.size)
    p = float(T.p)
    accepted = 0
    if T.side == "one":
        diffs = np.array(
            [[u[j] != w[j] for j in range(n)] for u in sorted(T.prop.members)], dtype=bool
        ).reshape(len(T.prop.members), n)
    else:
        d = T.decider(w)
        memo: Dict[tuple, bool] = {}
    for chunk, start in enumerate(range(0, trials, MC_CHUNK)):
        size = min(MC_CHUNK, trials - start)
        mask = generator(seed, "mc", chunk).random((size, n)) < p
        if T.side == "one":
            if len(diffs) == 0:
                continue
            hits = mask.astype(np.int32) @ diffs.T.astype(np.int32)
            accepted += int(np.count_nonzero((hits == 0).any(axis=1)))
        else:
            for row in mask:
                U = tuple(np.flatnonzero(row).tolist())
                if U not in memo:
                    memo[U] = d.accepts(U)
                accepted += memo[U]
    est = accepted / trials
    se = math.sqrt(est * (1 - est) / trials)
    return EvalReport(f"{T.side}-sided tester", "monte_carlo", est, trials, Z99 * se, se, seed)


# -- support-weight diagnostics ---------------------------------------------


@dataclass
class SupportWeightReport:
    union_size: int
    weight: Fraction
    delta: Fraction
    applies: bool
    bound: Fraction
    holds: bool
    sided: str

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("weight", "delta", "bound"):
            d[k] = str(d[k])
        return d


def tight_delta(P: ProbFormula, pair: PartialPropertyPair, epsilon, cap: int = DEFAULT_ENUM_CAP) -> Fraction:
    """Smallest delta for which ``P`` is an (epsilon, delta)-test of the pair."""
    check_enumeration(P.alphabet.size, P.n, cap)
    lo = min((satisfaction(P, w) for w in pair.inner.members), default=Fraction(1))
    hi = max(
        (satisfaction(P, w) for w in P.alphabet.words(P.n) if is_far(w, pair.outer, epsilon)),
        default=Fraction(0),
    )
    return max(1 - lo, hi)


def check_support_weight_lemma(
    P: ProbFormula,
    pair: PartialPropertyPair,
    epsilon,
    subset: Iterable[Iterable[int]],
    delta=None,
    sided: str = "two",
    cap: int = DEFAULT_ENUM_CAP,
) -> SupportWeightReport:
    """Constraint families covering at most ``epsilon*n/2`` indices must be light.

    ``P`` is read as an ``(epsilon/2, delta)``-test; ``delta`` defaults to the
    tight value computed by enumeration.  The 2-sided bound is
    ``weight <= 2*delta``.  The 1-sided bound is ``weight < delta`` for a
    declared delta and ``weight <= delta`` for the tight one (the strict form
    can be attained with equality when delta is exactly the worst case).
    """
    epsilon = as_fraction(epsilon)
    subset = [tuple(sorted(Q)) for Q in subset]
    union = set().union(*map(set, subset)) if subset else set()
    weight = P.weight_of(subset) if subset else Fraction(0)
    declared = delta is not None
    delta = as_fraction(delta) if declared else tight_delta(P, pair, epsilon / 2, cap)
    if sided == "one":
        applies = len(union) < epsilon * P.n / 2
        bound = delta
        holds = (weight < delta if declared else weight <= delta) if applies else True
    else:
        applies = len(union) <= epsilon * P.n / 2
        bound = 2 * delta
        holds = weight <= bound if applies else True
    return SupportWeightReport(len(union), weight, delta, applies, bound, holds, sided)


# -- asymptotic inequality chains -------------------------------------------------


@dataclass
class CalcRow:
    calc: str
    alphabet_size: int
    q: int
    epsilon: float
    i: int
    n: float
    status: str  # "pass", "fail" or "skipped"
    steps: List[dict] = field(default_factory=list)
    slack: Optional[float] = None
    endpoint_ok: Optional[bool] = None

    @property
    def violations(self) -> List[str]:
        return [s["step"] for s in self.steps if not s["ok"]]


def _step(name: str, lhs: float, rhs: float, strict: bool) -> dict:
    ok = lhs < rhs if strict else lhs <= rhs
    return {"step": name, "lhs": lhs, "rhs": rhs, "strict": strict, "ok": bool(ok)}


def withi_chain(k: int, q: int, eps: float, i: int, n: float):
    """Natural logs of each expression in the chain bounding the miss probability.

    Returns ``(steps, endpoint)``: every link of the chain, and the comparison
    of its first expression with its last.
    """
    lnk, L = math.log(k), math.log2(k)
    ln_n = math.log(n)
    alpha = sampling_alpha(q, k, eps, "one")
    log_x = i * math.log(alpha) - i / q ** 2 * ln_n
    log_A = math.log(eps / (3 * i)) + (1 - (i - 1) / q) * ln_n
    x = math.exp(log_x)
    s0 = -math.inf if x >= 1 else math.exp(log_A) * math.log1p(-x)
    s1 = -math.exp(log_x + log_A)
    c5 = 5 * q * (q + 1) ** 2 * lnk * L
    steps = [_step("1-x <= e^-x", s0, s1, False)]
    if i >= 2:
        s2 = -c5 * math.exp((1 - (i - 1) / q - i / q ** 2) * ln_n)
    else:
        steps.append(_step("n^(1-1/q^2) > log|X| n^(1-1/q)", math.log(L) + (1 - 1 / q) * ln_n, (1 - 1 / q ** 2) * ln_n, True))
        s2 = -c5 * math.exp((1 - 1 / q) * ln_n)
    s3 = math.log(0.5) - 4 * q * (q + 1) ** 2 * L * lnk * math.exp((1 - i / q) * ln_n)
    steps.append(_step("exponent vs 5q(q+1)^2 form", s1, s2, True))
    steps.append(_step("5q(q+1)^2 form vs target", s2, s3, True))
    return steps, _step("endpoint", s0, s3, True)


def devuse_chain(k: int, q: int, eps: float, i: int, n: float, factor: float = 1e-3):
    """Natural logs of the chain bounding the deviation probability of one pompom.

    ``factor`` multiplies ``alpha**i`` in the exponent; the deviation bound
    feeding the chain has ``1e-3`` there.  Returns ``(steps, endpoint)`` as
    :func:`withi_chain` does.
    """
    lnk, L = math.log(k), math.log2(k)
    ln_n = math.log(n)
    alpha = sampling_alpha(q, k, eps, "two")
    power = (1 - (i - 1) / q - i / q ** 2) * ln_n
    log_E = math.log(factor) + i * math.log(alpha) + math.log(eps) + power - math.log(3 * i)
    s0 = -math.exp(log_E)
    B = 24 * q ** 10 * L ** 2 / eps
    loglog = math.log2(math.log2(k / eps))
    rhs = math.log(0.01) - lnk * q ** 10 * L * loglog ** 2 * math.exp((1 - i / q) * ln_n)
    steps = []
    if i >= 3:
        s1 = -(lnk ** 3) * q ** 12 * eps ** -2 * math.exp(power) / (3 * q)
        steps.append(_step("alpha^i substitution", s0, s1, False))
        steps.append(_step("vs target", s1, rhs, False))
        return steps, _step("endpoint", s0, rhs, False)
    gap = (1 / q - i / q ** 2) * ln_n
    if i == 1:
        floor = math.log(8 * q ** 6 * L ** (4 / 3) / eps ** (2 / 3))
    else:
        floor = math.log(2 * q ** 3 * L ** (1 / 3))
    steps.append(_step("lower bound on n^(1/q-i/q^2)", (1 - i / q) * math.log(B), gap, True))
    steps.append(_step("simplified lower bound", floor, (1 - i / q) * math.log(B), False))
    steps.append(_step("vs target", s0, rhs, False))
    return steps, _step("endpoint", s0, rhs, False)


def default_calc_grid() -> Dict[str, List[tuple]]:
    """(alphabet size, q, epsilon, i, n) points just above and well above each threshold."""
    grids: Dict[str, List[tuple]] = {"withi": [], "devuse": []}
    for k in (2, 3, 4):
        for eps in (1.0, 0.5, 0.1):
            for q in (1, 2, 3, 4):
                t = sampling_threshold(q, k, eps, "one")
                for mult in (1.0001, 10.0, 1e6):
                    for i in range(1, q + 1):
                        grids["withi"].append((k, q, eps, i, t * mult))
            for q in (3, 4, 5):
                t = sampling_threshold(q, k, eps, "two")
                for mult in (1.0001, 10.0, 1e6):
                    for i in range(1, q + 1):
                        grids["devuse"].append((k, q, eps, i, t * mult))
    return grids


def verify_appendix_calculations(
    grid: Optional[Dict[str, Iterable[tuple]]] = None, factor: float = 1e-3
) -> List[CalcRow]:
    """Evaluate every step of both chains at every grid point.

    Points with ``n`` at or below the relevant threshold (or ``q < 3`` for the
    deviation chain) are reported as ``skipped``.
    """
    grid = default_calc_grid() if grid is None else grid
    rows: List[CalcRow] = []
    for calc, points in grid.items():
        if calc not in ("withi", "devuse"):
            raise ValidationError(f"unknown calculation {calc!r}")
        side = "one" if calc == "withi" else "two"
        for k, q, eps, i, n in points:
            row = CalcRow(calc, int(k), int(q), float(eps), int(i), float(n), "skipped")
            if not 1 <= i <= q or n <= sampling_threshold(q, k, eps, side) or (calc == "devuse" and q < 3):
                rows.append(row)
                continue
            if calc == "withi":
                row.steps, end = withi_chain(k, q, eps, i, n)
            else:
                row.steps, end = devuse_chain(k, q, eps, i, n, factor)
            row.status = "pass" if all(s["ok"] for s in row.steps) else "fail"
            row.endpoint_ok = end["ok"]
            row.slack = end["rhs"] - end["lhs"]
            rows.append(row)
    return rows


def render_calc_table(rows: Sequence[CalcRow]) -> str:
    head = f"{'calc':7} {'|X|':>3} {'q':>2} {'eps':>5} {'i':>2} {'n':>12} {'status':7} {'slack':>11} failed steps"
    lines = [head]
    for r in rows:
        slack = "" if r.slack is None else f"{r.slack:.4g}"
        lines.append(
            f"{r.calc:7} {r.alphabet_size:>3} {r.q:>2} {r.epsilon:>5g} {r.i:>2} {r.n:>12.4g} "
            f"{r.status:7} {slack:>11} {'; '.join(r.violations)}"
        )
    return "\n".join(lines)


# -- overall quality ----------------------------------------------------------


@dataclass
class QualityReport:
    method: str
    min_inner: Optional[Union[Fraction, float]]
    min_inner_word: Optional[tuple]
    max_far: Optional[Union[Fraction, float]]
    max_far_word: Optional[tuple]
    far_count: int

    def to_json(self, alphabet=None) -> dict:
        def word(w):
            if w is None:
                return None
            return alphabet.decode(w) if alphabet is not None else list(w)

        def num(x):
            return str(x) if isinstance(x, Fraction) else x

        return {
            "method": self.method,
            "min_inner": num(self.min_inner),
            "min_inner_word": word(self.min_inner_word),
            "max_far": num(self.max_far),
            "max_far_word": word(self.max_far_word),
            "far_count": self.far_count,
        }


def evaluate_test_quality(
    subject: Union[ProbFormula, SampleTester],
    pair: PartialPropertyPair,
    epsilon,
    *,
    method: str = "exact",
    trials: int = 10_000,
    seed: int = 0,
    cap: int = DEFAULT_ENUM_CAP,
) -> QualityReport:
    """Lowest acceptance on the inner property and highest on epsilon-far words."""
    check_enumeration(pair.alphabet.size, pair.n, cap)
    if isinstance(subject, ProbFormula):
        score = lambda w: satisfaction(subject, w)  # noqa: E731
        method = "exact"
    elif method == "exact":
        score = lambda w: exact_sampler_acceptance(subject, w)  # noqa: E731
    elif method == "monte_carlo":
        score = lambda w: monte_carlo_acceptance(subject, w, trials, seed).estimate  # noqa: E731
    else:
        raise ValidationError(f"unknown method {method!r}")
    lo = lo_w = hi = hi_w = None
    for w in sorted(pair.inner.members):
        s = score(w)
        if lo is None or s < lo:
            lo, lo_w = s, w
    far = 0
    for w in pair.alphabet.words(pair.n):
        if not is_far(w, pair.outer, epsilon):
            continue
        far += 1
        s = score(w)
        if hi is None or s > hi:
            hi, hi_w = s, w
    return QualityReport(method, lo, lo_w, hi, hi_w, far)
