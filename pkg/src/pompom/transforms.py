"""Formula transforms: zero-one rounding, dyadic quantization, equitable
banding, support linearization, amplification, and the pipelines built from
them.

Every threshold derived from ``n``, ``q``, the alphabet size or ``epsilon``
has a keyword override; the defaults are the closed-form values.  All
logarithms are base 2 unless a name says ``ln``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import DEFAULT_ENUM_CAP, Property, check_enumeration, is_far
from .errors import CapExceededError, HypothesisError, ValidationError
from .formula import Constraint, ProbFormula, as_fraction, assignment_index, condition, satisfaction
from .rng import derive_seed

#: Default cap on the number of product constraints built by ``amplify``.
DEFAULT_AMPLIFY_CAP = 200_000


@dataclass
class TraceStage:
    name: str
    input_fingerprint: str
    output_fingerprint: str
    multiplier: Optional[str]
    seed: Optional[int] = None
    details: dict = field(default_factory=dict)


@dataclass
class PipelineTrace:
    stages: List[TraceStage] = field(default_factory=list)
    declared: dict = field(default_factory=dict)

    def add(self, name, before: ProbFormula, after: ProbFormula, multiplier=None, seed=None, **details):
        self.stages.append(
            TraceStage(
                name,
                before.fingerprint(),
                after.fingerprint(),
                None if multiplier is None else str(multiplier),
                seed,
                {k: _jsonable(v) for k, v in details.items()},
            )
        )

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.stages]

    def to_json(self) -> dict:
        return {
            "stages": [asdict(s) for s in self.stages],
            "declared": {k: _jsonable(v) for k, v in self.declared.items()},
        }


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


# -- single-stage transforms ------------------------------------------------


def make_zero_one(P: ProbFormula) -> ProbFormula:
    """Round every table entry: below 1/2 goes to 0, everything else to 1."""
    half = Fraction(1, 2)
    constraints = tuple(
        c if c.is_zero_one() else Constraint(c.query, tuple(Fraction(0) if x < half else Fraction(1) for x in c.table))
        for c in P.constraints
    )
    return P.replace(constraints=constraints)


def dyadic_ceiling(x: Fraction) -> Fraction:
    """``2**-k`` for the largest integer ``k`` with ``2**-k >= x`` (``0 < x <= 1``)."""
    if not 0 < x <= 1:
        raise ValidationError(f"dyadic rounding needs a weight in (0, 1], got {x}")
    k = 0
    while Fraction(1, 2 ** (k + 1)) >= x:
        k += 1
    return Fraction(1, 2 ** k)


def quantize(P: ProbFormula) -> ProbFormula:
    """Round weights up to powers of two and renormalize."""
    if any(x == 0 for x in P.weights):
        raise ValidationError("quantize needs every constraint in the support (drop zero weights first)")
    rounded = [dyadic_ceiling(x) for x in P.weights]
    total = sum(rounded, Fraction(0))
    return P.replace(weights=tuple(x / total for x in rounded))


def equitable_band(P: ProbFormula) -> Tuple[Fraction, List[tuple]]:
    """Heaviest group of equal weights: returns ``(band weight value, query sets)``.

    Ties go to the larger weight value.
    """
    bands: Dict[Fraction, List[tuple]] = {}
    for c, x in zip(P.constraints, P.weights):
        if x > 0:
            bands.setdefault(x, []).append(c.query)
    value = max(bands, key=lambda v: (v * len(bands[v]), v))
    return value, bands[value]


def make_equitable(P: ProbFormula) -> ProbFormula:
    """Quantize, then condition on the heaviest weight band; the result is uniform."""
    Q = quantize(P.support_formula())
    _, band = equitable_band(Q)
    return condition(Q, band)


def equitable_multiplier(beta) -> float:
    return 2 * math.log2(2 * float(beta))


def prune_to_equitable_band(
    P: ProbFormula,
    epsilon,
    q: int,
    alpha: float,
    delta,
    *,
    low=None,
    high=None,
) -> ProbFormula:
    """Drop the very light and very heavy constraints and condition on the rest.

    ``low`` defaults to ``1/(4 alpha n)``, ``high`` to ``2q/(epsilon n)``.
    Constraints with weight ``<= low`` or ``>= high`` are removed.
    """
    delta = as_fraction(delta)
    if delta >= Fraction(1, 8):
        raise ValidationError("pruning needs delta < 1/8")
    epsilon = as_fraction(epsilon)
    n = P.n
    low = 1 / (4 * float(alpha) * n) if low is None else low
    high = Fraction(2 * q) / (epsilon * n) if high is None else high
    keep = [c.query for c, x in zip(P.constraints, P.weights) if low < x < high]
    mass = P.weight_of(keep) if keep else Fraction(0)
    if not keep:
        raise HypothesisError("every constraint fell outside the equitable band", {"low": low, "high": high})
    if mass < Fraction(1, 2):
        raise HypothesisError(
            f"weight {mass} left after pruning is below 1/2; the formula is not a valid test at these parameters",
            {"low": str(low), "high": str(high), "remaining": str(mass)},
        )
    return condition(P, keep)


@dataclass
class LinearizeReport:
    verified: Optional[bool]
    attempts: int
    seed: int
    r: int
    tolerance: Fraction
    max_deviation: Optional[Fraction] = None

    def __bool__(self):
        return bool(self.verified)


def linearize_size(delta, alphabet_size: int, n: int) -> int:
    return max(1, math.ceil(float(as_fraction(delta)) ** -2 * math.log2(alphabet_size) * n))


def _empirical_formula(P: ProbFormula, draws: np.ndarray, r: int) -> ProbFormula:
    counts: Dict[int, int] = {}
    for i in draws.tolist():
        counts[i] = counts.get(i, 0) + 1
    order = sorted(counts)
    return P.replace(
        constraints=tuple(P.constraints[i] for i in order),
        weights=tuple(Fraction(counts[i], r) for i in order),
        support_bound=r,
    )


def _max_deviation(P: ProbFormula, Pr: ProbFormula) -> Fraction:
    return max(abs(satisfaction(P, w) - satisfaction(Pr, w)) for w in P.alphabet.words(P.n))


def _probabilities(P: ProbFormula) -> Tuple[List[int], np.ndarray]:
    sup = P.support()
    p = np.array([float(P.weights[i]) for i in sup])
    return sup, p / p.sum()


def reduce_support_linear(
    P: ProbFormula,
    delta,
    seed: int = 0,
    *,
    r: Optional[int] = None,
    tolerance=None,
    retries: int = 8,
    cap: int = DEFAULT_ENUM_CAP,
) -> Tuple[ProbFormula, LinearizeReport]:
    """Replace the distribution by the empirical one of ``r`` i.i.d. draws.

    The draw is checked against every word (``|eta_w - eta| <= tolerance``,
    tolerance defaulting to ``delta``) and redrawn with the next derived seed on
    failure.  If the word space is over ``cap`` the first draw is returned with
    ``verified=None``.
    """
    delta = as_fraction(delta)
    tol = delta if tolerance is None else as_fraction(tolerance)
    r = linearize_size(delta, P.alphabet.size, P.n) if r is None else int(r)
    sup, probs = _probabilities(P)
    try:
        check_enumeration(P.alphabet.size, P.n, cap)
        can_verify = True
    except CapExceededError:
        can_verify = False
    attempts = max(1, int(retries)) if can_verify else 1
    result, report = None, None
    for attempt in range(attempts):
        s = derive_seed(seed, "linearize", attempt)
        rng = np.random.default_rng(s)
        draws = np.asarray(sup)[rng.choice(len(sup), size=r, p=probs)]
        result = _empirical_formula(P, draws, r)
        if not can_verify:
            return result, LinearizeReport(None, 1, s, r, tol)
        dev = _max_deviation(P, result)
        report = LinearizeReport(dev <= tol, attempt + 1, s, r, tol, dev)
        if report.verified:
            break
    return result, report


# -- amplification ----------------------------------------------------------


def _majority_accept(values: Sequence[Fraction]) -> Fraction:
    # distribution of the number of accepting runs
    dist = [Fraction(1)]
    for s in values:
        nxt = [Fraction(0)] * (len(dist) + 1)
        for k, pk in enumerate(dist):
            nxt[k] += pk * (1 - s)
            nxt[k + 1] += pk * s
        dist = nxt
    reps = len(values)
    return sum((pk for k, pk in enumerate(dist) if 2 * k > reps), Fraction(0))


def _product(values: Sequence[Fraction]) -> Fraction:
    out = Fraction(1)
    for s in values:
        out *= s
    return out


def combine_constraints(parts: Sequence[Constraint], k: int, mode: str) -> Constraint:
    """One constraint on the union of ``parts`` that runs all of them on the same input."""
    if mode not in ("reject_if_any", "majority"):
        raise ValidationError(f"unknown amplification mode {mode!r}")
    union = tuple(sorted(set().union(*(c.query for c in parts))))
    pos = {i: j for j, i in enumerate(union)}
    idx = [[pos[i] for i in c.query] for c in parts]
    fold = _product if mode == "reject_if_any" else _majority_accept
    table = []
    for v in itertools.product(range(k), repeat=len(union)):
        vals = [c.table[assignment_index([v[j] for j in ix], k)] for c, ix in zip(parts, idx)]
        table.append(fold(vals))
    return Constraint(union, tuple(table))


def amplify(P: ProbFormula, reps: int, mode: str = "reject_if_any", cap: int = DEFAULT_AMPLIFY_CAP) -> ProbFormula:
    """Run ``reps`` independent copies of the test on one input.

    ``reject_if_any`` accepts only if every copy accepts; ``majority`` accepts
    when strictly more than half of the copies accept.  Product constraints on
    identical unions are merged.
    """
    from .formula import merge_duplicate_queries

    reps = int(reps)
    if reps < 1:
        raise ValidationError("reps must be at least 1")
    sup = P.support()
    if len(sup) ** reps > cap:
        raise CapExceededError(f"amplification needs {len(sup)}^{reps} product constraints, cap is {cap}")
    k = P.alphabet.size
    raw = []
    cache: Dict[tuple, Constraint] = {}
    for combo in itertools.product(sup, repeat=reps):
        key = tuple(sorted(combo)) if True else combo
        if key not in cache:
            cache[key] = combine_constraints([P.constraints[i] for i in key], k, mode)
        raw.append((cache[key], _product([P.weights[i] for i in combo])))
    return merge_duplicate_queries(
        raw, P.n, P.alphabet, one_sided=P.one_sided and mode == "reject_if_any"
    )


def pad_queries(P: ProbFormula, size: int) -> ProbFormula:
    """Grow every query set to ``min(size, n)`` indices the constraint ignores."""
    from .formula import merge_duplicate_queries

    size = min(int(size), P.n)
    k = P.alphabet.size
    raw = []
    for c, x in zip(P.constraints, P.weights):
        if c.size >= size:
            raw.append((c, x))
            continue
        extra = [i for i in range(P.n) if i not in set(c.query)][: size - c.size]
        union = tuple(sorted(set(c.query) | set(extra)))
        keep = [union.index(i) for i in c.query]
        table = tuple(
            c.table[assignment_index([v[j] for j in keep], k)]
            for v in itertools.product(range(k), repeat=len(union))
        )
        raw.append((Constraint(union, table), x))
    return merge_duplicate_queries(raw, P.n, P.alphabet, one_sided=P.one_sided)


# -- pipelines --------------------------------------------------------------


@dataclass
class DerandomizeReport:
    reps: int
    q_amplified: int
    q_padded: int
    runs: int
    attempts: int
    seed: int
    worst_far_acceptance: Fraction
    threshold: Fraction
    support_bound: int


def effective_one_sided(
    P: ProbFormula,
    prop: Property,
    epsilon,
    delta,
    q: int,
    seed: int = 0,
    *,
    reps: Optional[int] = None,
    runs: Optional[int] = None,
    pad_to: Optional[int] = None,
    retries: int = 8,
    cap: int = DEFAULT_ENUM_CAP,
) -> Tuple[ProbFormula, DerandomizeReport]:
    """Amplify a 1-sided test and fix a verified sequence of runs as the new support.

    Runs are sampled directly (``reps`` i.i.d. constraints each) rather than
    from a materialized product formula.  The fixed sequence must accept every
    ``epsilon/2``-far word in at most a ``1/(10 q'')`` fraction of runs.
    """
    from .formula import merge_duplicate_queries

    epsilon, delta = as_fraction(epsilon), as_fraction(delta)
    if not 0 <= delta < 1:
        raise ValidationError("delta must lie in [0, 1)")
    check_enumeration(P.alphabet.size, P.n, cap)
    k = P.alphabet.size
    if reps is None:
        reps = max(1, math.ceil(10 * math.log2(q) / float(1 - delta))) if q > 1 else 1
    q2 = reps * q
    if runs is None:
        runs = max(1, math.ceil(10 * math.log2(k) * q2 * P.n))
    threshold = Fraction(1, 10 * q2)
    far = [w for w in P.alphabet.words(P.n) if is_far(w, prop, epsilon / 2)]
    sup, probs = _probabilities(P)
    cache: Dict[tuple, Constraint] = {}
    best = None
    for attempt in range(max(1, int(retries))):
        s = derive_seed(seed, "effective1", attempt)
        rng = np.random.default_rng(s)
        picks = np.asarray(sup)[rng.choice(len(sup), size=(runs, reps), p=probs)]
        raw = []
        for row in picks.tolist():
            key = tuple(sorted(row))
            if key not in cache:
                cache[key] = combine_constraints([P.constraints[i] for i in key], k, "reject_if_any")
            raw.append((cache[key], Fraction(1, runs)))
        fixed = merge_duplicate_queries(raw, P.n, P.alphabet, one_sided=P.one_sided)
        worst = max((satisfaction(fixed, w) for w in far), default=Fraction(0))
        if best is None or worst < best[1]:
            best = (fixed, worst, s, attempt + 1)
        if worst <= threshold:
            break
    fixed, worst, s, attempts = best
    if worst > threshold:
        raise HypothesisError(
            f"no run sequence within {retries} attempts keeps far-word acceptance <= {threshold}",
            {"worst": str(worst), "threshold": str(threshold), "reps": reps, "runs": runs},
        )
    q_padded = 3 * q2 if pad_to is None else int(pad_to)
    padded = pad_queries(fixed, q_padded)
    q_eff = min(q_padded, P.n)
    bound = math.ceil(4 * (q_eff + 1) ** 2 * math.log2(k) * P.n) if k > 1 else len(padded.support())
    padded = padded.replace(support_bound=max(bound, len(padded.support())))
    return padded, DerandomizeReport(reps, q2, q_eff, runs, attempts, s, worst, threshold, bound)


def combinatorial_delta(delta, q: int, alphabet_size: int, epsilon) -> float:
    """``16 delta log(16 q delta^-2 log|alphabet| / epsilon)``."""
    d = float(as_fraction(delta))
    return 16 * d * math.log2(16 * q * d ** -2 * math.log2(alphabet_size) / float(as_fraction(epsilon)))


def trivial_formula(n: int, alphabet, q: int) -> ProbFormula:
    c = Constraint.constant(range(min(q, n)), alphabet.size, 1)
    return ProbFormula(n, alphabet, (c,), (Fraction(1),))


def combinatorialize(
    P: ProbFormula,
    epsilon,
    delta,
    q: int,
    seed: int = 0,
    overrides: Optional[Mapping] = None,
    cap: int = DEFAULT_ENUM_CAP,
) -> Tuple[ProbFormula, PipelineTrace]:
    """linearize -> prune -> equitable -> zero-one, with a stage-by-stage trace.

    Recognized override keys: ``alpha``, ``linearize_r``,
    ``linearize_tolerance``, ``linearize_retries``, ``prune_low``,
    ``prune_high``.
    """
    ov = dict(overrides or {})
    epsilon, delta = as_fraction(epsilon), as_fraction(delta)
    trace = PipelineTrace()
    k = P.alphabet.size
    if delta >= Fraction(1, 16):
        out = trivial_formula(P.n, P.alphabet, q)
        trace.add("trivial", P, out, multiplier=None, reason="delta >= 1/16")
        trace.declared = {"epsilon": epsilon / 2, "delta": None, "q": q, "trivial": True}
        return out, trace

    alpha = float(ov.get("alpha", float(delta) ** -2 * math.log2(k)))
    stage = "linearize"
    try:
        P1, lin = reduce_support_linear(
            P.support_formula(),
            delta,
            seed,
            r=ov.get("linearize_r", max(1, math.ceil(alpha * P.n))),
            tolerance=ov.get("linearize_tolerance"),
            retries=int(ov.get("linearize_retries", 8)),
            cap=cap,
        )
        if lin.verified is False:
            raise HypothesisError(
                f"no sampled support stayed within {lin.tolerance} of the original on every word",
                {"max_deviation": str(lin.max_deviation), "attempts": lin.attempts},
            )
        trace.add(
            stage, P, P1, multiplier=f"+{lin.tolerance}", seed=lin.seed,
            r=lin.r, verified=lin.verified, attempts=lin.attempts, max_deviation=lin.max_deviation,
        )

        stage = "prune"
        P2 = prune_to_equitable_band(
            P1, epsilon, q, alpha, 2 * delta, low=ov.get("prune_low"), high=ov.get("prune_high")
        )
        eta = sum((P1.weight_map()[Q] for Q in P2.support_sets()), Fraction(0))
        trace.add(stage, P1, P2, multiplier=1 / eta, kept_weight=eta, beta=P2.equitability())

        stage = "equitable"
        beta = P2.equitability()
        P3 = make_equitable(P2)
        trace.add(stage, P2, P3, multiplier=equitable_multiplier(beta), beta=beta, support=len(P3.support()))

        stage = "zero_one"
        P4 = make_zero_one(P3).replace(support_bound=P1.support_bound)
        trace.add(stage, P3, P4, multiplier=2)
    except Exception as exc:
        if hasattr(exc, "stage"):
            raise
        exc.stage = stage
        if exc.args:
            exc.args = (f"[{stage}] {exc.args[0]}",) + exc.args[1:]
        raise
    trace.declared = {
        "epsilon": epsilon / 2,
        "delta": combinatorial_delta(delta, q, k, epsilon) if k > 1 else 0.0,
        "q": q,
        "alpha": alpha,
        "support_bound": P4.support_bound,
    }
    return P4, trace


def majority_error(reps: int, delta) -> Fraction:
    """Chance that a strict majority of ``reps`` runs fails when each fails w.p. ``delta``."""
    delta = as_fraction(delta)
    need = math.ceil(reps / 2)
    return sum(
        (math.comb(reps, j) * delta ** j * (1 - delta) ** (reps - j) for j in range(need, reps + 1)),
        Fraction(0),
    )


def two_sided_reps(q: int, alphabet_size: int, epsilon, delta) -> int:
    inner = math.log2(alphabet_size) / float(as_fraction(epsilon))
    loglog = math.log2(math.log2(inner)) if inner > 2 else 0.0
    value = 20 * math.log2(q) * loglog / (0.5 - float(as_fraction(delta))) ** 2 if q > 1 else 0.0
    return max(1, math.ceil(value))


def effective_two_sided(
    P: ProbFormula,
    epsilon,
    delta,
    q: int,
    seed: int = 0,
    overrides: Optional[Mapping] = None,
    cap: int = DEFAULT_ENUM_CAP,
) -> Tuple[ProbFormula, PipelineTrace]:
    """Majority-amplify, pad to ``q' = reps*q`` and combinatorialize.

    Extra override keys beyond those of :func:`combinatorialize`:
    ``amplify_reps`` and ``amplify_cap``.
    """
    ov = dict(overrides or {})
    epsilon, delta = as_fraction(epsilon), as_fraction(delta)
    k = P.alphabet.size
    reps = int(ov.get("amplify_reps", two_sided_reps(q, k, epsilon, delta)))
    amplified = amplify(P.support_formula(), reps, "majority", cap=int(ov.get("amplify_cap", DEFAULT_AMPLIFY_CAP)))
    q_new = min(reps * q, P.n)
    padded = pad_queries(amplified, q_new)
    amp_delta = majority_error(reps, delta)
    out, trace = combinatorialize(padded, epsilon, amp_delta, q_new, seed=seed, overrides=ov, cap=cap)
    trace.stages.insert(
        0,
        TraceStage(
            "amplify_majority", P.fingerprint(), padded.fingerprint(), None, None,
            {"reps": reps, "q_prime": q_new, "delta_after": str(amp_delta)},
        ),
    )
    loglog = math.log2(max(math.log2(k) / float(epsilon), 1.0)) if k > 1 else 0.0
    trace.declared.update(
        {
            "q_prime": q_new,
            "reps": reps,
            "amplified_delta": amp_delta,
            "target_delta": Fraction(1, (4 * q_new) ** 3),
            "target_support_bound": q_new ** 9 * math.log2(k) * loglog ** 2 * P.n if k > 1 else None,
        }
    )
    return out, trace
