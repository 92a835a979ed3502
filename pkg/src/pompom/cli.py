"""Command-line front end.

Every artifact is JSON with a ``meta`` block recording the command, seed,
overrides and the sha256 of each input file.  Exit codes: 0 ok, 1 usage,
2 validation failure, 3 cap exceeded, 4 hypothesis violated.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .core import DEFAULT_ENUM_CAP, Alphabet, PartialPropertyPair, Property
from .errors import CapExceededError, HypothesisError, PompomError, ValidationError
from .evaluation import (
    check_deviation_bound,
    evaluate_test_quality,
    exact_sampler_acceptance,
    monte_carlo_acceptance,
    render_calc_table,
    verify_appendix_calculations,
)
from .formula import ProbFormula, TestDeclaration, as_fraction, is_valid_test, merge_duplicate_queries
from .multitest import MultiTestPlan, run_multitest
from .sampler import SampleTester, run_sampler, synthesize_one_sided_sampler, synthesize_two_sided_sampler
from .structures import (
    build_scm,
    extract_discerning_pompoms,
    extract_revealing_pompoms,
    find_constellation,
    verify_constellation,
)
from . import transforms as tf

EXIT_USAGE, EXIT_INVALID, EXIT_CAP, EXIT_HYPOTHESIS = 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- io helpers ---------------------------------------------------------------


def _read_json(path: str, hashes: dict):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    hashes[path] = hashlib.sha256(blob).hexdigest()
    try:
        return json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _parse_overrides(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def _need(args, name):
    value = getattr(args, name, None)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required for this command")
    return value


def _frac(s) -> Fraction:
    try:
        return as_fraction(s)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {s!r}") from None


# -- command handlers -----------------------------------------------------------
# each returns the JSON payload (a dict) and an optional exit code


def cmd_property_gen(args, ctx):
    n = _need(args, "n")
    alphabet = Alphabet.of_size(args.alphabet_size)
    kind = args.kind
    if kind == "explicit":
        prop = Property.from_strings(n, alphabet, args.members or [])
    elif kind == "all-zero":
        prop = Property(n, alphabet, frozenset({(0,) * n}))
    elif kind == "even-parity":
        prop = Property.from_predicate(n, alphabet, lambda w: sum(w) % 2 == 0, ctx["cap_enum"])
    elif kind == "random":
        import numpy as np

        rng = np.random.default_rng(ctx["seed"])
        size = args.size or 4
        rows = rng.integers(0, alphabet.size, size=(size, n))
        prop = Property(n, alphabet, frozenset(tuple(int(a) for a in r) for r in rows))
    else:
        raise UsageError(f"unknown property kind {kind!r}")
    return prop.to_json(), 0


def cmd_property_validate(args, ctx):
    prop = Property.from_json(ctx["read"](_need(args, "input")))
    out = {"valid": True, "n": prop.n, "alphabet_size": prop.alphabet.size, "members": len(prop)}
    if args.epsilon is not None:
        out["nontrivial"] = PartialPropertyPair.full(prop).is_nontrivial(_frac(args.epsilon), ctx["cap_enum"])
    return out, 0


def _load_formula(ctx, path, merge=False) -> ProbFormula:
    return ProbFormula.from_json(ctx["read"](path), merge=merge)


def _load_pair(args, ctx) -> Optional[PartialPropertyPair]:
    if args.property is None:
        return None
    outer = Property.from_json(ctx["read"](args.property))
    inner = Property.from_json(ctx["read"](args.inner)) if getattr(args, "inner", None) else outer
    return PartialPropertyPair(inner, outer)


def cmd_formula_validate(args, ctx):
    P = _load_formula(ctx, _need(args, "input"))
    out = {
        "valid": True,
        "n": P.n,
        "q": P.q,
        "support": len(P.support()),
        "zero_one": P.is_zero_one(),
        "uniform": P.is_uniform(),
        "combinatorial": P.is_combinatorial(),
        "fingerprint": P.fingerprint(),
    }
    code = 0
    if args.combinatorial and not P.is_combinatorial():
        out["valid"] = False
        code = EXIT_INVALID
    pair = _load_pair(args, ctx)
    if pair is not None:
        decl = TestDeclaration(pair, _frac(_need(args, "epsilon")), _frac(_need(args, "delta")), sided=args.sided)
        report = is_valid_test(P, decl, ctx["cap_enum"])
        out["test"] = report.to_json(P.alphabet)
        if not report.valid:
            out["valid"] = False
            code = EXIT_INVALID
    return out, code


def cmd_formula_canonize(args, ctx):
    P = _load_formula(ctx, _need(args, "input"), merge=True)
    return P.to_json(), 0


def _eps_delta_q(args):
    return _frac(_need(args, "epsilon")), _frac(_need(args, "delta")), int(_need(args, "q"))


def cmd_transform(args, ctx):
    P = _load_formula(ctx, _need(args, "input"))
    ov = ctx["overrides"]
    seed = ctx["seed"]
    which = args.which
    payload = {}
    if which == "combi":
        eps, delta, q = _eps_delta_q(args)
        out, trace = tf.combinatorialize(P, eps, delta, q, seed, ov, ctx["cap_enum"])
        payload["trace"] = trace.to_json()
    elif which == "effective2":
        eps, delta, q = _eps_delta_q(args)
        out, trace = tf.effective_two_sided(P, eps, delta, q, seed, ov, ctx["cap_enum"])
        payload["trace"] = trace.to_json()
    elif which == "effective1":
        eps, delta, q = _eps_delta_q(args)
        prop = Property.from_json(ctx["read"](_need(args, "property")))
        out, report = tf.effective_one_sided(
            P, prop, eps, delta, q, seed,
            reps=ov.get("reps"), runs=ov.get("runs"), pad_to=ov.get("pad_to"),
            retries=int(ov.get("retries", 8)), cap=ctx["cap_enum"],
        )
        payload["report"] = _jsonable(report.__dict__)
    elif which == "stage":
        stage = _need(args, "stage")
        if stage == "zero_one":
            out = tf.make_zero_one(P)
        elif stage == "quantize":
            out = tf.quantize(P.support_formula())
        elif stage == "equitable":
            out = tf.make_equitable(P)
        elif stage == "prune":
            eps, delta, q = _eps_delta_q(args)
            alpha = float(ov.get("alpha", float(delta) ** -2))
            out = tf.prune_to_equitable_band(P, eps, q, alpha, delta, low=ov.get("prune_low"), high=ov.get("prune_high"))
        elif stage == "linearize":
            delta = _frac(_need(args, "delta"))
            out, rep = tf.reduce_support_linear(
                P, delta, seed, r=ov.get("linearize_r"), tolerance=ov.get("linearize_tolerance"),
                retries=int(ov.get("linearize_retries", 8)), cap=ctx["cap_enum"],
            )
            payload["report"] = _jsonable(rep.__dict__)
        elif stage == "amplify":
            out = tf.amplify(P, int(ov.get("reps", 2)), ov.get("mode", "reject_if_any"), int(ov.get("amplify_cap", tf.DEFAULT_AMPLIFY_CAP)))
        else:
            raise UsageError(f"unknown stage {stage!r}")
    else:
        raise UsageError(f"unknown transform {which!r}")
    payload["formula"] = out.to_json()
    return payload, 0


def _support_input(ctx, path):
    data = ctx["read"](path)
    if "constraints" in data:
        P = ProbFormula.from_json(data)
        return P, P.support_sets(), P.n, P.q
    try:
        return None, [tuple(Q) for Q in data["sets"]], int(data["n"]), int(data["q"])
    except KeyError as exc:
        raise ValidationError(f"family JSON missing field {exc.args[0]!r}") from None


def cmd_structure(args, ctx):
    P, sets, n, q = _support_input(ctx, _need(args, "input"))
    ov = ctx["overrides"]
    if q == "mixed":
        raise ValidationError("structures need equal-size query sets")
    scm = build_scm(sets, n, q, ov.get("thresholds"))
    if args.which == "scm":
        return scm.to_json(), 0
    if P is None:
        raise UsageError("constellations and pompoms need a formula input (weights are required)")
    c = find_constellation(scm, P, ov.get("eta"))
    if c is None:
        raise HypothesisError(
            "no constellation: level-0 match weight exceeds 1/(q+1)",
            {"level_weights": [str(x) for x in scm.level_weights(P)]},
        )
    report = verify_constellation(c, P, n, q)
    if args.which == "constellation":
        return {"constellation": c.to_json(), "verification": report.to_json()}, 0
    eps = _frac(_need(args, "epsilon"))
    if args.kind == "revealing":
        prop = Property.from_json(ctx["read"](_need(args, "property")))
        w = prop.alphabet.encode(_need(args, "word"))
        rs = extract_revealing_pompoms(
            c, w, prop, eps, ov.get("size_target"), strict=not ov.get("lenient", False), cap_sigma=ctx["cap_sigma"]
        )
        return {"revealing": rs.to_json(prop.alphabet)}, 0
    D = extract_discerning_pompoms(c, P, eps, ov.get("size_target"))
    return {"discerning": D.to_json()}, 0


def cmd_synthesize(args, ctx):
    eps = _frac(_need(args, "epsilon"))
    ov = ctx["overrides"]
    if args.which == "one-sided":
        prop = Property.from_json(ctx["read"](_need(args, "property")))
        T = synthesize_one_sided_sampler(prop, eps, int(_need(args, "q")), ov.get("p"))
    else:
        P = _load_formula(ctx, _need(args, "input"))
        pair = _load_pair(args, ctx)
        T = synthesize_two_sided_sampler(P, pair, eps, args.q, ov)
    return T.to_json(), 0


def _load_tester(ctx, path) -> SampleTester:
    return SampleTester.from_json(ctx["read"](path))


def cmd_run(args, ctx):
    if args.which == "sample":
        T = _load_tester(ctx, _need(args, "tester"))
        w = T.alphabet.encode(_need(args, "word"))
        ok, draw = run_sampler(T, w, ctx["seed"], ctx["cap_sigma"])
        return {"decision": "accept" if ok else "reject", "U": list(draw.U), "p": str(T.p), "seed": draw.seed}, 0
    plan = MultiTestPlan.from_json(ctx["read"](_need(args, "plan")))
    w = plan.testers[0].alphabet.encode(_need(args, "word")) if plan.testers else ()
    res = run_multitest(plan, w, ctx["seed"])
    out = res.to_json()
    out["union"] = "accept" if any(res.answers) else "reject"
    return out, 0


def cmd_eval(args, ctx):
    which = args.which
    if which in ("exact", "mc"):
        T = _load_tester(ctx, _need(args, "tester"))
        w = T.alphabet.encode(_need(args, "word"))
        if which == "exact":
            value = exact_sampler_acceptance(T, w)
            return {"method": "exact_enumeration", "estimate": str(value), "estimate_float": float(value)}, 0
        return monte_carlo_acceptance(T, w, ctx["trials"], ctx["seed"]).to_json(), 0
    if which == "devbound":
        ov = ctx["overrides"]
        m = int(ov.get("m", 1000))
        gammas = ov.get("gammas") or [j % 2 for j in range(m)]
        rep = check_deviation_bound(
            gammas, float(ov.get("p", 0.5)), float(ov.get("c", 2)), ctx["trials"], ctx["seed"], float(ov.get("eta", 0.2))
        )
        return rep.to_json(), 0 if rep.passed else EXIT_INVALID
    if which == "calc":
        rows = verify_appendix_calculations(factor=float(ctx["overrides"].get("factor", 1e-3)))
        if args.table:
            print(render_calc_table(rows), file=sys.stderr)
        fails = [r for r in rows if r.status == "fail"]
        payload = {
            "points": len(rows),
            "passed": sum(r.status == "pass" for r in rows),
            "failed": len(fails),
            "skipped": sum(r.status == "skipped" for r in rows),
            "rows": [r.__dict__ for r in rows],
        }
        return payload, 0 if not fails else EXIT_INVALID
    if which == "quality":
        pair = _load_pair(args, ctx)
        if pair is None:
            raise UsageError("--property is required for eval quality")
        eps = _frac(_need(args, "epsilon"))
        data = ctx["read"](_need(args, "input"))
        subject = SampleTester.from_json(data) if "side" in data else ProbFormula.from_json(data)
        rep = evaluate_test_quality(
            subject, pair, eps, method=args.method, trials=ctx["trials"], seed=ctx["seed"], cap=ctx["cap_enum"]
        )
        return rep.to_json(pair.alphabet), 0
    raise UsageError(f"unknown eval command {which!r}")


# -- parser ---------------------------------------------------------------------


def _common(p):
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--override", action="append", default=[], metavar="K=V")
    p.add_argument("--cap-enum", type=int, default=DEFAULT_ENUM_CAP)
    p.add_argument("--cap-sigma", type=int, default=DEFAULT_ENUM_CAP)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--epsilon")
    p.add_argument("--delta")
    p.add_argument("--q", type=int)
    p.add_argument("--property")
    p.add_argument("--inner")
    p.add_argument("--word")
    p.add_argument("--tester")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pompom", description="Sample-based testers from non-adaptive query tests.")
    parser.add_argument("--version", action="version", version=__version__)
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    g = groups.add_parser("property").add_subparsers(dest="which", required=True, parser_class=_Parser)
    p = g.add_parser("gen")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--alphabet-size", type=int, default=2)
    p.add_argument("--kind", choices=["explicit", "all-zero", "even-parity", "random"], default="explicit")
    p.add_argument("--members", nargs="*")
    p.add_argument("--size", type=int)
    p.set_defaults(func=cmd_property_gen)
    p = g.add_parser("validate")
    _common(p)
    p.set_defaults(func=cmd_property_validate)

    g = groups.add_parser("formula").add_subparsers(dest="which", required=True, parser_class=_Parser)
    p = g.add_parser("validate")
    _common(p)
    p.add_argument("--combinatorial", action="store_true")
    p.add_argument("--sided", choices=["one", "two"], default="two")
    p.set_defaults(func=cmd_formula_validate)
    p = g.add_parser("canonize")
    _common(p)
    p.set_defaults(func=cmd_formula_canonize)

    p = groups.add_parser("transform")
    p.add_argument("which", choices=["stage", "combi", "effective1", "effective2"])
    p.add_argument("stage", nargs="?", choices=["zero_one", "quantize", "equitable", "prune", "linearize", "amplify"])
    _common(p)
    p.set_defaults(func=cmd_transform)

    p = groups.add_parser("structure")
    p.add_argument("which", choices=["scm", "constellation", "pompoms"])
    p.add_argument("--kind", choices=["discerning", "revealing"], default="discerning")
    _common(p)
    p.set_defaults(func=cmd_structure)

    p = groups.add_parser("synthesize")
    p.add_argument("which", choices=["one-sided", "two-sided"])
    _common(p)
    p.set_defaults(func=cmd_synthesize)

    p = groups.add_parser("run")
    p.add_argument("which", choices=["sample", "multitest"])
    p.add_argument("--plan")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = groups.add_parser("eval")
    p.add_argument("which", choices=["exact", "mc", "devbound", "calc", "quality"])
    p.add_argument("--method", choices=["exact", "monte_carlo"], default="exact")
    p.add_argument("--table", action="store_true", help="print an aligned table to stderr (calc)")
    _common(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    hashes: dict = {}
    try:
        overrides = _parse_overrides(args.override)
        ctx = {
            "seed": args.seed,
            "overrides": overrides,
            "cap_enum": args.cap_enum,
            "cap_sigma": args.cap_sigma,
            "trials": args.trials,
            "read": lambda path: _read_json(path, hashes),
        }
        payload, code = args.func(args, ctx)
    except UsageError as exc:
        print(f"pompom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PompomError as exc:
        code = EXIT_CAP if isinstance(exc, CapExceededError) else EXIT_HYPOTHESIS if isinstance(exc, HypothesisError) else EXIT_INVALID
        print(f"pompom: {type(exc).__name__}: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        if report:
            print(json.dumps(_jsonable(report), sort_keys=True, indent=2), file=sys.stderr)
        return code
    command = " ".join(x for x in (args.group, args.which, getattr(args, "stage", None)) if x)
    payload = dict(payload)
    payload["meta"] = {
        "command": command,
        "seed": args.seed,
        "overrides": _jsonable(overrides),
        "inputs": dict(sorted(hashes.items())),
        "caps": {"enum": args.cap_enum, "sigma": args.cap_sigma},
        "trials": args.trials,
        "version": __version__,
    }
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
