"""Command line entry point: ``permetric <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 a checked invariant failed.
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
import time
from fractions import Fraction

from . import metrics
from .blowup import HereditaryProperty, k_star_T, k_star_alpha
from .experiments import ConfigError, frac_str, load_config, run_experiment, write_csv
from .matching import (brute_force_assignment, emd_cost_matrix, footrule_transform, displacement,
                       min_cost_assignment, dyadic_round_matching)
from .partition import (PartitionError, candidate_bound_holds, candidate_counts, default_params_v1,
                        default_params_v2, dyadic_partition_v1, dyadic_partition_v2, validate_partition)
from .perm import Permutation, PermutationError, read_permutations
from .testers import ParameterError, TesterConfig, one_sided_test, two_sided_test

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: {message}")


def _frac_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _load_one(path: str, flag: str) -> Permutation:
    perms = _load_all(path, flag)
    return perms[0]


def _load_all(path: str, flag: str) -> list[Permutation]:
    try:
        perms = read_permutations(path)
    except OSError as exc:
        raise InputError(f"{flag} {path}: cannot read file ({exc.strerror})") from None
    except PermutationError as exc:
        raise InputError(f"{flag} {path}: malformed permutation ({exc.code}: {exc})") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{flag} {path}: malformed file ({exc})") from None
    if not perms:
        raise InputError(f"{flag} {path}: file holds no permutation")
    return perms


def _property(paths: list[str]) -> HereditaryProperty:
    pats = []
    for path in paths:
        pats.extend(_load_all(path, "--forbidden"))
    return HereditaryProperty(tuple(pats))


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, separators=(",", ":"))
    sys.stdout.write("\n")


def _same_length(a: Permutation, b: Permutation) -> None:
    if a.n != b.n:
        raise InputError(f"length mismatch: --a has n={a.n}, --b has n={b.n}")


# -- subcommands ----------------------------------------------------------------

def cmd_metric(args) -> int:
    a, b = _load_one(args.a, "--a"), _load_one(args.b, "--b")
    _same_length(a, b)
    witness = None
    if args.kind == "emd":
        value, theta, _ = metrics.emd_exact(a, b)
        witness = list(theta)
    elif args.kind == "rect" and args.epsilon is not None:
        value = metrics.rectangular_approx(a, b, args.epsilon)
    else:
        if args.kind == "ppt" and a.n > 8:
            raise InputError("ppt is exact only for n <= 8; use --kind emd for the bracket [emd/2, emd]")
        value = metrics.distance(args.kind, a, b)
    if args.format == "csv":
        sys.stdout.write("kind,value\n")
        sys.stdout.write(f"{args.kind},{frac_str(value)}\n")
    else:
        _emit({"kind": args.kind, "num": value.numerator, "den": value.denominator, "witness": witness})
    return EXIT_OK


def cmd_emd_match(args) -> int:
    a, b = _load_one(args.a, "--a"), _load_one(args.b, "--b")
    _same_length(a, b)
    if a.n < 2:
        raise InputError("emd-match needs n >= 2")
    pairs = a.n * (a.n - 1) // 2
    if args.method == "exact":
        asg = min_cost_assignment(emd_cost_matrix(a, b))
        norm = Fraction(asg.total_cost, pairs)
        _emit({"method": "exact", "theta": list(asg.theta), "cost": asg.total_cost,
               "num": norm.numerator, "den": norm.denominator})
        return EXIT_OK
    m = dyadic_round_matching(a, b)
    norm = m.normalized_cost
    _emit({
        "method": "rounds", "theta": list(m.assignment.theta), "cost": m.assignment.total_cost,
        "num": norm.numerator, "den": norm.denominator, "rect": frac_str(m.rect), "h": m.h,
        "certified": m.certified(),
        "rounds": [{"round": r.round, "level": r.level, "pairs": [list(x) for x in r.pairs]} for r in m.rounds],
    })
    return EXIT_OK if m.certified() else EXIT_INVARIANT


def cmd_partition(args) -> int:
    p = _load_one(args.perm, "--perm")
    try:
        if args.variant == "v1":
            if args.delta is not None and args.max_level is not None:
                delta, L = args.delta, args.max_level
            else:
                c = args.c_sigma if args.c_sigma is not None else 1
                d0, L0 = default_params_v1(args.epsilon, c)
                delta = args.delta if args.delta is not None else d0
                L = args.max_level if args.max_level is not None else L0
            out = dyadic_partition_v1(p, delta, L)
            K = None
        else:
            d1, d2, K, L = default_params_v2(args.epsilon)
            if args.delta is not None:
                d1 = args.delta
            if args.delta2 is not None:
                d2 = args.delta2
            if args.K is not None:
                K = args.K
            if args.max_level is not None:
                L = args.max_level
            out = dyadic_partition_v2(p, d1, d2, K, L)
    except PartitionError as exc:
        raise InputError(str(exc)) from None
    rep = validate_partition(p, out)
    checks = dict(rep.checks)
    if K is not None:
        checks["candidate_bound"] = candidate_bound_holds(out, K)
    squares = [
        {"level": sq.level, "col": sq.col, "row": sq.row, "count": out.counts[sq], "state": out.state(sq)}
        for sq in sorted(out.active | out.frozen | out.mature)
    ]
    params = {k: (frac_str(v) if isinstance(v, Fraction) else v) for k, v in out.params.items()}
    _emit({"n": p.n, "params": params, "squares": squares, "candidate_counts": candidate_counts(out),
           "validator": checks, "problems": rep.problems})
    return EXIT_OK if all(checks.values()) else EXIT_INVARIANT


def cmd_kstar(args) -> int:
    prop = _property(args.forbidden)
    if (args.alpha is None) == (args.T is None):
        raise InputError("give exactly one of --alpha FILE or --T INT")
    if args.alpha is not None:
        r = k_star_alpha(_load_one(args.alpha, "--alpha"), prop, args.k_cap, args.budget)
    else:
        try:
            r = k_star_T(args.T, prop, args.k_cap, args.budget)
        except ValueError as exc:
            raise InputError(f"--T: {exc}") from None
    d = r.to_dict()
    _emit({"result": str(r), "kind": d["kind"], "value": d["value"], "witness": d["witnesses"] or None,
           "explored": r.explored})
    return EXIT_OK


def cmd_test(args) -> int:
    p = _load_one(args.perm, "--perm")
    prop = _property(args.forbidden)
    cfg = TesterConfig(args.epsilon, args.M, args.c_sigma, args.k_cap, args.budget, args.seed)
    try:
        v = (two_sided_test if args.mode == "two" else one_sided_test)(p, prop, cfg)
    except ParameterError as exc:
        raise InputError(str(exc)) from None
    _emit(v.to_dict())
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        cfg = load_config(args.config)
        res = run_experiment(args.name, cfg)
    except OSError as exc:
        raise InputError(f"--config {args.config}: cannot read file ({exc.strerror})") from None
    except (ConfigError, ParameterError) as exc:
        raise InputError(f"--config {args.config}: {exc}") from None
    stamp = "generated " + time.strftime("%Y-%m-%dT%H:%M:%S")
    out_path = (cfg.get("output") or {}).get("path")
    if out_path:
        with open(out_path, "w", newline="") as fh:
            write_csv(res, fh, stamp)
        _emit({"summary": res.summary, "csv": out_path})
    else:
        write_csv(res, sys.stdout, stamp)
        json.dump({"summary": res.summary}, sys.stderr)
        sys.stderr.write("\n")
    return EXIT_INVARIANT if res.failed else EXIT_OK


def selftest() -> dict[str, bool]:
    """Exhaustive oracle checks over every pair of permutations with n <= 4."""
    results = {}
    ok = {k: True for k in ("assignment", "diaconis_graham", "planar_bracket", "rect_vs_emd", "emd_vs_rect",
                            "square_bound", "dyadic_bound", "matching", "footrule_transform", "partition")}
    for n in range(2, 5):
        perms = [Permutation(v) for v in itertools.permutations(range(1, n + 1))]
        for a in perms:
            out = dyadic_partition_v1(a, Fraction(1, 3), 2)
            ok["partition"] &= validate_partition(a, out).ok
            for b in perms:
                c = emd_cost_matrix(a, b)
                best = brute_force_assignment(c).total_cost
                ok["assignment"] &= min_cost_assignment(c).total_cost == best
                kt, fr = metrics.kendall_tau(a, b), metrics.spearman_footrule(a, b)
                ok["diaconis_graham"] &= kt <= fr <= 2 * kt
                em = Fraction(best, n * (n - 1) // 2)
                ppt = metrics.planar_tau_exact_small(a, b)
                ok["planar_bracket"] &= ppt <= em <= 2 * ppt
                r = metrics.rectangular_exact(a, b)
                ok["rect_vs_emd"] &= r * r <= 8 * em
                ok["emd_vs_rect"] &= em * em <= 2304 * r
                s, d = metrics.square_exact(a, b), metrics.dyadic_exact(a, b)
                ok["square_bound"] &= s <= r and r * r <= 7 * s
                ok["dyadic_bound"] &= d <= r and metrics.dyadic_bound_holds(r, d)
                ok["matching"] &= dyadic_round_matching(a, b).assignment.total_cost >= best
    for n in range(1, 5):
        for g in itertools.product(range(1, n + 1), repeat=n):
            ok["footrule_transform"] &= displacement(footrule_transform(g)) <= 2 * displacement(g)
    results.update(ok)
    return results


def cmd_selftest(args) -> int:
    res = selftest()
    _emit({"checks": res, "all_pass": all(res.values())})
    return EXIT_OK if all(res.values()) else EXIT_INVARIANT


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="permetric", description="Permutation metrics, blow-ups and pattern-class testers.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    m = sub.add_parser("metric", help="distance between two permutations")
    m.add_argument("--kind", required=True, choices=["kt", "footrule", "rect", "dyadic", "square", "dsquare", "emd", "ppt"])
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--epsilon", type=_frac_arg)
    m.add_argument("--format", choices=["json", "csv"], default="json")
    m.set_defaults(func=cmd_metric)

    e = sub.add_parser("emd-match", help="optimal or round-based matching")
    e.add_argument("--a", required=True)
    e.add_argument("--b", required=True)
    # "thm2" is kept as an alias of "rounds" for existing scripts
    e.add_argument("--method", choices=["exact", "rounds", "thm2"], default="exact")
    e.set_defaults(func=cmd_emd_match)

    pa = sub.add_parser("partition", help="dyadic partition of a permutation")
    pa.add_argument("--perm", required=True)
    pa.add_argument("--variant", choices=["v1", "v2"], default="v1")
    pa.add_argument("--epsilon", type=_frac_arg, default=Fraction(1, 4))
    pa.add_argument("--delta", type=_frac_arg)
    pa.add_argument("--delta2", type=_frac_arg)
    pa.add_argument("--K", type=int)
    pa.add_argument("--max-level", type=int)
    pa.add_argument("--c-sigma", type=_frac_arg)
    pa.set_defaults(func=cmd_partition)

    k = sub.add_parser("kstar", help="blow-up parameter of a pattern or of all patterns of length T")
    k.add_argument("--alpha")
    k.add_argument("--T", type=int)
    k.add_argument("--forbidden", nargs="+", required=True)
    k.add_argument("--k-cap", type=int, default=4)
    k.add_argument("--budget", type=int, default=10 ** 6)
    k.set_defaults(func=cmd_kstar)

    t = sub.add_parser("test", help="run a one- or two-sided tester once")
    t.add_argument("--perm", required=True)
    t.add_argument("--forbidden", nargs="+", required=True)
    t.add_argument("--mode", choices=["one", "two"], default="two")
    t.add_argument("--epsilon", type=_frac_arg, default=Fraction(1, 2))
    t.add_argument("--M", type=int)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--k-cap", type=int, default=4)
    t.add_argument("--budget", type=int, default=10 ** 6)
    t.add_argument("--c-sigma", type=_frac_arg)
    t.set_defaults(func=cmd_test)

    x = sub.add_parser("experiment", help="batch experiment from a JSON config")
    x.add_argument("--name", required=True, choices=["typicalsample", "tester-sweep", "metric-inequalities"])
    x.add_argument("--config", required=True)
    x.set_defaults(func=cmd_experiment)

    s = sub.add_parser("selftest", help="exhaustive oracle checks for n <= 4")
    s.set_defaults(func=cmd_selftest)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command is None:
            ap.print_usage(sys.stderr)
            raise InputError("permetric: a subcommand is required")
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except metrics.LengthMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run_cli(argv: list[str]) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
