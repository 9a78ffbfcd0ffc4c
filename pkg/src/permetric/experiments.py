"""Batch experiments driven by JSON configs, emitting one record per trial."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .blowup import HereditaryProperty
from .matching import dyadic_round_matching
from .metrics import (dyadic_exact, dyadic_bound_holds, emd_exact, kendall_tau, planar_tau_exact_small,
                      rectangular_exact, spearman_footrule, square_exact)
from .perm import Permutation, derive_seed, identity, parse_permutation, random_member_321, random_permutation, reverse
from .testers import (INCONCLUSIVE, IN_P, NOT_IN_P, TesterConfig, one_sided_test, run_trials,
                      two_sided_test, typicalsample_experiment, wilson_interval)

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


def frac_str(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def digest(*perms: Permutation) -> str:
    h = hashlib.sha256()
    for p in perms:
        h.update((" ".join(map(str, p.values)) + "\n").encode())
    return h.hexdigest()[:16]


@dataclass
class ExperimentResult:
    columns: list[str]
    records: list[dict]
    summary: dict
    failed: bool = False
    notes: list[str] = field(default_factory=list)


def _need(params: dict, keys: list[str]) -> None:
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError("missing parameters: " + ", ".join(missing))


def _trials(params: dict, key: str = "trials") -> int:
    t = params[key]
    if not isinstance(t, int) or t < 1:
        raise ConfigError(f"{key} must be a positive integer, got {t!r}")
    return t


def _fraction_param(params: dict, key: str) -> Fraction:
    try:
        return Fraction(str(params[key]))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key} must be a number or 'num/den' string") from None


# -- metric inequalities ------------------------------------------------------------

INEQUALITY_COLUMNS = [
    "trial", "seed", "digest", "kt", "footrule", "rect", "dyadic", "square", "emd", "ppt",
    "diaconis_graham", "planar_bracket", "rect_vs_emd", "emd_vs_rect", "square_bound",
    "dyadic_bound", "matching_certified",
]


def inequality_record(p1: Permutation, p2: Permutation, ppt_cap: int = 7) -> dict:
    kt, fr = kendall_tau(p1, p2), spearman_footrule(p1, p2)
    r, d, s = rectangular_exact(p1, p2), dyadic_exact(p1, p2), square_exact(p1, p2)
    em = emd_exact(p1, p2)[0]
    ppt = planar_tau_exact_small(p1, p2, cap=ppt_cap) if p1.n <= ppt_cap else None
    rec = {
        "kt": frac_str(kt), "footrule": frac_str(fr), "rect": frac_str(r), "dyadic": frac_str(d),
        "square": frac_str(s), "emd": frac_str(em), "ppt": "" if ppt is None else frac_str(ppt),
        "diaconis_graham": kt <= fr <= 2 * kt,
        "planar_bracket": True if ppt is None else ppt <= em <= 2 * ppt,
        "rect_vs_emd": r * r <= 8 * em,
        "emd_vs_rect": em * em <= 2304 * r,
        "square_bound": s <= r and r * r <= 7 * s,
        "dyadic_bound": d <= r and dyadic_bound_holds(r, d),
        "matching_certified": r == 0 or dyadic_round_matching(p1, p2, r).certified(),
    }
    return rec


def run_metric_inequalities(params: dict) -> ExperimentResult:
    _need(params, ["n", "trials", "seed"])
    n, trials, seed = int(params["n"]), _trials(params), int(params["seed"])
    if n < 2:
        raise ConfigError("n must be >= 2")

    def one(i: int) -> dict:
        s = derive_seed(seed, i)
        p1 = random_permutation(n, derive_seed(s, 0))
        p2 = random_permutation(n, derive_seed(s, 1))
        rec = {"trial": i, "seed": s, "digest": digest(p1, p2)}
        rec.update(inequality_record(p1, p2))
        return rec

    records = run_trials(one, trials)
    checks = [c for c in INEQUALITY_COLUMNS if c not in ("trial", "seed", "digest", "kt", "footrule", "rect",
                                                         "dyadic", "square", "emd", "ppt")]
    passes = {c: sum(bool(r[c]) for r in records) for c in checks}
    failed = any(v != trials for v in passes.values())
    summary = {"experiment": "metric-inequalities", "n": n, "trials": trials, "passes": passes,
               "all_pass": not failed}
    return ExperimentResult(INEQUALITY_COLUMNS, records, summary, failed)


# -- typical sample ---------------------------------------------------------------

def run_typicalsample(params: dict) -> ExperimentResult:
    _need(params, ["n", "T", "k", "epsilon", "trials", "seed"])
    eps = _fraction_param(params, "epsilon")
    trials = _trials(params)
    seed = int(params["seed"])
    res = typicalsample_experiment(int(params["n"]), int(params["T"]), int(params["k"]), eps, trials, seed,
                                   require_hypothesis=bool(params.get("require_hypothesis", True)))
    records = [{"trial": i, "seed": derive_seed(seed, i), "success": ok} for i, ok in enumerate(res["outcomes"])]
    freq = res["frequency"]
    summary = {
        "experiment": "typicalsample", "n": res["n"], "T": res["T"], "k": res["k"],
        "epsilon": frac_str(eps), "t": res["t"], "trials": trials, "successes": res["successes"],
        "frequency": frac_str(freq), "wilson99": list(res["wilson"]),
        "hypothesis_met": res["hypothesis_met"], "guaranteed_frequency": frac_str(1 - eps),
        "meets_bound": freq >= 1 - eps,
    }
    return ExperimentResult(["trial", "seed", "success"], records, summary, not summary["meets_bound"])


# -- tester sweep -----------------------------------------------------------------

GENERATORS: dict[str, Callable[[int, int], Permutation]] = {
    "member321": random_member_321,
    "uniform": random_permutation,
    "identity": lambda n, seed: identity(n),
    "reverse": lambda n, seed: reverse(n),
}


def parse_pattern(spec) -> Permutation:
    """A pattern given as a list of ints, "3 2 1", "3,2,1" or the compact "321"."""
    if isinstance(spec, str):
        s = spec.strip()
        if s.isdigit() and len(s) < 10:
            s = " ".join(s)
        return parse_permutation(s)
    return Permutation(tuple(int(v) for v in spec))


def parse_property(spec) -> HereditaryProperty:
    if isinstance(spec, str):
        spec = [spec]
    try:
        return HereditaryProperty(tuple(parse_pattern(s) for s in spec))
    except ValueError as exc:
        raise ConfigError(f"bad forbidden pattern: {exc}") from None


def run_tester_sweep(params: dict) -> ExperimentResult:
    _need(params, ["forbidden", "generator", "n", "M", "trials", "seed"])
    prop = parse_property(params["forbidden"])
    gen_name = params["generator"]
    if gen_name not in GENERATORS:
        raise ConfigError(f"unknown generator {gen_name!r}; choose from {sorted(GENERATORS)}")
    gen = GENERATORS[gen_name]
    mode = params.get("mode", "two")
    if mode not in ("one", "two"):
        raise ConfigError("mode must be 'one' or 'two'")
    n, M, trials, seed = int(params["n"]), int(params["M"]), _trials(params), int(params["seed"])
    eps = _fraction_param(params, "epsilon") if "epsilon" in params else Fraction(1, 2)
    k_cap = int(params.get("k_cap", 4))
    budget = int(params.get("budget", 10 ** 6))
    test = two_sided_test if mode == "two" else one_sided_test

    def one(i: int) -> dict:
        s = derive_seed(seed, i)
        p = gen(n, derive_seed(s, 0))
        cfg = TesterConfig(eps, M, None, k_cap, budget, derive_seed(s, 1))
        v = test(p, prop, cfg)
        return {"trial": i, "seed": s, "digest": digest(p), "decision": v.decision,
                "certificate_k": v.certificate.get("k", "")}

    records = run_trials(one, trials)
    summary = {"experiment": "tester-sweep", "generator": gen_name, "mode": mode, "n": n, "M": M,
               "trials": trials, "property": str(prop)}
    for label in (IN_P, NOT_IN_P, INCONCLUSIVE):
        c = sum(r["decision"] == label for r in records)
        summary[f"freq_{label}"] = frac_str(Fraction(c, trials))
        summary[f"wilson99_{label}"] = list(wilson_interval(c, trials))
    failed = False
    if "expect" in params:
        exp = params["expect"]
        want = _fraction_param(exp, "min_frequency")
        got = Fraction(sum(r["decision"] == exp["decision"] for r in records), trials)
        summary["expectation_met"] = got >= want
        failed = not summary["expectation_met"]
    return ExperimentResult(["trial", "seed", "digest", "decision", "certificate_k"], records, summary, failed)


EXPERIMENTS = {
    "metric-inequalities": run_metric_inequalities,
    "typicalsample": run_typicalsample,
    "tester-sweep": run_tester_sweep,
}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    if cfg.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config {path} must declare \"version\": {CONFIG_VERSION}")
    return cfg


def run_experiment(name: str, cfg: dict) -> ExperimentResult:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    if cfg.get("name", name) != name:
        raise ConfigError(f"config is for {cfg['name']!r}, not {name!r}")
    params = cfg.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be a JSON object")
    return EXPERIMENTS[name](params)


def csv_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return frac_str(v)
    return str(v)


def write_csv(result: ExperimentResult, fh, header_comment: str | None = None) -> None:
    if header_comment:
        fh.write(f"# {header_comment}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(result.columns)
    for rec in result.records:
        w.writerow([csv_value(rec[c]) for c in result.columns])
