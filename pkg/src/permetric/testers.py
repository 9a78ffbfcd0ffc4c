"""Sample-based testers for pattern classes, their parameter formulas and a Monte Carlo harness."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from scipy.stats import norm

from .blowup import HereditaryProperty, KStarResult, find_grid_blowup, k_star_alpha
from .perm import Permutation, SampleDraw, derive_seed, m_sample, random_permutation

IN_P = "InP"
NOT_IN_P = "NotInP"
INCONCLUSIVE = "Inconclusive"


class ParameterError(ValueError):
    pass


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def exact_log2(x: Fraction) -> Fraction | None:
    """log2(x) when x is an integer power of two, else None."""
    num, den = x.numerator, x.denominator
    if num & (num - 1) == 0 and den & (den - 1) == 0:
        return Fraction(num.bit_length() - den.bit_length())
    return None


def _log2(x: Fraction) -> Fraction:
    e = exact_log2(x)
    return e if e is not None else Fraction(math.log2(x.numerator) - math.log2(x.denominator))


def default_c_sigma(s: int) -> int:
    """Deliberate over-estimate of the extremal constant for a length-s pattern."""
    return 2 ** (s * math.ceil(math.log2(s)) + 4) if s > 1 else 16


@dataclass
class ParamSet:
    M: int | None
    n0: int | None
    provenance: str
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"M": self.M, "n0": self.n0, "provenance": self.provenance, "flags": list(self.flags)}


def sample_size_bound(M: int, eps, kstar: KStarResult | None) -> int | None:
    """ceil(32 * M**5 * k / eps**3) for a finite k*, else None."""
    if kstar is None or not kstar.finite:
        return None
    eps = _frac(eps)
    return math.ceil(32 * Fraction(M) ** 5 * kstar.value / eps ** 3)


def params_nearly_linear(eps, c_sigma, kstar_M: KStarResult | None = None) -> ParamSet:
    eps = _frac(eps)
    if not 0 < eps < 1:
        raise ParameterError(f"epsilon must lie in (0,1), got {eps}")
    c = _frac(c_sigma)
    if c <= 0:
        raise ParameterError("c_sigma must be positive")
    L = _log2(2 / eps)
    M = math.ceil(2000 * c * L * L / eps)
    flags = [] if exact_log2(2 / eps) is not None else ["log2 evaluated in floating point"]
    n0 = sample_size_bound(M, eps, kstar_M)
    if n0 is None:
        flags.append("n0 unknown: k*(M) not finite")
    return ParamSet(M, n0, "nearly-linear", flags)


def params_universal(eps, kstar_M: KStarResult | None = None) -> ParamSet:
    eps = _frac(eps)
    if not 0 < eps <= 1:
        raise ParameterError(f"epsilon must lie in (0,1], got {eps}")
    M = math.ceil(20000 / eps ** 2)
    n0 = sample_size_bound(M, eps, kstar_M)
    return ParamSet(M, n0, "universal", [] if n0 is not None else ["n0 unknown: k*(M) not finite"])


def params_one_sided(eps, c_sigma, kstar_fn: Callable[[int], KStarResult | None]) -> ParamSet:
    """Sample size: the smaller n0 of the two two-sided calculators at eps/2."""
    eps = _frac(eps)
    if not 0 < eps < 1:
        raise ParameterError(f"epsilon must lie in (0,1), got {eps}")
    half = eps / 2
    m1 = params_nearly_linear(half, c_sigma).M
    m2 = params_universal(half).M
    a = params_nearly_linear(half, c_sigma, kstar_fn(m1))
    b = params_universal(half, kstar_fn(m2))
    known = [ps.n0 for ps in (a, b) if ps.n0 is not None]
    flags = []
    if a.n0 is None:
        flags.append("nearly-linear branch unknown")
    if b.n0 is None:
        flags.append("universal branch unknown")
    return ParamSet(min(known) if known else None, None, "one-sided", flags)


@dataclass
class TesterConfig:
    epsilon: Fraction = Fraction(1, 2)
    M_override: int | None = None
    c_sigma: Fraction | None = None
    k_cap: int = 4
    budget: int = 10 ** 6
    seed: int = 0

    __test__ = False  # keep pytest from collecting this as a test class

    def sample_size(self, prop: HereditaryProperty) -> tuple[int, list[str]]:
        if self.M_override is not None:
            if self.M_override < 1:
                raise ParameterError("M override must be positive")
            return self.M_override, ["M overridden"]
        flags = []
        c = self.c_sigma
        if c is None:
            c = default_c_sigma(max(s.n for s in prop.forbidden))
            flags.append(f"c_sigma defaulted to {c}")
        return params_nearly_linear(self.epsilon, c).M, flags


@dataclass
class Verdict:
    decision: str
    sample: SampleDraw
    M: int
    certificate: dict
    kstar: KStarResult | None = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "M": self.M,
            "positions": list(self.sample.positions),
            "induced": list(self.sample.induced.values),
            "certificate": self.certificate,
            "flags": self.flags,
        }


def two_sided_test(p: Permutation, prop: HereditaryProperty, cfg: TesterConfig) -> Verdict:
    """Accept iff every k-blow-up search up to k_cap finds a member of the class."""
    M, flags = cfg.sample_size(prop)
    if M > p.n:
        raise ParameterError(f"sample size {M} exceeds n = {p.n}")
    draw = m_sample(p, M, cfg.seed)
    r = k_star_alpha(draw.induced, prop, cfg.k_cap, cfg.budget)
    if r.kind == "infinite":
        cert = {"k_cap": cfg.k_cap, "witnesses": r.to_dict()["witnesses"]}
        decision = IN_P
    elif r.kind == "finite":
        cert = {"k": r.value, "explored": r.explored}
        if r.value == 1:
            sigma, pos = prop.violation(draw.induced)
            cert["pattern"] = list(sigma.values)
            cert["positions"] = [draw.positions[i - 1] for i in pos]
        decision = NOT_IN_P
    else:
        cert = {"unknown_at_k": r.value, "explored": r.explored, "budget": cfg.budget}
        decision = INCONCLUSIVE
    return Verdict(decision, draw, M, cert, r, flags)


def one_sided_test(p: Permutation, prop: HereditaryProperty, cfg: TesterConfig,
                   kstar_fn: Callable[[int], KStarResult | None] | None = None) -> Verdict:
    """Accept iff the sample itself avoids every forbidden pattern."""
    flags = []
    if cfg.M_override is not None:
        M = cfg.M_override
        flags.append("M overridden")
    else:
        c = cfg.c_sigma if cfg.c_sigma is not None else default_c_sigma(max(s.n for s in prop.forbidden))
        ps = params_one_sided(cfg.epsilon, c, kstar_fn or (lambda m: None))
        if ps.M is None:
            raise ParameterError("one-sided sample size unknown; supply an M override")
        M = ps.M
        flags += ps.flags
    if M < 1 or M > p.n:
        raise ParameterError(f"sample size {M} must lie in 1..{p.n}")
    draw = m_sample(p, M, cfg.seed)
    bad = prop.violation(draw.induced)
    if bad is None:
        return Verdict(IN_P, draw, M, {}, None, flags)
    sigma, pos = bad
    cert = {"k": 1, "pattern": list(sigma.values), "positions": [draw.positions[i - 1] for i in pos]}
    return Verdict(NOT_IN_P, draw, M, cert, None, flags)


# -- Monte Carlo ------------------------------------------------------------------

Z99 = float(norm.ppf(0.995))


def wilson_interval(successes: int, trials: int, z: float = Z99) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("need at least one trial")
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("PERMETRIC_THREADS", "1")))
    except ValueError:
        return 1


def run_trials(fn: Callable[[int], object], trials: int) -> list:
    """fn(index) for each trial, results in index order regardless of scheduling."""
    workers = thread_count()
    if workers == 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def monte_carlo(generator: Callable[[int, int], Permutation],
                tester: Callable[[Permutation, int], Verdict],
                trials: int, master_seed: int) -> dict:
    """generator(index, seed) -> permutation; tester(permutation, seed) -> verdict."""
    if trials < 1:
        raise ValueError("trials must be >= 1")

    def one(i: int) -> str:
        s = derive_seed(master_seed, i)
        p = generator(i, derive_seed(s, 0))
        return tester(p, derive_seed(s, 1)).decision

    decisions = run_trials(one, trials)
    out = {"trials": trials, "decisions": decisions}
    for label in (IN_P, NOT_IN_P, INCONCLUSIVE):
        k = decisions.count(label)
        out[f"freq_{label}"] = Fraction(k, trials)
        out[f"wilson_{label}"] = wilson_interval(k, trials)
    return out


def typicalsample_hypothesis(n: int, T: int, k: int, eps) -> bool:
    eps = _frac(eps)
    return n >= 32 * Fraction(T) ** 5 * k / eps ** 3


def typicalsample_experiment(n: int, T: int, k: int, eps, trials: int, seed: int,
                             require_hypothesis: bool = True) -> dict:
    """Frequency with which a random T-sample of a random permutation has a
    k-blow-up certified by dense cells of a t x t grid."""
    eps = _frac(eps)
    met = typicalsample_hypothesis(n, T, k, eps)
    if require_hypothesis and not met:
        raise ParameterError(f"n = {n} is below 32*T^5*k/eps^3 = {float(32 * T ** 5 * k / eps ** 3):.0f}")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    t = math.ceil(4 * T * T / eps)

    def one(i: int) -> bool:
        s = derive_seed(seed, i)
        p = random_permutation(n, derive_seed(s, 0))
        draw = m_sample(p, T, derive_seed(s, 1))
        return find_grid_blowup(p, draw.induced, k, t, hint=draw.positions) is not None

    hits = run_trials(one, trials)
    succ = sum(hits)
    return {
        "n": n, "T": T, "k": k, "epsilon": eps, "t": t, "trials": trials,
        "successes": succ, "frequency": Fraction(succ, trials),
        "wilson": wilson_interval(succ, trials), "hypothesis_met": met, "outcomes": hits,
    }
