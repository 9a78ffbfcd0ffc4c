"""Permutation metrics, dyadic partitions, blow-ups and sample-based pattern-class testers."""
from .blowup import BlowUpSpec, HereditaryProperty, KStarResult, exists_kblowup_in, k_star_T, k_star_alpha
from .metrics import (dyadic_exact, dyadic_square_exact, emd, emd_exact, kendall_tau, planar_tau_bounds,
                      planar_tau_exact_small, rectangular_approx, rectangular_exact, spearman_footrule,
                      square_exact)
from .perm import (Permutation, contains_pattern, identity, m_sample, parse_permutation, pattern_of, perm,
                   random_member_321, random_permutation, reverse)

__version__ = "0.1.0"

__all__ = [
    "BlowUpSpec", "HereditaryProperty", "KStarResult", "exists_kblowup_in", "k_star_T", "k_star_alpha",
    "dyadic_exact", "dyadic_square_exact", "emd", "emd_exact", "kendall_tau", "planar_tau_bounds",
    "planar_tau_exact_small", "rectangular_approx", "rectangular_exact", "spearman_footrule", "square_exact",
    "Permutation", "contains_pattern", "identity", "m_sample", "parse_permutation", "pattern_of", "perm",
    "random_member_321", "random_permutation", "reverse",
]
