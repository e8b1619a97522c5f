"""
fdrlab: knockoff and Gaussian-mirror variable selection under the Rare/Weak
signal model, with closed-form error exponents and a Monte Carlo harness.
"""
__version__ = "0.1.0"

from .design import DesignSpec, DesignMatrix, make_gram, realize_design, min_eigenvalue
from .signal import SignalConfig, BetaVector, draw_beta, draw_response
from .rank import lasso_entry_times, bivariate_entry_times, quad_degenerate_path, least_squares
from .tamper import knockoff_s, build_knockoffs, gm_augment, degm_augment
from .mirror_stats import (signed_max, difference, mirror_stat, knockoff_scores, gm_scores,
                           degm_scores, select_at_fdr, select_at_u, evaluate)
from .regions import ellipsoid_exponent, rejection_region_membership
from .theory import (MethodSpec, ExponentPair, fp_fn_exponents, f_plus_hamm, hamming_exponent,
                     tradeoff_curve, phase_curves, optimal_u, variance_profile, RHO0)
