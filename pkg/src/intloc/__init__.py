"""Numerical harness for integro-local limit theorems for sums of i.i.d. variables.

Approximations of ``P(S_n in [x, x+delta))`` (Stone's and its one-term
refinement), three independent oracles (FFT convolution, Monte Carlo and
smoothed ch.f. inversion) and the sweeps that measure decay rates.
"""

from .dist_zoo import ZOO_NAMES, DistributionSpec, builtin, cramer_sup, standardize
from .edgeworth import (ApproxBreakdown, CumulantSet, IntervalQuery, cdf_difference_approx,
                        edgeworth_cdf, hermite_che, refined_approx, stone_approx)
from .inversion import (Bracket, InversionConfig, chf_expansion_residual,
                        region_split_diagnostics, sandwich_bracket, smoothed_interval_prob)
from .oracles import OracleEstimate, interval_prob_fft, interval_prob_mc
from .rates import SweepConfig, atom_floor_demo, mass_check, rate_fit, sup_error, sweep

__all__ = [
    "ZOO_NAMES", "DistributionSpec", "builtin", "cramer_sup", "standardize",
    "ApproxBreakdown", "CumulantSet", "IntervalQuery", "cdf_difference_approx",
    "edgeworth_cdf", "hermite_che", "refined_approx", "stone_approx",
    "Bracket", "InversionConfig", "chf_expansion_residual", "region_split_diagnostics",
    "sandwich_bracket", "smoothed_interval_prob",
    "OracleEstimate", "interval_prob_fft", "interval_prob_mc",
    "SweepConfig", "atom_floor_demo", "mass_check", "rate_fit", "sup_error", "sweep",
]
