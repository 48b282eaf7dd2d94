"""Periodic Riccati equations ``x' = x^2 + gamma(t)``: discriminant bounds,
harmonic balance, reductions from general form and a Poincare-map oracle."""

from .exprparse import DomainError, ParseError, parse
from .family import AffineFamily, equidistant, scan as family_scan
from .functionals import Bracket, Classification, classify_delta, discriminant, mu_bracket, mu_lower, mu_upper
from .harmonic_balance import HBOptions, NonConvergence, best_bracket, hb_solve, hb_sequence
from .oracle import ScanOptions, bifurcation_scan, count_cycles, cycle_info, displacement, integrate
from .periodic import TWO_PI, PeriodicFn, TrigPoly, center
from .reduction import GeneralRiccati, reduce_nonvanishing, singular_reduce

__version__ = "0.1.0"

__all__ = [
    "AffineFamily", "Bracket", "Classification", "DomainError", "GeneralRiccati", "HBOptions",
    "NonConvergence", "ParseError", "PeriodicFn", "ScanOptions", "TWO_PI", "TrigPoly",
    "best_bracket", "bifurcation_scan", "center", "classify_delta", "count_cycles", "cycle_info",
    "discriminant", "displacement", "equidistant", "family_scan", "hb_sequence", "hb_solve",
    "integrate", "mu_bracket", "mu_lower", "mu_upper", "parse", "reduce_nonvanishing",
    "singular_reduce",
]
