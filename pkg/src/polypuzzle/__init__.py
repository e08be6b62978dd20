"""Puzzle-piece analysis of polynomial Julia sets.

Quadratic pipelines (puzzle construction, tableaux, modulus certificates,
shrinkage checks) live in dyncore/puzzle/tableau/lcert; higher-degree grid
puzzles (thin annuli, area bookkeeping, component classification, coding)
live in bhpuzzle; modulus holds the certified interval arithmetic and the
grid extremal-length estimator.
"""

from .dyncore import PolynomialMap, alpha_ray_cycle, critical_orbit, fixed_points, green, trace_ray
from .modulus import ModulusInterval, estimate_modulus, groetzsch_combine, mcmullen_bound, round_modulus
from .puzzle import PuzzleTower, build_depth_zero, build_tower, piece_containing, refine, star_pieces
from .tableau import Tableau, classify, fibonacci_tableau, genealogy, tableau_from_orbit, validate

__version__ = "0.1.0"
