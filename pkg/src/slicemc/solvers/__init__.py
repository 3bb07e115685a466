from .homotopy import filter_real, newton_refine, track_total_degree
from .types import ComplexSolution, SolverSettings, TrackReport
from .univariate import solve_univariate

__all__ = [
    "ComplexSolution",
    "SolverSettings",
    "TrackReport",
    "filter_real",
    "newton_refine",
    "solve_univariate",
    "track_total_degree",
]
