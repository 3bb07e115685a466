"""Shared solver configuration and result carriers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolverSettings:
    """Tolerances and step control for the polynomial solvers.

    ``gamma`` is the unit-modulus constant mixing the start system into the
    homotopy.  When left as None each solve draws its own; pass a fixed
    value for reproducible tracking.
    """

    residual_tolerance: float = 1e-10
    newton_max_iters: int = 50
    initial_step: float = 0.1
    min_step: float = 1e-7
    max_step: float = 0.5
    real_threshold: float = 1e-8
    dedup_radius: float = 1e-6
    gamma: complex | None = None
    corrector_iters: int = 3
    corrector_tolerance: float = 1e-8
    step_growth_streak: int = 4
    divergence_radius: float = 1e10

    def with_gamma(self, gamma: complex) -> "SolverSettings":
        out = SolverSettings(**self.__dict__)
        out.gamma = complex(gamma)
        return out


@dataclass
class ComplexSolution:
    """One endpoint of a solver run.

    ``residual`` is the sup norm of the system at the point, re-evaluated
    with plain polynomial arithmetic rather than solver internals.
    """

    coordinates: np.ndarray
    residual: float
    converged: bool
    condition_estimate: float = field(default=float("nan"))


@dataclass
class TrackReport:
    """Outcome of a homotopy continuation run.

    Every start path is accounted for exactly once:
    ``paths_total == paths_converged + paths_diverged + paths_failed``.
    ``solutions`` holds deduplicated converged endpoints only.
    """

    solutions: list[ComplexSolution]
    paths_total: int
    paths_converged: int
    paths_diverged: int
    paths_failed: int
