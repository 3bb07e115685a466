"""Total-degree homotopy continuation for square polynomial systems.

The start system pairs each equation with ``gamma * (x_i**d_i - 1)`` whose
roots are products of roots of unity; paths are tracked from t=0 to t=1
under H(x, t) = (1 - t) * gamma * G(x) + t * F(x) with an explicit Euler
predictor on the implicit-function ODE and a short Newton corrector.

All paths of one solve advance together as rows of a batch, each with its
own t and step size, so the per-step linear algebra runs through stacked
LAPACK calls instead of a Python loop over paths.
"""

from __future__ import annotations

import numpy as np

from ..errors import SolverError
from ..expressions import PolynomialSystem
from .types import ComplexSolution, SolverSettings, TrackReport

_MAX_PATHS = 1_000_000

_TRACKING, _AT_END, _DIVERGED, _FAILED = 0, 1, 2, 3


def _solve_batch(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stacked linear solve; singular members come back as NaN rows."""
    try:
        return np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(b)
        for i in range(A.shape[0]):
            try:
                out[i] = np.linalg.solve(A[i], b[i])
            except np.linalg.LinAlgError:
                out[i] = np.nan
        return out


def newton_refine(
    target: PolynomialSystem, x0, settings: SolverSettings | None = None
) -> tuple[np.ndarray, float, bool]:
    """Newton-polish an approximate solution of a square system.

    Returns ``(x, residual, converged)`` where residual is the sup norm of
    the system value.  The dtype of ``x0`` is preserved, so real starting
    points stay real.  The iteration is bounded by ``newton_max_iters`` and
    keeps the best point seen, so a bad start cannot loop forever or make
    the answer worse.
    """
    if settings is None:
        settings = SolverSettings()
    if target.n_equations != target.n_variables:
        raise SolverError(
            f"newton refinement needs a square system, got "
            f"{target.n_equations} equations in {target.n_variables} variables"
        )
    Fc = target.compiled()
    Jc = target.compiled(derivatives=True)
    x = np.array(x0, dtype=np.result_type(np.asarray(x0).dtype, np.float64))
    r = Fc(x)
    best_x, best_res = x.copy(), float(np.max(np.abs(r)))
    for _ in range(settings.newton_max_iters):
        if best_res <= settings.residual_tolerance:
            break
        try:
            delta = np.linalg.solve(Jc(x), r)
        except np.linalg.LinAlgError:
            break
        x = x - delta
        if not np.all(np.isfinite(x)):
            break
        if np.linalg.norm(x) > settings.divergence_radius:
            break
        r = Fc(x)
        res = float(np.max(np.abs(r)))
        if res < best_res:
            best_x, best_res = x.copy(), res
        elif res > 1e4 * best_res:
            break
    return best_x, best_res, bool(best_res <= settings.residual_tolerance)


def _start_points(degrees: np.ndarray) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(d) for d in degrees], indexing="ij")
    idx = np.stack(grids, axis=-1).reshape(-1, degrees.size)
    return np.exp(2j * np.pi * idx / degrees)


def _lockstep(x: np.ndarray, parts, settings: SolverSettings) -> np.ndarray:
    """Advance all paths of a straight-line homotopy to t = 1 in lockstep.

    x is the (paths, N) array of start points, updated in place; parts
    maps (points, global path indices) to (F, gamma G, J_F, gamma J_G).
    Each path carries its own t and step size; per-path updates never
    depend on what other paths share the batch, so results are invariant
    to how paths are grouped.  Returns the final status array.
    """
    paths_total = x.shape[0]
    t = np.zeros(paths_total)
    h = np.full(paths_total, float(settings.initial_step))
    streak = np.zeros(paths_total, dtype=np.int64)
    status = np.full(paths_total, _TRACKING, dtype=np.int64)

    while True:
        idx = np.nonzero(status == _TRACKING)[0]
        if idx.size == 0:
            break
        xa, ta, ha = x[idx], t[idx], h[idx]

        Fv, Gv, Jf, Jg = parts(xa, idx)
        JH = (1.0 - ta)[:, None, None] * Jg + ta[:, None, None] * Jf
        tangent = -_solve_batch(JH, Fv - Gv)

        at_end = ha >= (1.0 - ta)
        h_eff = np.where(at_end, 1.0 - ta, ha)
        t_new = np.where(at_end, 1.0, ta + h_eff)
        x_try = xa + tangent * h_eff[:, None]

        converged = np.zeros(idx.size, dtype=bool)
        for _ in range(settings.corrector_iters):
            todo = np.nonzero(~converged)[0]
            if todo.size == 0:
                break
            xt = x_try[todo]
            tn = t_new[todo]
            Fv2, Gv2, Jf2, Jg2 = parts(xt, idx[todo])
            Hv = (1.0 - tn)[:, None] * Gv2 + tn[:, None] * Fv2
            JH2 = (1.0 - tn)[:, None, None] * Jg2 + tn[:, None, None] * Jf2
            delta = _solve_batch(JH2, Hv)
            with np.errstate(invalid="ignore"):
                xt = xt - delta
                x_try[todo] = xt
                step_size = np.max(np.abs(delta), axis=1)
                scale = 1.0 + np.max(np.abs(xt), axis=1)
                converged[todo] = step_size <= settings.corrector_tolerance * scale

        finite = np.isfinite(x_try).all(axis=1)
        with np.errstate(invalid="ignore"):
            norms = np.max(np.abs(np.where(finite[:, None], x_try, 0.0)), axis=1)
        diverged = finite & (norms > settings.divergence_radius)
        success = converged & finite & ~diverged

        # successes move forward and may grow their step
        ok = idx[success]
        x[ok] = x_try[success]
        t[ok] = t_new[success]
        streak[ok] += 1
        grow = streak[ok] >= settings.step_growth_streak
        h[ok[grow]] = np.minimum(h[ok[grow]] * 2.0, settings.max_step)
        streak[ok[grow]] = 0
        status[ok[t[ok] >= 1.0]] = _AT_END

        # divergence is terminal
        status[idx[diverged]] = _DIVERGED

        # anything else shrinks the step and retries from the old point
        bad = idx[~success & ~diverged]
        h[bad] *= 0.5
        streak[bad] = 0
        status[bad[h[bad] < settings.min_step]] = _FAILED

    return status


def track_total_degree(
    target: PolynomialSystem,
    settings: SolverSettings | None = None,
    rng: np.random.Generator | None = None,
) -> TrackReport:
    """Track every Bezout path of a square system to its endpoint.

    Paths are classified exactly once: converged (Newton polish at t=1 met
    the residual tolerance), diverged (coordinates blew past the divergence
    radius), or failed (step size underflow, or a stall at the end; there
    is no endgame for singular endpoints).
    """
    if settings is None:
        settings = SolverSettings()
    m, N = target.n_equations, target.n_variables
    if m != N:
        raise SolverError(f"homotopy needs a square system, got {m} equations in {N} variables")
    degrees = np.array([p.total_degree() for p in target.polynomials], dtype=np.int64)
    if np.any(degrees < 1):
        raise SolverError("every equation must be nonconstant")
    paths_total = int(np.prod(degrees))
    if paths_total > _MAX_PATHS:
        raise SolverError(f"Bezout count {paths_total} exceeds the {_MAX_PATHS} path limit")

    if settings.gamma is not None:
        gamma = complex(settings.gamma)
    else:
        gen = rng if rng is not None else np.random.default_rng()
        gamma = np.exp(2j * np.pi * gen.uniform())

    pair = target.value_jacobian()
    deg_f = degrees.astype(np.float64)
    diag_idx = np.arange(N)

    def homotopy_parts(x: np.ndarray, idx: np.ndarray):
        # returns F(x), gamma*G(x), J_F(x), gamma*J_G(x) for a batch
        Fv, Jf = pair(x)
        Gv = gamma * (x**deg_f - 1.0)
        Jg = np.zeros_like(Jf)
        Jg[:, diag_idx, diag_idx] = gamma * deg_f * x ** (deg_f - 1.0)
        return Fv, Gv, Jf, Jg

    x = _start_points(degrees)
    status = _lockstep(x, homotopy_parts, settings)

    # polish endpoints on the target system itself
    solutions: list[ComplexSolution] = []
    n_div = int(np.sum(status == _DIVERGED))
    n_fail = int(np.sum(status == _FAILED))
    n_conv = 0
    for i in np.nonzero(status == _AT_END)[0]:
        xi, residual, ok = newton_refine(target, x[i], settings)
        if not ok:
            n_fail += 1
            continue
        n_conv += 1
        with np.errstate(all="ignore"):
            cond = float(np.linalg.cond(target.compiled(derivatives=True)(xi)))
        solutions.append(
            ComplexSolution(
                coordinates=np.asarray(xi, dtype=complex),
                residual=residual,
                converged=True,
                condition_estimate=cond,
            )
        )

    deduped: list[ComplexSolution] = []
    for sol in solutions:
        if all(
            np.linalg.norm(sol.coordinates - kept.coordinates) > settings.dedup_radius
            for kept in deduped
        ):
            deduped.append(sol)

    return TrackReport(
        solutions=deduped,
        paths_total=paths_total,
        paths_converged=n_conv,
        paths_diverged=n_div,
        paths_failed=n_fail,
    )


def filter_real(solutions, settings: SolverSettings | None = None) -> list[np.ndarray]:
    """Keep near-real points, drop imaginary parts, merge duplicates.

    A point passes if its largest imaginary part is at most
    ``real_threshold * (1 + largest coordinate modulus)``; survivors within
    ``dedup_radius`` of an earlier survivor are dropped.
    """
    if settings is None:
        settings = SolverSettings()
    kept: list[np.ndarray] = []
    for sol in solutions:
        z = np.asarray(sol.coordinates if isinstance(sol, ComplexSolution) else sol)
        z = z.astype(complex)
        scale = 1.0 + (np.max(np.abs(z)) if z.size else 0.0)
        if np.max(np.abs(z.imag)) > settings.real_threshold * scale:
            continue
        point = z.real.copy()
        if all(np.linalg.norm(point - q) > settings.dedup_radius for q in kept):
            kept.append(point)
    return kept
