"""Continuation tracking for whole families of sliced systems.

Every random affine slice of a fixed manifold produces the same square
shape: the shared base equations plus slice-specific linear rows.
Tracking all slices' paths in one lockstep batch amortizes evaluation
and linear-algebra overhead over thousands of paths; per-path updates
are masked, so each path's outcome is independent of which other slices
share the batch.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import SolverError
from ..expressions import PolynomialSystem
from .homotopy import _AT_END, _DIVERGED, _FAILED, _lockstep, _solve_batch, _start_points
from .types import SolverSettings

_CONVERGED = 10


@dataclass(frozen=True)
class FamilyReport:
    """Endpoints of every path of every slice, in slice-major order."""

    paths_per_slice: int
    path_slice: np.ndarray
    endpoints: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    failed_per_slice: np.ndarray
    diverged_per_slice: np.ndarray


def _composite_parts(pair, A, b, gammas, path_slice, deg_f, diag_idx):
    def parts(x: np.ndarray, idx: np.ndarray):
        which = path_slice[idx]
        gp = gammas[which][:, None]
        Fv, Jf = pair(x)
        rows = np.einsum("pqn,pn->pq", A[which], x) - b[which]
        F = np.concatenate([Fv, rows], axis=1)
        J = np.concatenate([Jf, A[which].astype(Jf.dtype)], axis=1)
        Gv = gp * (x**deg_f - 1.0)
        Jg = np.zeros_like(J)
        Jg[:, diag_idx, diag_idx] = gp * deg_f * x ** (deg_f - 1.0)
        return F, Gv, J, Jg

    return parts


def _composite_values(pair, A, b, path_slice):
    def values(x: np.ndarray, idx: np.ndarray):
        which = path_slice[idx]
        Fv, Jf = pair(x)
        rows = np.einsum("pqn,pn->pq", A[which], x) - b[which]
        F = np.concatenate([Fv, rows], axis=1)
        J = np.concatenate([Jf, A[which].astype(Jf.dtype)], axis=1)
        return F, J

    return values


def _polish_endpoints(x, alive, values, settings: SolverSettings):
    """Masked batched Newton at t = 1, keeping each path's best point."""
    T = x.shape[0]
    best_x = x.copy()
    best_res = np.full(T, np.inf)
    idx0 = np.nonzero(alive)[0]
    if idx0.size:
        F, _ = values(x[idx0], idx0)
        best_res[idx0] = np.max(np.abs(F), axis=1)
    active = alive & (best_res > settings.residual_tolerance)
    for _ in range(settings.newton_max_iters):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        F, J = values(x[idx], idx)
        delta = _solve_batch(J, F)
        with np.errstate(invalid="ignore", over="ignore"):
            xn = x[idx] - delta
            finite = np.isfinite(xn).all(axis=1)
            norms = np.max(np.abs(np.where(finite[:, None], xn, 0.0)), axis=1)
        ok = finite & (norms <= settings.divergence_radius)
        x[idx[ok]] = xn[ok]
        active[idx[~ok]] = False
        keep = idx[ok]
        if keep.size == 0:
            continue
        F2, _ = values(x[keep], keep)
        res = np.max(np.abs(F2), axis=1)
        better = res < best_res[keep]
        best_x[keep[better]] = x[keep[better]]
        best_res[keep[better]] = res[better]
        done = best_res[keep] <= settings.residual_tolerance
        hopeless = res > 1e4 * best_res[keep]
        active[keep[done | hopeless]] = False
    return best_x, best_res


def track_affine_family(
    base: PolynomialSystem,
    A: np.ndarray,
    b: np.ndarray,
    settings: SolverSettings,
    gammas: np.ndarray,
) -> FamilyReport:
    """Track {base = 0, A_s x = b_s} for every slice s in one batch.

    base must contribute exactly N - q equations where q is the number of
    linear rows per slice, making every combined system square.  gammas
    holds one unit-modulus start-system constant per slice.
    """
    k, q, N = A.shape
    m = base.n_equations
    if m + q != N:
        raise SolverError(
            f"base system has {m} equations and slices add {q}, "
            f"but the ambient dimension is {N}"
        )
    degrees = np.array(
        [p.total_degree() for p in base.polynomials] + [1] * q, dtype=np.int64
    )
    if np.any(degrees[:m] < 1):
        raise SolverError("every base equation must be nonconstant")
    B = int(np.prod(degrees))
    path_slice = np.repeat(np.arange(k), B)

    starts = _start_points(degrees)
    x = np.tile(starts, (k, 1))
    gammas = np.asarray(gammas, dtype=complex)
    deg_f = degrees.astype(np.float64)
    diag_idx = np.arange(N)

    pair = base.value_jacobian()
    parts = _composite_parts(pair, A, b, gammas, path_slice, deg_f, diag_idx)
    status = _lockstep(x, parts, settings)

    values = _composite_values(pair, A, b, path_slice)
    alive = status == _AT_END
    best_x, best_res = _polish_endpoints(x, alive, values, settings)

    converged = alive & (best_res <= settings.residual_tolerance)
    final = np.where(status == _AT_END, _CONVERGED, status)
    final[alive & ~converged] = _FAILED

    failed = np.bincount(path_slice[final == _FAILED], minlength=k)
    diverged = np.bincount(path_slice[final == _DIVERGED], minlength=k)
    return FamilyReport(
        paths_per_slice=B,
        path_slice=path_slice,
        endpoints=best_x,
        residuals=best_res,
        converged=converged,
        failed_per_slice=failed.astype(np.int64),
        diverged_per_slice=diverged.astype(np.int64),
    )
