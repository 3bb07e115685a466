"""Simultaneous root finding for univariate polynomials.

Uses the Aberth-Ehrlich iteration: all roots are updated together from
Newton corrections coupled through pairwise repulsion terms, so no
deflation or companion matrix is needed.  Initial guesses sit on a
perturbed circle whose radius comes from the Fujiwara root bound.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npp

from ..errors import SolverError
from .types import ComplexSolution, SolverSettings

_ABERTH_MAX_ITERS = 120


def solve_univariate(coefficients, settings: SolverSettings | None = None) -> list[ComplexSolution]:
    """All complex roots (with multiplicity) of sum(c[k] * t**k).

    Coefficients are given in ascending order.  Exact zero leading
    coefficients are trimmed; the zero polynomial is rejected.  Residuals
    are reported for the coefficient vector normalized to unit max norm.
    """
    if settings is None:
        settings = SolverSettings()
    c = np.asarray(coefficients, dtype=complex)
    if c.ndim != 1 or c.size == 0:
        raise SolverError("expected a nonempty 1-d coefficient vector")
    # trim exact zeros at the top
    deg = c.size - 1
    while deg > 0 and c[deg] == 0.0:
        deg -= 1
    c = c[: deg + 1]
    if deg == 0:
        if c[0] == 0.0:
            raise SolverError("the zero polynomial has no well-defined roots")
        return []

    scale = np.max(np.abs(c))
    c = c / scale
    dc = npp.polyder(c)

    if deg == 1:
        root = -c[0] / c[1]
        return [_pack(root, c, dc)]

    roots = _initial_circle(c, deg)
    roots = _aberth(roots, c, dc, settings)
    # a few Newton sweeps to polish simple roots to full precision
    for _ in range(5):
        pv = npp.polyval(roots, c)
        dv = npp.polyval(roots, dc)
        step = np.where(dv != 0.0, pv / np.where(dv != 0.0, dv, 1.0), 0.0)
        roots = roots - step
    return [_pack(z, c, dc) for z in roots]


def _pack(z: complex, c: np.ndarray, dc: np.ndarray) -> ComplexSolution:
    residual = abs(npp.polyval(z, c))
    # Wilkinson-style root condition: coefficient sensitivity over |z * p'(z)|
    moduli = np.abs(c) * np.abs(z) ** np.arange(c.size)
    denom = abs(npp.polyval(z, dc)) * max(abs(z), 1.0)
    cond = float(np.sum(moduli) / denom) if denom > 0.0 else float("inf")
    tol = SolverSettings().residual_tolerance
    return ComplexSolution(
        coordinates=np.array([z], dtype=complex),
        residual=float(residual),
        converged=bool(residual <= tol),
        condition_estimate=cond,
    )


def _initial_circle(c: np.ndarray, deg: int) -> np.ndarray:
    lead = abs(c[deg])
    ratios = [abs(c[deg - k]) / lead for k in range(1, deg + 1)]
    bound = 2.0 * max(r ** (1.0 / k) for k, r in enumerate(ratios, start=1))
    radius = 0.5 * bound if bound > 0.0 else 1.0
    if radius == 0.0:
        radius = 1.0
    # fixed angular offset breaks symmetry about the real axis
    angles = 2.0 * np.pi * np.arange(deg) / deg + 0.4
    return radius * np.exp(1j * angles)


def _polyval_rows(z: np.ndarray, c: np.ndarray) -> np.ndarray:
    # Horner over the coefficient axis; c is (k, D+1), z is (k, D)
    acc = np.broadcast_to(c[:, -1:], z.shape).astype(z.dtype).copy()
    for j in range(c.shape[1] - 2, -1, -1):
        acc = acc * z + c[:, j : j + 1]
    return acc


def solve_univariate_batch(
    coefficients: np.ndarray, settings: SolverSettings | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Roots of many same-degree real polynomials at once.

    Takes an array of shape (k, D+1) of ascending coefficients and returns
    (roots, converged, degenerate): roots is (k, D) complex, converged is a
    boolean mask of roots meeting the residual tolerance, and degenerate
    flags rows whose leading coefficient is too small relative to the row
    for the fixed-degree iteration to be trustworthy (callers should solve
    those rows individually).

    Root values for any given row do not depend on which other rows share
    the batch: every update is masked per root, so chunking is free to
    vary without changing results.
    """
    if settings is None:
        settings = SolverSettings()
    c = np.asarray(coefficients, dtype=float)
    if c.ndim != 2 or c.shape[1] < 2:
        raise SolverError("expected a (k, degree+1) coefficient array with degree >= 1")
    k, width = c.shape
    D = width - 1

    scale = np.max(np.abs(c), axis=1)
    degenerate = (scale == 0.0) | (np.abs(c[:, D]) < 1e-13 * scale)
    safe_scale = np.where(scale == 0.0, 1.0, scale)
    c = c / safe_scale[:, None]
    # degenerate rows get a placeholder polynomial so the vectorized loop
    # stays finite; their outputs are never used
    c[degenerate] = 0.0
    c[degenerate, 0] = -1.0
    c[degenerate, D] = 1.0
    dc = c[:, 1:] * np.arange(1, width)

    lead = np.abs(c[:, D])
    with np.errstate(divide="ignore"):
        ratios = np.abs(c[:, D - 1 :: -1]) / lead[:, None]
        exponents = 1.0 / np.arange(1, D + 1)
        bound = 2.0 * np.max(ratios**exponents, axis=1)
    radius = np.where(bound > 0.0, 0.5 * bound, 1.0)
    angles = 2.0 * np.pi * np.arange(D) / D + 0.4
    z = radius[:, None] * np.exp(1j * angles)[None, :]

    coeff_moduli = np.abs(c)
    row_active = np.ones(k, dtype=bool)
    done = np.zeros((k, D), dtype=bool)
    for _ in range(_ABERTH_MAX_ITERS):
        if not row_active.any():
            break
        rows = np.nonzero(row_active)[0]
        zr = z[rows]
        pv = _polyval_rows(zr, c[rows])
        noise = _polyval_rows(np.abs(zr).astype(complex), coeff_moduli[rows]).real
        done[rows] = np.abs(pv) <= 1e-14 * (noise + 1e-300)
        dv = _polyval_rows(zr, dc[rows])
        dv = np.where(dv == 0.0, 1e-300, dv)
        newton = pv / dv
        diff = zr[:, :, None] - zr[:, None, :]
        diff[:, np.arange(D), np.arange(D)] = np.inf
        repulsion = np.sum(1.0 / diff, axis=2)
        denom = 1.0 - newton * repulsion
        denom = np.where(denom == 0.0, 1e-300, denom)
        step = np.where(done[rows], 0.0, newton / denom)
        z[rows] = zr - step
        tiny = np.max(np.abs(step), axis=1) <= 1e-16 * (
            1.0 + np.max(np.abs(z[rows]), axis=1)
        )
        row_active[rows] = ~(done[rows].all(axis=1) | tiny)

    for _ in range(5):
        pv = _polyval_rows(z, c)
        dv = _polyval_rows(z, dc)
        step = np.where(dv != 0.0, pv / np.where(dv != 0.0, dv, 1.0), 0.0)
        z = z - step

    residual = np.abs(_polyval_rows(z, c))
    converged = residual <= settings.residual_tolerance
    return z, converged, degenerate


def _aberth(roots: np.ndarray, c: np.ndarray, dc: np.ndarray, settings: SolverSettings) -> np.ndarray:
    coeff_moduli = np.abs(c)
    for _ in range(_ABERTH_MAX_ITERS):
        pv = npp.polyval(roots, c)
        # backward-stable stop: |p(z)| below rounding noise of its own evaluation
        noise = npp.polyval(np.abs(roots), coeff_moduli)
        done = np.abs(pv) <= 1e-14 * (noise + 1e-300)
        if done.all():
            break
        dv = npp.polyval(roots, dc)
        dv = np.where(dv == 0.0, 1e-300, dv)
        newton = pv / dv
        diff = roots[:, None] - roots[None, :]
        np.fill_diagonal(diff, np.inf)
        repulsion = np.sum(1.0 / diff, axis=1)
        denom = 1.0 - newton * repulsion
        denom = np.where(denom == 0.0, 1e-300, denom)
        step = np.where(done, 0.0, newton / denom)
        roots = roots - step
        if np.max(np.abs(step)) <= 1e-16 * (1.0 + np.max(np.abs(roots))):
            break
    return roots
