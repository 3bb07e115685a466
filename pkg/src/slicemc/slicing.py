"""Random affine and projective slices of an algebraic manifold.

A manifold of dimension n inside R^N is cut by a random affine subspace of
the complementary dimension N - n, described implicitly by n linear
equations A x = b with independent standard Gaussian entries.  The
intersection is a finite point set; each point carries the closed-form
density correction

    alpha(x) = sqrt(1 + <x, P x>) / (1 + |x|^2)^((n+1)/2)
               * Gamma((n+1)/2) / pi^((n+1)/2)

where P projects onto the normal space at x.  Dividing by alpha converts
per-slice point sums into unbiased estimates of integrals over the
manifold.  Projective manifolds use linear slices through the origin and
need no weight at all; the volume of real projective space carries the
constant instead.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import SolverError
from .expressions import Polynomial, PolynomialSystem
from .solvers import (
    SolverSettings,
    filter_real,
    newton_refine,
    solve_univariate,
    track_total_degree,
)
from .solvers.family import track_affine_family
from .solvers.homotopy import _solve_batch
from .solvers.univariate import solve_univariate_batch

# pivot below this fraction of the leading pivot counts as a dependent row
_PIVOT_DROP = 1e-10
_MAX_RESAMPLES = 100
# cap on simultaneous continuation paths in one family-tracker call
_MAX_FAMILY_PATHS = 16384


@dataclass(frozen=True)
class Region:
    """Axis-aligned box; membership uses closed intervals."""

    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lows", np.asarray(self.lows, dtype=float))
        object.__setattr__(self, "highs", np.asarray(self.highs, dtype=float))
        if self.lows.shape != self.highs.shape or self.lows.ndim != 1:
            raise ValueError("region bounds must be two vectors of equal length")
        if np.any(self.lows > self.highs):
            raise ValueError("region has an empty interval")

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lows) and np.all(p <= self.highs))


@dataclass
class ManifoldSpec:
    """A polynomial system together with the geometric data slicing needs.

    dim is the manifold dimension n; degree, when omitted, falls back to
    the Bezout number of the system.  region restricts the manifold to a
    box.  shift, when set, translates the working coordinates by -shift
    before slicing and translates reported points back, which lowers
    sup |x|^2 for far-from-origin manifolds without changing integrals.
    """

    system: PolynomialSystem
    dim: int
    degree: int | None = None
    region: Region | None = None
    projective: bool = False
    shift: np.ndarray | None = None

    def __post_init__(self):
        N = self.system.n_variables
        if not 0 < self.dim < N:
            raise ValueError(f"manifold dimension must lie strictly between 0 and {N}")
        if self.degree is not None and self.degree < 1:
            raise ValueError("degree bound must be at least 1")
        if self.region is not None and self.region.lows.size != N:
            raise ValueError("region must bound every variable")
        if self.shift is not None:
            self.shift = np.asarray(self.shift, dtype=float)
            if self.shift.shape != (N,):
                raise ValueError("shift must have one entry per variable")
            if self.projective:
                raise ValueError("shift makes no sense for a projective manifold")
        if self.projective:
            for p in self.system.polynomials:
                degrees = {sum(e) for e in p.terms}
                if len(degrees) > 1:
                    raise ValueError(
                        "projective manifolds need homogeneous equations, "
                        f"got mixed degrees {sorted(degrees)} in {p}"
                    )

    @property
    def ambient_dim(self) -> int:
        return self.system.n_variables

    @property
    def codim(self) -> int:
        return self.ambient_dim - self.dim

    @property
    def degree_bound(self) -> int:
        if self.degree is not None:
            return self.degree
        return self.system.bezout_number()

    @cached_property
    def working_system(self) -> PolynomialSystem:
        """The system actually sliced: translated when a shift is set."""
        if self.shift is None:
            return self.system
        return self.system.shifted(self.shift)

    def to_original(self, point: np.ndarray) -> np.ndarray:
        return point if self.shift is None else point + self.shift

    def with_shift(self, shift) -> "ManifoldSpec":
        return ManifoldSpec(
            system=self.system,
            dim=self.dim,
            degree=self.degree,
            region=self.region,
            projective=self.projective,
            shift=np.asarray(shift, dtype=float),
        )


@dataclass(frozen=True)
class AffineSlice:
    """The affine subspace {x : A x = b} of codimension n."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise ValueError("slice needs an n x N matrix and a length-n vector")


@dataclass(frozen=True)
class ExplicitSlice:
    """The same subspace in parametric form u + t_1 v_1 + ... + t_m v_m."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "v", np.atleast_2d(np.asarray(self.v, dtype=float)))
        if self.u.ndim != 1 or self.v.shape[1] != self.u.size:
            raise ValueError("directions must match the base point's dimension")

    def to_implicit(self) -> AffineSlice:
        kernel = scipy.linalg.null_space(self.v)
        if kernel.shape[1] != self.u.size - self.v.shape[0]:
            raise SolverError("explicit slice directions are linearly dependent")
        A = kernel.T
        return AffineSlice(A=A, b=A @ self.u)


@dataclass(frozen=True)
class ProjectiveSlice:
    """The projective subspace {x : A x = 0}."""

    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        if self.A.ndim != 2:
            raise ValueError("slice matrix must be two dimensional")


@dataclass(frozen=True)
class IntersectionPoint:
    coordinates: np.ndarray
    alpha_weight: float
    residual: float


@dataclass(frozen=True)
class WeightedIntersection:
    slice: object
    points: tuple[IntersectionPoint, ...]
    rejected_by_region: int = 0
    path_failures: int = 0

    def __len__(self) -> int:
        return len(self.points)


def sample_affine_slice(manifold: ManifoldSpec, rng: np.random.Generator) -> AffineSlice:
    """Draw A (n x N) and b (n) with i.i.d. standard Gaussian entries."""
    n, N = manifold.dim, manifold.ambient_dim
    A = rng.standard_normal((n, N))
    b = rng.standard_normal(n)
    return AffineSlice(A=A, b=b)


def sample_projective_slice(
    manifold: ManifoldSpec, rng: np.random.Generator
) -> ProjectiveSlice:
    return ProjectiveSlice(A=rng.standard_normal((manifold.dim, manifold.ambient_dim)))


def sample_explicit_slice(
    manifold: ManifoldSpec, rng: np.random.Generator
) -> ExplicitSlice:
    """Draw the slice in parametric form.

    A Gaussian matrix U with N - n + 1 rows and N + 1 columns is drawn;
    within its row span, u is the minimum-norm combination whose last
    coordinate is 1 and the v_i span the combinations whose last
    coordinate is 0.  Dropping the last coordinate gives an affine
    subspace distributed exactly like the implicit Gaussian model.
    """
    n, N = manifold.dim, manifold.ambient_dim
    m = N - n
    for _ in range(_MAX_RESAMPLES):
        U = rng.standard_normal((m + 1, N + 1))
        body, w = U[:, :N], U[:, N]
        wsq = float(w @ w)
        if wsq < 1e-24:
            continue
        u = body.T @ w / wsq
        kernel = scipy.linalg.null_space(w[None, :])
        if kernel.shape[1] != m:
            continue
        v = kernel.T @ body
        if np.linalg.matrix_rank(v) != m:
            continue
        return ExplicitSlice(u=u, v=v)
    raise SolverError("could not draw a nondegenerate explicit slice")


def _linear_polynomial(variables, coefficients, constant) -> Polynomial:
    N = len(variables)
    terms = {}
    for i, c in enumerate(coefficients):
        if c != 0.0:
            e = [0] * N
            e[i] = 1
            terms[tuple(e)] = float(c)
    if constant != 0.0:
        terms[(0,) * N] = float(constant)
    return Polynomial(variables=tuple(variables), terms=terms)


def _squared_base(
    system: PolynomialSystem, m: int, rng: np.random.Generator
) -> tuple[list[Polynomial], bool]:
    """Reduce r >= m equations to exactly m by random real combinations.

    Returns the m polynomials and whether a reduction happened (in which
    case candidates must be re-checked against the full system).
    """
    r = system.n_equations
    if r == m:
        return list(system.polynomials), False
    if r < m:
        raise SolverError(
            f"system has {r} equations but the slice needs {m}; "
            "the variety's dimension exceeds the declared manifold dimension"
        )
    combos = rng.standard_normal((m, r))
    base = []
    for row in combos:
        acc = row[0] * system.polynomials[0]
        for c, p in zip(row[1:], system.polynomials[1:]):
            acc = acc + c * p
        base.append(acc)
    return base, True


def _line_from_affine(slice_: AffineSlice) -> tuple[np.ndarray, np.ndarray]:
    u, *_ = np.linalg.lstsq(slice_.A, slice_.b, rcond=None)
    kernel = scipy.linalg.null_space(slice_.A)
    if kernel.shape[1] != slice_.A.shape[1] - slice_.A.shape[0]:
        raise SolverError("degenerate slice matrix")
    return u, kernel.T


def line_restriction_coefficients(
    poly: Polynomial, u: np.ndarray, v: np.ndarray
) -> np.ndarray:
    """Coefficients (ascending in t) of the univariate polynomial F(u + t v)."""
    degree = poly.total_degree()
    out = np.zeros(degree + 1)
    for exps, coeff in poly.terms.items():
        acc = np.array([coeff])
        for i, e in enumerate(exps):
            if e == 0:
                continue
            ui, vi = u[i], v[i]
            factor = np.array(
                [math.comb(e, j) * ui ** (e - j) * vi**j for j in range(e + 1)]
            )
            acc = np.convolve(acc, factor)
        out[: acc.size] += acc
    return out


def normal_projection(manifold: ManifoldSpec, point) -> np.ndarray:
    """The orthogonal projection onto the normal space at a manifold point.

    Built from the Q-factor of a pivoted QR decomposition of the Jacobian
    transpose; rows whose pivot falls below 1e-10 of the leading pivot are
    treated as dependent, and exactly N - n independent rows must remain.
    """
    x = np.asarray(point, dtype=float)
    J = manifold.system.jacobian_at(x)
    Q, R, _ = scipy.linalg.qr(J.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    leading = diag[0] if diag.size else 0.0
    rank = int(np.sum(diag >= _PIVOT_DROP * leading)) if leading > 0.0 else 0
    if rank != manifold.codim:
        raise SolverError(
            f"Jacobian rank {rank} at point {x.tolist()} does not match "
            f"codimension {manifold.codim}; the point looks singular"
        )
    Qn = Q[:, :rank]
    return Qn @ Qn.T


def _alpha_from_parts(normal_quad: float, norm_sq: float, n: int) -> float:
    half = (n + 1) / 2.0
    return (
        math.sqrt(1.0 + normal_quad)
        / (1.0 + norm_sq) ** half
        * math.gamma(half)
        / math.pi**half
    )


def alpha_weight(manifold: ManifoldSpec, point) -> float:
    """The closed-form density correction alpha at a manifold point."""
    x = np.asarray(point, dtype=float)
    P = normal_projection(manifold, x)
    return _alpha_from_parts(float(x @ P @ x), float(x @ x), manifold.dim)


def _alpha_on_working(
    work: PolynomialSystem, manifold: ManifoldSpec, y: np.ndarray
) -> float:
    """alpha for a working-coordinate point, with a gradient shortcut for
    hypersurfaces (the normal space is spanned by one gradient)."""
    n = manifold.dim
    if work.n_equations == 1 and manifold.codim == 1:
        g = work.jacobian_at(y)[0]
        gsq = float(g @ g)
        if gsq <= 0.0:
            raise SolverError(f"vanishing gradient at point {y.tolist()}")
        quad = float(y @ g) ** 2 / gsq
    else:
        J = work.jacobian_at(y)
        Q, R, _ = scipy.linalg.qr(J.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        leading = diag[0] if diag.size else 0.0
        rank = int(np.sum(diag >= _PIVOT_DROP * leading)) if leading > 0.0 else 0
        if rank != manifold.codim:
            raise SolverError(
                f"Jacobian rank {rank} at point {y.tolist()} does not match "
                f"codimension {manifold.codim}; the point looks singular"
            )
        Qn = Q[:, :rank]
        z = Qn.T @ y
        quad = float(z @ z)
    return _alpha_from_parts(quad, float(y @ y), n)


def _slice_residual(slice_: AffineSlice, y: np.ndarray) -> float:
    return float(np.max(np.abs(slice_.A @ y - slice_.b)))


def _assemble(
    manifold: ManifoldSpec,
    slice_: AffineSlice,
    work: PolynomialSystem,
    candidates: list[np.ndarray],
    failures: int,
    settings: SolverSettings,
) -> WeightedIntersection:
    """Region-filter, weight, and package verified real candidates."""
    if len(candidates) > manifold.degree_bound:
        raise SolverError(
            f"found {len(candidates)} real intersection points but the degree "
            f"bound is {manifold.degree_bound}; the bound is wrong"
        )
    points = []
    rejected = 0
    for y in candidates:
        x = manifold.to_original(y)
        if manifold.region is not None and not manifold.region.contains(x):
            rejected += 1
            continue
        alpha = _alpha_on_working(work, manifold, y)
        residual = max(
            float(np.max(np.abs(work.evaluate(y)))), _slice_residual(slice_, y)
        )
        points.append(
            IntersectionPoint(coordinates=x, alpha_weight=alpha, residual=residual)
        )
    return WeightedIntersection(
        slice=slice_,
        points=tuple(points),
        rejected_by_region=rejected,
        path_failures=failures,
    )


def _intersect_univariate(
    manifold: ManifoldSpec,
    slice_: AffineSlice,
    line: tuple[np.ndarray, np.ndarray],
    settings: SolverSettings,
) -> WeightedIntersection:
    work = manifold.working_system
    poly = work.polynomials[0]
    u, v = line
    direction = v[0]
    coeffs = line_restriction_coefficients(poly, u, direction)
    if not np.any(coeffs != 0.0):
        raise SolverError("slice lies inside the hypersurface")
    if np.all(coeffs[1:] == 0.0):
        # the restriction is a nonzero constant: empty intersection
        return WeightedIntersection(slice=slice_, points=(), path_failures=0)
    solutions = solve_univariate(coeffs.tolist(), settings)
    failures = sum(1 for s in solutions if not s.converged)
    complex_points = [
        np.asarray(u, dtype=complex) + s.coordinates[0] * direction
        for s in solutions
        if s.converged
    ]
    candidates = []
    dcoeffs = np.polynomial.polynomial.polyder(coeffs)
    for y in filter_real(complex_points, settings):
        t = float((y - u) @ direction / (direction @ direction))
        # a few real Newton steps repair the loss from dropping tiny
        # imaginary parts
        for _ in range(3):
            p = np.polynomial.polynomial.polyval(t, coeffs)
            dp = np.polynomial.polynomial.polyval(t, dcoeffs)
            if dp == 0.0:
                break
            t -= p / dp
        y = u + t * direction
        if np.max(np.abs(work.evaluate(y))) <= settings.residual_tolerance:
            candidates.append(y)
        else:
            failures += 1
    return _assemble(manifold, slice_, work, candidates, failures, settings)


def _intersect_homotopy(
    manifold: ManifoldSpec,
    slice_: AffineSlice,
    settings: SolverSettings,
    rng: np.random.Generator,
) -> WeightedIntersection:
    work = manifold.working_system
    names = work.polynomials[0].variables
    base, reduced = _squared_base(work, manifold.codim, rng)
    rows = [
        _linear_polynomial(names, slice_.A[i], -slice_.b[i])
        for i in range(slice_.A.shape[0])
    ]
    square = PolynomialSystem(tuple(base) + tuple(rows))
    report = track_total_degree(square, settings, rng=rng)
    if report.paths_failed == report.paths_total:
        raise SolverError("every homotopy path failed; the slice system broke down")
    failures = report.paths_failed
    candidates = []
    for y in filter_real(report.solutions, settings):
        y, _, ok = newton_refine(square, y, settings)
        full = max(
            float(np.max(np.abs(work.evaluate(y)))), _slice_residual(slice_, y)
        )
        if ok and full <= settings.residual_tolerance:
            candidates.append(y)
        elif reduced and full > settings.residual_tolerance:
            # spurious root of the randomized combination, not a failure
            continue
        else:
            failures += 1
    return _assemble(manifold, slice_, work, candidates, failures, settings)


def intersect(
    manifold: ManifoldSpec,
    slice_,
    settings: SolverSettings | None = None,
    rng: np.random.Generator | None = None,
    method: str = "auto",
) -> WeightedIntersection:
    """All real manifold points on an affine slice, with alpha weights.

    Hypersurfaces (one equation, dim = N - 1) restrict to a line and
    reduce to one univariate solve; everything else goes through homotopy
    continuation on the combined system.  method forces a route:
    "univariate", "homotopy", or "auto".

    When the manifold carries a shift, slicing happens in translated
    coordinates: reported coordinates are translated back, while weights
    and residuals refer to the translated copy.
    """
    if manifold.projective:
        raise SolverError("use intersect_projective for projective manifolds")
    settings = settings if settings is not None else SolverSettings()
    if rng is None:
        rng = np.random.default_rng()

    line = None
    if isinstance(slice_, ExplicitSlice):
        explicit = slice_
        slice_ = explicit.to_implicit()
        line = (explicit.u, explicit.v)
    work = manifold.working_system
    hyper = work.n_equations == 1 and manifold.codim == 1
    if method not in ("auto", "univariate", "homotopy"):
        raise ValueError(f"unknown intersection method {method!r}")
    if method == "univariate" and not hyper:
        raise SolverError("the univariate route needs a single-equation hypersurface")

    if hyper and method != "homotopy":
        if line is None:
            line = _line_from_affine(slice_)
        return _intersect_univariate(manifold, slice_, line, settings)
    return _intersect_homotopy(manifold, slice_, settings, rng)


@dataclass(frozen=True)
class BatchedIntersections:
    """Struct-of-arrays result of intersecting many slices at once.

    Points are sorted by slice index; counts, failure, and rejection
    tallies are per slice.  Results are identical to running intersect
    slice by slice, up to solver tolerances.
    """

    n_slices: int
    point_slice: np.ndarray
    points: np.ndarray
    alphas: np.ndarray
    residuals: np.ndarray
    counts: np.ndarray
    path_failures: np.ndarray
    rejected_by_region: np.ndarray


def _lines_from_affine_batch(A: np.ndarray, b: np.ndarray):
    """Base points and null directions for a batch of hypersurface slices."""
    k = A.shape[0]
    gram = A @ A.transpose(0, 2, 1)
    bad = np.zeros(k, dtype=bool)
    try:
        z = np.linalg.solve(gram, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        z = np.empty_like(b)
        for i in range(k):
            try:
                z[i] = np.linalg.solve(gram[i], b[i])
            except np.linalg.LinAlgError:
                z[i] = np.nan
                bad[i] = True
    u = np.einsum("kqn,kq->kn", A, z)
    _, sv, Vh = np.linalg.svd(A)
    v = Vh[:, -1, :]
    bad |= ~np.isfinite(u).all(axis=1)
    bad |= sv[:, -1] <= 1e-12 * sv[:, 0]
    return u, v, bad


def _restriction_coefficients_batch(
    poly: Polynomial, u: np.ndarray, v: np.ndarray
) -> np.ndarray:
    """F(u + t v) coefficients for a batch of lines, ascending in t."""
    k = u.shape[0]
    degree = poly.total_degree()
    max_e = max((max(e) for e in poly.terms), default=0)
    upow = np.ones((k, u.shape[1], max_e + 1))
    vpow = np.ones_like(upow)
    for e in range(1, max_e + 1):
        upow[:, :, e] = upow[:, :, e - 1] * u
        vpow[:, :, e] = vpow[:, :, e - 1] * v
    out = np.zeros((k, degree + 1))
    for exps, coeff in poly.terms.items():
        acc = np.full((k, 1), coeff)
        for i, e in enumerate(exps):
            if e == 0:
                continue
            binom = np.array([math.comb(e, j) for j in range(e + 1)])
            factor = binom[None, :] * upow[:, i, e::-1] * vpow[:, i, : e + 1]
            spread = np.zeros((k, acc.shape[1] + e))
            for a in range(acc.shape[1]):
                spread[:, a : a + e + 1] += acc[:, a : a + 1] * factor
            acc = spread
        out[:, : acc.shape[1]] += acc
    return out


def _alpha_hypersurface_batch(
    work: PolynomialSystem, n: int, points: np.ndarray
) -> np.ndarray:
    gradients = work.compiled(derivatives=True)(points)[:, 0, :]
    gsq = np.einsum("pn,pn->p", gradients, gradients)
    if np.any(gsq <= 0.0):
        raise SolverError("vanishing gradient at an intersection point")
    quad = np.einsum("pn,pn->p", points, gradients) ** 2 / gsq
    norm_sq = np.einsum("pn,pn->p", points, points)
    half = (n + 1) / 2.0
    return (
        np.sqrt(1.0 + quad)
        / (1.0 + norm_sq) ** half
        * (math.gamma(half) / math.pi**half)
    )


def _intersect_hypersurface_batch(
    manifold: ManifoldSpec,
    A: np.ndarray,
    b: np.ndarray,
    settings: SolverSettings,
) -> BatchedIntersections:
    work = manifold.working_system
    poly = work.polynomials[0]
    k, _, N = A.shape
    u, v, fallback = _lines_from_affine_batch(A, b)
    u = np.where(fallback[:, None], 0.0, u)
    v = np.where(fallback[:, None], 1.0, v)

    coeffs = _restriction_coefficients_batch(poly, u, v)
    roots, converged, degenerate = solve_univariate_batch(coeffs, settings)
    fallback |= degenerate
    # a slice inside the hypersurface would give the zero restriction
    if np.any(~fallback & ~np.any(coeffs != 0.0, axis=1)):
        raise SolverError("slice lies inside the hypersurface")

    D = roots.shape[1]
    x = u[:, None, :] + roots[..., None] * v[:, None, :]
    scale = 1.0 + np.max(np.abs(x), axis=2)
    realish = np.max(np.abs(x.imag), axis=2) <= settings.real_threshold * scale
    finite_t = np.abs(roots) <= settings.divergence_radius
    candidate = converged & realish & finite_t & ~fallback[:, None]
    failures_per_slice = np.sum(~converged & ~fallback[:, None], axis=1)

    t = roots.real.copy()
    dcoeffs = coeffs[:, 1:] * np.arange(1, coeffs.shape[1])
    for _ in range(3):
        pv = _polyval_batch(t, coeffs)
        dv = _polyval_batch(t, dcoeffs)
        step = np.where((dv != 0.0) & candidate, pv / np.where(dv == 0.0, 1.0, dv), 0.0)
        t = t - step
    points_real = u[:, None, :] + t[..., None] * v[:, None, :]

    flat = points_real.reshape(-1, N)
    fvals = np.abs(work.compiled()(flat)).max(axis=1).reshape(k, D)
    slice_res = np.max(
        np.abs(np.einsum("kqn,kdn->kdq", A, points_real) - b[:, None, :]), axis=2
    )
    residual = np.maximum(fvals, slice_res)
    verified = candidate & (residual <= settings.residual_tolerance)
    failures_per_slice += np.sum(candidate & ~verified, axis=1)

    # greedy dedup in root order within each slice
    keep = verified.copy()
    for j in range(1, D):
        dist = np.linalg.norm(
            points_real[:, j : j + 1, :] - points_real[:, :j, :], axis=2
        )
        dup = np.any((dist <= settings.dedup_radius) & keep[:, :j], axis=1)
        keep[:, j] &= ~dup

    counts = keep.sum(axis=1)
    if np.any(counts > manifold.degree_bound):
        worst = int(np.argmax(counts))
        raise SolverError(
            f"found {int(counts[worst])} real intersection points on slice "
            f"{worst} but the degree bound is {manifold.degree_bound}"
        )

    slice_idx, root_idx = np.nonzero(keep)
    pts_work = points_real[slice_idx, root_idx]
    pts_orig = pts_work if manifold.shift is None else pts_work + manifold.shift
    rejected = np.zeros(k, dtype=np.int64)
    if manifold.region is not None:
        inside = np.all(
            (pts_orig >= manifold.region.lows) & (pts_orig <= manifold.region.highs),
            axis=1,
        )
        rejected = np.bincount(slice_idx[~inside], minlength=k)
        slice_idx, root_idx = slice_idx[inside], root_idx[inside]
        pts_work, pts_orig = pts_work[inside], pts_orig[inside]

    alphas = (
        _alpha_hypersurface_batch(work, manifold.dim, pts_work)
        if len(pts_work)
        else np.zeros(0)
    )
    result_residuals = residual[slice_idx, root_idx]
    counts = np.bincount(slice_idx, minlength=k)

    out = BatchedIntersections(
        n_slices=k,
        point_slice=slice_idx,
        points=pts_orig,
        alphas=alphas,
        residuals=result_residuals,
        counts=counts,
        path_failures=failures_per_slice.astype(np.int64),
        rejected_by_region=rejected,
    )
    if np.any(fallback):
        out = _patch_with_sequential(
            manifold, A, b, settings, out, np.nonzero(fallback)[0]
        )
    return out


def _polyval_batch(t: np.ndarray, c: np.ndarray) -> np.ndarray:
    acc = np.broadcast_to(c[:, -1:], t.shape).copy()
    for j in range(c.shape[1] - 2, -1, -1):
        acc = acc * t + c[:, j : j + 1]
    return acc


def _patch_with_sequential(
    manifold: ManifoldSpec,
    A: np.ndarray,
    b: np.ndarray,
    settings: SolverSettings,
    batch: BatchedIntersections,
    indices: np.ndarray,
    rngs: list[np.random.Generator] | None = None,
) -> BatchedIntersections:
    """Replace the listed slices' results with individually solved ones."""
    keep = ~np.isin(batch.point_slice, indices)
    chunks = {
        "point_slice": [batch.point_slice[keep]],
        "points": [batch.points[keep]],
        "alphas": [batch.alphas[keep]],
        "residuals": [batch.residuals[keep]],
    }
    counts = batch.counts.copy()
    failures = batch.path_failures.copy()
    rejected = batch.rejected_by_region.copy()
    for i in indices:
        wi = intersect(
            manifold,
            AffineSlice(A=A[i], b=b[i]),
            settings,
            rng=None if rngs is None else rngs[i],
        )
        counts[i] = len(wi.points)
        failures[i] = wi.path_failures
        rejected[i] = wi.rejected_by_region
        if wi.points:
            chunks["point_slice"].append(np.full(len(wi.points), i, dtype=np.int64))
            chunks["points"].append(np.array([p.coordinates for p in wi.points]))
            chunks["alphas"].append(np.array([p.alpha_weight for p in wi.points]))
            chunks["residuals"].append(np.array([p.residual for p in wi.points]))
    point_slice = np.concatenate(chunks["point_slice"])
    order = np.argsort(point_slice, kind="stable")
    return BatchedIntersections(
        n_slices=batch.n_slices,
        point_slice=point_slice[order],
        points=np.concatenate(chunks["points"])[order]
        if len(point_slice)
        else np.zeros((0, A.shape[2])),
        alphas=np.concatenate(chunks["alphas"])[order],
        residuals=np.concatenate(chunks["residuals"])[order],
        counts=counts,
        path_failures=failures,
        rejected_by_region=rejected,
    )


def _alpha_general_batch(
    work: PolynomialSystem, manifold: ManifoldSpec, pts: np.ndarray
) -> np.ndarray:
    """Batched alpha via unpivoted QR of the stacked Jacobian transposes.

    Points whose QR looks rank-deficient fall back to the pivoted
    per-point computation, which also raises on genuinely singular points.
    """
    J = work.compiled(derivatives=True)(pts)
    Q, R = np.linalg.qr(np.ascontiguousarray(J.transpose(0, 2, 1)))
    diag = np.abs(np.diagonal(R, axis1=1, axis2=2))
    leading = diag.max(axis=1)
    solid = (leading > 0.0) & (diag.min(axis=1) >= _PIVOT_DROP * leading)
    z = np.einsum("pnr,pn->pr", Q, pts)
    quad = np.einsum("pr,pr->p", z, z)
    norm_sq = np.einsum("pn,pn->p", pts, pts)
    half = (manifold.dim + 1) / 2.0
    alphas = (
        np.sqrt(1.0 + quad)
        / (1.0 + norm_sq) ** half
        * (math.gamma(half) / math.pi**half)
    )
    for i in np.nonzero(~solid)[0]:
        alphas[i] = _alpha_on_working(work, manifold, pts[i])
    return alphas


def _general_chunk(
    manifold: ManifoldSpec,
    A: np.ndarray,
    b: np.ndarray,
    settings: SolverSettings,
    gammas: np.ndarray,
    offset: int,
):
    """Solve one family-tracker chunk; returns per-slice and per-point arrays."""
    work = manifold.working_system
    kc, q, N = A.shape
    report = track_affine_family(work, A, b, settings, gammas)
    B = report.paths_per_slice
    if np.any(report.failed_per_slice == B):
        bad = offset + int(np.argmax(report.failed_per_slice == B))
        raise SolverError(
            f"every homotopy path failed on slice {bad}; the slice system broke down"
        )
    failures = report.failed_per_slice.copy()

    ends = report.endpoints
    scale = 1.0 + np.max(np.abs(ends), axis=1)
    realish = np.max(np.abs(ends.imag), axis=1) <= settings.real_threshold * scale
    candidate = report.converged & realish
    path_slice = report.path_slice

    x = ends.real.copy()
    pair = work.value_jacobian()
    idx = np.nonzero(candidate)[0]
    # a few real Newton steps repair the loss from dropping tiny
    # imaginary parts
    for _ in range(3):
        if idx.size == 0:
            break
        Fv, Jf = pair(x[idx])
        which = path_slice[idx]
        rows = np.einsum("pqn,pn->pq", A[which], x[idx]) - b[which]
        F = np.concatenate([Fv, rows], axis=1)
        J = np.concatenate([Jf, A[which]], axis=1)
        delta = _solve_batch(J, F)
        finite = np.isfinite(delta).all(axis=1)
        x[idx[finite]] -= delta[finite]

    residual = np.full(x.shape[0], np.inf)
    if idx.size:
        fvals = np.max(np.abs(work.compiled()(x[idx])), axis=1)
        which = path_slice[idx]
        rows = np.einsum("pqn,pn->pq", A[which], x[idx]) - b[which]
        residual[idx] = np.maximum(fvals, np.max(np.abs(rows), axis=1))
    verified = candidate & (residual <= settings.residual_tolerance)
    failures += np.bincount(path_slice[candidate & ~verified], minlength=kc)

    # greedy dedup in path order within each slice
    pr = x.reshape(kc, B, N)
    keep = verified.reshape(kc, B).copy()
    with np.errstate(invalid="ignore", over="ignore"):
        for j in range(1, B):
            dist = np.linalg.norm(pr[:, j : j + 1, :] - pr[:, :j, :], axis=2)
            dup = np.any((dist <= settings.dedup_radius) & keep[:, :j], axis=1)
            keep[:, j] &= ~dup

    counts = keep.sum(axis=1)
    if np.any(counts > manifold.degree_bound):
        worst = int(np.argmax(counts))
        raise SolverError(
            f"found {int(counts[worst])} real intersection points on slice "
            f"{offset + worst} but the degree bound is {manifold.degree_bound}"
        )

    slice_idx, path_idx = np.nonzero(keep)
    pts_work = pr[slice_idx, path_idx]
    pts_orig = pts_work if manifold.shift is None else pts_work + manifold.shift
    rejected = np.zeros(kc, dtype=np.int64)
    if manifold.region is not None:
        inside = np.all(
            (pts_orig >= manifold.region.lows) & (pts_orig <= manifold.region.highs),
            axis=1,
        )
        rejected = np.bincount(slice_idx[~inside], minlength=kc)
        slice_idx = slice_idx[inside]
        pts_work, pts_orig = pts_work[inside], pts_orig[inside]
        path_idx = path_idx[inside]

    alphas = (
        _alpha_general_batch(work, manifold, pts_work)
        if len(pts_work)
        else np.zeros(0)
    )
    kept_residuals = residual.reshape(kc, B)[slice_idx, path_idx]
    return (
        slice_idx + offset,
        pts_orig,
        alphas,
        kept_residuals,
        np.bincount(slice_idx, minlength=kc),
        failures,
        rejected,
    )


def _intersect_general_batch(
    manifold: ManifoldSpec,
    A: np.ndarray,
    b: np.ndarray,
    settings: SolverSettings,
    rngs: list[np.random.Generator] | None,
) -> BatchedIntersections:
    """Family-tracked intersection of many slices of one general manifold.

    Needs the working system to be square against the slice rows (exactly
    N - n equations); overdetermined systems go through the per-slice
    path.  Slices are processed in fixed-size chunks in index order, and
    every per-path update is masked, so results do not depend on how the
    batch is split.
    """
    work = manifold.working_system
    k, q, N = A.shape
    if work.n_equations != manifold.codim:
        empty = BatchedIntersections(
            n_slices=k,
            point_slice=np.zeros(0, dtype=np.int64),
            points=np.zeros((0, N)),
            alphas=np.zeros(0),
            residuals=np.zeros(0),
            counts=np.zeros(k, dtype=np.int64),
            path_failures=np.zeros(k, dtype=np.int64),
            rejected_by_region=np.zeros(k, dtype=np.int64),
        )
        return _patch_with_sequential(
            manifold, A, b, settings, empty, np.arange(k), rngs
        )

    if settings.gamma is not None:
        gammas = np.full(k, complex(settings.gamma))
    elif rngs is not None:
        gammas = np.array([np.exp(2j * np.pi * g.uniform()) for g in rngs])
    else:
        gen = np.random.default_rng()
        gammas = np.exp(2j * np.pi * gen.uniform(size=k))

    bezout = int(np.prod([p.total_degree() for p in work.polynomials]))
    per_call = max(1, _MAX_FAMILY_PATHS // max(bezout, 1))

    pieces = []
    counts = np.zeros(k, dtype=np.int64)
    failures = np.zeros(k, dtype=np.int64)
    rejected = np.zeros(k, dtype=np.int64)
    for start in range(0, k, per_call):
        stop = min(start + per_call, k)
        ps, pts, al, res, cnt, fl, rj = _general_chunk(
            manifold, A[start:stop], b[start:stop], settings, gammas[start:stop], start
        )
        pieces.append((ps, pts, al, res))
        counts[start:stop] = cnt
        failures[start:stop] = fl
        rejected[start:stop] = rj

    point_slice = np.concatenate([p[0] for p in pieces])
    return BatchedIntersections(
        n_slices=k,
        point_slice=point_slice,
        points=np.concatenate([p[1] for p in pieces])
        if len(point_slice)
        else np.zeros((0, N)),
        alphas=np.concatenate([p[2] for p in pieces]),
        residuals=np.concatenate([p[3] for p in pieces]),
        counts=counts,
        path_failures=failures,
        rejected_by_region=rejected,
    )


def intersect_affine_batch(
    manifold: ManifoldSpec,
    A: np.ndarray,
    b: np.ndarray,
    settings: SolverSettings | None = None,
    rngs: list[np.random.Generator] | None = None,
) -> BatchedIntersections:
    """Intersect a stack of affine slices (A is (k, n, N), b is (k, n)).

    Hypersurfaces run fully vectorized; other manifolds need per-slice
    generators in ``rngs`` for the continuation solver and currently fall
    back to slice-by-slice solving unless the batch tracker applies.
    """
    if manifold.projective:
        raise SolverError("use intersect_projective for projective manifolds")
    settings = settings if settings is not None else SolverSettings()
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 3 or b.shape != A.shape[:2] or A.shape[2] != manifold.ambient_dim:
        raise ValueError("expected A of shape (k, n, N) with matching b")
    if rngs is not None and len(rngs) != A.shape[0]:
        raise ValueError("rngs must provide one generator per slice")
    work = manifold.working_system
    if work.n_equations == 1 and manifold.codim == 1:
        return _intersect_hypersurface_batch(manifold, A, b, settings)
    return _intersect_general_batch(manifold, A, b, settings, rngs)


def _sign_normalize(rep: np.ndarray) -> np.ndarray:
    for value in rep:
        if abs(value) > 1e-9:
            return rep if value > 0 else -rep
    return rep


def intersect_projective(
    manifold: ManifoldSpec,
    slice_: ProjectiveSlice,
    settings: SolverSettings | None = None,
    rng: np.random.Generator | None = None,
) -> WeightedIntersection:
    """Real points of a projective manifold on a linear slice through 0.

    The homogeneous system is solved on the random affine patch
    <c, x> = 1; survivors are normalized to unit representatives with a
    positive first nonzero coordinate and antipodal duplicates merged.
    Every point has weight exactly 1.
    """
    if not manifold.projective:
        raise SolverError("intersect_projective needs a projective manifold")
    settings = settings if settings is not None else SolverSettings()
    if rng is None:
        rng = np.random.default_rng()
    work = manifold.system
    names = work.polynomials[0].variables
    N, n = manifold.ambient_dim, manifold.dim
    m = N - n - 1
    if m < 1:
        raise SolverError("projective manifold dimension leaves no equations to cut")
    base, reduced = _squared_base(work, m, rng)
    patch = _linear_polynomial(names, rng.standard_normal(N), -1.0)
    rows = [
        _linear_polynomial(names, slice_.A[i], 0.0) for i in range(slice_.A.shape[0])
    ]
    square = PolynomialSystem(tuple(base) + tuple(rows) + (patch,))
    report = track_total_degree(square, settings, rng=rng)
    if report.paths_failed == report.paths_total:
        raise SolverError("every homotopy path failed; the slice system broke down")
    failures = report.paths_failed

    reps = []
    for y in filter_real(report.solutions, settings):
        y, _, ok = newton_refine(square, y, settings)
        rep = y / np.linalg.norm(y)
        full = max(
            float(np.max(np.abs(work.evaluate(rep)))),
            float(np.max(np.abs(slice_.A @ rep))),
        )
        if ok and full <= settings.residual_tolerance:
            reps.append((_sign_normalize(rep), full))
        elif reduced and full > settings.residual_tolerance:
            continue
        else:
            failures += 1

    kept: list[tuple[np.ndarray, float]] = []
    for rep, res in reps:
        dup = any(
            min(np.linalg.norm(rep - q), np.linalg.norm(rep + q))
            <= settings.dedup_radius
            for q, _ in kept
        )
        if not dup:
            kept.append((rep, res))

    if len(kept) > manifold.degree_bound:
        raise SolverError(
            f"found {len(kept)} projective points but the degree bound is "
            f"{manifold.degree_bound}; the bound is wrong"
        )
    points = []
    rejected = 0
    for rep, res in kept:
        if manifold.region is not None and not manifold.region.contains(rep):
            rejected += 1
            continue
        points.append(
            IntersectionPoint(coordinates=rep, alpha_weight=1.0, residual=res)
        )
    return WeightedIntersection(
        slice=slice_,
        points=tuple(points),
        rejected_by_region=rejected,
        path_failures=failures,
    )
