"""Integral estimates, sample-size planning, and rejection sampling.

The estimator averages per-slice sums f_bar = sum f(x)/alpha(x) over many
random affine slices; its expectation is the integral of f over the
manifold.  Rejection on whole slices turns the same machinery into an
exact sampler for densities proportional to f.  Projective manifolds use
unit weights and carry vol(P^n) as a constant factor instead.

Determinism contract: every slice (or sampling trial) gets its own RNG
substream derived from the seed and the slice index, slices are processed
in fixed-size chunks in index order, and per-chunk partial sums are
compensated.  Reports are therefore byte-identical for a fixed seed no
matter how many workers share the job.
"""

import functools
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import SamplingError, SolverError
from .slicing import (
    BatchedIntersections,
    ManifoldSpec,
    intersect_projective,
    intersect_affine_batch,
    sample_projective_slice,
)
from .solvers import SolverSettings

# slices per internal batch; fixed so chunk boundaries never depend on the
# worker count
_CHUNK = 4096
# sampling examines trials in blocks of growing size; the schedule is fixed
# for the same reason
_WARMUP_BLOCKS = (256, 1024)
# the acceptance-rate floor only triggers after this many trials
_MIN_TRIALS_FOR_FLOOR = 200_000


def projective_volume(n: int) -> float:
    """Volume of real projective n-space, pi^((n+1)/2) / Gamma((n+1)/2)."""
    half = (n + 1) / 2.0
    return math.pi**half / math.gamma(half)


def _seed_tuple(seed) -> tuple[int, ...]:
    if seed is None:
        return (int(np.random.SeedSequence().entropy),)
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def _evaluate_integrand(f, points: np.ndarray) -> np.ndarray:
    """Evaluate f on a (P, N) stack of points; None means the constant 1."""
    if f is None:
        return np.ones(len(points))
    if isinstance(f, (int, float, np.floating, np.integer)):
        return np.full(len(points), float(f))
    if hasattr(f, "evaluate_many"):
        values = np.asarray(f.evaluate_many(points), dtype=float)
    else:
        values = np.asarray(f(points), dtype=float)
    if values.shape != (len(points),):
        raise ValueError(
            f"integrand returned shape {values.shape} for {len(points)} points"
        )
    return values


# ---------------------------------------------------------------------------
# chunk production


def _affine_chunk(
    manifold: ManifoldSpec,
    settings: SolverSettings,
    seed_t: tuple[int, ...],
    start: int,
    stop: int,
) -> BatchedIntersections:
    """Draw and intersect slices [start, stop) from their substreams."""
    n, N = manifold.dim, manifold.ambient_dim
    rngs = [np.random.default_rng([*seed_t, i]) for i in range(start, stop)]
    A = np.empty((stop - start, n, N))
    b = np.empty((stop - start, n))
    for j, gen in enumerate(rngs):
        A[j] = gen.standard_normal((n, N))
        b[j] = gen.standard_normal(n)
    return intersect_affine_batch(manifold, A, b, settings, rngs=rngs)


def _projective_chunk(
    manifold: ManifoldSpec,
    settings: SolverSettings,
    seed_t: tuple[int, ...],
    start: int,
    stop: int,
) -> BatchedIntersections:
    """Slice-by-slice projective analogue packaged like a batch."""
    point_slice, points, residuals = [], [], []
    kc = stop - start
    counts = np.zeros(kc, dtype=np.int64)
    failures = np.zeros(kc, dtype=np.int64)
    rejected = np.zeros(kc, dtype=np.int64)
    for j, i in enumerate(range(start, stop)):
        gen = np.random.default_rng([*seed_t, i])
        pslice = sample_projective_slice(manifold, gen)
        wi = intersect_projective(manifold, pslice, settings, rng=gen)
        counts[j] = len(wi.points)
        failures[j] = wi.path_failures
        rejected[j] = wi.rejected_by_region
        for p in wi.points:
            point_slice.append(j)
            points.append(p.coordinates)
            residuals.append(p.residual)
    total = len(points)
    return BatchedIntersections(
        n_slices=kc,
        point_slice=np.asarray(point_slice, dtype=np.int64),
        points=np.asarray(points).reshape(total, manifold.ambient_dim),
        alphas=np.ones(total),
        residuals=np.asarray(residuals, dtype=float),
        counts=counts,
        path_failures=failures,
        rejected_by_region=rejected,
    )


def _chunk_ranges(k: int, size: int = _CHUNK) -> list[tuple[int, int]]:
    return [(s, min(s + size, k)) for s in range(0, k, size)]


def _iter_chunks(manifold, k, seed_t, settings, workers, chunk_fn):
    """Yield (start, stop, chunk result) in index order, optionally from a
    process pool.  Chunk boundaries are fixed, so the stream of results is
    the same for every worker count."""
    ranges = _chunk_ranges(k)
    if workers <= 1 or len(ranges) == 1:
        for s, e in ranges:
            yield s, e, chunk_fn(manifold, settings, seed_t, s, e)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(chunk_fn, manifold, settings, seed_t, s, e)
            for s, e in ranges
        ]
        for (s, e), fut in zip(ranges, futures):
            yield s, e, fut.result()


# ---------------------------------------------------------------------------
# integral estimation


@dataclass(frozen=True)
class EstimatorReport:
    """Summary of one empirical-mean run over k random slices."""

    mean: float
    empirical_variance: float
    k: int
    failures: int
    empty_slices: int
    unreliable: bool
    deterministic_variance_bound: float | None = None

    def chebyshev_bound(self, eps: float) -> float:
        """Upper bound on Prob{|estimate - truth| >= eps}, s^2/(eps^2 k)."""
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        return self.empirical_variance / (eps * eps * self.k)


def fbar(manifold: ManifoldSpec, f, wi) -> float:
    """Per-slice sum: affine slices weight each point by 1/alpha,
    projective slices use unit weights.  Empty intersections give 0."""
    if not wi.points:
        return 0.0
    pts = np.array([p.coordinates for p in wi.points])
    values = _evaluate_integrand(f, pts)
    if manifold.projective:
        return float(math.fsum(values))
    return float(
        math.fsum(v / p.alpha_weight for v, p in zip(values, wi.points))
    )


def _fbar_per_slice(batch: BatchedIntersections, values: np.ndarray) -> np.ndarray:
    return np.bincount(
        batch.point_slice,
        weights=values / batch.alphas if len(values) else None,
        minlength=batch.n_slices,
    )


class _ChunkStats(NamedTuple):
    sum_fbar: float
    sum_sq: float
    failures: int
    empty: int
    flagged: int


def _chunk_stats(batch: BatchedIntersections, values: np.ndarray) -> _ChunkStats:
    fb = _fbar_per_slice(batch, values)
    return _ChunkStats(
        sum_fbar=math.fsum(fb),
        sum_sq=math.fsum(v * v for v in fb),
        failures=int(batch.path_failures.sum()),
        empty=int(np.count_nonzero(batch.counts == 0)),
        flagged=int(np.count_nonzero(batch.path_failures > 0)),
    )


def _report_from_stats(
    partials: Sequence[_ChunkStats], k: int, scale: float, max_failure_fraction: float
) -> EstimatorReport:
    total = math.fsum(p.sum_fbar for p in partials)
    total_sq = math.fsum(p.sum_sq for p in partials)
    mean_fbar = total / k
    raw_var = max(0.0, (total_sq - total * total / k) / (k - 1))
    flagged = sum(p.flagged for p in partials)
    return EstimatorReport(
        mean=scale * mean_fbar,
        empirical_variance=scale * scale * raw_var,
        k=k,
        failures=sum(p.failures for p in partials),
        empty_slices=sum(p.empty for p in partials),
        unreliable=flagged > max_failure_fraction * k,
    )


def estimate_integral(
    manifold: ManifoldSpec,
    f=None,
    k: int = 1000,
    seed=None,
    settings: SolverSettings | None = None,
    workers: int = 1,
    max_failure_fraction: float = 0.01,
) -> EstimatorReport:
    """Empirical mean of f_bar over k i.i.d. random slices.

    f may be None (constant 1), a number, a ScalarExpression, or a
    vectorized callable on (P, N) point stacks.  Projective manifolds
    report vol(P^n) times the mean count-weighted sum.  The report is
    flagged unreliable when more than max_failure_fraction of the slices
    had solver path failures.
    """
    if k < 2:
        raise ValueError("need k >= 2 slices for the sample variance")
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    scale = projective_volume(manifold.dim) if manifold.projective else 1.0
    chunk_fn = _projective_chunk if manifold.projective else _affine_chunk
    partials = []
    for _, _, batch in _iter_chunks(manifold, k, seed_t, settings, workers, chunk_fn):
        values = _evaluate_integrand(f, batch.points)
        partials.append(_chunk_stats(batch, values))
    return _report_from_stats(partials, k, scale, max_failure_fraction)


# ---------------------------------------------------------------------------
# planning


def variance_bound(d: float, sup_norm_sq: float, n: int, sup_f: float) -> float:
    """Deterministic bound on the per-slice variance:
    d^2 (1 + sup|x|^2)^(n+1) pi^(n+1) / Gamma((n+1)/2)^2 * (sup f)^2."""
    if d < 1 or n < 1 or sup_norm_sq < 0.0 or sup_f < 0.0:
        raise ValueError("bound inputs out of range")
    half = (n + 1) / 2.0
    return (
        d * d
        * (1.0 + sup_norm_sq) ** (n + 1)
        * math.pi ** (n + 1)
        / math.gamma(half) ** 2
        * sup_f * sup_f
    )


class SampleSizePlan(NamedTuple):
    k: int
    strict_k: int | None


def plan_sample_size(
    bound: float, eps: float, confidence: float
) -> SampleSizePlan:
    """Slice counts for accuracy eps: the nominal size
    ceil(bound / (eps^2 c)) with c the stated confidence level, and the
    strict Chebyshev size ceil(bound / (eps^2 (1 - c))) alongside, which
    is None at c = 1 where the failure probability budget vanishes.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if not 0.0 < confidence <= 1.0:
        raise ValueError("confidence must be in (0, 1]")
    nominal = max(1, math.ceil(bound / (eps * eps * confidence)))
    strict = None
    if confidence < 1.0:
        strict = max(1, math.ceil(bound / (eps * eps * (1.0 - confidence))))
    return SampleSizePlan(k=nominal, strict_k=strict)


def kappa(d: float, K: float, C: float, n: int) -> float:
    """Largest valid rejection constant:
    Gamma((n+1)/2) / (d K pi^((n+1)/2) (1 + C)^((n+1)/2))."""
    if d < 1 or K <= 0.0 or C < 0.0 or n < 1:
        raise ValueError("kappa inputs out of range")
    half = (n + 1) / 2.0
    return math.gamma(half) / (d * K * math.pi**half * (1.0 + C) ** half)


@dataclass(frozen=True)
class RejectionConfig:
    """Bounds driving slice rejection: K >= sup f, C >= sup |x|^2 on the
    (working-coordinate) manifold, d the degree bound, and the acceptance
    constant kappa."""

    kappa: float
    K: float
    C: float
    d: int

    def __post_init__(self):
        if self.kappa <= 0.0 or self.K <= 0.0 or self.C < 0.0 or self.d < 1:
            raise ValueError("invalid rejection bounds")

    @classmethod
    def for_manifold(cls, manifold: ManifoldSpec, K: float, C: float) -> "RejectionConfig":
        d = manifold.degree_bound
        return cls(kappa=kappa(d, K, C, manifold.dim), K=K, C=C, d=d)

    def validate(self, n: int) -> None:
        limit = kappa(self.d, self.K, self.C, n)
        if self.kappa > limit * (1.0 + 1e-12):
            raise SamplingError(
                f"kappa = {self.kappa} exceeds the admissible {limit} "
                f"for d={self.d}, K={self.K}, C={self.C}, n={n}"
            )


def estimate_bounds_by_exploration(
    manifold: ManifoldSpec,
    f=None,
    trials: int = 100,
    seed=None,
    settings: SolverSettings | None = None,
    safety: float = 1.2,
) -> tuple[float, float]:
    """Estimate (sup f, sup |x|^2) from the points of `trials` random
    slices, inflating each maximum by the safety factor.  |x|^2 is taken
    in working coordinates so a shifted manifold explores its recentered
    copy."""
    if trials < 1:
        raise ValueError("need at least one exploration trial")
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    best_f = -math.inf
    best_c = -math.inf
    for _, _, batch in _iter_chunks(
        manifold, trials, seed_t, settings, 1, _affine_chunk
    ):
        if len(batch.points) == 0:
            continue
        values = _evaluate_integrand(f, batch.points)
        best_f = max(best_f, float(values.max()))
        y = batch.points
        if manifold.shift is not None:
            y = y - manifold.shift
        best_c = max(best_c, float(np.einsum("pn,pn->p", y, y).max()))
    if not math.isfinite(best_c):
        raise SamplingError(
            f"no intersection points found in {trials} exploration slices; "
            "the manifold may be empty or the region too tight"
        )
    return safety * best_f, safety * best_c


# ---------------------------------------------------------------------------
# rejection sampling


@dataclass(frozen=True)
class Sample:
    """Accepted points with their weights and the trial count that
    produced them."""

    points: np.ndarray
    alphas: np.ndarray
    residuals: np.ndarray
    trials: int
    accepted: int


def _affine_sample_block(manifold, settings, seed_t, start, stop):
    """One block of sampling trials: intersections plus the two uniform
    draws (slice acceptance, point choice) from each trial's substream."""
    n, N = manifold.dim, manifold.ambient_dim
    rngs = [np.random.default_rng([*seed_t, i]) for i in range(start, stop)]
    A = np.empty((stop - start, n, N))
    b = np.empty((stop - start, n))
    for j, gen in enumerate(rngs):
        A[j] = gen.standard_normal((n, N))
        b[j] = gen.standard_normal(n)
    batch = intersect_affine_batch(manifold, A, b, settings, rngs=rngs)
    u_accept = np.empty(stop - start)
    u_pick = np.empty(stop - start)
    for j, gen in enumerate(rngs):
        u_accept[j] = gen.uniform()
        u_pick[j] = gen.uniform()
    return batch, u_accept, u_pick


def _projective_sample_block(manifold, settings, seed_t, start, stop):
    kc = stop - start
    point_slice, points, residuals = [], [], []
    counts = np.zeros(kc, dtype=np.int64)
    failures = np.zeros(kc, dtype=np.int64)
    rejected = np.zeros(kc, dtype=np.int64)
    u_accept = np.empty(kc)
    u_pick = np.empty(kc)
    for j, i in enumerate(range(start, stop)):
        gen = np.random.default_rng([*seed_t, i])
        pslice = sample_projective_slice(manifold, gen)
        wi = intersect_projective(manifold, pslice, settings, rng=gen)
        counts[j] = len(wi.points)
        failures[j] = wi.path_failures
        rejected[j] = wi.rejected_by_region
        for p in wi.points:
            point_slice.append(j)
            points.append(p.coordinates)
            residuals.append(p.residual)
        u_accept[j] = gen.uniform()
        u_pick[j] = gen.uniform()
    total = len(points)
    batch = BatchedIntersections(
        n_slices=kc,
        point_slice=np.asarray(point_slice, dtype=np.int64),
        points=np.asarray(points).reshape(total, manifold.ambient_dim),
        alphas=np.ones(total),
        residuals=np.asarray(residuals, dtype=float),
        counts=counts,
        path_failures=failures,
        rejected_by_region=rejected,
    )
    return batch, u_accept, u_pick


def _block_sizes():
    yield from _WARMUP_BLOCKS
    while True:
        yield _CHUNK


def _rejection_loop(
    manifold,
    f,
    count,
    kap,
    seed_t,
    settings,
    workers,
    acceptance_floor,
    block_fn,
) -> Sample:
    N = manifold.ambient_dim
    taken_points, taken_alphas, taken_residuals, taken_trials = [], [], [], []
    trials_done = 0
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        sizes = _block_sizes()
        pending: deque = deque()
        next_start = 0

        def launch():
            nonlocal next_start
            size = next(sizes)
            s, e = next_start, next_start + size
            next_start = e
            job = (
                executor.submit(block_fn, manifold, settings, seed_t, s, e)
                if executor
                else None
            )
            pending.append((s, e, job))

        while True:
            while len(pending) < (workers if executor else 1):
                launch()
            s, e, job = pending.popleft()
            batch, u_accept, u_pick = (
                job.result()
                if job is not None
                else block_fn(manifold, settings, seed_t, s, e)
            )
            values = _evaluate_integrand(f, batch.points)
            if np.any(values < 0.0):
                bad = batch.points[int(np.argmax(values < 0.0))]
                raise SamplingError(
                    f"density is negative at point {bad.tolist()}"
                )
            weights = values / batch.alphas
            fb = _fbar_per_slice(batch, values)
            accept_prob = kap * fb
            if np.any(accept_prob > 1.0):
                j = int(np.argmax(accept_prob))
                raise SamplingError(
                    f"kappa * fbar = {accept_prob[j]:.6g} exceeds 1 on trial "
                    f"{s + j}: the K or C bound does not actually bound the "
                    "manifold"
                )
            hits = np.nonzero(u_accept < accept_prob)[0]
            for j in hits:
                lo = np.searchsorted(batch.point_slice, j)
                hi = np.searchsorted(batch.point_slice, j + 1)
                cw = np.cumsum(weights[lo:hi])
                target = u_pick[j] * fb[j]
                pick = lo + min(
                    int(np.searchsorted(cw, target, side="right")), hi - lo - 1
                )
                taken_points.append(batch.points[pick])
                taken_alphas.append(batch.alphas[pick])
                taken_residuals.append(batch.residuals[pick])
                taken_trials.append(s + int(j))
            trials_done = e
            if len(taken_points) >= count:
                trials = taken_trials[count - 1] + 1
                return Sample(
                    points=np.asarray(taken_points[:count]).reshape(count, N),
                    alphas=np.asarray(taken_alphas[:count]),
                    residuals=np.asarray(taken_residuals[:count]),
                    trials=trials,
                    accepted=count,
                )
            if (
                trials_done >= _MIN_TRIALS_FOR_FLOOR
                and len(taken_points) < acceptance_floor * trials_done
            ):
                raise SamplingError(
                    f"acceptance rate {len(taken_points)}/{trials_done} fell "
                    f"below the floor {acceptance_floor}; translate the "
                    "manifold toward the origin (shift) or supply tighter "
                    "K and C bounds"
                )
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)


def sample_points(
    manifold: ManifoldSpec,
    f,
    count: int,
    config: RejectionConfig,
    seed=None,
    settings: SolverSettings | None = None,
    workers: int = 1,
    acceptance_floor: float = 1e-6,
) -> Sample:
    """Draw `count` i.i.d. points with density proportional to f.

    Each trial draws a random slice, accepts it with probability
    kappa * f_bar, and on acceptance keeps exactly one of its points with
    probability f(x) / (alpha(x) f_bar).  Observing kappa * f_bar > 1
    falsifies the K or C bound and raises; so does an acceptance rate
    below the floor once enough trials have run.
    """
    if manifold.projective:
        raise SamplingError("use sample_points_projective for projective manifolds")
    if count < 1:
        raise ValueError("count must be positive")
    config.validate(manifold.dim)
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    return _rejection_loop(
        manifold, f, count, config.kappa, seed_t, settings, workers,
        acceptance_floor, _affine_sample_block,
    )


def explore_projective_bound(
    manifold: ManifoldSpec,
    f=None,
    trials: int = 64,
    seed=None,
    settings: SolverSettings | None = None,
    safety: float = 1.2,
) -> float:
    """Estimate sup f on a projective manifold from random slices."""
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    best = -math.inf
    for _, _, batch in _iter_chunks(
        manifold, trials, seed_t, settings, 1, _projective_chunk
    ):
        if len(batch.points):
            values = _evaluate_integrand(f, batch.points)
            best = max(best, float(values.max()))
    if not math.isfinite(best):
        raise SamplingError(
            f"no intersection points in {trials} exploration slices"
        )
    return safety * best


def sample_points_projective(
    manifold: ManifoldSpec,
    f,
    count: int,
    seed=None,
    settings: SolverSettings | None = None,
    K: float | None = None,
    workers: int = 1,
    acceptance_floor: float = 1e-6,
    explore_trials: int = 64,
) -> Sample:
    """Projective rejection sampling with unit weights and
    kappa = 1/(d K); f_bar = sum of f over the slice's points.

    K should bound f on the manifold; when omitted it is explored from
    `explore_trials` slices (substream 1) and inflated by 1.2, while the
    sampling trials run on substream 0.
    """
    if not manifold.projective:
        raise SamplingError("manifold is affine; use sample_points instead")
    if count < 1:
        raise ValueError("count must be positive")
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    if K is None:
        K = explore_projective_bound(
            manifold, f, explore_trials, (*seed_t, 1), settings
        )
    if K <= 0.0:
        raise SamplingError("K must be positive")
    kap = 1.0 / (manifold.degree_bound * K)
    return _rejection_loop(
        manifold, f, count, kap, (*seed_t, 0), settings, workers,
        acceptance_floor, _projective_sample_block,
    )


# ---------------------------------------------------------------------------
# sphere-line baseline for plane curves


def _baseline_chunk(manifold, settings, seed_t, start, stop, radius=1.0):
    kc = stop - start
    rngs = [np.random.default_rng([*seed_t, i]) for i in range(start, stop)]
    A = np.empty((kc, 1, 2))
    b = np.empty((kc, 1))
    for j, gen in enumerate(rngs):
        angle = gen.uniform(0.0, math.pi)
        A[j, 0] = (math.cos(angle), math.sin(angle))
        b[j, 0] = gen.uniform(-radius, radius)
    return intersect_affine_batch(manifold, A, b, settings, rngs=rngs)


def baseline_sphere_estimate(
    manifold: ManifoldSpec,
    sphere_radius: float,
    k: int,
    seed=None,
    settings: SolverSettings | None = None,
    workers: int = 1,
    max_failure_fraction: float = 0.01,
) -> EstimatorReport:
    """Volume of a plane curve from uniform lines meeting a circle.

    Lines are drawn from the uniform kinematic measure on the lines
    hitting the circle E of radius R (uniform angle, uniform signed
    offset in [-R, R]); every line meets E twice, so the estimate is
    (total curve hits / 2k) * 2 pi R.  A curve point outside E falsifies
    the containment precondition and raises.
    """
    if manifold.ambient_dim != 2 or manifold.dim != 1 or manifold.projective:
        raise SolverError("the baseline needs an affine plane curve")
    if k < 2:
        raise ValueError("need k >= 2 lines for the sample variance")
    if sphere_radius <= 0.0:
        raise ValueError("sphere radius must be positive")
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    chunk_fn = functools.partial(_baseline_chunk, radius=sphere_radius)
    sum_h = 0
    sum_h2 = 0
    failures = 0
    empty = 0
    flagged = 0
    limit = sphere_radius * (1.0 + 1e-9) + 1e-9
    for _, _, batch in _iter_chunks(manifold, k, seed_t, settings, workers, chunk_fn):
        if len(batch.points):
            norms = np.linalg.norm(batch.points, axis=1)
            if np.any(norms > limit):
                outside = batch.points[int(np.argmax(norms))]
                raise SolverError(
                    f"curve point {outside.tolist()} lies outside the circle "
                    f"of radius {sphere_radius}; the baseline requires "
                    "containment"
                )
        counts = batch.counts
        sum_h += int(counts.sum())
        sum_h2 += int((counts.astype(np.int64) ** 2).sum())
        failures += int(batch.path_failures.sum())
        empty += int(np.count_nonzero(counts == 0))
        flagged += int(np.count_nonzero(batch.path_failures > 0))
    mean = (sum_h / k) * math.pi * sphere_radius
    scale = math.pi * sphere_radius
    raw_var = max(0.0, (sum_h2 - sum_h * sum_h / k) / (k - 1))
    return EstimatorReport(
        mean=mean,
        empirical_variance=scale * scale * raw_var,
        k=k,
        failures=failures,
        empty_slices=empty,
        unreliable=flagged > max_failure_fraction * k,
    )


# ---------------------------------------------------------------------------
# windowed conditional averages (macro-observable scans)


@dataclass(frozen=True)
class WindowedScan:
    """Windowed integrals of a density against an observable's level sets."""

    grid: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    rho: np.ndarray
    failures: int
    unreliable: bool


def windowed_ratio_scan(
    manifold: ManifoldSpec,
    observable,
    density,
    grid,
    half_width: float,
    k: int,
    seed=None,
    settings: SolverSettings | None = None,
    workers: int = 1,
    max_failure_fraction: float = 0.01,
) -> WindowedScan:
    """For each g in grid, estimate mu1 = integral of density over
    {|observable - g| < half_width} and mu2 = the window's volume, and
    report rho = mu1/mu2.

    One pool of k slices is drawn and shared by every estimate: slices
    do not depend on the integrand, so each mu equals the corresponding
    estimate_integral call with the same seed.  Sharing the pool makes
    rho a ratio of positively correlated estimates, and with a positive
    density it puts mu2 > 0 wherever mu1 > 0 (the windowed density is
    dominated by sup density times the indicator on the same points).
    Windows that catch no point give rho = nan.
    """
    if k < 2:
        raise ValueError("need k >= 2 slices in the pool")
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    grid = np.asarray(grid, dtype=float)

    chunks = []
    for _, _, batch in _iter_chunks(
        manifold, k, seed_t, settings, workers, _affine_chunk
    ):
        obs = _evaluate_integrand(observable, batch.points)
        dens = _evaluate_integrand(density, batch.points)
        chunks.append((batch, obs, dens))

    mu1 = np.empty(len(grid))
    mu2 = np.empty(len(grid))
    failures = 0
    unreliable = False
    for sub in (0, 1):
        for idx, g in enumerate(grid):
            partials = []
            for batch, obs, dens in chunks:
                inside = (np.abs(obs - g) < half_width).astype(float)
                values = dens * inside if sub == 0 else inside
                partials.append(_chunk_stats(batch, values))
            report = _report_from_stats(partials, k, 1.0, max_failure_fraction)
            (mu1 if sub == 0 else mu2)[idx] = report.mean
            # the pool is shared, so failure counts are per-pool facts
            # and identical on both passes
            failures = report.failures
            unreliable = report.unreliable

    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(mu2 > 0.0, mu1 / mu2, np.nan)
    return WindowedScan(
        grid=grid, mu1=mu1, mu2=mu2, rho=rho,
        failures=failures, unreliable=unreliable,
    )


# ---------------------------------------------------------------------------
# running estimates at checkpoints (convergence curves)


def _chunked_mean(per_slice: np.ndarray, upto: int) -> float:
    """Prefix mean with the same chunked compensated summation that
    estimate_integral at k = upto would use, so the two agree bitwise."""
    total = math.fsum(
        math.fsum(per_slice[s:e]) for s, e in _chunk_ranges(upto)
    )
    return total / upto


def running_means(
    manifold: ManifoldSpec,
    f,
    checkpoints: Sequence[int],
    seed=None,
    settings: SolverSettings | None = None,
    workers: int = 1,
    max_failure_fraction: float = 0.01,
) -> tuple[np.ndarray, EstimatorReport]:
    """Estimates at each checkpoint from one slice stream, plus the full
    report at the last checkpoint.  Entry j equals
    estimate_integral(k=checkpoints[j], seed=seed).mean exactly."""
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    k = int(checkpoints[-1])
    per_slice = np.empty(k)
    partials = []
    for s, e, batch in _iter_chunks(
        manifold, k, seed_t, settings, workers, _affine_chunk
    ):
        values = _evaluate_integrand(f, batch.points)
        per_slice[s:e] = _fbar_per_slice(batch, values)
        partials.append(_chunk_stats(batch, values))
    means = np.array([_chunked_mean(per_slice, c) for c in checkpoints])
    return means, _report_from_stats(partials, k, 1.0, max_failure_fraction)


def baseline_running_means(
    manifold: ManifoldSpec,
    radius: float,
    checkpoints: Sequence[int],
    seed=None,
    settings: SolverSettings | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Prefix means of the line baseline; entry j equals
    baseline_sphere_estimate(k=checkpoints[j], seed=seed).mean."""
    if manifold.ambient_dim != 2 or manifold.dim != 1 or manifold.projective:
        raise SolverError("the baseline needs an affine plane curve")
    settings = settings if settings is not None else SolverSettings()
    seed_t = _seed_tuple(seed)
    k = int(checkpoints[-1])
    counts = np.empty(k, dtype=np.int64)
    chunk_fn = functools.partial(_baseline_chunk, radius=radius)
    limit = radius * (1.0 + 1e-9) + 1e-9
    for s, e, batch in _iter_chunks(
        manifold, k, seed_t, settings, workers, chunk_fn
    ):
        if len(batch.points):
            norms = np.linalg.norm(batch.points, axis=1)
            if np.any(norms > limit):
                outside = batch.points[int(np.argmax(norms))]
                raise SolverError(
                    f"curve point {outside.tolist()} lies outside the circle "
                    f"of radius {radius}; the baseline requires containment"
                )
        counts[s:e] = batch.counts
    sums = np.cumsum(counts)
    return np.array(
        [(int(sums[c - 1]) / c) * math.pi * radius for c in checkpoints]
    )
