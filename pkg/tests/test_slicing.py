"""Tests for slice sampling, intersection, and the alpha weight."""

import math

import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from slicemc.errors import SolverError
from slicemc.expressions import PolynomialSystem, parse_polynomial
from slicemc.slicing import (
    AffineSlice,
    ExplicitSlice,
    ManifoldSpec,
    ProjectiveSlice,
    Region,
    alpha_weight,
    intersect,
    intersect_affine_batch,
    intersect_projective,
    line_restriction_coefficients,
    normal_projection,
    sample_affine_slice,
    sample_explicit_slice,
    sample_projective_slice,
)

from conftest import QUARTIC_TEXT, PENTAGON_TEXTS, S1_TEXT
from oracles import alpha_by_monte_carlo

ALPHA_CIRCLE = 1.0 / (math.sqrt(2.0) * math.pi)


@pytest.fixture(scope="module")
def circle():
    return ManifoldSpec(
        PolynomialSystem([parse_polynomial("x^2 + y^2 - 1", ("x", "y"))]), dim=1
    )


@pytest.fixture(scope="module")
def quartic():
    return ManifoldSpec(
        PolynomialSystem([parse_polynomial(QUARTIC_TEXT, ("x", "y"))]), dim=1
    )


@pytest.fixture(scope="module")
def surface():
    return ManifoldSpec(
        PolynomialSystem([parse_polynomial(S1_TEXT, ("x1", "x2", "x3"))]), dim=2
    )


def points_from_slices(manifold, n_wanted, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_wanted:
        wi = intersect(manifold, sample_affine_slice(manifold, rng), rng=rng)
        out.extend(p.coordinates for p in wi.points)
    return out[:n_wanted]


def tangent_basis(manifold, point):
    J = manifold.system.jacobian_at(np.asarray(point, dtype=float))
    return scipy.linalg.null_space(J)


class TestManifoldSpec:
    def test_dimension_bounds_validated(self):
        sys1 = PolynomialSystem([parse_polynomial("x^2 + y^2 - 1", ("x", "y"))])
        with pytest.raises(ValueError):
            ManifoldSpec(sys1, dim=0)
        with pytest.raises(ValueError):
            ManifoldSpec(sys1, dim=2)

    def test_degree_falls_back_to_bezout(self, quartic):
        assert quartic.degree_bound == 4
        explicit = ManifoldSpec(quartic.system, dim=1, degree=7)
        assert explicit.degree_bound == 7

    def test_projective_requires_homogeneous(self):
        sys1 = PolynomialSystem([parse_polynomial("x0^2 + x1 - 1", ("x0", "x1", "x2"))])
        with pytest.raises(ValueError, match="homogeneous"):
            ManifoldSpec(sys1, dim=1, projective=True)

    def test_shift_translates_working_system(self, circle):
        far = PolynomialSystem(
            [parse_polynomial("(x - 100)^2 + (y - 100)^2 - 1", ("x", "y"))]
        )
        spec = ManifoldSpec(far, dim=1, shift=np.array([100.0, 100.0]))
        # the working system is the centered circle
        assert abs(spec.working_system.evaluate([1.0, 0.0])[0]) < 1e-9
        assert np.allclose(spec.to_original(np.array([1.0, 0.0])), [101.0, 100.0])


class TestSliceSampling:
    def test_affine_shapes_and_determinism(self, circle):
        s1 = sample_affine_slice(circle, np.random.default_rng(42))
        s2 = sample_affine_slice(circle, np.random.default_rng(42))
        assert s1.A.shape == (1, 2) and s1.b.shape == (1,)
        assert np.array_equal(s1.A, s2.A) and np.array_equal(s1.b, s2.b)

    def test_affine_entries_standard_normal(self, circle):
        rng = np.random.default_rng(0)
        draws = np.array(
            [
                np.concatenate([s.A.ravel(), s.b])
                for s in (sample_affine_slice(circle, rng) for _ in range(100_000))
            ]
        )
        assert np.all(np.abs(draws.mean(axis=0)) <= 0.02)
        assert np.all((draws.var(axis=0) >= 0.98) & (draws.var(axis=0) <= 1.02))

    def test_explicit_slice_consistent_with_implicit_form(self, circle):
        rng = np.random.default_rng(3)
        for _ in range(20):
            es = sample_explicit_slice(circle, rng)
            imp = es.to_implicit()
            assert np.allclose(imp.A @ es.u, imp.b, atol=1e-10)
            assert np.allclose(imp.A @ es.v.T, 0.0, atol=1e-10)

    def test_explicit_slice_shapes(self, surface):
        es = sample_explicit_slice(surface, np.random.default_rng(1))
        # a 2-manifold in R^3 is cut by a line: one direction vector
        assert es.u.shape == (3,) and es.v.shape == (1, 3)

    def test_explicit_count_distribution_matches_implicit(self, circle):
        k = 4000
        rng_a = np.random.default_rng(10)
        rng_b = np.random.default_rng(20)
        counts_a = np.zeros(3, dtype=int)
        counts_b = np.zeros(3, dtype=int)
        for _ in range(k):
            wa = intersect(circle, sample_affine_slice(circle, rng_a), rng=rng_a)
            counts_a[len(wa)] += 1
            wb = intersect(circle, sample_explicit_slice(circle, rng_b), rng=rng_b)
            counts_b[len(wb)] += 1
        table = np.vstack([counts_a, counts_b])
        table = table[:, table.sum(axis=0) > 0]
        _, p, _, _ = scipy.stats.chi2_contingency(table)
        assert p > 0.01

    def test_projective_slice_shape(self):
        proj = ManifoldSpec(
            PolynomialSystem([parse_polynomial("x0", ("x0", "x1", "x2"))]),
            dim=1,
            projective=True,
        )
        ps = sample_projective_slice(proj, np.random.default_rng(0))
        assert ps.A.shape == (1, 3)


class TestNormalProjection:
    def test_circle_radial_direction(self, circle):
        P = normal_projection(circle, [1.0, 0.0])
        assert np.allclose(P, [[1.0, 0.0], [0.0, 0.0]], atol=1e-12)

    def test_projector_identities(self, surface):
        for point in points_from_slices(surface, 5, seed=8):
            P = normal_projection(surface, point)
            assert np.linalg.norm(P @ P - P) <= 1e-10
            assert np.linalg.norm(P - P.T) <= 1e-12
            JT = surface.system.jacobian_at(point).T
            assert np.linalg.norm(P @ JT - JT) <= 1e-8

    def test_singular_point_rejected(self):
        cusp = ManifoldSpec(
            PolynomialSystem([parse_polynomial("y^2 - x^3", ("x", "y"))]), dim=1
        )
        with pytest.raises(SolverError, match="singular"):
            normal_projection(cusp, [0.0, 0.0])


class TestAlphaWeight:
    def test_unit_circle_closed_form(self, circle):
        for theta in np.linspace(0.0, 2 * np.pi, 7):
            x = [np.cos(theta), np.sin(theta)]
            assert alpha_weight(circle, x) == pytest.approx(ALPHA_CIRCLE, rel=1e-12)

    def test_radius_two_circle(self):
        r2 = ManifoldSpec(
            PolynomialSystem([parse_polynomial("x^2 + y^2 - 4", ("x", "y"))]), dim=1
        )
        expected = 1.0 / (math.sqrt(5.0) * math.pi)
        assert alpha_weight(r2, [2.0, 0.0]) == pytest.approx(expected, rel=1e-12)
        assert alpha_weight(r2, [0.0, -2.0]) == pytest.approx(expected, rel=1e-12)

    def test_matches_monte_carlo_oracle_on_curve(self, quartic):
        for i, point in enumerate(points_from_slices(quartic, 3, seed=5)):
            mc = alpha_by_monte_carlo(point, tangent_basis(quartic, point), seed=100 + i)
            closed = alpha_weight(quartic, point)
            assert abs(closed - mc) / mc <= 0.02

    def test_matches_monte_carlo_oracle_on_surface(self, surface):
        for i, point in enumerate(points_from_slices(surface, 3, seed=6)):
            mc = alpha_by_monte_carlo(point, tangent_basis(surface, point), seed=200 + i)
            closed = alpha_weight(surface, point)
            assert abs(closed - mc) / mc <= 0.02


class TestIntersect:
    def test_circle_generic_line_two_weighted_points(self, circle):
        wi = intersect(
            circle,
            sample_affine_slice(circle, np.random.default_rng(7)),
            rng=np.random.default_rng(0),
        )
        assert len(wi) == 2
        for p in wi.points:
            assert p.alpha_weight == pytest.approx(ALPHA_CIRCLE, rel=1e-9)
            assert p.residual <= 1e-10
            assert abs(p.coordinates @ p.coordinates - 1.0) <= 1e-10

    def test_far_line_empty(self, circle):
        wi = intersect(circle, AffineSlice(A=np.array([[1.0, 0.0]]), b=np.array([5.0])))
        assert len(wi) == 0
        assert wi.rejected_by_region == 0 and wi.path_failures == 0

    def test_fast_path_matches_homotopy(self, quartic):
        rng = np.random.default_rng(11)
        for i in range(12):
            sl = sample_affine_slice(quartic, rng)
            fast = intersect(quartic, sl, rng=np.random.default_rng(i))
            slow = intersect(quartic, sl, rng=np.random.default_rng(i), method="homotopy")
            pa = sorted(map(tuple, (p.coordinates for p in fast.points)))
            pb = sorted(map(tuple, (p.coordinates for p in slow.points)))
            assert len(pa) == len(pb)
            for a, b in zip(pa, pb):
                assert np.max(np.abs(np.array(a) - np.array(b))) <= 1e-8

    def test_count_never_exceeds_degree(self, quartic):
        rng = np.random.default_rng(13)
        for _ in range(50):
            wi = intersect(quartic, sample_affine_slice(quartic, rng), rng=rng)
            assert len(wi) <= 4

    def test_degree_bound_violation_is_an_error(self, circle):
        wrong = ManifoldSpec(circle.system, dim=1, degree=1)
        sl = sample_affine_slice(wrong, np.random.default_rng(7))
        with pytest.raises(SolverError, match="degree"):
            intersect(wrong, sl)

    def test_mean_count_near_expected_value(self, circle):
        rng = np.random.default_rng(17)
        k = 5000
        counts = np.array(
            [len(intersect(circle, sample_affine_slice(circle, rng))) for _ in range(k)]
        )
        se = counts.std(ddof=1) / math.sqrt(k)
        assert abs(counts.mean() - math.sqrt(2.0)) <= 4 * se

    def test_region_filtering(self, circle):
        boxed = ManifoldSpec(
            circle.system,
            dim=1,
            region=Region(lows=[0.0, -2.0], highs=[2.0, 2.0]),
        )
        rng = np.random.default_rng(19)
        rejected = kept = 0
        for _ in range(40):
            wi = intersect(boxed, sample_affine_slice(boxed, rng))
            for p in wi.points:
                assert p.coordinates[0] >= 0.0
                kept += 1
            rejected += wi.rejected_by_region
        assert kept > 0 and rejected > 0

    def test_whole_space_region_rejects_nothing(self, circle):
        boxed = ManifoldSpec(
            circle.system,
            dim=1,
            region=Region(lows=[-1e9, -1e9], highs=[1e9, 1e9]),
        )
        rng = np.random.default_rng(23)
        for _ in range(20):
            assert intersect(boxed, sample_affine_slice(boxed, rng)).rejected_by_region == 0

    def test_shift_preconditioner_round_trip(self):
        far = PolynomialSystem(
            [parse_polynomial("(x - 100)^2 + (y - 100)^2 - 1", ("x", "y"))]
        )
        spec = ManifoldSpec(far, dim=1, shift=np.array([100.0, 100.0]))
        rng = np.random.default_rng(29)
        seen = 0
        for _ in range(10):
            wi = intersect(spec, sample_affine_slice(spec, rng))
            for p in wi.points:
                x, y = p.coordinates
                assert abs((x - 100.0) ** 2 + (y - 100.0) ** 2 - 1.0) <= 1e-8
                # the weight refers to the centered copy
                assert p.alpha_weight == pytest.approx(ALPHA_CIRCLE, rel=1e-9)
                seen += 1
        assert seen > 0

    def test_pentagon_slice_residuals(self, pentagon_system):
        pent = ManifoldSpec(pentagon_system, dim=2)
        rng = np.random.default_rng(31)
        total = 0
        for i in range(4):
            wi = intersect(pent, sample_affine_slice(pent, rng), rng=np.random.default_rng(i))
            for p in wi.points:
                assert p.residual <= 1e-10
            total += len(wi)
        assert total > 0

    def test_projective_manifold_rejected(self):
        proj = ManifoldSpec(
            PolynomialSystem([parse_polynomial("x0", ("x0", "x1", "x2"))]),
            dim=1,
            projective=True,
        )
        sl = AffineSlice(A=np.zeros((1, 3)), b=np.zeros(1))
        with pytest.raises(SolverError, match="projective"):
            intersect(proj, sl)

    def test_line_restriction_coefficients(self, circle):
        # x^2 + y^2 - 1 along x = 2 + t, y = 3 + 5t: 26t^2 + 34t + 12
        poly = circle.system.polynomials[0]
        coeffs = line_restriction_coefficients(
            poly, np.array([2.0, 3.0]), np.array([1.0, 5.0])
        )
        assert np.allclose(coeffs, [12.0, 34.0, 26.0])


@pytest.fixture(scope="module")
def projective_line():
    return ManifoldSpec(
        PolynomialSystem([parse_polynomial("x0", ("x0", "x1", "x2"))]),
        dim=1,
        projective=True,
    )


@pytest.fixture(scope="module")
def conic():
    return ManifoldSpec(
        PolynomialSystem(
            [parse_polynomial("x0^2 + x1^2 - 2*x2^2", ("x0", "x1", "x2"))]
        ),
        dim=1,
        projective=True,
    )


class TestIntersectProjective:
    def test_line_meets_every_slice_once(self, projective_line):
        rng = np.random.default_rng(2)
        for i in range(15):
            ps = sample_projective_slice(projective_line, rng)
            wi = intersect_projective(projective_line, ps, rng=np.random.default_rng(i))
            assert len(wi) == 1
            p = wi.points[0]
            assert p.alpha_weight == 1.0
            assert abs(np.linalg.norm(p.coordinates) - 1.0) <= 1e-12
            assert abs(p.coordinates[0]) <= 1e-10

    def test_conic_at_most_two_points(self, conic):
        rng = np.random.default_rng(3)
        counts = set()
        for i in range(20):
            ps = sample_projective_slice(conic, rng)
            wi = intersect_projective(conic, ps, rng=np.random.default_rng(i))
            counts.add(len(wi))
            assert len(wi) <= 2
        assert max(counts) == 2

    def test_sign_convention(self, conic):
        rng = np.random.default_rng(5)
        for i in range(10):
            ps = sample_projective_slice(conic, rng)
            wi = intersect_projective(conic, ps, rng=np.random.default_rng(i))
            for p in wi.points:
                nonzero = p.coordinates[np.abs(p.coordinates) > 1e-9]
                assert nonzero[0] > 0.0

    def test_affine_manifold_rejected(self, circle):
        with pytest.raises(SolverError, match="projective"):
            intersect_projective(circle, ProjectiveSlice(A=np.zeros((1, 2))))


def sampled_batch(manifold, k, seed):
    rngs = [np.random.default_rng([seed, i]) for i in range(k)]
    slices = [sample_affine_slice(manifold, g) for g in rngs]
    A = np.stack([s.A for s in slices])
    b = np.stack([s.b for s in slices])
    return A, b, slices, rngs


def replay_rng(manifold, seed, i):
    # recreate the per-slice stream and skip the A, b draws
    g = np.random.default_rng([seed, i])
    g.standard_normal((manifold.dim, manifold.ambient_dim))
    g.standard_normal(manifold.dim)
    return g


def assert_batch_matches_sequential(manifold, batch, slices, seed, tol=1e-8):
    N = manifold.ambient_dim
    for i, s in enumerate(slices):
        wi = intersect(manifold, s, rng=replay_rng(manifold, seed, i))
        mask = batch.point_slice == i
        bp, ba = batch.points[mask], batch.alphas[mask]
        assert len(bp) == len(wi.points)
        assert batch.counts[i] == len(wi.points)
        assert batch.path_failures[i] == wi.path_failures
        assert batch.rejected_by_region[i] == wi.rejected_by_region
        sp = np.array([p.coordinates for p in wi.points]).reshape(-1, N)
        sa = np.array([p.alpha_weight for p in wi.points])
        used = np.zeros(len(sp), dtype=bool)
        for p, a in zip(bp, ba):
            d = np.where(used, np.inf, np.linalg.norm(sp - p, axis=1))
            j = int(np.argmin(d))
            assert d[j] <= tol
            assert abs(a - sa[j]) <= 1e-8 * sa[j]
            used[j] = True


@pytest.fixture(scope="module")
def pentagon():
    names = tuple(f"x{i}" for i in range(1, 7))
    return ManifoldSpec(
        PolynomialSystem([parse_polynomial(t, names) for t in PENTAGON_TEXTS]),
        dim=2,
    )


class TestBatchIntersect:
    def test_circle_matches_sequential(self, circle):
        A, b, slices, rngs = sampled_batch(circle, 64, 101)
        batch = intersect_affine_batch(circle, A, b, rngs=rngs)
        assert_batch_matches_sequential(circle, batch, slices, 101)

    def test_quartic_matches_sequential(self, quartic):
        A, b, slices, rngs = sampled_batch(quartic, 64, 102)
        batch = intersect_affine_batch(quartic, A, b, rngs=rngs)
        assert_batch_matches_sequential(quartic, batch, slices, 102)
        assert len(batch.points) == batch.counts.sum()
        assert np.all(batch.residuals <= 1e-10)

    def test_pentagon_matches_sequential(self, pentagon):
        A, b, slices, rngs = sampled_batch(pentagon, 6, 103)
        batch = intersect_affine_batch(pentagon, A, b, rngs=rngs)
        assert_batch_matches_sequential(pentagon, batch, slices, 103)

    def test_region_bookkeeping_matches_sequential(self):
        boxed = ManifoldSpec(
            PolynomialSystem([parse_polynomial("x^2 + y^2 - 1", ("x", "y"))]),
            dim=1,
            region=Region(lows=[0.0, -2.0], highs=[2.0, 2.0]),
        )
        A, b, slices, rngs = sampled_batch(boxed, 48, 104)
        batch = intersect_affine_batch(boxed, A, b, rngs=rngs)
        assert batch.rejected_by_region.sum() > 0
        assert_batch_matches_sequential(boxed, batch, slices, 104)

    def test_split_batches_are_byte_identical_hypersurface(self, quartic):
        A, b, _, _ = sampled_batch(quartic, 60, 105)
        whole = intersect_affine_batch(
            quartic, A, b, rngs=[replay_rng(quartic, 105, i) for i in range(60)]
        )
        parts = []
        for s, e in ((0, 13), (13, 40), (40, 60)):
            parts.append(
                intersect_affine_batch(
                    quartic, A[s:e], b[s:e],
                    rngs=[replay_rng(quartic, 105, i) for i in range(s, e)],
                )
            )
        merged_slice = np.concatenate(
            [p.point_slice + s for p, (s, _) in zip(parts, ((0, 13), (13, 40), (40, 60)))]
        )
        assert np.array_equal(whole.point_slice, merged_slice)
        assert np.array_equal(whole.points, np.concatenate([p.points for p in parts]))
        assert np.array_equal(whole.alphas, np.concatenate([p.alphas for p in parts]))
        assert np.array_equal(whole.counts, np.concatenate([p.counts for p in parts]))

    def test_split_batches_are_byte_identical_general(self, pentagon):
        A, b, _, _ = sampled_batch(pentagon, 6, 106)
        whole = intersect_affine_batch(
            pentagon, A, b, rngs=[replay_rng(pentagon, 106, i) for i in range(6)]
        )
        halves = [
            intersect_affine_batch(
                pentagon, A[s:e], b[s:e],
                rngs=[replay_rng(pentagon, 106, i) for i in range(s, e)],
            )
            for s, e in ((0, 3), (3, 6))
        ]
        assert np.array_equal(
            whole.points, np.concatenate([h.points for h in halves])
        )
        assert np.array_equal(
            whole.alphas, np.concatenate([h.alphas for h in halves])
        )

    def test_overdetermined_base_falls_back(self):
        names = ("x", "y", "z")
        texts = ["x^2 + y^2 - 1", "z", "x^2 + y^2 - 1 + z"]
        redundant = ManifoldSpec(
            PolynomialSystem([parse_polynomial(t, names) for t in texts]),
            dim=1,
            degree=2,
        )
        A, b, slices, rngs = sampled_batch(redundant, 5, 107)
        batch = intersect_affine_batch(redundant, A, b, rngs=rngs)
        for i, s in enumerate(slices):
            wi = intersect(redundant, s, rng=replay_rng(redundant, 107, i))
            bp = batch.points[batch.point_slice == i]
            sp = np.array([p.coordinates for p in wi.points]).reshape(-1, 3)
            assert np.array_equal(bp, sp)
            # the deduped circle points satisfy all three equations
            for p in bp:
                assert abs(p[0] ** 2 + p[1] ** 2 - 1.0) <= 1e-8
                assert abs(p[2]) <= 1e-8

    def test_empty_intersections(self, circle):
        A = np.tile(np.array([[1.0, 0.0]]), (3, 1, 1))
        b = np.full((3, 1), 5.0)
        batch = intersect_affine_batch(circle, A, b)
        assert batch.points.shape == (0, 2)
        assert np.array_equal(batch.counts, np.zeros(3, dtype=np.int64))

    def test_shape_validation(self, circle):
        with pytest.raises(ValueError, match="shape"):
            intersect_affine_batch(circle, np.zeros((4, 1, 3)), np.zeros((4, 1)))
        with pytest.raises(ValueError, match="rngs"):
            intersect_affine_batch(
                circle,
                np.zeros((2, 1, 2)),
                np.ones((2, 1)),
                rngs=[np.random.default_rng(0)],
            )

    def test_projective_rejected(self):
        proj = ManifoldSpec(
            PolynomialSystem(
                [parse_polynomial("x0^2 + x1^2 - x2^2", ("x0", "x1", "x2"))]
            ),
            dim=1,
            projective=True,
        )
        with pytest.raises(SolverError, match="projective"):
            intersect_affine_batch(proj, np.zeros((1, 1, 3)), np.zeros((1, 1)))
