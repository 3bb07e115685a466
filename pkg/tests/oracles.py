"""Independent reference computations used to freeze expected test values.

Nothing here touches the library's own differentiation, slicing or solver
code paths: derivatives come from finite differences, curve integrals from
dense quadrature or marching-squares polylines, and the density correction
from a direct Monte Carlo evaluation of its defining integral.  Run this
module as a script to reprint every frozen constant.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def finite_difference_jacobian(func, point, h_scale: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector function at a point."""
    point = np.asarray(point, dtype=float)
    f0 = np.atleast_1d(np.asarray(func(point), dtype=float))
    J = np.zeros((f0.size, point.size))
    for j in range(point.size):
        h = h_scale * (1.0 + abs(point[j]))
        up = point.copy()
        dn = point.copy()
        up[j] += h
        dn[j] -= h
        J[:, j] = (np.atleast_1d(func(up)) - np.atleast_1d(func(dn))) / (2.0 * h)
    return J


def ellipse_arc_length(a: float = 3.0, b: float = 1.0) -> float:
    """Perimeter of x^2/a^2 + y^2/b^2 = 1 by adaptive quadrature."""

    def speed(t):
        return math.hypot(a * math.sin(t), b * math.cos(t))

    val, _ = integrate.quad(speed, 0.0, 2.0 * math.pi, limit=200)
    return val


def circle_line_integral(func, radius: float = 1.0, n: int = 200000) -> float:
    """Integrate func(x, y) with respect to arc length over a circle."""
    t = (np.arange(n) + 0.5) * (2.0 * np.pi / n)
    x = radius * np.cos(t)
    y = radius * np.sin(t)
    return float(np.sum(func(x, y)) * (2.0 * np.pi * radius / n))


def implicit_curve_polyline(poly_eval, window, resolution: int = 3000):
    """Marching-squares polylines of {poly_eval = 0} inside a rectangle.

    Returns a list of (k, 2) vertex arrays in (x, y) coordinates.  Uses
    scikit-image's contour finder, which is independent of any root
    finding done by the library under test.
    """
    from skimage import measure

    (x0, x1), (y0, y1) = window
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Z = poly_eval(X, Y)
    curves = measure.find_contours(Z, 0.0)
    out = []
    for c in curves:
        px = np.interp(c[:, 0], np.arange(resolution), xs)
        py = np.interp(c[:, 1], np.arange(resolution), ys)
        out.append(np.column_stack([px, py]))
    return out


def polyline_line_integral(polylines, func) -> float:
    """Sum of func over polyline midpoints weighted by segment length."""
    total = 0.0
    for pts in polylines:
        seg = np.diff(pts, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        mid = 0.5 * (pts[:-1] + pts[1:])
        total += float(np.sum(lengths * func(mid[:, 0], mid[:, 1])))
    return total


def alpha_by_monte_carlo(point, tangent_basis, n_draws: int = 200000, seed: int = 0) -> float:
    """Density correction at a manifold point via its defining integral.

    Draws random Gaussian slice matrices A and averages
    phi_n(A x) * |det(A restricted to the tangent space)| where phi_n is
    the standard normal density on R^n.  This is the quantity the library
    computes in closed form, so agreement is a genuine cross-check.
    """
    point = np.asarray(point, dtype=float)
    W = np.asarray(tangent_basis, dtype=float)  # (N, n) orthonormal columns
    N, n = W.shape
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_draws, n, N))
    dets = np.linalg.det(A @ W)
    b = A @ point
    sq = np.einsum("ij,ij->i", b, b)
    phi = (2.0 * np.pi) ** (-n / 2.0) * np.exp(-0.5 * sq)
    return float(np.mean(phi * np.abs(dets)))


QUARTIC_WINDOW = ((-2.6, 2.6), (-2.6, 2.6))


def quartic_value(x, y):
    return x**4 + y**4 - 3.0 * x**2 - x * y**2 - y + 1.0


def quartic_reference(resolution: int = 4000):
    """Frozen reference integrals over the plane quartic used in examples."""
    lines = implicit_curve_polyline(quartic_value, QUARTIC_WINDOW, resolution)
    length = polyline_line_integral(lines, lambda x, y: np.ones_like(x))
    weight = polyline_line_integral(lines, lambda x, y: np.exp(2.0 * y))
    weighted_y = polyline_line_integral(lines, lambda x, y: y * np.exp(2.0 * y))
    sup_norm_sq = max(float(np.max(p[:, 0] ** 2 + p[:, 1] ** 2)) for p in lines)
    return {
        "length": length,
        "exp2y_integral": weight,
        "mean_y_under_exp2y": weighted_y / weight,
        "sup_norm_sq": sup_norm_sq,
    }


if __name__ == "__main__":
    print(f"ellipse_arc_length(3, 1) = {ellipse_arc_length():.10f}")
    print(f"circle x^2 ds            = {circle_line_integral(lambda x, y: x * x):.10f}")
    print(f"circle 1 ds              = {circle_line_integral(lambda x, y: np.ones_like(x)):.10f}")
    for res in (2000, 3000, 4000):
        ref = quartic_reference(res)
        print(f"quartic @ {res}: " + ", ".join(f"{k}={v:.8f}" for k, v in ref.items()))
    # density correction spot checks on circles, where the closed form is
    # 1 / (pi * sqrt(1 + r^2)) times ... evaluated directly:
    for r, label in ((1.0, "unit circle"), (5.0**0.5, "radius-sqrt5 point")):
        pt = np.array([r, 0.0])
        tangent = np.array([[0.0], [1.0]])
        est = alpha_by_monte_carlo(pt, tangent, seed=11)
        print(f"alpha MC at {label}: {est:.7f}")
