import numpy as np
import pytest

from slicemc.expressions import PolynomialSystem, parse_polynomial

QUARTIC_TEXT = "x^4 + y^4 - 3*x^2 - x*y^2 - y + 1"

S1_TEXT = (
    "4*x1^4 + 7*x2^4 + 3*x3^4 - 3 - 8*x1^3 + 2*x1^2*x2 - 4*x1^2"
    " - 8*x1*x2^2 - 5*x1*x2 + 8*x1 - 6*x2^3 + 8*x2^2 + 4*x2"
)

PENTAGON_TEXTS = (
    "(x1 + x2 + x3)^2 + (1 + x4 + x5 + x6)^2 - 1",
    "x1^2 + x4^2 - 1",
    "x2^2 + x5^2 - 1",
    "x3^2 + x6^2 - 1",
)


@pytest.fixture(scope="session")
def circle_system():
    return PolynomialSystem([parse_polynomial("x^2 + y^2 - 1", ("x", "y"))])


@pytest.fixture(scope="session")
def quartic_system():
    return PolynomialSystem([parse_polynomial(QUARTIC_TEXT, ("x", "y"))])


@pytest.fixture(scope="session")
def pentagon_system():
    names = tuple(f"x{i}" for i in range(1, 7))
    return PolynomialSystem([parse_polynomial(t, names) for t in PENTAGON_TEXTS])


def closed_chain_system(n_joints=6):
    """Unit-distance constraints around a closed chain of 3d points."""
    names = []
    for i in range(1, n_joints + 1):
        names.extend(f"q{i}{c}" for c in "xyz")
    names = tuple(names)

    def bond(i, j):
        terms = " + ".join(f"(q{j}{c} - q{i}{c})^2" for c in "xyz")
        return f"{terms} - 1"

    texts = [bond(i, i + 1) for i in range(1, n_joints)] + [bond(n_joints, 1)]
    return PolynomialSystem([parse_polynomial(t, names) for t in texts])


@pytest.fixture(scope="session")
def sliced_ring_system():
    """The closed 6-chain quadrics cut down to dimension zero by 12 random
    affine equations, a 64-path stress case for the tracker."""
    base = closed_chain_system()
    names = base.polynomials[0].variables
    rng = np.random.default_rng(5)
    rows = []
    for _ in range(12):
        a = rng.standard_normal(len(names))
        b = rng.standard_normal()
        terms = " + ".join(f"({a[k]})*{names[k]}" for k in range(len(names)))
        rows.append(parse_polynomial(f"{terms} - ({b})", names))
    return PolynomialSystem(tuple(base.polynomials) + tuple(rows))


def random_point(rng, n, scale=1.5):
    return rng.uniform(-scale, scale, size=n)


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.max(np.abs(a - b) / (1.0 + np.abs(b)))
