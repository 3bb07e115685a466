"""Generate manifolds/trott_complex.txt: the complex points of the
Trott curve seen as a real surface in R^4.

Writing x1 = x1r + i*x1i and x2 = x2r + i*x2i, the complex equation
T(x1, x2) = 0 splits into its real and imaginary parts, two real
quartics in the four real coordinates.  Both are expressed through the
real and imaginary parts of the squares

    re(z^2) = zr^2 - zi^2,   im(z^2) = 2*zr*zi

so the file stays readable; the script checks the two expressions
against direct complex evaluation at random points before writing.

Run from the repository root:  python3 scripts/make_complex_curve.py
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from slicemc.expressions import parse_polynomial  # noqa: E402

RE1, IM1 = "(x1r^2 - x1i^2)", "(2*x1r*x1i)"
RE2, IM2 = "(x2r^2 - x2i^2)", "(2*x2r*x2i)"

# T(z1, z2) = 144(z1^4 + z2^4) - 225(z1^2 + z2^2) + 350 z1^2 z2^2 + 81,
# with z^4 = (z^2)^2 and products expanded by (p+iq)(r+is).
REAL_PART = (
    f"144*({RE1}^2 - {IM1}^2 + {RE2}^2 - {IM2}^2)"
    f" - 225*({RE1} + {RE2})"
    f" + 350*({RE1}*{RE2} - {IM1}*{IM2}) + 81"
)
IMAG_PART = (
    f"144*(2*{RE1}*{IM1} + 2*{RE2}*{IM2})"
    f" - 225*({IM1} + {IM2})"
    f" + 350*({RE1}*{IM2} + {IM1}*{RE2})"
)

VARIABLES = ("x1r", "x1i", "x2r", "x2i")


def trott(z1: complex, z2: complex) -> complex:
    return (
        144 * (z1 ** 4 + z2 ** 4)
        - 225 * (z1 ** 2 + z2 ** 2)
        + 350 * z1 ** 2 * z2 ** 2
        + 81
    )


def check() -> None:
    real = parse_polynomial(REAL_PART, VARIABLES)
    imag = parse_polynomial(IMAG_PART, VARIABLES)
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b, c, d = rng.uniform(-2, 2, size=4)
        want = trott(complex(a, b), complex(c, d))
        got = complex(real.evaluate((a, b, c, d)), imag.evaluate((a, b, c, d)))
        assert abs(want - got) <= 1e-9 * max(1.0, abs(want)), (want, got)


def main() -> None:
    check()
    root = pathlib.Path(__file__).resolve().parent.parent / "manifolds"
    lines = [
        "# Complex points of the Trott curve as a real surface in R^4:",
        "# substitute x1 = x1r + i*x1i, x2 = x2r + i*x2i into the",
        "# quartic and take real and imaginary parts.  The box matches",
        "# the usual visualization window.",
        "# Generated by scripts/make_complex_curve.py; edit that, not this.",
        "vars: x1r x1i x2r x2i",
        "dim: 2",
        "box: x1r in [-1.5, 1.5]; x1i in [-1.5, 1.5]; x2r in [-1.5, 1.5]; x2i in [-1.5, 1.5]",
        f"eq: {REAL_PART}",
        f"eq: {IMAG_PART}",
    ]
    (root / "trott_complex.txt").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
