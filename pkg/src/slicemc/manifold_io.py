"""Line-oriented text format describing a manifold.

A file holds `key: value` lines and `#` comments:

    # unit circle
    vars: x y
    dim: 1
    degree: 2
    box: x in [-1.5, 1.5]; y in [-1.5, 1.5]
    projective: false
    shift: 0 0
    eq: x^2 + y^2 - 1

`vars`, `dim`, and at least one `eq` are required; everything else is
optional.  `degree` overrides the Bezout bound, `box` restricts the
manifold to a closed axis-aligned region (every variable must get an
interval), `shift` recenters the working coordinates, and
`projective: true` switches to homogeneous slicing.  Errors carry the
offending line number.
"""

import re

import numpy as np

from .errors import ParseError
from .expressions import PolynomialSystem, parse_polynomial, parse_scalar
from .slicing import ManifoldSpec, Region

_INTERVAL = re.compile(
    r"^\s*([A-Za-z_]\w*)\s+in\s+\[\s*([^\s,\]]+)\s*,\s*([^\s,\]]+)\s*\]\s*$"
)
_SCALAR_KEYS = ("vars", "dim", "degree", "box", "projective", "shift")


def _strip_comment(line: str) -> str:
    cut = line.find("#")
    return line if cut < 0 else line[:cut]


def _float(token: str, lineno: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"{what} is not a number: {token!r}", line=lineno) from None


def parse_manifold_text(text: str, name: str = "<manifold>") -> ManifoldSpec:
    """Build a ManifoldSpec from the text format described above."""
    seen: dict[str, int] = {}
    fields: dict[str, tuple[str, int]] = {}
    equations: list[tuple[str, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key = key.strip().lower()
        if not sep:
            raise ParseError(
                f"{name}: expected 'key: value', got {raw.strip()!r}",
                line=lineno,
            )
        value = value.strip()
        if key == "eq":
            if not value:
                raise ParseError(f"{name}: empty equation", line=lineno)
            equations.append((value, lineno))
        elif key in _SCALAR_KEYS:
            if key in seen:
                raise ParseError(
                    f"{name}: duplicate '{key}' (first on line {seen[key]})",
                    line=lineno,
                )
            seen[key] = lineno
            fields[key] = (value, lineno)
        else:
            raise ParseError(f"{name}: unknown key {key!r}", line=lineno)

    if "vars" not in fields:
        raise ParseError(f"{name}: missing 'vars' line")
    if "dim" not in fields:
        raise ParseError(f"{name}: missing 'dim' line")
    if not equations:
        raise ParseError(f"{name}: needs at least one 'eq' line")

    value, lineno = fields["vars"]
    variables = tuple(value.split())
    if not variables:
        raise ParseError(f"{name}: 'vars' names no variables", line=lineno)
    for v in variables:
        if not re.fullmatch(r"[A-Za-z_]\w*", v):
            raise ParseError(
                f"{name}: invalid variable name {v!r}", line=lineno
            )
    if len(set(variables)) != len(variables):
        raise ParseError(f"{name}: repeated variable name", line=lineno)

    value, lineno = fields["dim"]
    try:
        dim = int(value)
    except ValueError:
        raise ParseError(
            f"{name}: 'dim' must be an integer, got {value!r}", line=lineno
        ) from None

    degree = None
    if "degree" in fields:
        value, lineno = fields["degree"]
        try:
            degree = int(value)
        except ValueError:
            raise ParseError(
                f"{name}: 'degree' must be an integer, got {value!r}",
                line=lineno,
            ) from None

    projective = False
    if "projective" in fields:
        value, lineno = fields["projective"]
        low = value.lower()
        if low not in ("true", "false"):
            raise ParseError(
                f"{name}: 'projective' must be true or false, got {value!r}",
                line=lineno,
            )
        projective = low == "true"

    region = None
    if "box" in fields:
        value, lineno = fields["box"]
        intervals: dict[str, tuple[float, float]] = {}
        for part in value.split(";"):
            m = _INTERVAL.match(part)
            if m is None:
                raise ParseError(
                    f"{name}: cannot read interval {part.strip()!r}; "
                    "expected 'name in [lo, hi]'",
                    line=lineno,
                )
            var = m.group(1)
            if var not in variables:
                raise ParseError(
                    f"{name}: box bounds unknown variable {var!r}",
                    line=lineno,
                )
            if var in intervals:
                raise ParseError(
                    f"{name}: box bounds {var!r} twice", line=lineno
                )
            intervals[var] = (
                _float(m.group(2), lineno, "interval bound"),
                _float(m.group(3), lineno, "interval bound"),
            )
        missing = [v for v in variables if v not in intervals]
        if missing:
            raise ParseError(
                f"{name}: box must bound every variable; "
                f"missing {', '.join(missing)}",
                line=lineno,
            )
        lows = np.array([intervals[v][0] for v in variables])
        highs = np.array([intervals[v][1] for v in variables])
        try:
            region = Region(lows=lows, highs=highs)
        except ValueError as e:
            raise ParseError(f"{name}: {e}", line=lineno) from None

    shift = None
    if "shift" in fields:
        value, lineno = fields["shift"]
        tokens = value.split()
        if len(tokens) != len(variables):
            raise ParseError(
                f"{name}: 'shift' needs one number per variable "
                f"({len(variables)}), got {len(tokens)}",
                line=lineno,
            )
        shift = np.array([_float(t, lineno, "shift entry") for t in tokens])

    polynomials = []
    for text_eq, lineno in equations:
        try:
            polynomials.append(parse_polynomial(text_eq, variables))
        except ParseError as e:
            raise ParseError(
                f"{name}: {e.message}", line=lineno, column=e.column
            ) from None

    try:
        return ManifoldSpec(
            system=PolynomialSystem(tuple(polynomials)),
            dim=dim,
            degree=degree,
            region=region,
            projective=projective,
            shift=shift,
        )
    except ValueError as e:
        raise ParseError(f"{name}: {e}") from None


def load_manifold(path) -> ManifoldSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_manifold_text(fh.read(), name=str(path))


def read_expression_text(path) -> str:
    """Read a scalar-expression file: comments stripped, lines joined."""
    with open(path, "r", encoding="utf-8") as fh:
        text = " ".join(
            part
            for part in (_strip_comment(line).strip() for line in fh)
            if part
        )
    if not text:
        raise ParseError(f"{path}: no expression found")
    return text


def load_scalar(path, variables):
    """Parse a scalar-expression file into an Expression."""
    return parse_scalar(read_expression_text(path), tuple(variables))
