"""Generate the cyclohexane example files in manifolds/.

A cyclohexane-like ring is six points q1..q6 in R^3 joined in a closed
chain by six unit-length bonds.  Rigid motions are removed by fixing a
gauge:

    q1 = (0, 0, 0)      translations
    q6 = (1, 0, 0)      two rotations, and it makes bond (6,1) exact
    q5z = 0             the remaining rotation about the x-axis

which leaves the 11 coordinates

    q2x q2y q2z  q3x q3y q3z  q4x q4y q4z  q5x q5y

subject to the five remaining bond equations |q_{i+1} - q_i|^2 = 1,
i = 1..5, an 11 - 5 = 6 dimensional variety.

Alongside the manifold file the script writes two scalar expression
files over the same variables:

    cyclohexane_theta.txt   mean bond angle (radians): at each atom the
                            angle between the bonds to its neighbors,
                            averaged over the six atoms
    cyclohexane_energy.txt  Lennard-Jones energy over all 15 atom
                            pairs; with s the squared distance each
                            pair contributes 0.25/s^6 - 0.5/s^3, which
                            is minimized at distance 1

Run from the repository root:  python3 scripts/make_cyclohexane.py
"""

import pathlib

ATOMS = {
    1: ("0", "0", "0"),
    2: ("q2x", "q2y", "q2z"),
    3: ("q3x", "q3y", "q3z"),
    4: ("q4x", "q4y", "q4z"),
    5: ("q5x", "q5y", "0"),
    6: ("1", "0", "0"),
}

VARIABLES = "q2x q2y q2z q3x q3y q3z q4x q4y q4z q5x q5y"


def diff(a: str, b: str) -> str:
    """Textual a - b with the obvious zero and constant cases folded."""
    if b == "0":
        return a
    if a == "0":
        return f"-{b}"
    return f"{a} - {b}"


def vec(i: int, j: int) -> tuple[str, ...]:
    """Components of q_j - q_i as expression text."""
    return tuple(diff(a, b) for a, b in zip(ATOMS[j], ATOMS[i]))


def sq_norm(components: tuple[str, ...]) -> str:
    terms = [f"({c})^2" for c in components if c != "0"]
    return " + ".join(terms)


def dot(u: tuple[str, ...], v: tuple[str, ...]) -> str:
    terms = [
        f"({a})*({b})" for a, b in zip(u, v) if a != "0" and b != "0"
    ]
    return " + ".join(terms) if terms else "0"


def bond_equations() -> list[str]:
    return [f"{sq_norm(vec(i, i + 1))} - 1" for i in range(1, 6)]


def theta_text() -> str:
    """Mean over the six atoms of the angle between the two bonds."""
    angles = []
    for i in range(1, 7):
        prev = 6 if i == 1 else i - 1
        nxt = 1 if i == 6 else i + 1
        u = vec(i, prev)
        v = vec(i, nxt)
        cos = f"({dot(u, v)}) / (sqrt({sq_norm(u)}) * sqrt({sq_norm(v)}))"
        angles.append(f"acos({cos})")
    joined = "\n + ".join(angles)
    return f"({joined}\n) / 6"


def energy_text() -> str:
    terms = []
    for i in range(1, 7):
        for j in range(i + 1, 7):
            s = sq_norm(vec(i, j))
            terms.append(f"(0.25/({s})^6 - 0.5/({s})^3)")
    return "\n + ".join(terms)


def main() -> None:
    root = pathlib.Path(__file__).resolve().parent.parent / "manifolds"

    lines = [
        "# Conformation space of a six-atom ring with unit bonds",
        "# (cyclohexane skeleton), gauge-fixed to remove rigid motions:",
        "#   q1 = (0,0,0), q6 = (1,0,0), q5z = 0.",
        "# The sixth bond (q6, q1) holds identically in this gauge.",
        "# Generated by scripts/make_cyclohexane.py; edit that, not this.",
        f"vars: {VARIABLES}",
        "dim: 6",
        "degree: 32",
    ]
    lines += [f"eq: {eq}" for eq in bond_equations()]
    (root / "cyclohexane.txt").write_text("\n".join(lines) + "\n")

    theta = [
        "# Mean bond angle (radians) of the gauge-fixed six-atom ring:",
        "# at each atom, the angle between the bonds to its two ring",
        "# neighbors, averaged over the six atoms.",
        "# Generated by scripts/make_cyclohexane.py; edit that, not this.",
        theta_text(),
    ]
    (root / "cyclohexane_theta.txt").write_text("\n".join(theta) + "\n")

    energy = [
        "# Lennard-Jones energy of the gauge-fixed six-atom ring over",
        "# all 15 atom pairs; s denotes a squared distance and each pair",
        "# contributes 0.25/s^6 - 0.5/s^3 (minimum -0.25 at distance 1).",
        "# Generated by scripts/make_cyclohexane.py; edit that, not this.",
        energy_text(),
    ]
    (root / "cyclohexane_energy.txt").write_text("\n".join(energy) + "\n")


if __name__ == "__main__":
    main()
