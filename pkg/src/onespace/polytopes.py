"""Membership tests for the covariance tetrahedron, the six Bell inequalities
and the CHSH polytope.

Every check evaluates all of its inequalities and reports the exact slack of
each one (negative means violated). Identifiers are stable: T1..T4 for the
tetrahedron faces, B1..B6 for the Bell inequalities in reading order, C1..C4
and cube:<index> for CHSH.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

from onespace.densities import CovarianceTriple, as_rational, format_rational

TETRAHEDRON_VERTICES = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))

# Sign patterns (s11, s12, s21, s22) with an odd number of minus signs.
CHSH_SIGNS = ((1, 1, 1, -1), (1, 1, -1, 1), (1, -1, 1, 1), (-1, 1, 1, 1))
CHSH_BOUND = 2


@dataclass(frozen=True)
class InequalityReport:
    slacks: tuple[tuple[str, Fraction], ...] = field(default_factory=tuple)

    @property
    def violations(self) -> list[tuple[str, Fraction]]:
        return [(name, slack) for name, slack in self.slacks if slack < 0]

    @property
    def satisfied(self) -> bool:
        return not self.violations

    @property
    def min_slack(self) -> Optional[Fraction]:
        return min((slack for _, slack in self.slacks), default=None)

    @property
    def on_boundary(self) -> bool:
        """Satisfied with at least one inequality tight."""
        return self.satisfied and self.min_slack == 0

    def slack(self, name: str) -> Fraction:
        for key, value in self.slacks:
            if key == name:
                return value
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "slacks": {name: format_rational(slack) for name, slack in self.slacks},
            "violations": [name for name, _ in self.violations],
        }


@dataclass(frozen=True)
class CovarianceQuad:
    """Covariances of (A1,B1), (A1,B2), (A2,B1), (A2,B2).

    Values outside [-1, 1] are kept: ``chsh_check`` reports them as cube
    violations instead of refusing them.
    """

    s_ab1: Fraction
    s_ab2: Fraction
    s_a2b1: Fraction
    s_a2b2: Fraction

    def __post_init__(self):
        for name in ("s_ab1", "s_ab2", "s_a2b1", "s_a2b2"):
            object.__setattr__(self, name, as_rational(getattr(self, name)))

    def __iter__(self) -> Iterator[Fraction]:
        return iter((self.s_ab1, self.s_ab2, self.s_a2b1, self.s_a2b2))

    def __str__(self):
        return "(" + ", ".join(str(v) for v in self) + ")"


def tetrahedron_vertices() -> list[CovarianceTriple]:
    return [CovarianceTriple(*vertex) for vertex in TETRAHEDRON_VERTICES]


def tetrahedron_check(s: CovarianceTriple) -> InequalityReport:
    s1, s2, s3 = s
    return InequalityReport(
        (
            ("T1", 1 + s1 + s2 + s3),
            ("T2", 1 + s1 - s2 - s3),
            ("T3", 1 - s1 + s2 - s3),
            ("T4", 1 - s1 - s2 + s3),
        )
    )


def bell_six_check(s: CovarianceTriple) -> InequalityReport:
    """|σi ∓ σj| <= 1 ∓ σk for the three index pairings; slack = rhs - lhs."""
    s1, s2, s3 = s
    return InequalityReport(
        (
            ("B1", (1 - s3) - abs(s1 - s2)),
            ("B2", (1 + s3) - abs(s1 + s2)),
            ("B3", (1 - s2) - abs(s1 - s3)),
            ("B4", (1 + s2) - abs(s1 + s3)),
            ("B5", (1 - s1) - abs(s2 - s3)),
            ("B6", (1 + s1) - abs(s2 + s3)),
        )
    )


def chsh_value(s: CovarianceQuad, signs: tuple[int, int, int, int]) -> Fraction:
    return sum((sign * value for sign, value in zip(signs, s)), Fraction(0))


def chsh_check(s: CovarianceQuad) -> InequalityReport:
    slacks = [
        (f"C{index}", CHSH_BOUND - abs(chsh_value(s, signs)))
        for index, signs in enumerate(CHSH_SIGNS, start=1)
    ]
    slacks += [(f"cube:{index}", 1 - abs(value)) for index, value in enumerate(s)]
    return InequalityReport(tuple(slacks))


def involved_covariances(name: str, count: int) -> tuple[int, ...]:
    """Indices of the covariances an inequality's slack depends on."""
    if name.startswith("cube:"):
        return (int(name.split(":", 1)[1]),)
    return tuple(range(count))
