"""Pair densities on the four vertices of a square and their covariances.

Everything here is exact: masses and covariances are ``Fraction`` values and
no operation rounds. Vertex order is fixed as (+1,+1), (+1,-1), (-1,+1),
(-1,-1) and every serialized form uses it.
"""

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from onespace.errors import (
    CovarianceOutOfRange,
    MassSumNotOne,
    NegativeMass,
    NonUniformMarginals,
    RationalParseError,
)

Rational = Fraction
RationalLike = Union[Fraction, int, str]

VERTICES = ((1, 1), (1, -1), (-1, 1), (-1, -1))
VERTEX_KEYS = ("pp", "pm", "mp", "mm")

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)

_RATIONAL_PATTERN = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(text: str) -> Fraction:
    """Parse "p/q" or an integer. Decimals are rejected on purpose."""
    match = _RATIONAL_PATTERN.match(str(text))
    if not match:
        raise RationalParseError(f"Not a rational of the form p/q: {text!r}")
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) is not None else 1
    if denominator == 0:
        raise RationalParseError(f"Zero denominator in {text!r}")
    return Fraction(numerator, denominator)


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def as_rational(value: RationalLike) -> Fraction:
    """Coerce ints, Fractions and "p/q" strings. Floats are refused."""
    if isinstance(value, bool):
        raise TypeError("Booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"Expected an exact rational, got {type(value).__name__}")


@dataclass(frozen=True)
class PairDensity:
    """Joint density of two ±1 variables. Use ``make_pair_density`` to validate."""

    mass_pp: Fraction
    mass_pm: Fraction
    mass_mp: Fraction
    mass_mm: Fraction

    def masses(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.mass_pp, self.mass_pm, self.mass_mp, self.mass_mm)

    def __getitem__(self, vertex: tuple[int, int]) -> Fraction:
        return self.masses()[VERTICES.index(tuple(vertex))]

    def __str__(self):
        return "(" + ", ".join(str(m) for m in self.masses()) + ")"


@dataclass(frozen=True)
class CovarianceTriple:
    """(σ₁, σ₂, σ₃) = (E(AB), E(AC), E(BC)), each in [-1, 1]."""

    sigma1: Fraction
    sigma2: Fraction
    sigma3: Fraction

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "sigma3"):
            value = as_rational(getattr(self, name))
            if abs(value) > 1:
                raise CovarianceOutOfRange(value)
            object.__setattr__(self, name, value)

    def __iter__(self) -> Iterator[Fraction]:
        return iter((self.sigma1, self.sigma2, self.sigma3))

    def __str__(self):
        return f"({self.sigma1}, {self.sigma2}, {self.sigma3})"


def make_pair_density(masses) -> PairDensity:
    """Validated constructor: every mass >= 0 and the four sum to exactly 1."""
    values = [as_rational(m) for m in masses]
    if len(values) != 4:
        raise ValueError(f"A pair density has four masses, got {len(values)}")
    for index, value in enumerate(values):
        if value < 0:
            raise NegativeMass(index, value)
    total = sum(values, Fraction(0))
    if total != 1:
        raise MassSumNotOne(total)
    return PairDensity(*values)


def has_uniform_marginals(d: PairDensity) -> bool:
    return d.mass_pp + d.mass_pm == HALF and d.mass_pp + d.mass_mp == HALF


def marginal_means(d: PairDensity) -> tuple[Fraction, Fraction]:
    """(Σ x f(x, y), Σ y f(x, y)) over the four vertices."""
    mean_x = sum((x * m for (x, _), m in zip(VERTICES, d.masses())), Fraction(0))
    mean_y = sum((y * m for (_, y), m in zip(VERTICES, d.masses())), Fraction(0))
    return mean_x, mean_y


def covariance(d: PairDensity) -> Fraction:
    return d.mass_pp - d.mass_pm - d.mass_mp + d.mass_mm


def density_from_covariance(sigma: RationalLike) -> PairDensity:
    sigma = as_rational(sigma)
    if abs(sigma) > 1:
        raise CovarianceOutOfRange(sigma)
    same = QUARTER * (1 + sigma)
    different = QUARTER * (1 - sigma)
    return PairDensity(same, different, different, same)


def density_covariances(f1: PairDensity, f2: PairDensity, f3: PairDensity) -> CovarianceTriple:
    """Covariances of the (A,B), (A,C), (B,C) densities; all three need uniform marginals."""
    for label, density in (("f1", f1), ("f2", f2), ("f3", f3)):
        if not has_uniform_marginals(density):
            raise NonUniformMarginals(f"{label} = {density} does not have uniform ±1 marginals")
    return CovarianceTriple(covariance(f1), covariance(f2), covariance(f3))


def pair_density_to_json(d: PairDensity) -> dict[str, str]:
    return {key: format_rational(mass) for key, mass in zip(VERTEX_KEYS, d.masses())}


def pair_density_from_json(document: dict) -> PairDensity:
    missing = [key for key in VERTEX_KEYS if key not in document]
    if missing:
        raise ValueError(f"Pair density is missing vertices {missing}")
    return make_pair_density([document[key] for key in VERTEX_KEYS])


# The Vorob'ev-type example: A~B and A~C agree with probability 3/4, B~C only 1/4.
FRUSTRATED_DENSITIES = (
    PairDensity(Fraction(3, 8), Fraction(1, 8), Fraction(1, 8), Fraction(3, 8)),
    PairDensity(Fraction(3, 8), Fraction(1, 8), Fraction(1, 8), Fraction(3, 8)),
    PairDensity(Fraction(1, 8), Fraction(3, 8), Fraction(3, 8), Fraction(1, 8)),
)
