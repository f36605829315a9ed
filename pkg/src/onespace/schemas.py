"""JSON documents exchanged by the CLI.

Rationals travel as "p/q" strings and are validated into ``Fraction`` on the
way in, so nothing downstream ever sees a float.
"""

from fractions import Fraction
from typing import Annotated, Union

from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator

from onespace.densities import (
    CovarianceTriple,
    PairDensity,
    as_rational,
    format_rational,
    make_pair_density,
)
from onespace.polytopes import CovarianceQuad


def _to_rational(value) -> Fraction:
    # Any RationalParseError / TypeError surfaces as a pydantic ValidationError.
    try:
        return as_rational(value)
    except TypeError as exc:
        raise ValueError(str(exc)) from exc


RationalStr = Annotated[
    Fraction,
    PlainValidator(_to_rational),
    PlainSerializer(format_rational, return_type=str),
]


class Document(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True, frozen=True)


class PairDensityDocument(Document):
    pp: RationalStr
    pm: RationalStr
    mp: RationalStr
    mm: RationalStr

    def to_density(self) -> PairDensity:
        return make_pair_density([self.pp, self.pm, self.mp, self.mm])


class DensityTripleDocument(Document):
    """Pair densities of (A,B), (A,C) and (B,C)."""

    f1: PairDensityDocument
    f2: PairDensityDocument
    f3: PairDensityDocument

    def to_densities(self) -> tuple[PairDensity, PairDensity, PairDensity]:
        return self.f1.to_density(), self.f2.to_density(), self.f3.to_density()


class CovarianceDocument(Document):
    sigma: list[RationalStr] = Field(min_length=3, max_length=3)

    def to_triple(self) -> CovarianceTriple:
        return CovarianceTriple(*self.sigma)


class CovarianceQuadDocument(Document):
    """Covariances of (A1,B1), (A1,B2), (A2,B1), (A2,B2)."""

    sigma: list[RationalStr] = Field(min_length=4, max_length=4)

    def to_quad(self) -> CovarianceQuad:
        return CovarianceQuad(*self.sigma)


class VariableDocument(Document):
    name: str = Field(min_length=1)
    alphabet: list[Union[int, str]] = Field(default_factory=lambda: [1, -1], min_length=1)


class ConstraintDocument(Document):
    over: list[str] = Field(min_length=1)
    table: dict[str, RationalStr]


class ComplexDocument(Document):
    variables: list[VariableDocument] = Field(min_length=1)
    constraints: list[ConstraintDocument]
