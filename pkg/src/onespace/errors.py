"""Exceptions raised across the package.

Input problems derive from ``ValueError`` so callers that only care about
"bad input" can catch that. ``Infeasible`` is an answer rather than a fault:
it carries the evidence (inequality report and, where an LP ran, a Farkas
certificate).
"""

from fractions import Fraction


def _table(table) -> str:
    return "{" + ", ".join(f"{cell}: {mass}" for cell, mass in table.items()) + "}"


class OnespaceError(Exception):
    """Base class for every error raised by onespace."""


class RationalParseError(OnespaceError, ValueError):
    pass


class NegativeMass(OnespaceError, ValueError):
    def __init__(self, index: int, value: Fraction):
        super().__init__(f"Mass at position {index} is negative: {value}")
        self.index = index
        self.value = value


class MassSumNotOne(OnespaceError, ValueError):
    def __init__(self, total: Fraction):
        self.total = total
        self.deficit = Fraction(1) - total
        super().__init__(f"Masses sum to {total}, deficit {self.deficit}")


class CovarianceOutOfRange(OnespaceError, ValueError):
    def __init__(self, sigma: Fraction):
        super().__init__(f"Covariance {sigma} is outside [-1, 1]")
        self.sigma = sigma


class NonUniformMarginals(OnespaceError, ValueError):
    pass


class ParameterOutOfRange(OnespaceError, ValueError):
    pass


class InvalidComplex(OnespaceError, ValueError):
    pass


class InconsistentOverlap(OnespaceError, ValueError):
    """Two prescribed marginals disagree on the variables they share."""

    def __init__(self, shared, first, second, first_table, second_table):
        self.shared = tuple(shared)
        self.first = tuple(first)
        self.second = tuple(second)
        self.first_table = first_table
        self.second_table = second_table
        super().__init__(
            f"Constraints over {list(self.first)} and {list(self.second)} "
            f"disagree on the marginal of {list(self.shared)}: "
            f"{_table(first_table)} vs {_table(second_table)}"
        )


class DimensionMismatch(OnespaceError, ValueError):
    pass


class InvalidModel(OnespaceError, ValueError):
    pass


class UnscheduledCategory(OnespaceError, ValueError):
    pass


class EmptyCategory(OnespaceError, ValueError):
    pass


class WrongCategoryCount(OnespaceError, ValueError):
    pass


class ProductSpaceTooLarge(OnespaceError):
    def __init__(self, atoms: int, cap: int):
        super().__init__(f"Product space has {atoms} atoms, above the cap of {cap}")
        self.atoms = atoms
        self.cap = cap


class Infeasible(OnespaceError):
    """No joint distribution reproduces the prescribed data."""

    def __init__(self, message: str, report=None, certificate=None):
        super().__init__(message)
        self.report = report
        self.certificate = certificate


class SimulationCancelled(OnespaceError):
    pass


class InternalConsistencyError(OnespaceError):
    pass
