"""Reconstruct joint distributions from prescribed marginals.

Three layers:

* the closed form p(x,y,z) = (1 + σ₁xy + σ₂xz + σ₃yz + t·xyz)/8 for three ±1
  variables with uniform marginals, together with its exact t-interval;
* the 16-unknown CHSH system, decided by the exact LP;
* general marginal complexes (named finite-alphabet variables plus marginal
  tables on subsets), compiled to ``LinearSystem`` and decided by the LP.

Atoms are always enumerated lexicographically over the declared alphabets,
so witnesses and certificates are reproducible.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from math import prod
from typing import Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from onespace.densities import (
    FRUSTRATED_DENSITIES,
    HALF,
    VERTICES,
    CovarianceTriple,
    PairDensity,
    as_rational,
    density_from_covariance,
    format_rational,
)
from onespace.errors import (
    InconsistentOverlap,
    Infeasible,
    InvalidComplex,
    MassSumNotOne,
    NegativeMass,
    ParameterOutOfRange,
    ProductSpaceTooLarge,
)
from onespace.polytopes import CovarianceQuad, chsh_check, tetrahedron_check
from onespace.schemas import ComplexDocument
from onespace.simplex import (
    TOTAL_LABEL,
    FeasibilityResult,
    LinearSystem,
    solve_system,
    verify_farkas,
)

logger = logging.getLogger(__name__)

DEFAULT_ATOM_CAP = 10**6
BINARY = (1, -1)
PAIR_INDICES = {"AB": (0, 1), "AC": (0, 2), "BC": (1, 2)}
CHSH_NAMES = ("A1", "A2", "B1", "B2")
CHSH_PAIRS = (("A1", "B1"), ("A1", "B2"), ("A2", "B1"), ("A2", "B2"))


# ---------------------------------------------------------------------------
# Joint densities over {±1}^k
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JointDensity:
    masses: tuple[Fraction, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        masses = tuple(as_rational(m) for m in self.masses)
        if len(masses) != 2 ** len(self.names):
            raise ValueError(f"{len(self.names)} binary variables need {2 ** len(self.names)} masses")
        for index, value in enumerate(masses):
            if value < 0:
                raise NegativeMass(index, value)
        total = sum(masses, Fraction(0))
        if total != 1:
            raise MassSumNotOne(total)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "names", tuple(self.names))

    def atoms(self) -> list[tuple[int, ...]]:
        return list(product(BINARY, repeat=len(self.names)))

    def __getitem__(self, atom: tuple[int, ...]) -> Fraction:
        return self.masses[self.atoms().index(tuple(atom))]

    def mass_map(self) -> dict[tuple[int, ...], Fraction]:
        return dict(zip(self.atoms(), self.masses))

    def pair_marginal(self, first: int, second: int) -> PairDensity:
        totals = dict.fromkeys(VERTICES, Fraction(0))
        for atom, mass in zip(self.atoms(), self.masses):
            totals[(atom[first], atom[second])] += mass
        return PairDensity(*(totals[v] for v in VERTICES))

    def expectation(self, *indices: int) -> Fraction:
        """E of the product of the chosen coordinates."""
        return sum(
            (mass * prod(atom[i] for i in indices) for atom, mass in zip(self.atoms(), self.masses)),
            Fraction(0),
        )


@dataclass(frozen=True)
class JointDensity3(JointDensity):
    names: tuple[str, ...] = ("A", "B", "C")


@dataclass(frozen=True)
class JointDensity4(JointDensity):
    names: tuple[str, ...] = CHSH_NAMES


def feasible_t_interval(s: CovarianceTriple) -> Optional[tuple[Fraction, Fraction]]:
    """Exact [t_lo, t_hi] keeping all eight closed-form entries >= 0, or None."""
    s1, s2, s3 = s
    lo, hi = None, None
    for x, y, z in product(BINARY, repeat=3):
        base = 1 + s1 * x * y + s2 * x * z + s3 * y * z
        # base + t * xyz >= 0
        if x * y * z == 1:
            lo = -base if lo is None else max(lo, -base)
        else:
            hi = base if hi is None else min(hi, base)
    if lo > hi:
        return None
    return lo, hi


def reconstruct_joint(s: CovarianceTriple, t=0) -> JointDensity3:
    report = tetrahedron_check(s)
    if not report.satisfied:
        names = ", ".join(name for name, _ in report.violations)
        raise Infeasible(f"{s} lies outside the covariance tetrahedron ({names} violated)", report=report)
    t = as_rational(t)
    lo, hi = feasible_t_interval(s)
    if not lo <= t <= hi:
        raise ParameterOutOfRange(f"t = {t} is outside the feasible interval [{lo}, {hi}] for {s}")
    s1, s2, s3 = s
    masses = tuple(
        (1 + s1 * x * y + s2 * x * z + s3 * y * z + t * x * y * z) / 8
        for x, y, z in product(BINARY, repeat=3)
    )
    return JointDensity3(masses)


def joint_pair_marginal(j: JointDensity3, pair) -> PairDensity:
    """Sum out the third coordinate. ``pair`` is "AB", "AC", "BC" or an index pair."""
    first, second = PAIR_INDICES[pair] if isinstance(pair, str) else pair
    return j.pair_marginal(first, second)


# ---------------------------------------------------------------------------
# Marginal complexes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str
    alphabet: tuple = BINARY

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if not self.alphabet:
            raise InvalidComplex(f"Variable {self.name!r} has an empty alphabet")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise InvalidComplex(f"Variable {self.name!r} repeats outcomes in its alphabet")


@dataclass(frozen=True)
class MarginalConstraint:
    over: tuple[str, ...]
    table: Mapping[tuple, Fraction]

    def __post_init__(self):
        object.__setattr__(self, "over", tuple(self.over))
        object.__setattr__(
            self, "table", {tuple(cell): as_rational(mass) for cell, mass in dict(self.table).items()}
        )


@dataclass(frozen=True)
class MarginalComplex:
    """Named variables with prescribed marginal tables on subsets of them."""

    variables: tuple[Variable, ...]
    constraints: tuple[MarginalConstraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise InvalidComplex(f"Duplicate variable names in {names}")
        declared = self.alphabets
        seen = set()
        for constraint in self.constraints:
            if not constraint.over:
                raise InvalidComplex("A constraint must cover at least one variable")
            unknown = [name for name in constraint.over if name not in declared]
            if unknown:
                raise InvalidComplex(f"Constraint references undeclared variables {unknown}")
            if len(set(constraint.over)) != len(constraint.over):
                raise InvalidComplex(f"Constraint over {list(constraint.over)} repeats a variable")
            key = frozenset(constraint.over)
            if key in seen:
                raise InvalidComplex(f"Duplicate constraint over {sorted(key)}")
            seen.add(key)
            cells = set(self.cells(constraint.over))
            for cell, mass in constraint.table.items():
                if cell not in cells:
                    raise InvalidComplex(f"Cell {cell} is not in the alphabet of {list(constraint.over)}")
                if mass < 0:
                    raise NegativeMass(self.cells(constraint.over).index(cell), mass)
            total = sum(constraint.table.values(), Fraction(0))
            if total != 1:
                raise MassSumNotOne(total)

    @property
    def alphabets(self) -> dict[str, tuple]:
        return {v.name: v.alphabet for v in self.variables}

    @property
    def atom_count(self) -> int:
        return prod(len(v.alphabet) for v in self.variables)

    def cells(self, over: Sequence[str]) -> list[tuple]:
        alphabets = self.alphabets
        return list(product(*(alphabets[name] for name in over)))


@dataclass(frozen=True)
class ProductAtoms(Sequence):
    """The atoms of a product of alphabets in lexicographic order, decoded on demand."""

    alphabets: tuple[tuple, ...]

    def __len__(self) -> int:
        return prod(len(alphabet) for alphabet in self.alphabets)

    def __getitem__(self, index: Union[int, slice]):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        size = len(self)
        if index < 0:
            index += size
        if not 0 <= index < size:
            raise IndexError(f"Atom {index} out of range for {size} atoms")
        atom = []
        for alphabet in reversed(self.alphabets):
            index, digit = divmod(index, len(alphabet))
            atom.append(alphabet[digit])
        return tuple(reversed(atom))

    def __iter__(self) -> Iterator[tuple]:
        return product(*self.alphabets)


def marginalize(c: MarginalComplex, constraint: MarginalConstraint, onto: Sequence[str]) -> dict[tuple, Fraction]:
    positions = [constraint.over.index(name) for name in onto]
    totals = dict.fromkeys(c.cells(onto), Fraction(0))
    for cell, mass in constraint.table.items():
        totals[tuple(cell[p] for p in positions)] += mass
    return totals


def check_overlaps(c: MarginalComplex) -> None:
    """Raise InconsistentOverlap when two constraints disagree on shared variables."""
    for first, second in combinations(c.constraints, 2):
        shared = [name for name in first.over if name in second.over]
        if not shared:
            continue
        left = marginalize(c, first, shared)
        right = marginalize(c, second, shared)
        if left != right:
            raise InconsistentOverlap(shared, first.over, second.over, left, right)


def cell_label(names: Sequence[str], cell: Sequence) -> str:
    return "P(" + ",".join(f"{name}={value}" for name, value in zip(names, cell)) + ")"


def compile_complex(c: MarginalComplex, atom_cap: int = DEFAULT_ATOM_CAP) -> LinearSystem:
    """One row for total mass, then one row per constraint cell.

    Every entry is 0 or 1, so each atom only records the rows it lands in:
    row 0 and, per constraint, the row of the cell it projects to.
    """
    atoms = c.atom_count
    if atoms > atom_cap:
        raise ProductSpaceTooLarge(atoms, atom_cap)
    sizes = {v.name: len(v.alphabet) for v in c.variables}
    strides = {}
    stride = 1
    for v in reversed(c.variables):
        strides[v.name] = stride
        stride *= sizes[v.name]

    index = np.arange(atoms, dtype=np.int64)
    support = np.zeros((atoms, len(c.constraints) + 1), dtype=np.int32)
    rhs = [Fraction(1)]
    labels = [TOTAL_LABEL]
    for k, constraint in enumerate(c.constraints, start=1):
        cell_index = np.zeros(atoms, dtype=np.int64)
        for name in constraint.over:
            cell_index = cell_index * sizes[name] + (index // strides[name]) % sizes[name]
        support[:, k] = len(rhs) + cell_index
        for cell in c.cells(constraint.over):
            rhs.append(constraint.table.get(cell, Fraction(0)))
            labels.append(cell_label(constraint.over, cell))
    return LinearSystem(support, None, tuple(rhs), tuple(labels), ProductAtoms(tuple(v.alphabet for v in c.variables)))


def solve_complex(c: MarginalComplex, atom_cap: int = DEFAULT_ATOM_CAP) -> FeasibilityResult:
    check_overlaps(c)
    system = compile_complex(c, atom_cap)
    logger.info(f"Solving complex: {len(c.variables)} variables, {system.n_cols} atoms, {system.n_rows} equations")
    result = solve_system(system)
    verdict = "feasible" if result.feasible else "infeasible"
    logger.info(f"Complex is {verdict} after {result.pivots} pivots")
    return result


def verify_certificate(c: MarginalComplex, certificate, atom_cap: int = DEFAULT_ATOM_CAP) -> bool:
    return verify_farkas(compile_complex(c, atom_cap), certificate)


def witness_reproduces(c: MarginalComplex, witness: Mapping[tuple, Fraction]) -> bool:
    """Re-derive every prescribed marginal from a witness and compare exactly."""
    if any(mass < 0 for mass in witness.values()) or sum(witness.values(), Fraction(0)) != 1:
        return False
    position = {v.name: index for index, v in enumerate(c.variables)}
    for constraint in c.constraints:
        indices = [position[name] for name in constraint.over]
        totals = dict.fromkeys(c.cells(constraint.over), Fraction(0))
        for atom, mass in witness.items():
            totals[tuple(atom[i] for i in indices)] += mass
        expected = {cell: constraint.table.get(cell, Fraction(0)) for cell in totals}
        if totals != expected:
            return False
    return True


def pair_constraint(first: str, second: str, d: PairDensity) -> MarginalConstraint:
    return MarginalConstraint((first, second), {vertex: d[vertex] for vertex in VERTICES})


def covariance_complex(s: CovarianceTriple) -> MarginalComplex:
    """The uniform-marginal pair densities with covariances s, as a complex over A, B, C."""
    s1, s2, s3 = s
    return MarginalComplex(
        tuple(Variable(name) for name in "ABC"),
        (
            pair_constraint("A", "B", density_from_covariance(s1)),
            pair_constraint("A", "C", density_from_covariance(s2)),
            pair_constraint("B", "C", density_from_covariance(s3)),
        ),
    )


def frustrated_complex() -> MarginalComplex:
    f1, f2, f3 = FRUSTRATED_DENSITIES
    return MarginalComplex(
        tuple(Variable(name) for name in "ABC"),
        (pair_constraint("A", "B", f1), pair_constraint("A", "C", f2), pair_constraint("B", "C", f3)),
    )


# ---------------------------------------------------------------------------
# CHSH: four binary variables, two per side
# ---------------------------------------------------------------------------


def chsh_system(s: CovarianceQuad) -> LinearSystem:
    """Total mass, P(X=+1) = 1/2 for each variable, and the four cross covariances."""
    columns = tuple(product(BINARY, repeat=4))
    rows = [tuple([1] * len(columns))]
    rhs = [Fraction(1)]
    labels = [TOTAL_LABEL]
    for index, name in enumerate(CHSH_NAMES):
        rows.append(tuple(1 if atom[index] == 1 else 0 for atom in columns))
        rhs.append(HALF)
        labels.append(f"P({name}=1)")
    for (left, right), value in zip(CHSH_PAIRS, s):
        i, k = CHSH_NAMES.index(left), CHSH_NAMES.index(right)
        rows.append(tuple(atom[i] * atom[k] for atom in columns))
        rhs.append(value)
        labels.append(f"E({left}*{right})")
    return LinearSystem.from_rows(rows, rhs, labels, columns)


def chsh_reconstruct(s: CovarianceQuad) -> JointDensity4:
    """Joint density of (A1, A2, B1, B2) with the four cross covariances, or Infeasible."""
    result = solve_system(chsh_system(s))
    if result.feasible:
        return JointDensity4(result.witness)
    raise Infeasible(
        f"No joint density over {', '.join(CHSH_NAMES)} has covariances {s}",
        report=chsh_check(s),
        certificate=result.certificate_map(),
    )


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _cell_key(cell: Sequence) -> str:
    return ",".join(str(value) for value in cell)


def _parse_cell(key: str, alphabets: Sequence[tuple]) -> tuple:
    tokens = [token.strip() for token in str(key).split(",")]
    if len(tokens) != len(alphabets):
        raise InvalidComplex(f"Cell {key!r} has {len(tokens)} entries, expected {len(alphabets)}")
    cell = []
    for token, alphabet in zip(tokens, alphabets):
        matches = [value for value in alphabet if str(value) == token]
        if not matches:
            raise InvalidComplex(f"Outcome {token!r} of cell {key!r} is not in {list(alphabet)}")
        cell.append(matches[0])
    return tuple(cell)


def complex_from_json(document: Mapping) -> MarginalComplex:
    parsed = ComplexDocument.model_validate(document)
    variables = tuple(Variable(v.name, tuple(v.alphabet)) for v in parsed.variables)
    alphabets = {v.name: v.alphabet for v in variables}
    constraints = []
    for item in parsed.constraints:
        unknown = [name for name in item.over if name not in alphabets]
        if unknown:
            raise InvalidComplex(f"Constraint references undeclared variables {unknown}")
        cell_alphabets = [alphabets[name] for name in item.over]
        table = {_parse_cell(key, cell_alphabets): mass for key, mass in item.table.items()}
        constraints.append(MarginalConstraint(tuple(item.over), table))
    return MarginalComplex(variables, tuple(constraints))


def complex_to_json(c: MarginalComplex) -> dict:
    return {
        "variables": [{"name": v.name, "alphabet": list(v.alphabet)} for v in c.variables],
        "constraints": [
            {
                "over": list(constraint.over),
                "table": {_cell_key(cell): format_rational(mass) for cell, mass in constraint.table.items()},
            }
            for constraint in c.constraints
        ],
    }


def result_to_json(result: FeasibilityResult) -> dict:
    document = {"feasible": result.feasible, "atoms": len(result.columns)}
    if result.feasible:
        document["witness"] = {
            _cell_key(atom): format_rational(mass) for atom, mass in result.witness_map().items()
        }
    else:
        document["certificate"] = {
            label: format_rational(value) for label, value in result.certificate_map().items()
        }
    return document


def joint_to_json(j: JointDensity) -> dict:
    return {
        "variables": list(j.names),
        "masses": {_cell_key(atom): format_rational(mass) for atom, mass in j.mass_map().items()},
    }
