import json
import random
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onespace.densities import FRUSTRATED_DENSITIES, CovarianceTriple, density_from_covariance
from onespace.errors import (
    InconsistentOverlap,
    Infeasible,
    InvalidComplex,
    MassSumNotOne,
    ParameterOutOfRange,
    ProductSpaceTooLarge,
)
from onespace.polytopes import CovarianceQuad, bell_six_check, chsh_check, tetrahedron_check
from onespace.simplex import TOTAL_LABEL, verify_farkas
from onespace.solver import (
    DEFAULT_ATOM_CAP,
    MarginalComplex,
    MarginalConstraint,
    ProductAtoms,
    Variable,
    chsh_reconstruct,
    chsh_system,
    compile_complex,
    complex_from_json,
    complex_to_json,
    covariance_complex,
    feasible_t_interval,
    frustrated_complex,
    joint_pair_marginal,
    pair_constraint,
    reconstruct_joint,
    result_to_json,
    solve_complex,
    verify_certificate,
    witness_reproduces,
)

HALF = Fraction(1, 2)
unit_fractions = st.fractions(min_value=-1, max_value=1, max_denominator=24)


def random_rational(rng: random.Random, denominator: int = 60) -> Fraction:
    return Fraction(rng.randint(-denominator, denominator), denominator)


def assert_witnesses_reproduce(triple: CovarianceTriple):
    lo, hi = feasible_t_interval(triple)
    for t in {Fraction(0), lo, hi}:
        joint = reconstruct_joint(triple, t)
        for pair, sigma in zip(("AB", "AC", "BC"), triple):
            assert joint_pair_marginal(joint, pair) == density_from_covariance(sigma), f"{pair} at {triple}, t={t}"


def assert_three_way_agreement(triple: CovarianceTriple):
    inside = tetrahedron_check(triple).satisfied
    assert bell_six_check(triple).satisfied == inside, f"Bell inequalities disagree at {triple}"
    result = solve_complex(covariance_complex(triple))
    assert result.feasible == inside, f"LP disagrees at {triple}"
    if inside:
        assert witness_reproduces(covariance_complex(triple), result.witness_map())
        assert_witnesses_reproduce(triple)
    else:
        assert verify_certificate(covariance_complex(triple), result.certificate_map())


# ---------------------------------------------------------------------------
# Closed form
# ---------------------------------------------------------------------------


def test_uniform_witness_at_origin():
    triple = CovarianceTriple(0, 0, 0)
    assert feasible_t_interval(triple) == (-1, 1)
    joint = reconstruct_joint(triple)
    assert set(joint.masses) == {Fraction(1, 8)}


def test_degenerate_interval_at_vertex():
    triple = CovarianceTriple(1, 1, 1)
    assert feasible_t_interval(triple) == (0, 0)
    joint = reconstruct_joint(triple)
    assert joint[(1, 1, 1)] == HALF
    assert joint[(-1, -1, -1)] == HALF
    with pytest.raises(ParameterOutOfRange):
        reconstruct_joint(triple, Fraction(1, 100))


def test_interval_is_minimum_face_slack():
    triple = CovarianceTriple(Fraction(1, 4), Fraction(1, 4), Fraction(1, 2))
    m = tetrahedron_check(triple).min_slack
    assert feasible_t_interval(triple) == (-m, m)


def test_reconstruct_rejects_frustrated(frustrated_triple):
    with pytest.raises(Infeasible) as excinfo:
        reconstruct_joint(frustrated_triple)
    assert excinfo.value.report.violations == [("T4", Fraction(-1, 2))]
    assert feasible_t_interval(frustrated_triple) is None


def test_joint_expectations_match_closed_form():
    triple = CovarianceTriple(Fraction(1, 3), Fraction(-1, 5), Fraction(1, 7))
    joint = reconstruct_joint(triple, Fraction(1, 10))
    assert joint.expectation(0, 1) == Fraction(1, 3)
    assert joint.expectation(0, 2) == Fraction(-1, 5)
    assert joint.expectation(1, 2) == Fraction(1, 7)
    assert joint.expectation(0, 1, 2) == Fraction(1, 10)
    assert joint.expectation(0) == 0


# ---------------------------------------------------------------------------
# Marginal complexes
# ---------------------------------------------------------------------------


def test_frustrated_complex_is_infeasible_with_certificate():
    """The shipped example is refuted by an exactly checkable certificate."""
    c = frustrated_complex()
    result = solve_complex(c)
    assert not result.feasible
    certificate = result.certificate_map()
    assert verify_certificate(c, certificate)
    assert set(certificate) <= set(compile_complex(c).labels)


def test_compile_complex_layout():
    system = compile_complex(frustrated_complex())
    assert system.n_cols == 8
    assert system.n_rows == 13
    assert system.labels[0] == TOTAL_LABEL
    assert system.labels[1] == "P(A=1,B=1)"
    assert system.labels[4] == "P(A=-1,B=-1)"
    assert system.labels[-1] == "P(B=-1,C=-1)"
    assert system.columns[0] == (1, 1, 1)
    assert system.rhs[1] == Fraction(3, 8)


def test_single_pair_complex_echoes_input():
    d = FRUSTRATED_DENSITIES[0]
    c = MarginalComplex(
        (Variable("A"), Variable("B")),
        (MarginalConstraint(("A", "B"), {(1, 1): d.mass_pp, (1, -1): d.mass_pm, (-1, 1): d.mass_mp, (-1, -1): d.mass_mm}),),
    )
    result = solve_complex(c)
    assert result.feasible
    assert result.witness_map() == {(1, 1): d.mass_pp, (1, -1): d.mass_pm, (-1, 1): d.mass_mp, (-1, -1): d.mass_mm}


def test_product_space_cap():
    variables = tuple(Variable(f"V{i}") for i in range(21))
    c = MarginalComplex(variables, (MarginalConstraint(("V0",), {(1,): HALF, (-1,): HALF}),))
    assert c.atom_count == 2**21
    with pytest.raises(ProductSpaceTooLarge) as excinfo:
        solve_complex(c)
    assert excinfo.value.atoms == 2**21


def test_inconsistent_overlap_names_the_shared_marginal():
    c = MarginalComplex(
        (Variable("A"), Variable("B"), Variable("C")),
        (
            MarginalConstraint(("A", "B"), {(1, 1): HALF, (-1, -1): HALF}),
            MarginalConstraint(("B", "C"), {(1, 1): Fraction(3, 4), (-1, -1): Fraction(1, 4)}),
        ),
    )
    with pytest.raises(InconsistentOverlap) as excinfo:
        solve_complex(c)
    assert excinfo.value.shared == ("B",)
    assert excinfo.value.first_table[(1,)] == HALF
    assert excinfo.value.second_table[(1,)] == Fraction(3, 4)


def test_complex_validation():
    with pytest.raises(InvalidComplex):
        MarginalComplex((Variable("A"), Variable("A")), ())
    with pytest.raises(InvalidComplex):
        MarginalComplex((Variable("A"),), (MarginalConstraint(("Z",), {(1,): 1}),))
    with pytest.raises(InvalidComplex):
        MarginalComplex((Variable("A"),), (MarginalConstraint(("A",), {(2,): 1}),))
    with pytest.raises(MassSumNotOne):
        MarginalComplex((Variable("A"),), (MarginalConstraint(("A",), {(1,): HALF}),))


def test_non_binary_alphabets():
    """A three-valued X whose pair tables with Y and Z are consistent."""
    c = MarginalComplex(
        (Variable("X", (0, 1, 2)), Variable("Y", ("u", "v")), Variable("Z")),
        (
            MarginalConstraint(("X", "Y"), {(0, "u"): Fraction(1, 3), (1, "v"): Fraction(1, 3), (2, "u"): Fraction(1, 3)}),
            MarginalConstraint(("X", "Z"), {(0, 1): Fraction(1, 3), (1, -1): Fraction(1, 3), (2, -1): Fraction(1, 3)}),
        ),
    )
    result = solve_complex(c)
    assert result.feasible
    assert witness_reproduces(c, result.witness_map())
    assert len(result.columns) == 12


def test_complex_json_fixture(data_dir):
    document = json.loads((data_dir / "complex_frustrated.json").read_text())
    c = complex_from_json(document)
    assert c == frustrated_complex()
    assert complex_from_json(complex_to_json(c)) == c


def test_complex_json_rejects_bad_cells():
    document = {
        "variables": [{"name": "A"}],
        "constraints": [{"over": ["A"], "table": {"1": "1/2", "0": "1/2"}}],
    }
    with pytest.raises(InvalidComplex):
        complex_from_json(document)
    document["constraints"][0]["over"] = ["B"]
    with pytest.raises(InvalidComplex):
        complex_from_json(document)


def test_result_json():
    infeasible = result_to_json(solve_complex(frustrated_complex()))
    assert infeasible["feasible"] is False
    assert infeasible["atoms"] == 8
    assert "certificate" in infeasible
    feasible = result_to_json(solve_complex(covariance_complex(CovarianceTriple(0, 0, 0))))
    assert feasible["feasible"] is True
    assert sum(Fraction(v) for v in feasible["witness"].values()) == 1


def chain_complex(length: int, closed: bool = False) -> MarginalComplex:
    """V0 - V1 - ... with neighbours equal; ``closed`` adds V0 != V(last)."""
    equal = {(1, 1): HALF, (-1, -1): HALF}
    names = [f"V{i}" for i in range(length)]
    constraints = [MarginalConstraint((names[i], names[i + 1]), equal) for i in range(length - 1)]
    if closed:
        constraints.append(MarginalConstraint((names[0], names[-1]), {(1, -1): HALF, (-1, 1): HALF}))
    return MarginalComplex(tuple(Variable(name) for name in names), tuple(constraints))


def test_compiled_columns_are_sparse():
    system = compile_complex(frustrated_complex())
    assert system.support.shape == (8, 4)
    assert system.column(0) == [(0, 1), (1, 1), (5, 1), (9, 1)]
    assert system.column(5) == [(0, 1), (3, 1), (8, 1), (10, 1)]
    assert system.column(7) == [(0, 1), (4, 1), (8, 1), (12, 1)]


def test_product_atoms_decode_lexicographically():
    atoms = ProductAtoms(((1, -1), (0, 1, 2)))
    assert len(atoms) == 6
    assert list(atoms) == list(product((1, -1), (0, 1, 2)))
    assert [atoms[j] for j in range(6)] == list(atoms)
    assert atoms[-1] == (-1, 2)
    assert atoms[1:3] == [(1, 1), (1, 2)]
    with pytest.raises(IndexError):
        atoms[6]


def test_chain_complex():
    result = solve_complex(chain_complex(12))
    assert result.feasible
    assert result.witness_map() == {(1,) * 12: HALF, (-1,) * 12: HALF}

    closed = chain_complex(12, closed=True)
    result = solve_complex(closed)
    assert not result.feasible
    assert verify_certificate(closed, result.certificate_map())


@pytest.mark.slow
def test_chain_complex_at_the_atom_cap():
    length = DEFAULT_ATOM_CAP.bit_length() - 1
    assert 2**length <= DEFAULT_ATOM_CAP < 2 ** (length + 1)

    c = chain_complex(length)
    result = solve_complex(c)
    assert result.feasible
    assert witness_reproduces(c, result.witness_map())

    closed = chain_complex(length, closed=True)
    result = solve_complex(closed)
    assert not result.feasible
    assert verify_certificate(closed, result.certificate_map())


def test_verify_certificate_examples():
    c = frustrated_complex()
    zero = dict.fromkeys(compile_complex(c).labels, 0)
    assert not verify_certificate(c, zero)

    certificate = solve_complex(c).certificate_map()
    origin = covariance_complex(CovarianceTriple(0, 0, 0))
    assert not verify_certificate(origin, certificate)
    rng = random.Random(3)
    labels = compile_complex(origin).labels
    for _ in range(200):
        assert not verify_certificate(origin, {label: rng.randint(-5, 5) for label in labels})


def test_two_legs_are_always_feasible():
    """AB and AC alone never conflict."""
    leg = density_from_covariance(Fraction(3, 4))
    c = MarginalComplex(
        tuple(Variable(name) for name in "ABC"),
        (pair_constraint("A", "B", leg), pair_constraint("A", "C", leg)),
    )
    result = solve_complex(c)
    assert result.feasible
    assert witness_reproduces(c, result.witness_map())


# ---------------------------------------------------------------------------
# Three-way agreement: closed form, six inequalities and LP
# ---------------------------------------------------------------------------


def test_agreement_on_coarse_grid():
    grid = [Fraction(k, 2) for k in range(-2, 3)]
    for s in product(grid, repeat=3):
        assert_three_way_agreement(CovarianceTriple(*s))


@pytest.mark.slow
def test_agreement_on_full_grid():
    grid = [Fraction(k, 4) for k in range(-4, 5)]
    for s in product(grid, repeat=3):
        assert_three_way_agreement(CovarianceTriple(*s))


@pytest.mark.slow
def test_agreement_on_random_triples():
    rng = random.Random(1)
    for _ in range(10**4):
        assert_three_way_agreement(CovarianceTriple(*(random_rational(rng) for _ in range(3))))


@settings(max_examples=60, deadline=None)
@given(unit_fractions, unit_fractions, unit_fractions)
def test_agreement_property(s1, s2, s3):
    assert_three_way_agreement(CovarianceTriple(s1, s2, s3))


# ---------------------------------------------------------------------------
# CHSH
# ---------------------------------------------------------------------------


def assert_chsh_agreement(quad: CovarianceQuad):
    inside = chsh_check(quad).satisfied
    try:
        joint = chsh_reconstruct(quad)
    except Infeasible as exc:
        assert not inside, f"LP refuses {quad} inside the polytope"
        assert verify_farkas(chsh_system(quad), exc.certificate)
    else:
        assert inside, f"LP realizes {quad} outside the polytope"
        # (A1, A2, B1, B2): cross covariances sit at index pairs (0,2), (0,3), (1,2), (1,3)
        assert tuple(joint.expectation(i, k) for i, k in ((0, 2), (0, 3), (1, 2), (1, 3))) == tuple(quad)
        for index in range(4):
            assert joint.expectation(index) == 0


def test_chsh_examples():
    with pytest.raises(Infeasible) as excinfo:
        chsh_reconstruct(CovarianceQuad(1, 1, 1, -1))
    assert excinfo.value.report.slack("C1") == -2
    assert verify_farkas(chsh_system(CovarianceQuad(1, 1, 1, -1)), excinfo.value.certificate)

    assert_chsh_agreement(CovarianceQuad(0, 0, 0, 0))
    boundary = CovarianceQuad(HALF, HALF, HALF, -HALF)
    assert chsh_check(boundary).on_boundary
    assert_chsh_agreement(boundary)


def test_chsh_system_layout():
    system = chsh_system(CovarianceQuad(0, 0, 0, 0))
    assert system.n_cols == 16
    assert system.labels == (
        "P(*)", "P(A1=1)", "P(A2=1)", "P(B1=1)", "P(B2=1)",
        "E(A1*B1)", "E(A1*B2)", "E(A2*B1)", "E(A2*B2)",
    )


def test_chsh_agreement_on_coarse_grid():
    grid = [-1, 0, 1]
    for s in product(grid, repeat=4):
        assert_chsh_agreement(CovarianceQuad(*s))


@pytest.mark.slow
def test_chsh_agreement_on_full_grid():
    grid = [Fraction(k, 2) for k in range(-2, 3)]
    for s in product(grid, repeat=4):
        assert_chsh_agreement(CovarianceQuad(*s))


@pytest.mark.slow
def test_chsh_agreement_on_random_quads():
    rng = random.Random(2)
    for _ in range(10**4):
        assert_chsh_agreement(CovarianceQuad(*(random_rational(rng, 24) for _ in range(4))))
