"""Monte Carlo EPR experiments under pluggable hidden-variable models, and the
bridge from their tallies to the exact polytope and solver checks.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from onespace.densities import CovarianceTriple, covariance, format_rational
from onespace.errors import (
    EmptyCategory,
    Infeasible,
    InternalConsistencyError,
    InvalidModel,
    UnscheduledCategory,
    WrongCategoryCount,
)
from onespace.models import (
    AngleSourceModel,
    EmpiricalRecord,
    ExperimentPlan,
    FiniteSourceModel,
    TimeSlotModel,
)
from onespace.polytopes import (
    CovarianceQuad,
    InequalityReport,
    bell_six_check,
    chsh_check,
    involved_covariances,
    tetrahedron_check,
)
from onespace.solver import (
    JointDensity,
    chsh_reconstruct,
    feasible_t_interval,
    joint_to_json,
    reconstruct_joint,
)
from onespace.worker import DEFAULT_CHUNK_SIZE, ProgressCallback, SimulationWorker

logger = logging.getLogger(__name__)

DEFAULT_MAX_DENOMINATOR = 10**4
DEFAULT_SIGMA_BAND = 5


def model_hash(model) -> str:
    canonical = json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def check_model_plan(model, plan: ExperimentPlan) -> None:
    """Every plan category must be measurable under the model."""
    if isinstance(model, (FiniteSourceModel, AngleSourceModel)):
        for category in plan.categories:
            if category.station1 not in model.station1:
                raise InvalidModel(f"Station 1 has no response for setting {category.station1!r}")
            if category.station2 not in model.station2:
                raise InvalidModel(f"Station 2 has no response for setting {category.station2!r}")
    elif isinstance(model, TimeSlotModel):
        for category in plan.categories:
            if model.slot(category.label) is None:
                raise UnscheduledCategory(f"Category {category.label} has no time slot")
    else:
        raise InvalidModel(f"Unknown model type {type(model).__name__}")


def is_setting_consistent(model, plan: ExperimentPlan) -> bool:
    """Whether a source-only model turns each setting into a single random variable.

    A setting measured at both stations must get the same response there;
    only then do A, B, C live on one probability space.
    """
    if isinstance(model, FiniteSourceModel):
        same = lambda setting: model.station1[setting] == model.station2[setting]
    elif isinstance(model, AngleSourceModel):
        same = lambda setting: model.station2_sign == 1 and model.station1[setting] == model.station2[setting]
    else:
        return False
    left = {category.station1 for category in plan.categories}
    right = {category.station2 for category in plan.categories}
    return all(same(setting) for setting in left & right)


def run_experiment(
    model,
    plan: ExperimentPlan,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    progress: Optional[ProgressCallback] = None,
) -> EmpiricalRecord:
    check_model_plan(model, plan)
    if not isinstance(model, TimeSlotModel) and not is_setting_consistent(model, plan):
        logger.warning("Stations respond differently to a shared setting; Bell inequalities are not guaranteed")
    logger.info(
        f"Running {model.kind} model: {len(plan.categories)} categories x {plan.trials} trials, seed {plan.seed}"
    )
    worker = SimulationWorker(workers=workers, chunk_size=chunk_size, progress=progress)
    tallies = worker.run(model, plan)
    logger.info("Simulation complete")
    return EmpiricalRecord(
        model_kind=model.kind,
        model_hash=model_hash(model),
        seed=plan.seed,
        trials=plan.trials,
        categories=tallies,
    )


def record_to_json(record: EmpiricalRecord) -> str:
    return json.dumps(record.model_dump(mode="json"), sort_keys=True, indent=2)


def record_from_json(text: str) -> EmpiricalRecord:
    return EmpiricalRecord.model_validate_json(text)


@dataclass(frozen=True)
class CovarianceEstimate:
    category: str
    exact: Fraction
    estimate: float
    standard_error: float
    trials: int


def empirical_covariances(record: EmpiricalRecord) -> list[CovarianceEstimate]:
    estimates = []
    for tally in record.categories:
        if tally.total == 0:
            raise EmptyCategory(f"Category {tally.category} has no trials")
        n_pp, n_pm, n_mp, n_mm = tally.counts
        exact = Fraction(n_pp - n_pm - n_mp + n_mm, tally.total)
        estimate = float(exact)
        standard_error = math.sqrt(max(0.0, 1.0 - estimate * estimate) / tally.total)
        estimates.append(CovarianceEstimate(tally.category, exact, estimate, standard_error, tally.total))
    return estimates


def empirical_marginals(record: EmpiricalRecord) -> dict[str, tuple[float, float]]:
    """P(station 1 = +1) and P(station 2 = +1) per category."""
    marginals = {}
    for tally in record.categories:
        if tally.total == 0:
            raise EmptyCategory(f"Category {tally.category} has no trials")
        n_pp, n_pm, n_mp, _ = tally.counts
        marginals[tally.category] = ((n_pp + n_pm) / tally.total, (n_pp + n_mp) / tally.total)
    return marginals


def expected_covariances(model, plan: ExperimentPlan) -> list[Union[Fraction, float]]:
    """Model covariances per plan category, exact where the model allows it."""
    check_model_plan(model, plan)
    expected = []
    for category in plan.categories:
        if isinstance(model, FiniteSourceModel):
            a = model.station1[category.station1]
            b = model.station2[category.station2]
            expected.append(sum((w * x * y for w, x, y in zip(model.weights, a, b)), Fraction(0)))
        elif isinstance(model, AngleSourceModel):
            # E[sign cos(λ-α) sign cos(λ-β)] = 1 - 2Δ/π with Δ the angle between α and β in [0, π].
            delta = abs(model.station1[category.station1] - model.station2[category.station2]) % (2 * math.pi)
            delta = min(delta, 2 * math.pi - delta)
            expected.append(model.station2_sign * (1 - 2 * delta / math.pi))
        else:
            expected.append(covariance(model.density(category.label)))
    return expected


@dataclass(frozen=True)
class AnalysisReport:
    kind: str
    estimates: list[CovarianceEstimate]
    rounded: tuple[Fraction, ...]
    reports: dict[str, InequalityReport]
    combined_standard_error: float
    sigma_band: float
    point_feasible: bool
    significant: list[tuple[str, Fraction, float]] = field(default_factory=list)
    witness: Optional[JointDensity] = None
    t_interval: Optional[tuple[Fraction, Fraction]] = None

    @property
    def verdict(self) -> str:
        return "infeasible" if self.significant else "feasible"

    @property
    def note(self) -> str:
        if self.significant:
            return f"violation exceeds {self.sigma_band} combined standard errors"
        if not self.point_feasible:
            return f"rounded point lies outside, but within {self.sigma_band} combined standard errors"
        return "rounded point lies inside the polytope"

    def to_json(self) -> dict:
        document = {
            "kind": self.kind,
            "verdict": self.verdict,
            "point_feasible": self.point_feasible,
            "note": self.note,
            "combined_standard_error": self.combined_standard_error,
            "estimates": [
                {
                    "category": e.category,
                    "estimate": e.estimate,
                    "standard_error": e.standard_error,
                    "rounded": format_rational(r),
                    "trials": e.trials,
                }
                for e, r in zip(self.estimates, self.rounded)
            ],
            "checks": {name: report.to_json() for name, report in self.reports.items()},
            "significant_violations": [
                {"inequality": name, "slack": format_rational(slack), "z": z} for name, slack, z in self.significant
            ],
        }
        if self.witness is not None:
            document["witness"] = joint_to_json(self.witness)
        if self.t_interval is not None:
            document["t_interval"] = [format_rational(v) for v in self.t_interval]
        return document


def inequality_standard_error(estimates: Sequence[CovarianceEstimate], name: str) -> float:
    """sqrt(Σ se²) over the covariances the named inequality involves."""
    indices = involved_covariances(name, len(estimates))
    return math.sqrt(sum(estimates[i].standard_error**2 for i in indices))


def analyze(
    record: EmpiricalRecord,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
    sigma_band: float = DEFAULT_SIGMA_BAND,
) -> AnalysisReport:
    """Run the exact checks on rounded empirical covariances.

    Three categories are read as (AB, AC, BC), four as (A1B1, A1B2, A2B1, A2B2).
    """
    count = len(record.categories)
    if count not in (3, 4):
        raise WrongCategoryCount(f"Expected 3 (Bell) or 4 (CHSH) categories, got {count}")
    estimates = empirical_covariances(record)
    rounded = tuple(e.exact.limit_denominator(max_denominator) for e in estimates)
    combined = math.sqrt(sum(e.standard_error**2 for e in estimates))

    witness = None
    t_interval = None
    if count == 3:
        triple = CovarianceTriple(*rounded)
        reports = {"tetrahedron": tetrahedron_check(triple), "bell": bell_six_check(triple)}
        if reports["tetrahedron"].satisfied != reports["bell"].satisfied:
            raise InternalConsistencyError(f"Tetrahedron and Bell checks disagree at {triple}")
        feasible = reports["tetrahedron"].satisfied
        if feasible:
            witness = reconstruct_joint(triple)
            t_interval = feasible_t_interval(triple)
    else:
        quad = CovarianceQuad(*rounded)
        reports = {"chsh": chsh_check(quad)}
        feasible = reports["chsh"].satisfied
        if feasible:
            try:
                witness = chsh_reconstruct(quad)
            except Infeasible as exc:
                raise InternalConsistencyError(f"CHSH check and LP disagree at {quad}") from exc

    significant = []
    for report in reports.values():
        for name, slack in report.violations:
            error = inequality_standard_error(estimates, name)
            z = float(slack) / error if error > 0 else -math.inf
            if z < -sigma_band:
                significant.append((name, slack, z))

    analysis = AnalysisReport(
        kind="bell" if count == 3 else "chsh",
        estimates=estimates,
        rounded=rounded,
        reports=reports,
        combined_standard_error=combined,
        sigma_band=sigma_band,
        point_feasible=feasible,
        significant=significant,
        witness=witness,
        t_interval=t_interval,
    )
    logger.info(f"Analysis verdict: {analysis.verdict} ({analysis.note})")
    return analysis
