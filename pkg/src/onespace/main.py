import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from pydantic import ValidationError

from onespace.database import get_db_connection, init_db, insert_record, list_records
from onespace.densities import CovarianceTriple, density_covariances, format_rational, parse_rational
from onespace.errors import (
    Infeasible,
    InternalConsistencyError,
    ProductSpaceTooLarge,
)
from onespace.models import ExperimentPlan, load_model
from onespace.polytopes import CovarianceQuad, InequalityReport, bell_six_check, chsh_check, tetrahedron_check
from onespace.schemas import CovarianceDocument, CovarianceQuadDocument, DensityTripleDocument
from onespace.simulator import (
    DEFAULT_MAX_DENOMINATOR,
    analyze,
    record_to_json,
    run_experiment,
)
from onespace.solver import (
    DEFAULT_ATOM_CAP,
    chsh_reconstruct,
    complex_from_json,
    covariance_complex,
    feasible_t_interval,
    joint_to_json,
    reconstruct_joint,
    result_to_json,
    solve_complex,
    witness_reproduces,
)

logger = logging.getLogger("onespace")

# Default archive path
DEFAULT_DB_PATH = Path("onespace_runs.db")

EXIT_FEASIBLE = 0
EXIT_INFEASIBLE = 1
EXIT_INVALID_INPUT = 2
EXIT_LIMIT = 3

FIXTURE_PREFIX = "fixture:"


def read_json(source: str):
    """Load a JSON document from a path, or from shipped data as ``fixture:<name>``."""
    if source.startswith(FIXTURE_PREFIX):
        name = source[len(FIXTURE_PREFIX):]
        text = (resources.files("onespace") / "data" / name).read_text(encoding="utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    return json.loads(text)


def parse_numbers(text: str, count: int) -> list:
    values = [parse_rational(token) for token in text.split(",")]
    if len(values) != count:
        raise ValueError(f"Expected {count} comma-separated values, got {len(values)}")
    return values


def _is_document(source: str) -> bool:
    return source.startswith(FIXTURE_PREFIX) or source.endswith(".json") or Path(source).is_file()


def load_triple(source: str) -> CovarianceTriple:
    """Covariance triple from "s1,s2,s3", a {"sigma": [...]} file or a density-triple file."""
    if not _is_document(source):
        return CovarianceTriple(*parse_numbers(source, 3))
    document = read_json(source)
    if isinstance(document, dict) and "sigma" in document:
        return CovarianceDocument.model_validate(document).to_triple()
    return density_covariances(*DensityTripleDocument.model_validate(document).to_densities())


def load_quad(source: str) -> CovarianceQuad:
    if not _is_document(source):
        return CovarianceQuad(*parse_numbers(source, 4))
    return CovarianceQuadDocument.model_validate(read_json(source)).to_quad()


def emit(args, document: dict, lines: list[str]):
    if args.json:
        print(json.dumps(document, indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


def report_lines(title: str, report: InequalityReport) -> list[str]:
    lines = [f"{title}: {'satisfied' if report.satisfied else 'VIOLATED'}"]
    for name, slack in report.slacks:
        marker = "  <-- violated" if slack < 0 else ""
        lines.append(f"  {name:<8} slack {format_rational(slack):>10}{marker}")
    return lines


def cmd_check(args) -> int:
    triple = load_triple(args.input)
    tetrahedron = tetrahedron_check(triple)
    bell = bell_six_check(triple)
    verdicts = {"tetrahedron": tetrahedron.satisfied, "bell": bell.satisfied}

    lp = None
    if not args.skip_lp:
        c = covariance_complex(triple)
        lp = solve_complex(c, args.atom_cap)
        if lp.feasible and not witness_reproduces(c, lp.witness_map()):
            raise InternalConsistencyError(f"LP witness for {triple} does not reproduce its marginals")
        verdicts["lp"] = lp.feasible
    if len(set(verdicts.values())) != 1:
        raise InternalConsistencyError(f"Verdicts disagree at {triple}: {verdicts}")

    feasible = tetrahedron.satisfied
    document = {
        "sigma": [format_rational(value) for value in triple],
        "feasible": feasible,
        "tetrahedron": tetrahedron.to_json(),
        "bell": bell.to_json(),
    }
    lines = [f"Covariances {triple}"]
    lines += report_lines("Tetrahedron", tetrahedron)
    lines += report_lines("Bell inequalities", bell)
    if lp is not None:
        document["lp"] = result_to_json(lp)
        lines.append(f"LP: {'feasible' if lp.feasible else 'infeasible'} ({lp.pivots} pivots)")
        if not lp.feasible:
            lines.append("Farkas certificate:")
            lines += [f"  {label:<16} {format_rational(y)}" for label, y in lp.certificate_map().items()]
    if feasible:
        witness = reconstruct_joint(triple)
        lo, hi = feasible_t_interval(triple)
        document["witness"] = joint_to_json(witness)
        document["t_interval"] = [format_rational(lo), format_rational(hi)]
        lines.append(f"t-interval: [{format_rational(lo)}, {format_rational(hi)}]")
        lines.append("Canonical witness (t = 0):")
        lines += [f"  {atom} {format_rational(mass)}" for atom, mass in witness.mass_map().items()]
    lines.append(f"Verdict: {'feasible' if feasible else 'infeasible'}")
    emit(args, document, lines)
    return EXIT_FEASIBLE if feasible else EXIT_INFEASIBLE


def cmd_chsh(args) -> int:
    quad = load_quad(args.input)
    report = chsh_check(quad)
    feasible = report.satisfied
    document = {
        "sigma": [format_rational(value) for value in quad],
        "feasible": feasible,
        "on_boundary": report.on_boundary,
        "chsh": report.to_json(),
    }
    lines = [f"Covariances {quad}"]
    lines += report_lines("CHSH", report)

    if not args.skip_lp:
        try:
            witness = chsh_reconstruct(quad)
        except Infeasible as exc:
            if feasible:
                raise InternalConsistencyError(f"CHSH check and LP disagree at {quad}") from exc
            document["certificate"] = {label: format_rational(y) for label, y in exc.certificate.items()}
            lines.append("Farkas certificate:")
            lines += [f"  {label:<16} {format_rational(y)}" for label, y in exc.certificate.items()]
        else:
            if not feasible:
                raise InternalConsistencyError(f"CHSH check and LP disagree at {quad}")
            document["witness"] = joint_to_json(witness)
            lines.append("Witness over (A1, A2, B1, B2):")
            lines += [f"  {atom} {format_rational(mass)}" for atom, mass in witness.mass_map().items() if mass]
    if report.on_boundary:
        lines.append("Note: point lies on the boundary of the CHSH polytope")
    lines.append(f"Verdict: {'feasible' if feasible else 'infeasible'}")
    emit(args, document, lines)
    return EXIT_FEASIBLE if feasible else EXIT_INFEASIBLE


def cmd_vorobev(args) -> int:
    c = complex_from_json(read_json(args.input))
    result = solve_complex(c, args.atom_cap)
    document = result_to_json(result)
    lines = [f"Complex over {', '.join(v.name for v in c.variables)}: {result.pivots} pivots"]
    if result.feasible:
        lines.append("Witness:")
        lines += [f"  {atom} {format_rational(mass)}" for atom, mass in result.witness_map().items() if mass]
    else:
        lines.append("Farkas certificate:")
        lines += [f"  {label:<20} {format_rational(y)}" for label, y in result.certificate_map().items()]
    lines.append(f"Verdict: {'feasible' if result.feasible else 'infeasible'}")
    emit(args, document, lines)
    return EXIT_FEASIBLE if result.feasible else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    model = load_model(read_json(args.model))
    plan_document = read_json(args.plan)
    if not isinstance(plan_document, dict):
        raise ValueError(f"Plan {args.plan} must be a JSON object")
    if args.seed is not None:
        plan_document["seed"] = args.seed
    if args.trials is not None:
        plan_document["trials"] = args.trials
    plan = ExperimentPlan.model_validate(plan_document)

    record = run_experiment(model, plan, workers=args.workers)
    analysis = analyze(record, max_denominator=args.max_denominator)
    if args.record:
        Path(args.record).write_text(record_to_json(record), encoding="utf-8")
        logger.info(f"Record written to {args.record}")
    if args.db:
        db_path = Path(args.db)
        init_db(db_path)
        conn = get_db_connection(db_path)
        try:
            run_id = insert_record(conn, record, analysis.verdict)
        finally:
            conn.close()
        logger.info(f"Archived as run {run_id} in {db_path.absolute()}")

    document = {"record": json.loads(record_to_json(record)), "analysis": analysis.to_json()}
    lines = [f"Model {record.model_kind} ({record.model_hash[:12]}), seed {record.seed}, {record.trials} trials"]
    lines.append(f"  {'category':<10} {'estimate':>10} {'std err':>10} {'rounded':>12}")
    for estimate, rounded in zip(analysis.estimates, analysis.rounded):
        lines.append(
            f"  {estimate.category:<10} {estimate.estimate:>10.5f} "
            f"{estimate.standard_error:>10.5f} {format_rational(rounded):>12}"
        )
    for name, report in analysis.reports.items():
        lines += report_lines(name.capitalize(), report)
    lines.append(f"Combined standard error: {analysis.combined_standard_error:.5f}")
    lines.append(f"Verdict: {analysis.verdict} ({analysis.note})")
    emit(args, document, lines)
    return EXIT_FEASIBLE if analysis.verdict == "feasible" else EXIT_INFEASIBLE


def cmd_runs(args) -> int:
    db_path = Path(args.db)
    init_db(db_path)
    conn = get_db_connection(db_path)
    try:
        rows = list_records(conn)
    finally:
        conn.close()
    lines = [
        f"{row['id']:>4}  {row['created_at']}  {row['model_kind']:<12} {row['model_hash'][:12]}  "
        f"seed {row['seed']}  trials {row['trials']}  {row['verdict']}"
        for row in rows
    ] or ["No archived runs"]
    emit(args, {"runs": rows}, lines)
    return EXIT_FEASIBLE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--json', action='store_true', help='Emit the report as JSON')
    common.add_argument('-v', '--verbose', action='store_true', help='Log at DEBUG level')

    parser = argparse.ArgumentParser(description='Exact joint-distribution and Bell polytope toolkit')
    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    # Check command
    check_parser = subparsers.add_parser('check', parents=[common], help='Check a covariance triple')
    check_parser.add_argument('input', type=str,
                              help='"s1,s2,s3", a {"sigma": [...]} file or a pair-density triple file')
    check_parser.add_argument('--atom-cap', type=int, default=DEFAULT_ATOM_CAP, help='Largest product space to solve')
    check_parser.add_argument('--skip-lp', action='store_true', help='Skip the linear-programming leg')

    # CHSH command
    chsh_parser = subparsers.add_parser('chsh', parents=[common], help='Check a CHSH covariance quad')
    chsh_parser.add_argument('input', type=str, help='"s11,s12,s21,s22" or a {"sigma": [...]} file')
    chsh_parser.add_argument('--skip-lp', action='store_true', help='Skip the linear-programming leg')

    # Vorob'ev command
    vorobev_parser = subparsers.add_parser('vorobev', parents=[common], help='Solve a marginal complex')
    vorobev_parser.add_argument('input', type=str, help='Marginal complex JSON file')
    vorobev_parser.add_argument('--atom-cap', type=int, default=DEFAULT_ATOM_CAP,
                                help='Largest product space to solve')

    # Simulate command
    simulate_parser = subparsers.add_parser('simulate', parents=[common], help='Run an EPR simulation')
    simulate_parser.add_argument('model', type=str, help='Hidden-variable model JSON file')
    simulate_parser.add_argument('plan', type=str, help='Experiment plan JSON file')
    simulate_parser.add_argument('--seed', type=int, help='Override the plan seed')
    simulate_parser.add_argument('--trials', type=int, help='Override the trials per category')
    simulate_parser.add_argument('--workers', type=int, default=1, help='Worker threads')
    simulate_parser.add_argument('--max-denominator', type=int, default=DEFAULT_MAX_DENOMINATOR,
                                 help='Denominator bound when rounding covariances')
    simulate_parser.add_argument('--record', type=str, help='Write the empirical record JSON here')
    simulate_parser.add_argument('--db', type=str, help='Archive the run in this SQLite file')

    # Runs command
    runs_parser = subparsers.add_parser('runs', parents=[common], help='List archived simulation runs')
    runs_parser.add_argument('--db', type=str, default=str(DEFAULT_DB_PATH),
                             help='Path to the SQLite archive')
    return parser


COMMANDS = {
    'check': cmd_check,
    'chsh': cmd_chsh,
    'vorobev': cmd_vorobev,
    'simulate': cmd_simulate,
    'runs': cmd_runs,
}


def main(argv=None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        # If no command is provided, show help
        parser.print_help()
        return EXIT_INVALID_INPUT

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ProductSpaceTooLarge, InternalConsistencyError) as exc:
        logger.error(str(exc))
        return EXIT_LIMIT
    except ValidationError as exc:
        logger.error(f"Invalid document: {exc}")
        return EXIT_INVALID_INPUT
    except (ValueError, OSError) as exc:
        # json.JSONDecodeError and every input error of the hierarchy are ValueErrors
        logger.error(str(exc))
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())
