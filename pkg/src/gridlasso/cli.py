"""Command-line front end.

Subcommands wire the full pipeline: case inspection, event simulation,
identification (lambda grid, warm-started path solve, model selection),
and a multi-seed rerun of the bundled 118-bus outage experiment.
Outputs are CSV/JSON files for external plotting; runs are
deterministic per seed, byte for byte.

Exit codes: 0 success, 2 input error, 3 simulation error (islanding),
4 solver non-convergence at some lambda (outputs are still written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .dc_flow import internal_angle_change, noise_sigma, simulate_event
from .errors import GridLassoError, ScenarioError
from .grid_model import component_count, validate_case, with_partition
from .io_formats import (load_bundled_case, parse_bus_set, parse_case_json,
                         parse_event_json, parse_matpower_case,
                         parse_scenario, write_event_json, write_path_csv,
                         write_report_json)
from .lasso_bcd import (SolverConfig, build_problem, lambda_grid, solve_path)
from .model_select import FIXED, MDL, VARIANCE, select

DEFAULT_SCENARIO_118 = "66,95,115"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridlasso",
        description="Identify transmission-line outages from internal-bus "
                    "phase angles by sparse regression.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_case_flags(p):
        p.add_argument("--case",
                       help="case file (.json native schema, .m MATPOWER "
                            "subset); defaults to the bundled 118-bus case")
        p.add_argument("--internal",
                       help="internal bus ids, e.g. '1-45,113,117' or @file")
        p.add_argument("--reference", type=int,
                       help="override the reference bus (must be internal)")

    def add_sim_flags(p):
        p.add_argument("--scenario",
                       help="outage line indices '66,95,115' or a JSON "
                            "scenario (inline or @file)")
        p.add_argument("--sigma", type=float,
                       help="noise standard deviation, per-unit (overrides --sigma-fraction)")
        p.add_argument("--sigma-fraction", type=float, default=0.05,
                       help="noise level as a fraction of the mean absolute "
                            "nonzero injection (default 0.05)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")

    def add_solver_flags(p):
        p.add_argument("--lambdas", type=int, default=20,
                       help="number of grid points (default 20)")
        p.add_argument("--decay", type=float, default=1e-3,
                       help="ratio of the smallest to the largest lambda (default 1e-3)")
        p.add_argument("--tol", type=float, default=SolverConfig.tol,
                       help="coordinate-change convergence tolerance")
        p.add_argument("--max-cycles", type=int, default=SolverConfig.max_cycles,
                       help="cycle budget per lambda")
        p.add_argument("--k-max", type=int, default=5,
                       help="largest cardinality considered (default 5)")
        p.add_argument("--raw-scores", action="store_true",
                       help="score the shrunk path coefficients instead of a "
                            "least-squares refit")

    def add_selection_flags(p):
        p.add_argument("--criterion", choices=[FIXED, MDL, VARIANCE], default=MDL,
                       help="model-selection rule (default mdl)")
        p.add_argument("--k", type=int, help="cardinality for --criterion fixed")

    p_info = sub.add_parser("case-info", help="parse a case and print a summary")
    add_case_flags(p_info)
    p_info.set_defaults(func=cmd_case_info)

    p_sim = sub.add_parser("simulate", help="simulate an outage event")
    add_case_flags(p_sim)
    add_sim_flags(p_sim)
    p_sim.add_argument("--out", help="output directory (default: print to stdout)")
    p_sim.set_defaults(func=cmd_simulate)

    p_id = sub.add_parser("identify",
                          help="identify changed lines from an event")
    add_case_flags(p_id)
    add_sim_flags(p_id)
    add_solver_flags(p_id)
    add_selection_flags(p_id)
    p_id.add_argument("--event", help="event record JSON from a simulate run")
    p_id.add_argument("--out", help="output directory for path.csv and report.json")
    p_id.set_defaults(func=cmd_identify)

    p_rep = sub.add_parser("reproduce-118",
                           help="rerun the bundled 118-bus experiment over "
                                "many seeds (always scores both mdl and "
                                "variance criteria)")
    add_case_flags(p_rep)
    add_sim_flags(p_rep)
    add_solver_flags(p_rep)
    p_rep.add_argument("--seeds", type=int, default=10,
                       help="number of consecutive seeds to run (default 10)")
    p_rep.add_argument("--out", help="output directory (per-seed subdirectories)")
    p_rep.set_defaults(func=cmd_reproduce_118)
    return parser


def _read_arg_text(value: str) -> str:
    if value.startswith("@"):
        return Path(value[1:]).read_text()
    return value


def _load_case(args):
    internal = parse_bus_set(_read_arg_text(args.internal)) if args.internal else None
    if args.case is None:
        case = load_bundled_case()
    elif args.case.endswith(".m"):
        return parse_matpower_case(Path(args.case).read_text(), internal,
                                   args.reference, name=Path(args.case).name)
    else:
        case = parse_case_json(Path(args.case).read_text())
    if internal is not None or args.reference is not None:
        case = with_partition(case, internal, args.reference)
    return case


def _resolve_sigma(args, case) -> float:
    if args.sigma is not None:
        if args.sigma < 0:
            raise GridLassoError("--sigma must be nonnegative")
        return args.sigma
    return noise_sigma(case, args.sigma_fraction)


def _outdir(args) -> Path | None:
    if args.out is None:
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_case_info(args) -> int:
    case = _load_case(args)
    validate_case(case)
    total = float(case.injections.sum())
    print(f"name={case.name or '-'}")
    print(f"N={case.n_buses}")
    print(f"L={case.n_lines}")
    print(f"internal={len(case.internal_buses)}")
    print(f"external={case.n_buses - len(case.internal_buses)}")
    print(f"reference_bus={case.reference_bus}")
    print(f"connected={'yes' if component_count(case) == 1 else 'no'}")
    print(f"injection_sum={total:.3e}")
    print(f"slack_adjustment={case.slack_adjustment:.6g}")
    return 0


def cmd_simulate(args) -> int:
    case = _load_case(args)
    if not args.scenario:
        raise GridLassoError("simulate needs --scenario")
    scenario = parse_scenario(_read_arg_text(args.scenario))
    sigma = _resolve_sigma(args, case)
    record = simulate_event(case, scenario, sigma, args.seed)
    text = write_event_json(record)
    out = _outdir(args)
    if out is None:
        sys.stdout.write(text)
    else:
        target = out / "event.json"
        target.write_text(text)
        print(f"wrote {target}")
        print(f"sigma_v={sigma!r} seed={args.seed}")
    return 0


def _load_event(args, case):
    if args.event is not None:
        if args.scenario or args.sigma is not None:
            raise GridLassoError("--event conflicts with --scenario/--sigma; "
                                 "the record already carries them")
        return parse_event_json(Path(args.event).read_text())
    if not args.scenario:
        raise GridLassoError("identify needs --event or --scenario")
    scenario = parse_scenario(_read_arg_text(args.scenario))
    sigma = _resolve_sigma(args, case)
    return simulate_event(case, scenario, sigma, args.seed)


def run_identification(case, record, lambda_count=20, decay=1e-3,
                       config=SolverConfig(), criterion=MDL, k_fixed=None,
                       k_max=5, debias=True):
    """The full pipeline on one event.  Only the internal slice of the
    angle change is ever read, so external angles (unobservable in
    practice) cannot leak into the estimate."""
    problem = build_problem(case, internal_angle_change(case, record))
    lambdas = lambda_grid(problem, lambda_count, decay)
    path = solve_path(problem, lambdas, config)
    report = select(problem, path, criterion, k_fixed=k_fixed, k_max=k_max,
                    sigma2=record.sigma_v ** 2 if criterion == VARIANCE else None,
                    debias=debias)
    return problem, path, report


def _check_fixed_k(args):
    if args.criterion == FIXED and (args.k is None or args.k < 1):
        raise GridLassoError("--criterion fixed needs --k")


def cmd_identify(args) -> int:
    _check_fixed_k(args)
    case = _load_case(args)
    record = _load_event(args, case)
    config = SolverConfig(tol=args.tol, max_cycles=args.max_cycles)
    _, path, report = run_identification(
        case, record, args.lambdas, args.decay, config, args.criterion,
        args.k, args.k_max, debias=not args.raw_scores)

    out = _outdir(args)
    if out is not None:
        (out / "path.csv").write_text(write_path_csv(path))
        (out / "report.json").write_text(write_report_json(report, path, record))

    chosen = ",".join(str(v) for v in sorted(report.chosen_support))
    true = sorted(record.scenario.line_indices)
    print(f"criterion={report.criterion} chosen_k={report.chosen_k} "
          f"support={{{chosen}}}")
    print(f"true_support={{{','.join(str(v) for v in true)}}} "
          f"exact_match={'yes' if sorted(report.chosen_support) == true else 'no'}")
    if report.raw_scores is not None:
        for cand, raw, scaled in zip(report.candidates, report.raw_scores,
                                     report.scaled_scores):
            print(f"k={cand.k} lambda={cand.lam:.6g} rss={cand.rss:.6g} "
                  f"raw={raw:.6g} scaled={scaled:.6g}")
    bad = [sol.lam for sol in path.solutions if not sol.converged]
    if bad:
        print(f"warning: no convergence at lambda={bad!r}", file=sys.stderr)
        return 4
    return 0


def cmd_reproduce_118(args) -> int:
    case = _load_case(args)
    scenario = parse_scenario(_read_arg_text(args.scenario)
                              if args.scenario else DEFAULT_SCENARIO_118)
    sigma = _resolve_sigma(args, case)
    config = SolverConfig(tol=args.tol, max_cycles=args.max_cycles)
    true = sorted(scenario.line_indices)
    out = _outdir(args)

    print(f"case={case.name or '-'} N={case.n_buses} L={case.n_lines} "
          f"sigma_v={sigma!r}")
    print(f"true_support={{{','.join(str(v) for v in true)}}} "
          f"seeds={args.seeds} starting at {args.seed}")
    successes = 0
    any_unconverged = False
    for seed in range(args.seed, args.seed + args.seeds):
        record = simulate_event(case, scenario, sigma, seed)
        problem, path, mdl_rep = run_identification(
            case, record, args.lambdas, args.decay, config, MDL,
            k_max=args.k_max, debias=not args.raw_scores)
        var_rep = select(problem, path, VARIANCE, k_max=args.k_max,
                         sigma2=record.sigma_v ** 2, debias=not args.raw_scores)
        path_hit = any(sorted(sup) == true for sup in path.supports)
        mdl_ok = sorted(mdl_rep.chosen_support) == true
        var_ok = sorted(var_rep.chosen_support) == true
        success = mdl_ok and var_ok
        successes += success
        any_unconverged |= any(not sol.converged for sol in path.solutions)

        print(f"seed {seed}: path_hit={'yes' if path_hit else 'no'} "
              f"mdl_k={mdl_rep.chosen_k} mdl_exact={'yes' if mdl_ok else 'no'} "
              f"var_k={var_rep.chosen_k} var_exact={'yes' if var_ok else 'no'} "
              f"success={'yes' if success else 'no'}")
        print("  k  rss           mdl_raw       mdl_scaled    var_raw       var_scaled")
        var_by_k = {c.k: i for i, c in enumerate(var_rep.candidates)}
        for i, cand in enumerate(mdl_rep.candidates):
            vi = var_by_k.get(cand.k)
            vraw = var_rep.raw_scores[vi] if vi is not None else float("nan")
            vscaled = var_rep.scaled_scores[vi] if vi is not None else float("nan")
            print(f"  {cand.k}  {cand.rss:<12.6g}  {mdl_rep.raw_scores[i]:<12.6g}  "
                  f"{mdl_rep.scaled_scores[i]:<12.6g}  {vraw:<12.6g}  {vscaled:<12.6g}")

        if out is not None:
            seed_dir = out / f"seed{seed}"
            seed_dir.mkdir(parents=True, exist_ok=True)
            (seed_dir / "event.json").write_text(write_event_json(record))
            (seed_dir / "path.csv").write_text(write_path_csv(path))
            (seed_dir / "report_mdl.json").write_text(
                write_report_json(mdl_rep, path, record))
            (seed_dir / "report_variance.json").write_text(
                write_report_json(var_rep, path, record))

    print(f"success {successes}/{args.seeds} (both criteria exact)")
    return 4 if any_unconverged else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except GridLassoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
