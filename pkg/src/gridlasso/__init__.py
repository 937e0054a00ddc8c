"""Identification of transmission-line outages from bus phase angles.

The pipeline: model the grid as a weighted graph (grid_model), simulate
or ingest pre/post-event DC power-flow data (dc_flow), pose the line
change as a sparse regression over an overcomplete per-line
representation and solve it with block coordinate descent along a
regularization path (lasso_bcd), then choose the number of changed
lines by a description-length or residual-variance criterion
(model_select).  io_formats and cli handle files and the command line.
"""

from .errors import (CaseformatError, GridLassoError, ScenarioError,
                     SelectionError, TopologyError)
from .grid_model import (OUTAGE, REACTANCE_CHANGE, Bus, GridCase, Line,
                         LineChange, OutageScenario, apply_scenario,
                         build_incidence, build_laplacian, case_laplacian,
                         change_weights, component_count, delta_laplacian,
                         partition_columns, validate_case, with_partition)
from .dc_flow import (EventRecord, draw_noise, injections_from_angles,
                      internal_angle_change, line_flows, noise_sigma,
                      simulate_event, solve_dc, true_signal)
from .lasso_bcd import (LassoProblem, LassoSolution, PathResult, SolverConfig,
                        bcd_solve, build_problem, kkt_residuals, lambda_grid,
                        objective, observation, partial_residual, solve_path,
                        soft_threshold_update, support, update_external_angles)
from .model_select import (FIXED, MDL, VARIANCE, CandidateModel,
                           SelectionReport, candidates_from_path, mdl_score,
                           refit_candidate, refit_least_squares,
                           scale_scores, select, unaffected_rows,
                           variance_score)
from .io_formats import (build_report_document, bundled_case_text,
                         load_bundled_case, parse_bus_set, parse_case_json,
                         parse_event_json, parse_matpower_case, parse_path_csv,
                         parse_report_json, parse_scenario, scenario_document,
                         write_case_json, write_event_json, write_path_csv,
                         write_report_json)

__version__ = "0.1.0"

__all__ = [
    "Bus", "Line", "GridCase", "LineChange", "OutageScenario",
    "OUTAGE", "REACTANCE_CHANGE",
    "build_incidence", "build_laplacian", "case_laplacian",
    "partition_columns", "delta_laplacian", "apply_scenario",
    "component_count", "change_weights", "validate_case", "with_partition",
    "EventRecord", "solve_dc", "line_flows", "injections_from_angles",
    "draw_noise", "noise_sigma", "simulate_event", "internal_angle_change",
    "true_signal",
    "LassoProblem", "LassoSolution", "PathResult", "SolverConfig",
    "build_problem", "observation", "objective", "update_external_angles",
    "partial_residual", "soft_threshold_update", "bcd_solve", "lambda_grid",
    "solve_path", "support", "kkt_residuals",
    "CandidateModel", "SelectionReport", "candidates_from_path",
    "refit_candidate", "refit_least_squares", "mdl_score", "variance_score",
    "scale_scores",
    "unaffected_rows", "select", "FIXED", "MDL", "VARIANCE",
    "parse_case_json", "parse_matpower_case", "write_case_json",
    "parse_scenario", "scenario_document", "parse_bus_set",
    "parse_event_json", "write_event_json", "write_path_csv",
    "parse_path_csv", "build_report_document", "write_report_json",
    "parse_report_json", "load_bundled_case", "bundled_case_text",
    "GridLassoError", "CaseformatError", "TopologyError", "ScenarioError",
    "SelectionError",
]
