"""DC power flow and pre/post-event data simulation.

The DC model is the linear approximation p = B theta, with B the
weighted Laplacian from grid_model.  B has a rank-1 null space (the
all-ones vector), resolved by pinning the reference bus angle to zero
and solving the reduced (N-1) x (N-1) system with the reference row
and column deleted.

The simulator generates the data an identification run consumes: solve
the pre-event flow, apply the scenario, perturb injections with
balanced Gaussian noise, and solve the post-event flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CaseformatError, TopologyError
from .grid_model import (GridCase, OutageScenario, apply_scenario,
                         case_laplacian, change_weights, component_count)


@dataclass(frozen=True, eq=False)
class EventRecord:
    """Simulated event data.  post_angles solves the post-event flow
    for the noisy injections p + noise; both angle vectors are pinned
    to zero at the reference bus."""

    scenario: OutageScenario
    sigma_v: float
    seed: int
    pre_angles: np.ndarray
    post_angles: np.ndarray
    noise: np.ndarray
    case_name: str = field(default="")


def solve_dc(case: GridCase, injections=None) -> np.ndarray:
    """Solve B theta = p for the angles, theta at the reference bus
    exactly 0.  ``injections`` defaults to the case's own vector.

    Raises TopologyError on a disconnected case and CaseformatError on
    an unbalanced injection vector (1^T p must vanish for solvability).
    """
    p = case.injections if injections is None else np.asarray(injections, dtype=float)
    if p.shape != (case.n_buses,):
        raise ValueError(f"injection vector has shape {p.shape}, expected ({case.n_buses},)")
    scale = max(1.0, float(np.max(np.abs(p), initial=0.0)))
    if abs(float(p.sum())) > 1e-9 * scale:
        raise CaseformatError(f"injections sum to {p.sum():g}; DC flow needs a balanced vector")
    if component_count(case) != 1:
        raise TopologyError("cannot solve DC flow on a disconnected grid")

    b = case_laplacian(case)
    ref = case.reference_row
    keep = np.arange(case.n_buses) != ref
    reduced = b[np.ix_(keep, keep)]
    try:
        theta_keep = np.linalg.solve(reduced, p[keep])
    except np.linalg.LinAlgError as exc:  # connected check should prevent this
        raise TopologyError(f"singular reduced system: {exc}") from exc
    theta = np.zeros(case.n_buses)
    theta[keep] = theta_keep
    return theta


def line_flows(case: GridCase, theta) -> np.ndarray:
    """Per-line flows (theta_from - theta_to) / x, in line order."""
    theta = np.asarray(theta, dtype=float)
    row = case.bus_row
    out = np.empty(case.n_lines)
    for j, ln in enumerate(case.lines):
        out[j] = (theta[row[ln.from_bus]] - theta[row[ln.to_bus]]) / ln.reactance
    return out


def injections_from_angles(case: GridCase, theta) -> np.ndarray:
    """Net injection implied by an angle vector: p = B theta.  Each
    entry balances the flows of the lines incident to that bus."""
    return case_laplacian(case) @ np.asarray(theta, dtype=float)


def draw_noise(n: int, sigma_v: float, seed: int) -> np.ndarray:
    """Balanced i.i.d. Gaussian injection noise.

    The raw draw has standard deviation sigma_v; its mean is then
    subtracted from every entry so the vector sums to zero, keeping the
    perturbed injections solvable.  Deterministic per seed.
    """
    if sigma_v < 0:
        raise ValueError("sigma_v must be nonnegative")
    rng = np.random.default_rng(seed)
    v = rng.normal(0.0, sigma_v, size=n) if sigma_v > 0 else np.zeros(n)
    if sigma_v > 0:
        v = v - v.mean()
    return v


def noise_sigma(case: GridCase, fraction: float) -> float:
    """Noise level as a fraction of the typical injection magnitude:
    fraction times the mean absolute value over buses with nonzero
    injection."""
    if fraction < 0:
        raise ValueError("fraction must be nonnegative")
    p = case.injections
    nz = np.abs(p[p != 0.0])
    if nz.size == 0:
        raise CaseformatError("all injections are zero; no scale for the noise level")
    return fraction * float(nz.mean())


def simulate_event(case: GridCase, scenario: OutageScenario, sigma_v: float,
                   seed: int) -> EventRecord:
    """Generate one event: pre-event angles from the case injections,
    post-event angles from the scenario topology and noise-perturbed
    injections.  Deterministic given (case, scenario, sigma_v, seed)."""
    p = case.injections
    theta_pre = solve_dc(case, p)
    post = apply_scenario(case, scenario)
    v = draw_noise(case.n_buses, sigma_v, seed)
    theta_post = solve_dc(post, p + v)
    return EventRecord(scenario=scenario, sigma_v=sigma_v, seed=seed,
                       pre_angles=theta_pre, post_angles=theta_post,
                       noise=v, case_name=case.name)


def internal_angle_change(case: GridCase, record: EventRecord) -> np.ndarray:
    """The observable slice of the angle change: (post - pre) restricted
    to internal buses.  Identification consumes only this."""
    diff = record.post_angles - record.pre_angles
    return diff[case.internal_rows]


def true_signal(case: GridCase, scenario: OutageScenario, theta_post) -> np.ndarray:
    """Ground-truth sparse coefficient vector over the pre-event lines:
    w_ell (theta'_from - theta'_to) on changed lines, zero elsewhere.
    Used only to validate identification, never by it."""
    theta_post = np.asarray(theta_post, dtype=float)
    weights = change_weights(case, scenario)
    row = case.bus_row
    s = np.zeros(case.n_lines)
    for j, ln in enumerate(case.lines):
        if ln.index in weights:
            s[j] = weights[ln.index] * (theta_post[row[ln.from_bus]] - theta_post[row[ln.to_bus]])
    return s
