"""Choosing how many lines changed, given an identification path.

The path yields one candidate support per cardinality k: the support of
the first (largest-lambda) solution with exactly k nonzeros.  Each
candidate is debiased by an unpenalized least-squares refit on its
support before scoring, since the l1 shrinkage biases coefficient
magnitudes and hence residuals.

Three criteria are offered: a fixed count (take the candidate with a
given k), a minimum-description-length score trading fit against
cardinality, and a variance-deviation score comparing the residual
sample variance on buses untouched by the candidate lines against the
known noise variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import SelectionError
from .lasso_bcd import LassoProblem, PathResult

FIXED = "fixed"
MDL = "mdl"
VARIANCE = "variance"

# Floors guarding the noiseless edge: residuals that are pure float dust
# count as perfect fits / exact variance matches, so equal-score ties
# resolve toward the smaller cardinality.
RSS_FLOOR_REL = 1e-12


@dataclass(frozen=True, eq=False)
class CandidateModel:
    k: int
    support: frozenset          # line labels
    lam: float                  # largest lambda attaining this cardinality
    path_position: int          # index into the path's solutions
    refit_s: np.ndarray | None = None   # length L, zero off the support
    refit_theta_ext: np.ndarray | None = None
    rss: float | None = None


def candidates_from_path(path: PathResult, k_max: int):
    """One unrefit candidate per cardinality 1..k_max, each taken from
    the first path solution attaining exactly that support size.
    Cardinalities never attained are absent."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if not path.solutions:
        raise ValueError("empty path")
    found = {}
    for pos, (sol, sup) in enumerate(zip(path.solutions, path.supports)):
        k = len(sup)
        if 1 <= k <= k_max and k not in found:
            found[k] = CandidateModel(k=k, support=sup, lam=sol.lam,
                                      path_position=pos)
    return [found[k] for k in sorted(found)]


def refit_least_squares(problem: LassoProblem, support):
    """Unpenalized least squares restricted to the support columns,
    jointly with the external block; minimum-norm on rank deficiency.

    Returns (refit_s, refit_theta_ext, rss) with refit_s a full-length
    vector that is zero off the support.
    """
    labels = list(problem.line_labels)
    positions = sorted(labels.index(int(lab)) for lab in support)
    design = np.hstack([problem.incidence[:, positions], -problem.b_ext])
    coef, *_ = np.linalg.lstsq(design, problem.y, rcond=None)
    refit_s = np.zeros(problem.n_lines)
    refit_s[positions] = coef[:len(positions)]
    refit_theta = coef[len(positions):]
    residual = problem.y - design @ coef
    return refit_s, refit_theta, float(residual @ residual)


def refit_candidate(problem: LassoProblem, candidate: CandidateModel,
                    path: PathResult | None = None,
                    debias: bool = True) -> CandidateModel:
    """Fill in the candidate's coefficient estimates and rss.

    With debias=False the shrunk path solution itself is scored instead
    of a least-squares refit (its external block re-solved exactly, so
    the rss is the attainable one for those shrunk coefficients).
    """
    if debias:
        refit_s, refit_theta, rss = refit_least_squares(problem, candidate.support)
    else:
        if path is None:
            raise ValueError("raw scoring needs the path")
        sol = path.solutions[candidate.path_position]
        refit_s = sol.s_hat.copy()
        refit_theta = sol.theta_ext_hat.copy()
        r = problem.y - problem.incidence @ refit_s + problem.b_ext @ refit_theta
        rss = float(r @ r)
    return replace(candidate, refit_s=refit_s, refit_theta_ext=refit_theta, rss=rss)


def mdl_score(candidate: CandidateModel, n_buses: int, rss_floor: float = 0.0) -> float:
    """Two-part description length for a linear fit: (N/2) ln(rss/N)
    plus a penalty (k/2) ln(N) growing linearly with cardinality.
    An rss at or below rss_floor is a perfect fit: -inf sentinel."""
    if candidate.rss is None:
        raise ValueError("candidate must be refit before scoring")
    if candidate.rss <= max(rss_floor, 0.0):
        return -math.inf
    return 0.5 * n_buses * math.log(candidate.rss / n_buses) \
        + 0.5 * candidate.k * math.log(n_buses)


def unaffected_rows(problem: LassoProblem, support) -> np.ndarray:
    """Rows (buses) that are an endpoint of no support line; on these the
    candidate explains nothing, so their refit residual is noise."""
    labels = list(problem.line_labels)
    mask = np.ones(problem.n_rows, dtype=bool)
    for lab in support:
        j = labels.index(int(lab))
        mask[problem.from_rows[j]] = False
        mask[problem.to_rows[j]] = False
    return np.flatnonzero(mask)


def variance_score(problem: LassoProblem, candidate: CandidateModel,
                   sigma2: float, score_floor: float = 0.0) -> float:
    """Absolute deviation between the residual sample variance on
    unaffected rows and the known noise variance sigma2.  Deviations at
    or below score_floor snap to zero (float dust on noiseless data)."""
    if candidate.refit_s is None:
        raise ValueError("candidate must be refit before scoring")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    rows = unaffected_rows(problem, candidate.support)
    if rows.size < 2:
        raise SelectionError(
            f"only {rows.size} buses untouched by candidate k={candidate.k}; "
            "variance test needs at least 2")
    residual = (problem.y - problem.incidence @ candidate.refit_s
                + problem.b_ext @ candidate.refit_theta_ext)
    sample_var = float(np.var(residual[rows], ddof=1))
    score = abs(sample_var - sigma2)
    return 0.0 if score <= score_floor else score


def scale_scores(raw):
    """Scores divided by the largest, for comparison plots.

    All-zero lists pass through.  When every score is nonpositive
    (possible for description lengths, which are log-scale), dividing by
    the maximum would flip the ordering, so the largest magnitude is
    used as the divisor instead; selection always uses raw scores.
    """
    raw = [float(v) for v in raw]
    if not raw:
        raise ValueError("no scores to scale")
    finite = [v for v in raw if math.isfinite(v)]
    if not finite or all(v == 0.0 for v in finite):
        return list(raw)
    top = max(finite)
    divisor = top if top > 0 else max(abs(v) for v in finite)
    return [v / divisor if math.isfinite(v) else v for v in raw]


@dataclass(frozen=True, eq=False)
class SelectionReport:
    criterion: str
    candidates: tuple            # refit CandidateModel per available k, ascending
    raw_scores: tuple | None     # aligned with candidates; None for fixed-count
    scaled_scores: tuple | None
    chosen_k: int
    chosen_support: frozenset
    sigma2: float | None = None


def select(problem: LassoProblem, path: PathResult, criterion: str,
           k_fixed: int | None = None, k_max: int = 5,
           sigma2: float | None = None, debias: bool = True) -> SelectionReport:
    """Pick the final outage set from the path.

    fixed: the candidate with exactly k_fixed nonzeros (error if that
    cardinality never appears on the path).  mdl / variance: the
    candidate minimizing the criterion over cardinalities 1..k_max, ties
    broken toward smaller k.
    """
    if criterion not in (FIXED, MDL, VARIANCE):
        raise ValueError(f"unknown criterion {criterion!r}")
    if criterion == FIXED:
        if k_fixed is None or k_fixed < 1:
            raise ValueError("fixed-count selection needs k_fixed >= 1")
        k_limit = k_fixed
    else:
        k_limit = k_max
    candidates = candidates_from_path(path, k_limit)
    candidates = [refit_candidate(problem, c, path, debias) for c in candidates]

    if criterion == FIXED:
        for cand in candidates:
            if cand.k == k_fixed:
                return SelectionReport(criterion=criterion,
                                       candidates=tuple(candidates),
                                       raw_scores=None, scaled_scores=None,
                                       chosen_k=cand.k,
                                       chosen_support=cand.support)
        seen = sorted({len(s) for s in path.supports if s})
        raise SelectionError(
            f"no path solution has exactly {k_fixed} nonzero coefficients "
            f"(path cardinalities: {seen})")

    if not candidates:
        raise SelectionError("no nonempty support appears on the path")

    y_norm2 = float(problem.y @ problem.y)
    rss_floor = RSS_FLOOR_REL * y_norm2
    if criterion == MDL:
        raw = [mdl_score(c, problem.n_rows, rss_floor) for c in candidates]
    else:
        if sigma2 is None:
            raise ValueError("variance selection needs sigma2")
        var_floor = rss_floor / max(problem.n_rows - 1, 1)
        raw = [variance_score(problem, c, sigma2, var_floor) for c in candidates]

    best = 0
    for i in range(1, len(candidates)):
        if raw[i] < raw[best]:  # strict: equal scores keep the smaller k
            best = i
    chosen = candidates[best]
    return SelectionReport(criterion=criterion, candidates=tuple(candidates),
                           raw_scores=tuple(raw),
                           scaled_scores=tuple(scale_scores(raw)),
                           chosen_k=chosen.k, chosen_support=chosen.support,
                           sigma2=sigma2)
