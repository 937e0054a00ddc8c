"""Graph representation of a transmission grid and its topology matrices.

A grid is a weighted undirected graph: buses are nodes, transmission
lines are edges weighted by the reciprocal of their reactance.  The
module builds the bus-line incidence matrix, the weighted Laplacian
(the DC susceptance matrix), its internal/external column partition,
and post-event variants of all three under line outages or reactance
changes.

Matrices are dense numpy arrays.  Cases of interest stay well under a
thousand buses, where dense algebra is simpler and faster than sparse
bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import ScenarioError, TopologyError

OUTAGE = "outage"
REACTANCE_CHANGE = "reactance_change"

# Tolerance for the net-injection balance invariant.  The DC model
# p = B theta is solvable only for zero-sum p, since rows of B sum to 0.
BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class Bus:
    id: int
    injection: float  # net real power, per-unit
    is_reference: bool = False


@dataclass(frozen=True)
class Line:
    """One transmission line. ``index`` is its 1-based position in the
    case file's branch order, which is how outages are reported."""

    index: int
    from_bus: int
    to_bus: int
    reactance: float

    @property
    def weight(self) -> float:
        return 1.0 / self.reactance


@dataclass(frozen=True)
class LineChange:
    """A single topology change: a full outage, or a jump of the line's
    reactance to ``new_reactance`` (which generalizes an outage)."""

    line_index: int
    kind: str = OUTAGE
    new_reactance: float | None = None


@dataclass(frozen=True)
class OutageScenario:
    changes: tuple[LineChange, ...]

    @classmethod
    def outages(cls, *line_indices: int) -> "OutageScenario":
        return cls(tuple(LineChange(i, OUTAGE) for i in line_indices))

    @property
    def line_indices(self) -> tuple[int, ...]:
        return tuple(c.line_index for c in self.changes)


@dataclass(frozen=True)
class GridCase:
    """A validated grid: buses in case-file row order, lines in branch
    order, and the set of bus ids whose angles are observable.

    ``slack_adjustment`` records the per-unit injection moved onto the
    reference bus at load time to balance the case; it is metadata and
    does not participate in equality.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    internal_buses: frozenset[int]
    name: str = field(default="", compare=False)
    slack_adjustment: float = field(default=0.0, compare=False)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @cached_property
    def bus_row(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def injections(self) -> np.ndarray:
        return np.array([b.injection for b in self.buses])

    @property
    def reference_bus(self) -> int:
        for b in self.buses:
            if b.is_reference:
                return b.id
        raise TopologyError("case has no reference bus")

    @property
    def reference_row(self) -> int:
        return self.bus_row[self.reference_bus]

    @cached_property
    def internal_rows(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses)
                         if b.id in self.internal_buses], dtype=int)

    @cached_property
    def external_rows(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses)
                         if b.id not in self.internal_buses], dtype=int)

    @property
    def external_buses(self) -> tuple[int, ...]:
        # complement of the internal set, in case-file bus order
        return tuple(self.buses[i].id for i in self.external_rows)

    @cached_property
    def line_labels(self) -> np.ndarray:
        return np.array([ln.index for ln in self.lines], dtype=int)

    def line_by_index(self, index: int) -> Line:
        for ln in self.lines:
            if ln.index == index:
                return ln
        raise ScenarioError(f"no line with index {index} in case")


def validate_case(case: GridCase, require_contiguous_lines: bool = True) -> None:
    """Check the structural invariants of a case; raise TopologyError on
    the first violation.

    Line labels are required to be exactly 1..L for freshly parsed cases;
    post-event cases keep their surviving original labels, so callers
    validating those pass ``require_contiguous_lines=False``.
    """
    if not case.buses:
        raise TopologyError("case has no buses")
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise TopologyError("duplicate bus ids")
    refs = [b.id for b in case.buses if b.is_reference]
    if len(refs) != 1:
        raise TopologyError(f"expected exactly one reference bus, found {len(refs)}")
    if not case.internal_buses:
        raise TopologyError("internal bus set is empty")
    unknown = case.internal_buses - set(ids)
    if unknown:
        raise TopologyError(f"internal buses not in case: {sorted(unknown)}")
    if refs[0] not in case.internal_buses:
        raise TopologyError(f"reference bus {refs[0]} must be internal")

    id_set = set(ids)
    seen_labels = set()
    for ln in case.lines:
        if ln.from_bus == ln.to_bus:
            raise TopologyError(f"line {ln.index} is a self-loop at bus {ln.from_bus}")
        if ln.from_bus not in id_set or ln.to_bus not in id_set:
            raise TopologyError(f"line {ln.index} references unknown bus")
        if not (ln.reactance > 0.0 and np.isfinite(ln.reactance)):
            raise TopologyError(f"line {ln.index} has nonpositive reactance {ln.reactance}")
        if ln.index in seen_labels:
            raise TopologyError(f"duplicate line index {ln.index}")
        if ln.index < 1:
            raise TopologyError(f"line index {ln.index} must be positive")
        seen_labels.add(ln.index)
    if require_contiguous_lines and seen_labels != set(range(1, len(case.lines) + 1)):
        raise TopologyError("line indices must be contiguous 1..L in case-file order")

    if component_count(case) != 1:
        raise TopologyError("grid graph is not connected")
    total = float(np.sum(case.injections))
    if abs(total) > BALANCE_TOL * max(1.0, float(np.max(np.abs(case.injections), initial=0.0))):
        raise TopologyError(f"injections sum to {total}, not balanced")


def with_partition(case: GridCase, internal_buses=None, reference_bus: int | None = None) -> GridCase:
    """A copy of the case with a different internal set and/or reference
    bus, re-validated.  Used to apply command-line overrides."""
    buses = case.buses
    if reference_bus is not None:
        buses = tuple(replace(b, is_reference=(b.id == reference_bus)) for b in buses)
    new = replace(
        case, buses=buses,
        internal_buses=(case.internal_buses if internal_buses is None
                        else frozenset(internal_buses)))
    validate_case(new)
    return new


def component_count(case: GridCase, removed: frozenset[int] | set[int] = frozenset()) -> int:
    """Number of connected components after hypothetically removing the
    lines whose indices are in ``removed``.  1 means connected."""
    n = case.n_buses
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    row = case.bus_row
    count = n
    for ln in case.lines:
        if ln.index in removed:
            continue
        ra, rb = find(row[ln.from_bus]), find(row[ln.to_bus])
        if ra != rb:
            parent[ra] = rb
            count -= 1
    return count


def build_incidence(case: GridCase) -> np.ndarray:
    """N x L incidence matrix: column of line ell carries +1 at the
    from-bus row and -1 at the to-bus row."""
    m = np.zeros((case.n_buses, case.n_lines))
    row = case.bus_row
    for j, ln in enumerate(case.lines):
        m[row[ln.from_bus], j] = 1.0
        m[row[ln.to_bus], j] = -1.0
    return m


def build_laplacian(incidence: np.ndarray, reactances) -> np.ndarray:
    """Weighted graph Laplacian B = M diag(1/x) M^T.

    Symmetric, positive semidefinite, zero row sums; rank N-1 when the
    graph is connected.
    """
    x = np.asarray(reactances, dtype=float)
    if x.ndim != 1 or x.shape[0] != incidence.shape[1]:
        raise ValueError("reactances must be a vector of length L")
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("reactances must be strictly positive and finite")
    weighted = incidence / x  # scales each column ell by 1/x_ell
    return weighted @ incidence.T


def case_laplacian(case: GridCase) -> np.ndarray:
    return build_laplacian(build_incidence(case), [ln.reactance for ln in case.lines])


def partition_columns(laplacian: np.ndarray, case: GridCase) -> tuple[np.ndarray, np.ndarray]:
    """Split the Laplacian's columns into the internal block and the
    external block, both in case-file bus order."""
    return laplacian[:, case.internal_rows], laplacian[:, case.external_rows]


def _check_scenario(case: GridCase, scenario: OutageScenario) -> None:
    seen = set()
    for ch in scenario.changes:
        if ch.kind not in (OUTAGE, REACTANCE_CHANGE):
            raise ScenarioError(f"unknown change kind {ch.kind!r}")
        if ch.line_index in seen:
            raise ScenarioError(f"line {ch.line_index} listed twice in scenario")
        seen.add(ch.line_index)
        line = case.line_by_index(ch.line_index)
        if ch.kind == REACTANCE_CHANGE:
            if ch.new_reactance is None or not (ch.new_reactance > 0.0):
                raise ScenarioError(
                    f"reactance change on line {ch.line_index} needs a positive new value")
            if ch.new_reactance == line.reactance:
                raise ScenarioError(
                    f"line {ch.line_index} reactance change is a no-op")


def change_weights(case: GridCase, scenario: OutageScenario) -> dict[int, float]:
    """Per-line weights of the topology-change Laplacian: 1/x for an
    outage, 1/x - 1/x_new for a reactance change."""
    _check_scenario(case, scenario)
    out = {}
    for ch in scenario.changes:
        line = case.line_by_index(ch.line_index)
        if ch.kind == OUTAGE:
            out[ch.line_index] = 1.0 / line.reactance
        else:
            out[ch.line_index] = 1.0 / line.reactance - 1.0 / ch.new_reactance
    return out


def delta_laplacian(case: GridCase, scenario: OutageScenario) -> np.ndarray:
    """The Laplacian innovation of a scenario: the pre-event Laplacian
    minus the post-event one, a sum of rank-1 terms over changed lines."""
    weights = change_weights(case, scenario)
    n = case.n_buses
    row = case.bus_row
    delta = np.zeros((n, n))
    for label, w in weights.items():
        line = case.line_by_index(label)
        a, b = row[line.from_bus], row[line.to_bus]
        delta[a, a] += w
        delta[b, b] += w
        delta[a, b] -= w
        delta[b, a] -= w
    return delta


def apply_scenario(case: GridCase, scenario: OutageScenario) -> GridCase:
    """Post-event case: outaged lines removed, changed reactances
    substituted.  Surviving lines keep their original index labels so
    reports stay comparable with the pre-event numbering.

    Raises ScenarioError if the outages disconnect the grid (islanding),
    which invalidates the DC model.
    """
    _check_scenario(case, scenario)
    outaged = {c.line_index for c in scenario.changes if c.kind == OUTAGE}
    new_x = {c.line_index: c.new_reactance for c in scenario.changes
             if c.kind == REACTANCE_CHANGE}
    lines = []
    for ln in case.lines:
        if ln.index in outaged:
            continue
        if ln.index in new_x:
            ln = replace(ln, reactance=new_x[ln.index])
        lines.append(ln)
    post = replace(case, lines=tuple(lines))
    if component_count(post) != 1:
        raise ScenarioError(
            f"outage of lines {sorted(outaged)} islands the grid")
    return post
