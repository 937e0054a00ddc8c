"""Case, scenario, event, and report serialization.

The native case format is a small versioned JSON schema carrying
exactly what the DC model needs: net injections, branch reactances,
the reference bus, and the internal bus set.  A reader for the common
MATPOWER text format is provided as a convenience importer restricted
to the same fields; AC-only columns (resistance, charging, taps) are
ignored, and out-of-service branches are dropped so line indices count
in-service branches only.

Outputs: the identification path as CSV (one block per lambda), and
selection reports plus simulated event records as JSON.  All numeric
fields use the shortest round-trip decimal representation, so equal
runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import re
from importlib import resources

import numpy as np

from .dc_flow import EventRecord
from .errors import CaseformatError
from .grid_model import (OUTAGE, REACTANCE_CHANGE, BALANCE_TOL, Bus, GridCase,
                         Line, LineChange, OutageScenario, validate_case)
from .lasso_bcd import PathResult
from .model_select import SelectionReport

SCHEMA_VERSION = "1"


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------- cases

def parse_case_json(text: str) -> GridCase:
    """Read the native JSON case format and return a validated case.

    Any injection imbalance beyond the balance tolerance is assigned to
    the reference bus (slack adjustment) and recorded on the case.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseformatError(f"case JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CaseformatError("case JSON: top level must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CaseformatError(f"schema_version: expected {SCHEMA_VERSION!r}, got {version!r}")
    base = doc.get("base_mva")
    if not isinstance(base, (int, float)) or isinstance(base, bool) or base <= 0:
        raise CaseformatError("base_mva: must be a positive number")

    raw_buses = doc.get("buses")
    if not isinstance(raw_buses, list) or not raw_buses:
        raise CaseformatError("buses: must be a nonempty list")
    buses = []
    for i, rb in enumerate(raw_buses):
        locus = f"buses[{i}]"
        if not isinstance(rb, dict):
            raise CaseformatError(f"{locus}: must be an object")
        bus_id = rb.get("id")
        if not isinstance(bus_id, int) or isinstance(bus_id, bool):
            raise CaseformatError(f"{locus}.id: must be an integer")
        inj = rb.get("injection_mw")
        if not isinstance(inj, (int, float)) or isinstance(inj, bool):
            raise CaseformatError(f"{locus}.injection_mw: must be a number")
        ref = rb.get("is_reference", False)
        if not isinstance(ref, bool):
            raise CaseformatError(f"{locus}.is_reference: must be a boolean")
        buses.append(Bus(id=bus_id, injection=inj / base, is_reference=ref))

    raw_branches = doc.get("branches")
    if not isinstance(raw_branches, list):
        raise CaseformatError("branches: must be a list")
    lines = []
    for i, rb in enumerate(raw_branches):
        locus = f"branches[{i}]"
        if not isinstance(rb, dict):
            raise CaseformatError(f"{locus}: must be an object")
        f, t, x = rb.get("from"), rb.get("to"), rb.get("x")
        for label, v in (("from", f), ("to", t)):
            if not isinstance(v, int) or isinstance(v, bool):
                raise CaseformatError(f"{locus}.{label}: must be an integer bus id")
        if not isinstance(x, (int, float)) or isinstance(x, bool) or not x > 0:
            raise CaseformatError(f"{locus}.x: must be a positive number")
        lines.append(Line(index=i + 1, from_bus=f, to_bus=t, reactance=float(x)))

    internal = doc.get("internal_buses")
    if not isinstance(internal, list) or not internal or \
            not all(isinstance(v, int) and not isinstance(v, bool) for v in internal):
        raise CaseformatError("internal_buses: must be a nonempty list of integers")

    case = _assemble(buses, lines, frozenset(internal), doc.get("name", ""))
    validate_case(case)
    return case


def _assemble(buses, lines, internal, name) -> GridCase:
    # slack adjustment: move any net imbalance onto the reference bus
    total = sum(b.injection for b in buses)
    scale = max(1.0, max((abs(b.injection) for b in buses), default=0.0))
    adjustment = 0.0
    if abs(total) > BALANCE_TOL * scale:
        adjustment = -total
        buses = [Bus(b.id, b.injection + adjustment, b.is_reference)
                 if b.is_reference else b for b in buses]
    return GridCase(buses=tuple(buses), lines=tuple(lines),
                    internal_buses=internal, name=name,
                    slack_adjustment=adjustment)


def write_case_json(case: GridCase, base_mva: float = 1.0) -> str:
    """Serialize a case to the native schema.  The default base of 1.0
    keeps the stored numbers bit-identical to the in-memory per-unit
    injections, so parse(write(case)) reproduces the case exactly."""
    labels = [ln.index for ln in case.lines]
    if labels != list(range(1, len(labels) + 1)):
        raise ValueError("only cases with contiguous line indices are serializable")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "base_mva": float(base_mva),
        "buses": [{"id": b.id, "injection_mw": float(b.injection * base_mva),
                   "is_reference": b.is_reference} for b in case.buses],
        "branches": [{"from": ln.from_bus, "to": ln.to_bus,
                      "x": float(ln.reactance)} for ln in case.lines],
        "internal_buses": sorted(case.internal_buses),
    }
    if case.name:
        doc["name"] = case.name
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


_BASE_RE = re.compile(r"mpc\.baseMVA\s*=\s*([^;\s]+)\s*;")


def _matrix_block(text: str, name: str):
    match = re.search(rf"mpc\.{name}\s*=\s*\[", text)
    if match is None:
        raise CaseformatError(f"missing mpc.{name} matrix")
    end = text.find("];", match.end())
    if end < 0:
        raise CaseformatError(f"unterminated mpc.{name} matrix")
    rows = []
    for raw in text[match.end():end].splitlines():
        line = raw.split("%", 1)[0].strip().rstrip(";").strip()
        if not line:
            continue
        try:
            rows.append([float(tok) for tok in line.split()])
        except ValueError:
            raise CaseformatError(
                f"mpc.{name} row {len(rows) + 1}: malformed number in {line!r}") from None
    if not rows:
        raise CaseformatError(f"mpc.{name} matrix is empty")
    return rows


def _int_field(value: float, locus: str) -> int:
    if not float(value).is_integer():
        raise CaseformatError(f"{locus}: expected an integer, got {value}")
    return int(value)


def parse_matpower_case(text: str, internal_buses=None, reference_bus=None,
                        name: str = "") -> GridCase:
    """Read the numeric bus/gen/branch matrices of a MATPOWER-format
    case.  Net injection per bus is (sum of in-service Pg) - Pd over
    baseMVA; out-of-service branches are dropped before line indices
    are assigned.

    The internal bus set is not part of the format and defaults to all
    buses.  The reference is the file's type-3 bus when that bus is
    internal; otherwise bus 1 is used, unless ``reference_bus`` says
    otherwise.
    """
    base_match = _BASE_RE.search(text)
    if base_match is None:
        raise CaseformatError("missing mpc.baseMVA")
    try:
        base = float(base_match.group(1))
    except ValueError:
        raise CaseformatError(f"mpc.baseMVA: malformed number {base_match.group(1)!r}") from None
    if base <= 0:
        raise CaseformatError("mpc.baseMVA must be positive")

    bus_rows = _matrix_block(text, "bus")
    gen_rows = _matrix_block(text, "gen")
    branch_rows = _matrix_block(text, "branch")

    ids, types, loads = [], {}, {}
    for i, row in enumerate(bus_rows):
        if len(row) < 3:
            raise CaseformatError(f"mpc.bus row {i + 1}: needs at least id, type, Pd")
        bus_id = _int_field(row[0], f"mpc.bus row {i + 1} id")
        bus_type = _int_field(row[1], f"mpc.bus row {i + 1} type")
        if bus_type not in (1, 2, 3):
            raise CaseformatError(f"mpc.bus row {i + 1}: unknown bus type {bus_type}")
        if bus_id in types:
            raise CaseformatError(f"mpc.bus row {i + 1}: duplicate bus id {bus_id}")
        ids.append(bus_id)
        types[bus_id] = bus_type
        loads[bus_id] = row[2]

    slack_ids = [b for b in ids if types[b] == 3]
    if len(slack_ids) != 1:
        raise CaseformatError(f"expected exactly one type-3 bus, found {len(slack_ids)}")

    generation = dict.fromkeys(ids, 0.0)
    for i, row in enumerate(gen_rows):
        if len(row) < 2:
            raise CaseformatError(f"mpc.gen row {i + 1}: needs at least bus, Pg")
        bus_id = _int_field(row[0], f"mpc.gen row {i + 1} bus")
        if bus_id not in types:
            raise CaseformatError(f"mpc.gen row {i + 1}: unknown bus {bus_id}")
        status = row[7] if len(row) > 7 else 1.0
        if status > 0:
            generation[bus_id] += row[1]

    lines = []
    for i, row in enumerate(branch_rows):
        if len(row) < 4:
            raise CaseformatError(f"mpc.branch row {i + 1}: needs at least from, to, r, x")
        f = _int_field(row[0], f"mpc.branch row {i + 1} from")
        t = _int_field(row[1], f"mpc.branch row {i + 1} to")
        if f not in types or t not in types:
            raise CaseformatError(f"mpc.branch row {i + 1}: unknown endpoint bus")
        status = row[10] if len(row) > 10 else 1.0
        if status == 0:
            continue
        x = row[3]
        if not x > 0:
            raise CaseformatError(f"mpc.branch row {i + 1}: nonpositive reactance {x}")
        lines.append(Line(index=len(lines) + 1, from_bus=f, to_bus=t, reactance=x))

    internal = frozenset(ids) if internal_buses is None else frozenset(internal_buses)
    if reference_bus is not None:
        ref = reference_bus
    elif slack_ids[0] in internal:
        ref = slack_ids[0]
    elif 1 in types and 1 in internal:
        ref = 1
    else:
        raise CaseformatError(
            f"type-3 bus {slack_ids[0]} is not internal and no fallback applies; "
            "pass reference_bus explicitly")

    buses = [Bus(id=b, injection=(generation[b] - loads[b]) / base,
                 is_reference=(b == ref)) for b in ids]
    case = _assemble(buses, lines, internal, name)
    validate_case(case)
    return case


def load_bundled_case(filename: str = "case118.json") -> GridCase:
    """Parse a case file shipped inside the package."""
    text = resources.files("gridlasso").joinpath("data", filename).read_text()
    if filename.endswith(".m"):
        return parse_matpower_case(text, name=filename)
    return parse_case_json(text)


def bundled_case_text(filename: str) -> str:
    return resources.files("gridlasso").joinpath("data", filename).read_text()


# ------------------------------------------------------------- scenarios

def parse_scenario(text: str) -> OutageScenario:
    """Scenario from either an inline list of outage line indices
    ("66,95,115") or a JSON object with "outages" and optional
    "reactance_changes" ([{"line": 12, "new_x": 0.5}, ...])."""
    text = text.strip()
    if not text:
        raise CaseformatError("scenario: empty")
    if text.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CaseformatError(f"scenario JSON: {exc}") from exc
        outages = doc.get("outages", [])
        changes = doc.get("reactance_changes", [])
        if not isinstance(outages, list) or not isinstance(changes, list):
            raise CaseformatError("scenario: outages and reactance_changes must be lists")
        parts = []
        for v in outages:
            if not isinstance(v, int) or isinstance(v, bool):
                raise CaseformatError(f"scenario.outages: {v!r} is not an integer")
            parts.append(LineChange(v, OUTAGE))
        for i, ch in enumerate(changes):
            locus = f"scenario.reactance_changes[{i}]"
            if not isinstance(ch, dict) or not isinstance(ch.get("line"), int) \
                    or not isinstance(ch.get("new_x"), (int, float)):
                raise CaseformatError(f"{locus}: needs integer line and numeric new_x")
            parts.append(LineChange(ch["line"], REACTANCE_CHANGE, float(ch["new_x"])))
        return OutageScenario(tuple(parts))
    try:
        indices = [int(tok) for tok in re.split(r"[,\s]+", text) if tok]
    except ValueError:
        raise CaseformatError(f"scenario: expected comma-separated line indices, got {text!r}") from None
    return OutageScenario.outages(*indices)


def scenario_document(scenario: OutageScenario) -> dict:
    return {
        "outages": [c.line_index for c in scenario.changes if c.kind == OUTAGE],
        "reactance_changes": [{"line": c.line_index, "new_x": float(c.new_reactance)}
                              for c in scenario.changes if c.kind == REACTANCE_CHANGE],
    }


def parse_bus_set(text: str) -> frozenset:
    """Bus id list with ranges: "1-45,113,117" -> {1..45, 113, 117}."""
    out = set()
    for tok in re.split(r"[,\s]+", text.strip()):
        if not tok:
            continue
        m = re.fullmatch(r"(\d+)-(\d+)", tok)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise CaseformatError(f"bus range {tok!r} is reversed")
            out.update(range(lo, hi + 1))
        elif re.fullmatch(r"\d+", tok):
            out.add(int(tok))
        else:
            raise CaseformatError(f"bus list: cannot read {tok!r}")
    if not out:
        raise CaseformatError("bus list: empty")
    return frozenset(out)


# ---------------------------------------------------------------- events

def write_event_json(record: EventRecord) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "case_name": record.case_name,
        "sigma_v": float(record.sigma_v),
        "seed": int(record.seed),
        "scenario": scenario_document(record.scenario),
        "pre_angles": [float(v) for v in record.pre_angles],
        "post_angles": [float(v) for v in record.post_angles],
        "noise": [float(v) for v in record.noise],
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def parse_event_json(text: str) -> EventRecord:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseformatError(f"event JSON: {exc}") from exc
    for key in ("sigma_v", "seed", "scenario", "pre_angles", "post_angles", "noise"):
        if key not in doc:
            raise CaseformatError(f"event JSON: missing {key}")
    sdoc = doc["scenario"]
    parts = [LineChange(v, OUTAGE) for v in sdoc.get("outages", [])]
    parts += [LineChange(ch["line"], REACTANCE_CHANGE, float(ch["new_x"]))
              for ch in sdoc.get("reactance_changes", [])]
    return EventRecord(scenario=OutageScenario(tuple(parts)),
                       sigma_v=float(doc["sigma_v"]), seed=int(doc["seed"]),
                       pre_angles=np.array(doc["pre_angles"], dtype=float),
                       post_angles=np.array(doc["post_angles"], dtype=float),
                       noise=np.array(doc["noise"], dtype=float),
                       case_name=doc.get("case_name", ""))


# ------------------------------------------------------------ path / report

def write_path_csv(path: PathResult) -> str:
    """Identification path as CSV.  Per lambda (descending, the solve
    order): one `lambda,,objective` row, then one `lambda,line,s` row
    per nonzero coefficient, lines ascending."""
    out = ["lambda,line_index,s_value"]
    position = {lab: j for j, lab in enumerate(path.line_labels)}
    for sol, sup in zip(path.solutions, path.supports):
        out.append(f"{_fmt(sol.lam)},,{_fmt(sol.objective)}")
        for lab in sorted(sup):
            out.append(f"{_fmt(sol.lam)},{lab},{_fmt(sol.s_hat[position[lab]])}")
    return "\n".join(out) + "\n"


def parse_path_csv(text: str):
    """Re-read a path CSV: (lambdas, objectives, supports, values) with
    values a per-lambda {line: s} dict."""
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != "lambda,line_index,s_value":
        raise CaseformatError("path CSV: bad header")
    lambdas, objectives, supports, values = [], [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise CaseformatError(f"path CSV: bad row {ln!r}")
        lam = float(parts[0])
        if parts[1] == "":
            lambdas.append(lam)
            objectives.append(float(parts[2]))
            supports.append(set())
            values.append({})
        else:
            if not lambdas or lam != lambdas[-1]:
                raise CaseformatError(f"path CSV: support row {ln!r} precedes its objective row")
            label = int(parts[1])
            supports[-1].add(label)
            values[-1][label] = float(parts[2])
    return (tuple(lambdas), tuple(objectives),
            tuple(frozenset(s) for s in supports), tuple(values))


def _json_score(v):
    # -inf marks a perfect-fit sentinel; JSON has no inf, so emit null
    return None if v is None or not math.isfinite(v) else float(v)


def build_report_document(report: SelectionReport, path: PathResult,
                          event: EventRecord | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "criterion": report.criterion,
        "sigma2": _json_score(report.sigma2),
        "lambdas": [float(v) for v in path.lambdas],
        "path": [{
            "lambda": float(sol.lam),
            "objective": float(sol.objective),
            "cycles": int(sol.cycles),
            "converged": bool(sol.converged),
            "support": sorted(sup),
        } for sol, sup in zip(path.solutions, path.supports)],
        "candidates": [{
            "k": cand.k,
            "lambda": float(cand.lam),
            "support": sorted(cand.support),
            "rss": float(cand.rss),
            "raw_score": _json_score(report.raw_scores[i]) if report.raw_scores else None,
            "scaled_score": _json_score(report.scaled_scores[i]) if report.scaled_scores else None,
        } for i, cand in enumerate(report.candidates)],
        "chosen_k": report.chosen_k,
        "chosen_support": sorted(report.chosen_support),
    }
    if event is not None:
        true = sorted(event.scenario.line_indices)
        doc["scenario"] = scenario_document(event.scenario)
        doc["true_support"] = true
        doc["exact_match"] = sorted(report.chosen_support) == true
        doc["sigma_v"] = float(event.sigma_v)
        doc["seed"] = int(event.seed)
    else:
        doc["scenario"] = None
        doc["true_support"] = None
        doc["exact_match"] = None
        doc["sigma_v"] = None
        doc["seed"] = None
    return doc


def write_report_json(report: SelectionReport, path: PathResult,
                      event: EventRecord | None = None) -> str:
    return json.dumps(build_report_document(report, path, event),
                      indent=2, allow_nan=False) + "\n"


def parse_report_json(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseformatError(f"report JSON: {exc}") from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CaseformatError("report JSON: unknown schema_version")
    return doc
