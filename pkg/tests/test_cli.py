"""End-to-end runs of the command-line interface in a subprocess."""

import json
import re
import subprocess
import sys

import pytest

import gridlasso as gl
from gridlasso import io_formats as io


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "gridlasso.cli", *args],
                          capture_output=True, text=True)


def stdout_fields(text):
    out = {}
    for line in text.splitlines():
        if "=" in line and " " not in line.split("=", 1)[0]:
            key, _, value = line.partition("=")
            out.setdefault(key, value)
    return out


@pytest.fixture(scope="module")
def ring_file(tmp_path_factory, ring5):
    path = tmp_path_factory.mktemp("cases") / "ring.json"
    path.write_text(io.write_case_json(ring5))
    return str(path)


def test_version_flag():
    proc = run_cli("--version")
    assert proc.returncode == 0
    assert proc.stdout.strip() == gl.__version__


def test_case_info_bundled_default():
    proc = run_cli("case-info")
    assert proc.returncode == 0
    fields = stdout_fields(proc.stdout)
    assert fields["name"] == "case118"
    assert fields["N"] == "118" and fields["L"] == "185"
    assert fields["internal"] == "49" and fields["external"] == "69"
    assert fields["reference_bus"] == "1"
    assert fields["connected"] == "yes"
    assert fields["slack_adjustment"] == "0"
    assert float(fields["injection_sum"]) == pytest.approx(0.0, abs=1e-9)


def test_case_info_partition_overrides(ring_file, tmp_path):
    proc = run_cli("case-info", "--case", ring_file, "--reference", "2")
    assert proc.returncode == 0
    fields = stdout_fields(proc.stdout)
    assert fields["N"] == "5" and fields["L"] == "6"
    assert fields["reference_bus"] == "2"
    listing = tmp_path / "internal.txt"
    listing.write_text("1-3\n")
    proc = run_cli("case-info", "--case", ring_file, "--internal", f"@{listing}")
    assert proc.returncode == 0
    fields = stdout_fields(proc.stdout)
    assert fields["internal"] == "3" and fields["external"] == "2"
    proc = run_cli("case-info", "--case", ring_file, "--internal", "1-3",
                   "--reference", "5")
    assert proc.returncode == 2
    assert "internal" in proc.stderr


def test_case_info_bad_path_exits_2(tmp_path):
    proc = run_cli("case-info", "--case", str(tmp_path / "missing.json"))
    assert proc.returncode == 2
    assert proc.stderr.startswith("error:")


def test_simulate_writes_deterministic_event(tmp_path):
    args = ("simulate", "--scenario", "66,95,115", "--seed", "0")
    a, b = tmp_path / "a", tmp_path / "b"
    first = run_cli(*args, "--out", str(a))
    second = run_cli(*args, "--out", str(b))
    assert first.returncode == 0 and second.returncode == 0
    assert f"wrote {a / 'event.json'}" in first.stdout
    assert "sigma_v=0.035050000000000005 seed=0" in first.stdout
    text_a = (a / "event.json").read_text()
    assert text_a == (b / "event.json").read_text()
    other = run_cli(*args[:-1], "7", "--out", str(tmp_path / "c"))
    assert other.returncode == 0
    assert (tmp_path / "c" / "event.json").read_text() != text_a


def test_simulate_stdout_mode(ring_file):
    proc = run_cli("simulate", "--case", ring_file, "--scenario", "6",
                   "--sigma", "0.01", "--seed", "3")
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["scenario"] == {"outages": [6], "reactance_changes": []}
    assert doc["sigma_v"] == 0.01 and doc["seed"] == 3
    missing = run_cli("simulate", "--case", ring_file)
    assert missing.returncode == 2
    assert "needs --scenario" in missing.stderr


def test_identify_from_event_file(ring_file, tmp_path):
    sim = run_cli("simulate", "--case", ring_file, "--scenario", "6",
                  "--sigma", "0", "--out", str(tmp_path))
    assert sim.returncode == 0
    proc = run_cli("identify", "--case", ring_file,
                   "--event", str(tmp_path / "event.json"),
                   "--out", str(tmp_path / "run"))
    assert proc.returncode == 0
    lines = proc.stdout.splitlines()
    assert lines[0] == "criterion=mdl chosen_k=1 support={6}"
    assert lines[1] == "true_support={6} exact_match=yes"
    assert re.fullmatch(
        r"k=1 lambda=\S+ rss=\S+ raw=-inf scaled=-inf", lines[2])
    report = io.parse_report_json((tmp_path / "run" / "report.json").read_text())
    assert report["chosen_support"] == [6] and report["exact_match"] is True
    parsed = io.parse_path_csv((tmp_path / "run" / "path.csv").read_text())
    assert len(parsed[0]) == 20  # default grid size


def test_identify_reads_only_internal_angles(tmp_path):
    sim = run_cli("simulate", "--scenario", "66,95,115", "--seed", "0",
                  "--out", str(tmp_path))
    assert sim.returncode == 0
    event_path = tmp_path / "event.json"
    base = run_cli("identify", "--event", str(event_path),
                   "--out", str(tmp_path / "clean"))
    assert base.returncode == 0
    # trash angles at external buses 51 and 61 (rows 50/60); the
    # estimate must not change because those entries are never read
    doc = json.loads(event_path.read_text())
    doc["post_angles"][50] += 40.0
    doc["pre_angles"][60] = -9.9
    event_path.write_text(json.dumps(doc, indent=2) + "\n")
    tampered = run_cli("identify", "--event", str(event_path),
                       "--out", str(tmp_path / "tampered"))
    assert tampered.returncode == 0
    assert tampered.stdout == base.stdout
    assert ((tmp_path / "tampered" / "path.csv").read_text()
            == (tmp_path / "clean" / "path.csv").read_text())
    clean = io.parse_report_json((tmp_path / "clean" / "report.json").read_text())
    dirty = io.parse_report_json((tmp_path / "tampered" / "report.json").read_text())
    assert {k: v for k, v in dirty.items() if k != "scenario"} \
        == {k: v for k, v in clean.items() if k != "scenario"}


def test_identify_flag_validation(ring_file, tmp_path):
    (tmp_path / "event.json").write_text("{}")
    conflict = run_cli("identify", "--case", ring_file, "--scenario", "6",
                       "--event", str(tmp_path / "event.json"))
    assert conflict.returncode == 2 and "conflicts" in conflict.stderr
    neither = run_cli("identify", "--case", ring_file)
    assert neither.returncode == 2 and "needs --event or --scenario" in neither.stderr
    no_k = run_cli("identify", "--case", ring_file, "--scenario", "6",
                   "--criterion", "fixed")
    assert no_k.returncode == 2 and "needs --k" in no_k.stderr


def test_identify_fixed_k_not_on_path(ring_file):
    proc = run_cli("identify", "--case", ring_file, "--scenario", "6",
                   "--sigma", "0", "--criterion", "fixed", "--k", "6")
    assert proc.returncode == 2
    assert "path cardinalities" in proc.stderr


def test_identify_variance_and_raw_scores(ring_file):
    # the ring is too small for the variance test (a k=3 candidate
    # leaves a single untouched bus), so use the bundled case
    proc = run_cli("identify", "--scenario", "66,95,115", "--seed", "2",
                   "--lambdas", "12", "--criterion", "variance")
    assert proc.returncode == 0
    assert proc.stdout.startswith("criterion=variance chosen_k=")
    raw = run_cli("identify", "--case", ring_file, "--scenario", "6",
                  "--sigma", "0.01", "--seed", "2", "--raw-scores")
    assert raw.returncode == 0
    assert "criterion=mdl" in raw.stdout


def test_simulate_islanding_exits_3(tmp_path):
    tri = tmp_path / "triangle.json"
    tri.write_text(io.bundled_case_text("triangle.json"))
    proc = run_cli("simulate", "--case", str(tri), "--scenario", "1,2",
                   "--sigma", "0")
    assert proc.returncode == 3
    assert "islands the grid" in proc.stderr


def test_identify_nonconvergence_exits_4(ring_file, tmp_path):
    proc = run_cli("identify", "--case", ring_file, "--scenario", "2,6",
                   "--sigma", "0.02", "--max-cycles", "1",
                   "--out", str(tmp_path))
    assert proc.returncode == 4
    assert "warning: no convergence at lambda=" in proc.stderr
    # outputs are still written for inspection
    assert (tmp_path / "path.csv").exists()
    assert (tmp_path / "report.json").exists()


def test_reproduce_118_single_seed(tmp_path):
    proc = run_cli("reproduce-118", "--seeds", "1", "--out", str(tmp_path))
    assert proc.returncode == 0
    lines = proc.stdout.splitlines()
    assert lines[0] == "case=case118 N=118 L=185 sigma_v=0.035050000000000005"
    assert lines[1] == "true_support={66,95,115} seeds=1 starting at 0"
    assert re.fullmatch(
        r"seed 0: path_hit=(yes|no) mdl_k=\d+ mdl_exact=(yes|no) "
        r"var_k=\d+ var_exact=(yes|no) success=(yes|no)", lines[2])
    assert lines[3].split() == ["k", "rss", "mdl_raw", "mdl_scaled",
                                "var_raw", "var_scaled"]
    assert re.fullmatch(r"success \d/1 \(both criteria exact\)", lines[-1])
    seed_dir = tmp_path / "seed0"
    for name in ("event.json", "path.csv", "report_mdl.json",
                 "report_variance.json"):
        assert (seed_dir / name).exists()
    mdl = io.parse_report_json((seed_dir / "report_mdl.json").read_text())
    assert mdl["true_support"] == [66, 95, 115]
