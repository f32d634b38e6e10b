import csv
import io
import json
import re
import subprocess
import sys

import pytest
from strategies import SPECS

from rdcache import __version__, it_core
from rdcache.cli import EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, main, parse_grid
from rdcache.errors import NoConvergence

COMMENT = re.compile(r"^# command=(\S+) config_hash=([0-9a-f]{16}) seed=(\d+) version=(\S+)$")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    lines = text.splitlines()
    assert COMMENT.match(lines[0]), lines[0]
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("0.1,0.2") == [0.1, 0.2]
    assert parse_grid("0.4:9:1") == [0.4]


def test_dsbs_command_csv(capsys):
    code, out, _ = run(capsys, "dsbs", "--rho", "0.1", "--C-grid", "0:1.4:3")
    assert code == EXIT_OK
    m = COMMENT.match(out.splitlines()[0])
    assert m.group(1) == "dsbs" and m.group(3) == "0" and m.group(4) == __version__
    rows = parse_csv(out)
    assert list(rows[0]) == ["C", "lower", "upper", "exact"]
    assert rows[0]["lower"] == "1.0" and rows[0]["exact"] == "true"


def test_output_is_byte_identical_across_runs(capsys):
    argv = ["rdc", "--spec", str(SPECS / "dsbs_rho0.1.json"), "--D", "0.0", "--C-grid", "0,0.5,1.0", "--restarts", "4"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == EXIT_OK
    assert first[1] == second[1]
    # a fresh interpreter has no warm caches
    proc = subprocess.run([sys.executable, "-m", "rdcache", *argv], capture_output=True, text=True, check=True)
    assert proc.stdout == first[1]


def test_seed_changes_hash(capsys):
    a = run(capsys, "dsbs", "--rho", "0.1", "--C-grid", "0.5")[1].splitlines()[0]
    b = run(capsys, "dsbs", "--rho", "0.1", "--C-grid", "0.5", "--seed", "7")[1].splitlines()[0]
    assert COMMENT.match(a).group(2) != COMMENT.match(b).group(2)


def test_rdc_rows(capsys):
    code, out, _ = run(
        capsys, "rdc", "--spec", str(SPECS / "dsbs_rho0.1.json"), "--D", "0", "--C-grid", "0,1.0", "--restarts", "4"
    )
    rows = parse_csv(out)
    assert code == EXIT_OK
    assert float(rows[0]["R_solver"]) == pytest.approx(1.0, abs=1e-9)
    assert float(rows[1]["R_supergenie"]) <= float(rows[1]["R_solver"]) + 1e-9


def test_json_format_and_out_file(capsys, tmp_path):
    target = tmp_path / "g.json"
    code, out, _ = run(capsys, "gaussian", "--rho", "0.8", "--D", "0.1", "--C", "2.0", "--format", "json", "--out", str(target))
    assert code == EXIT_OK and out == ""
    doc = json.loads(target.read_text())
    assert doc["meta"]["command"] == "gaussian"
    row = doc["rows"][0]
    assert row["region"] == "S2" and row["rate_or_upper"] == pytest.approx(0.29248, abs=1e-5)


def test_rd_and_common_info(capsys):
    code, out, _ = run(capsys, "rd", "--spec", str(SPECS / "dsbs_rho0.1.json"), "--D", "0,0.5")
    assert code == EXIT_OK
    assert [float(r["R"]) for r in parse_csv(out)] == pytest.approx([1.0, 0.0], abs=1e-9)
    code, out, _ = run(capsys, "common-info", "--spec", str(SPECS / "common_part.json"))
    rows = parse_csv(out)
    assert rows[0]["quantity"] == "gacs_korner_zero" and float(rows[0]["value"]) == pytest.approx(1.0, abs=1e-12)
    code, out, _ = run(capsys, "common-info", "--spec", str(SPECS / "gaussian_rho0.8.json"))
    assert parse_csv(out)[0]["quantity"] == "wyner_gaussian"


def test_two_user_command(capsys):
    code, out, _ = run(
        capsys, "two-user", "--spec", str(SPECS / "dsbs_rho0.1.json"), "--D", "0.03", "--C-grid", "0.1", "--grid-steps", "4"
    )
    assert code == EXIT_OK
    row = parse_csv(out)[0]
    assert float(row["lower_genie"]) == pytest.approx(float(row["dsbs_lower"]), abs=1e-4)
    assert float(row["upper"]) >= float(row["dsbs_lower"]) - 1e-9


def test_config_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "rd", "--spec", str(tmp_path / "missing.json"), "--D", "0.1")[0] == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "rd", "--spec", str(bad), "--D", "0.1")[0] == EXIT_CONFIG
    assert run(capsys, "dsbs", "--rho", "0.1", "--C-grid", "1:2")[0] == EXIT_CONFIG
    assert run(capsys, "dsbs", "--rho", "0.9", "--C-grid", "0.1")[0] == EXIT_CONFIG
    code, _, err = run(capsys, "rd", "--spec", str(SPECS / "dsbs_rho0.1.json"), "--D", "0.1", "--source", "5")
    assert code == EXIT_CONFIG and "rdcache: error" in err
    assert run(capsys, "nope")[0] == EXIT_CONFIG


def test_non_converged_rows_exit_3(capsys, monkeypatch):
    def stalls(*args, **kwargs):
        raise NoConvergence("stalled")

    monkeypatch.setattr(it_core, "marginal_rd", stalls)
    code, out, _ = run(capsys, "rd", "--spec", str(SPECS / "dsbs_rho0.1.json"), "--D", "0.1")
    assert code == EXIT_NOT_CONVERGED
    assert parse_csv(out)[0]["converged"] == "false"


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "rdcache", "dsbs", "--rho", "0.25", "--C-grid", "1.0"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert COMMENT.match(proc.stdout.splitlines()[0])
