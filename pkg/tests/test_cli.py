from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from obe_steady.cli import SCAN_COLUMNS, UsageError, main, parse_grid, parse_momentum, parse_number


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("#") and "schema_version=1" in lines[0]
    return list(csv.reader(io.StringIO("\n".join(lines[1:]))))


def test_parse_helpers():
    assert parse_number("pi/8") == pytest.approx(math.pi / 8)
    assert parse_number("-2*pi/16") == pytest.approx(-math.pi / 8)
    assert parse_grid("0:1:5") == [0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.1, 0.2") == [0.1, 0.2]
    assert parse_momentum("3/2") == parse_momentum("1.5")
    for bad in ("__import__('os')", "1/0", "x", "1e400"):
        with pytest.raises(UsageError):
            parse_number(bad)
    with pytest.raises(UsageError):
        parse_grid("0:1")
    with pytest.raises(UsageError):
        parse_grid("0:1:0")


def test_steady_spin_half(capsys):
    code, out, _ = run(capsys, "steady", "--jg", "1/2", "--je", "1/2", "--epsilon", "0", "--saturation", "3")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == 1
    assert doc["pi_e"] == pytest.approx(1 / 3)
    assert doc["alpha0"] == pytest.approx(6) and doc["alpha1"] == pytest.approx(2)
    assert doc["dark_dimension"] == 0
    for key in ("rho_gg", "rho_ee", "rho_eg", "lambda_squared", "nu_squared", "beta"):
        assert key in doc
    assert doc["lambda_squared"] == pytest.approx([1 / 3, 1 / 3])


def test_steady_unique_dark(capsys):
    code, out, _ = run(capsys, "steady", "--jg", "1", "--je", "1", "--epsilon", "0.3", "--saturation", "2")
    doc = json.loads(out)
    assert code == 0 and doc["dark_dimension"] == 1 and doc["pi_e"] == 0.0


def test_steady_dark_exception(capsys):
    code, out, err = run(capsys, "steady", "--jg", "1/2", "--je", "1/2", "--epsilon", "0.25*pi")
    assert code == 65
    assert "dark-exception: circular polarization" in err
    assert json.loads(out)["status"] == "dark-exception"


def test_steady_non_unique(capsys):
    code, out, _ = run(capsys, "steady", "--jg", "1", "--je", "0", "--epsilon", "0.2")
    assert code == 2
    doc = json.loads(out)
    assert doc["status"] == "non-unique" and doc["dark_dimension"] == 2


def test_steady_non_unique_with_initial_state(capsys):
    code, out, _ = run(capsys, "steady", "--jg", "1", "--je", "0", "--epsilon", "0.2", "--initial", "random",
                       "--seed", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["status"] == "integrated" and doc["pi_e"] < 1e-8


@pytest.mark.parametrize("argv", [
    ["steady", "--jg", "1", "--je", "3"],
    ["steady", "--jg", "1/2", "--je", "1/2", "--epsilon", "1.0"],
    ["steady", "--jg", "abc", "--je", "1"],
    ["steady", "--jg", "1", "--je", "2", "--saturation", "1", "--rabi", "1"],
    ["steady", "--jg", "1"],
    ["bogus"],
    ["scan", "--jg", "1", "--je", "1"],
])
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 64


def test_rabi_and_detuning(capsys):
    # |Omega| = 1, delta = 0.5 gives S = 1/(1/4 + 1/4) = 2
    code, out, _ = run(capsys, "steady", "--jg", "0", "--je", "1", "--rabi", "1", "--detuning", "0.5")
    assert code == 0
    assert json.loads(out)["pi_e"] == pytest.approx(2 / 5)


def test_output_is_byte_stable(capsys, tmp_path):
    argv = ["steady", "--jg", "3/2", "--je", "5/2", "--epsilon", "pi/7", "--saturation", "0.7",
            "--detuning", "0.3"]
    first = run(capsys, *argv)[1]
    second = run(capsys, *argv)[1]
    assert first == second
    target = tmp_path / "out.json"
    assert run(capsys, *argv, "--out", str(target))[0] == 0
    assert target.read_text() == first


def test_floats_round_trip(capsys):
    code, out, _ = run(capsys, "steady", "--jg", "1", "--je", "2", "--epsilon", "0.3", "--saturation", "0.7")
    doc = json.loads(out)
    from obe_steady import FieldParams, TransitionSpec, polarization_from_ellipticity, steady_state

    res = steady_state(TransitionSpec.of(1, 2), polarization_from_ellipticity(0.3), FieldParams.from_saturation(0.7))
    assert doc["pi_e"] == res.excited_population


def test_scan_csv(capsys):
    code, out, _ = run(capsys, "scan", "--jg", "1/2", "--je", "1/2", "--epsilon", "0:pi/4:5", "--saturation", "3")
    assert code == 0
    rows = read_csv(out)
    assert tuple(rows[0]) == SCAN_COLUMNS
    assert len(rows) == 6
    assert float(rows[1][2]) == pytest.approx(1 / 3)
    assert float(rows[-1][2]) == 0.0


def test_scan_first_row_matches_steady(capsys):
    _, out, _ = run(capsys, "scan", "--jg", "1", "--je", "2", "--epsilon", "0,0.2", "--saturation", "0.4")
    row = read_csv(out)[1]
    _, out, _ = run(capsys, "steady", "--jg", "1", "--je", "2", "--epsilon", "0", "--saturation", "0.4")
    assert float(row[2]) == pytest.approx(json.loads(out)["pi_e"], rel=1e-12)


def test_scan_multiple_saturations_and_threads(capsys, monkeypatch):
    argv = ["scan", "--jg", "3/2", "--je", "5/2", "--epsilon", "0:pi/4:9", "--saturation", "0.01,1,100",
            "--format", "json"]
    monkeypatch.setenv("OBE_STEADY_THREADS", "1")
    serial = run(capsys, *argv)[1]
    monkeypatch.setenv("OBE_STEADY_THREADS", "4")
    threaded = run(capsys, *argv)[1]
    assert serial == threaded
    doc = json.loads(serial)
    assert doc["columns"][0] == "saturation" and len(doc["rows"]) == 27
    assert [r[0] for r in doc["rows"][:9]] == [0.01] * 9


def test_scan_absorption_shapes(capsys):
    _, out, _ = run(capsys, "scan", "--jg", "5/2", "--je", "5/2", "--epsilon", "0:pi/4-1e-3:12")
    norm = [float(r[3]) for r in read_csv(out)[1:]]
    assert max(norm) <= 1 + 1e-12 and all(a >= b for a, b in zip(norm, norm[1:]))
    _, out, _ = run(capsys, "scan", "--jg", "2", "--je", "3", "--epsilon", "0:pi/4:12")
    norm = [float(r[3]) for r in read_csv(out)[1:]]
    assert min(norm) >= 1 - 1e-12 and all(a <= b for a, b in zip(norm, norm[1:]))


def test_dark_command(capsys):
    code, out, _ = run(capsys, "dark", "--jg", "2", "--je", "1", "--epsilon", "pi/8")
    doc = json.loads(out)
    assert code == 0 and doc["dark_dimension"] == 2
    assert max(doc["residuals"]) < 1e-12
    code, out, _ = run(capsys, "dark", "--jg", "1", "--je", "2")
    assert code == 0 and json.loads(out)["dark_dimension"] == 0
    code, out, _ = run(capsys, "dark", "--jg", "1", "--je", "1", "--format", "csv")
    assert code == 0 and out.startswith("#")


def test_broadband_command(capsys):
    code, out, _ = run(capsys, "broadband", "--jg", "0", "--je", "1", "--rabi", "0.5", "--bandwidth", "1")
    doc = json.loads(out)
    assert code == 0
    assert doc["effective_saturation"] == pytest.approx(1 / 3)
    assert doc["pi_e"] == pytest.approx(0.2)
    code, _, _ = run(capsys, "broadband", "--jg", "0", "--je", "1", "--bandwidth", "-1")
    assert code == 64


def test_verify_quick(capsys, tmp_path):
    report = tmp_path / "report.json"
    code, out, _ = run(capsys, "verify", "--quick", "--out", str(report))
    assert code == 0
    assert out.count("[PASS]") == 10
    doc = json.loads(report.read_text())
    assert doc["passed"] and len(doc["checks"]) == 10


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "obe_steady", "steady", "--jg", "1/2", "--je", "1/2",
                           "--saturation", "3"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pi_e"] == pytest.approx(1 / 3)
