import csv
import io
import json
import math
import shutil
import subprocess

import numpy as np
import pytest
from scipy.integrate import trapezoid

from ptwell import cli


def _run(capsys, argv):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _table(text):
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body])


def test_boundstates_columns_and_values(capsys):
    code, out, _ = _run(capsys, ["boundstates", "--lambda", "0.5", "--k-max", "12"])
    assert code == 0
    header, data = _table(out)
    assert header == cli.BOUNDSTATE_COLUMNS
    assert data.shape[0] == 8
    np.testing.assert_allclose(data[:, 2], data[:, 1] ** 2, rtol=1e-15)
    assert np.all(data[:, -1] > 0)


def test_scatter_columns_and_hermitian_sum(capsys):
    code, out, _ = _run(capsys, ["scatter", "--v0", "10", "--vi", "0", "--lambda", "0.5",
                                 "--k-start", "3.3", "--k-stop", "10", "--steps", "50"])
    assert code == 0
    header, data = _table(out)
    assert header == cli.SCATTER_COLUMNS
    col = {c: data[:, i] for i, c in enumerate(header)}
    np.testing.assert_allclose(col["t"] + col["r_plus"], 1.0, atol=1e-12)
    assert np.all(col["unitarity_residual"] <= 1e-12)


def test_scatter_sign_rule_and_singular_flag(capsys):
    code, out, _ = _run(capsys, ["scatter", "--v0", "10", "--vi", "10", "--lambda", "0.5",
                                 "--k-start", "0.05", "--k-stop", "10", "--steps", "200"])
    assert code == 0
    header, data = _table(out)
    col = {c: data[:, i] for i, c in enumerate(header)}
    np.testing.assert_array_equal(col["sign_used"], np.where(col["t"] > 1, -1, 1))
    assert set(col["singular_flag"]) <= {0.0, 1.0}
    assert np.all(col["unitarity_residual"] <= 1e-9)


def test_scatter_rejects_nonpositive_k():
    with pytest.raises(SystemExit) as exc:
        cli.main(["scatter", "--k-start", "0", "--k-stop", "1"])
    assert exc.value.code == 2


def test_transport_profile_properties(capsys):
    code, out, _ = _run(capsys, ["transport", "--lambda", "0.5", "--k-index", "1", "--points", "2001"])
    assert code == 0
    header, data = _table(out)
    assert header == cli.TRANSPORT_COLUMNS
    col = {c: data[:, i] for i, c in enumerate(header)}
    x = col["x"]
    inside = np.abs(x) < 1
    assert np.ptp(col["j_d"][inside]) <= 1e-10 * col["j_d"][inside][0]
    np.testing.assert_allclose(col["q_d"], -col["q_d"][::-1], atol=1e-14)
    assert trapezoid(col["rho_d"], x) == pytest.approx(1.0, abs=1e-3)
    assert np.ptp(col["delta_point_mass"]) == 0 and np.ptp(col["c1_sq"]) == 0


def test_transport_by_k_value(capsys):
    code, out, _ = _run(capsys, ["transport", "--lambda", "0.5", "--k-value", "1.4466117648541856", "--points", "11"])
    assert code == 0
    assert len(out.strip().splitlines()) == 12


def test_transport_without_bound_state_exits_3(capsys):
    code, _, err = _run(capsys, ["transport", "--lambda", "0.5", "--k-value", "2.0"])
    assert code == 3
    assert "no bound state" in err
    code, _, err = _run(capsys, ["transport", "--k-index", "99", "--k-max", "5"])
    assert code == 3


def test_spectrum_writes_branch_and_ep_tables(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    code, _, _ = _run(capsys, ["spectrum", "--lambda-stop", "8", "--steps", "161", "--k-max", "20", "-o", str(out)])
    assert code == 0
    header, data = _table(out.read_text())
    assert header == cli.SPECTRUM_COLUMNS
    ep_header, eps = _table((tmp_path / "spec_ep.csv").read_text())
    assert ep_header == cli.EP_COLUMNS
    assert len(eps) >= 4
    col = {c: eps[:, i] for i, c in enumerate(ep_header)}
    high = col["k_star"] > 3 * math.sqrt(9.0)
    assert np.all(col["k_star"][high] <= 1.1 * col["kappa_bound"][high])
    assert np.all(col["residual"] <= 1e-10)


def test_hermitian_spectrum_is_real(capsys):
    code, out, _ = _run(capsys, ["spectrum", "--vi", "0", "--lambda-stop", "4", "--steps", "21", "--k-max", "2.99"])
    assert code == 0
    header, data = _table(out)
    assert np.all(data[:, header.index("k_im")] == 0)


def test_ep_subcommand(capsys):
    code, out, _ = _run(capsys, ["ep", "--lambda-stop", "8", "--steps", "81", "--k-max", "8"])
    assert code == 0
    header, data = _table(out)
    assert header == cli.EP_COLUMNS
    assert data[0, 0] == pytest.approx(7.1558841566068983, rel=1e-9)


def test_json_mirrors_csv_columns(capsys):
    _, out_csv, _ = _run(capsys, ["boundstates", "--lambda", "0.5", "--k-max", "6"])
    _, out_json, _ = _run(capsys, ["boundstates", "--lambda", "0.5", "--k-max", "6", "--format", "json"])
    header, data = _table(out_csv)
    doc = json.loads(out_json)
    assert doc["columns"] == header
    for i, c in enumerate(header):
        np.testing.assert_allclose(doc["data"][c], data[:, i], rtol=1e-15)


def test_output_is_deterministic_and_uses_17_digits(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["scatter", "--k-start", "0.5", "--k-stop", "5", "--steps", "20"]
    assert cli.main(argv + ["-o", str(a)]) == 0
    assert cli.main(argv + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    first = a.read_text().splitlines()[1].split(",")
    assert first[1] == format(float(first[1]), ".17g")


def test_parallel_scatter_matches_serial(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["scatter", "--k-start", "0.5", "--k-stop", "5", "--steps", "40"]
    assert cli.main(["--jobs", "1"] + argv + ["-o", str(a)]) == 0
    assert cli.main(["--jobs", "2"] + argv + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_jobs_default_from_environment(monkeypatch):
    monkeypatch.setenv("PTWELL_JOBS", "3")
    assert cli.default_jobs() == 3
    monkeypatch.setenv("PTWELL_JOBS", "many")
    with pytest.raises(cli.CliError):
        cli.default_jobs()
    monkeypatch.delenv("PTWELL_JOBS")
    assert cli.default_jobs() == 1


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "well.cfg"
    cfg.write_text("# scattering set\nv0 = 10\nvi=10\nlambda = 0.5\nk-start = 1\nk_stop = 5\nsteps = 3\n")
    _, from_cfg, _ = _run(capsys, ["--config", str(cfg), "scatter"])
    _, from_flags, _ = _run(capsys, ["scatter", "--v0", "10", "--vi", "10", "--lambda", "0.5",
                                     "--k-start", "1", "--k-stop", "5", "--steps", "3"])
    assert from_cfg == from_flags
    _, override, _ = _run(capsys, ["--config", str(cfg), "scatter", "--steps", "5"])
    assert len(override.strip().splitlines()) == 6


@pytest.mark.parametrize("text", ["bogus = 1\n", "v0 9\n", "v0 = deep\n"])
def test_bad_config_is_an_argument_error(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    with pytest.raises(SystemExit) as exc:
        cli.main(["--config", str(cfg), "boundstates"])
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [["validate", "--b", "-1"], ["boundstates", "--vi", "-2"], ["scatter", "--steps", "1"]])
def test_invalid_parameters_are_argument_errors(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_unwritable_output_exits_3(tmp_path, capsys):
    code, _, err = _run(capsys, ["boundstates", "--k-max", "3", "-o", str(tmp_path / "missing" / "x.csv")])
    assert code == 3
    assert "cannot write" in err


def test_validate_quick_passes(tmp_path, capsys):
    report = tmp_path / "report.txt"
    code, out, _ = _run(capsys, ["validate", "--level", "quick", "-o", str(report)])
    assert code == 0
    assert "criteria passed" in out
    assert "FAIL" not in report.read_text()


def test_console_script_is_installed():
    exe = shutil.which("ptwell")
    assert exe is not None
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True, check=True)
    for name in ("spectrum", "scatter", "transport", "boundstates", "ep", "validate"):
        assert name in proc.stdout
