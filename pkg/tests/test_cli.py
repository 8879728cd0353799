import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from hbvm.cli import main, read_trajectory_csv, run, write_trajectory_csv
from hbvm.core import as_runge_kutta, build_tableau
from oracles import gauss_collocation_tableau


def rows(text):
    return list(csv.reader(io.StringIO(text)))


# -- tableau ---------------------------------------------------------------


def test_tableau_midpoint():
    code, out = run(["tableau", "--s", "1", "--k", "1"])
    assert code == 0
    header, row = rows(out)
    assert header == ["c", "b", "M_1"]
    assert [float(v) for v in row] == [0.5, 1.0, 0.5]


def test_tableau_k_below_s(capsys):
    assert main(["tableau", "--s", "3", "--k", "2"]) == 2
    assert "k must be >= s" in capsys.readouterr().err


def test_tableau_gauss4():
    code, out = run(["tableau", "--s", "2", "--k", "2", "--format", "csv"])
    assert code == 0
    data = np.array([[float(v) for v in r] for r in rows(out)[1:]])
    M, b, c = gauss_collocation_tableau(2)
    assert np.allclose(data[:, 0], c, atol=1e-15)
    assert np.allclose(data[:, 1], b, atol=1e-15)
    assert np.allclose(data[:, 2:], M, atol=1e-15)
    assert M[0, 1] == pytest.approx(0.25 - np.sqrt(3) / 6)


def test_tableau_json_and_basis():
    code, out = run(["tableau", "--s", "2", "--k", "5", "--format", "json"])
    data = json.loads(out)
    tab = build_tableau(5, 2)
    M, b, c = as_runge_kutta(tab)
    assert np.array_equal(data["M"], M) and np.array_equal(data["c"], c)
    assert np.array_equal(data["omega"], b) and np.array_equal(data["A"], tab.integrated_basis)
    code, out = run(["tableau", "--s", "2", "--k", "5", "--include-basis"])
    assert rows(out)[0][-2:] == ["A_1", "A_2"]


def test_unknown_flags_are_usage_errors():
    assert main(["tableau", "--s", "x", "--k", "1"]) == 2
    assert main(["integrate", "--problem", "kepler", "--s", "1", "--k", "1", "--h", "1", "--steps", "1"]) == 2


# -- integrate -------------------------------------------------------------


def integrate_args(tmp_path, *extra):
    return ["integrate", "--out-dir", str(tmp_path)] + list(extra)


def test_integrate_harmonic(tmp_path):
    code, out = run(integrate_args(tmp_path, "--problem", "harmonic", "--s", "1", "--k", "1", "--h", "0.1", "--steps", "100"))
    assert code == 0 and out.startswith("hamiltonian: max rel drift")
    t, states = read_trajectory_csv(tmp_path / "trajectory.csv")
    assert states.shape == (101, 2) and t[-1] == pytest.approx(10.0)
    drift = rows((tmp_path / "drift.csv").read_text())
    assert drift[0] == ["t", "hamiltonian_rel_err"]
    assert max(float(r[1]) for r in drift[1:]) <= 1e-13
    man = json.loads((tmp_path / "manifest.json").read_text())
    for key in ("problem", "s", "k", "h", "steps", "abs_tol", "rel_tol", "max_iter", "outputs", "determinism"):
        assert key in man
    assert man["status"] == "ok" and len(man["outputs"]) == 2


def test_integrate_y0_override(tmp_path):
    args = integrate_args(tmp_path, "--problem", "harmonic", "--s", "1", "--k", "1", "--h", "0.1", "--steps", "3")
    assert run(args + ["--y0", "0,2"])[0] == 0
    assert read_trajectory_csv(tmp_path / "trajectory.csv")[1][0].tolist() == [0.0, 2.0]
    assert run(args + ["--y0", "1,2,3"])[0] == 2
    assert run(args + ["--drift", "energy"])[0] == 2


def test_csv_round_trip(tmp_path, rng):
    states = rng.standard_normal((20, 4)) * 10.0 ** rng.integers(-12, 12, (20, 4))
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, 0.0, 0.1, states)
    t, back = read_trajectory_csv(path)
    assert np.array_equal(back, states)
    assert np.array_equal(t, 0.1 * np.arange(20))


def test_integrate_deterministic(tmp_path):
    args = ["--problem", "quintic", "--s", "2", "--k", "5", "--h", "0.5", "--steps", "50"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(integrate_args(a, *args))[0] == 0
    assert run(integrate_args(b, *args))[0] == 0
    for name in ("trajectory.csv", "drift.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_integrate_nonconvergence_keeps_partial_output(tmp_path):
    code, _ = run(integrate_args(tmp_path, "--problem", "sitnikov", "--s", "2", "--k", "18", "--h", "0.5", "--steps", "10", "--max-iter", "1"))
    assert code == 3
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "nonconvergence" and man["failing_step"] == 1
    assert read_trajectory_csv(tmp_path / "trajectory.csv")[1].shape == (1, 18)


def test_integrate_collision(tmp_path):
    y0 = ["0"] * 18
    y0[3] = "1"
    code, _ = run(integrate_args(tmp_path, "--problem", "sitnikov", "--s", "1", "--k", "1", "--h", "0.1", "--steps", "5", "--y0", ",".join(y0)))
    assert code == 4
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "evaluation_failure" and man["failing_step"] == 1


def test_henon_heiles_gauss_drift(tmp_path):
    code, _ = run(integrate_args(tmp_path, "--problem", "henon-heiles", "--s", "2", "--k", "2", "--h", "1", "--steps", "5000"))
    assert code == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["drift"]["hamiltonian"]["max"] > 1e-7


def test_sitnikov_hbvm(tmp_path):
    code, _ = run(integrate_args(tmp_path, "--problem", "sitnikov", "--s", "2", "--k", "18", "--h", "0.5", "--steps", "600"))
    assert code == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["drift"]["hamiltonian"]["max"] <= 1e-10
    assert np.isfinite(man["drift"]["angular_momentum_norm"]["max"])


# -- convergence -----------------------------------------------------------


def orders(out):
    return [float(r[2]) for r in rows(out)[1:] if r[2]]


def test_convergence_levels_validation():
    assert main(["convergence", "--problem", "harmonic", "--s", "1", "--k", "1", "--h0", "0.1", "--levels", "1", "--t-end", "1"]) == 2


def test_convergence_midpoint():
    code, out = run(["convergence", "--problem", "harmonic", "--s", "1", "--k", "1", "--h0", "0.1", "--levels", "3", "--t-end", "1"])
    assert code == 0 and rows(out)[0] == ["h", "error", "observed_order"]
    assert all(abs(o - 2) <= 0.3 for o in orders(out))


def test_convergence_henon_heiles():
    code, out = run(["convergence", "--problem", "henon-heiles", "--s", "2", "--k", "4", "--h0", "0.5", "--levels", "3", "--t-end", "1"])
    assert code == 0
    assert all(abs(o - 4) <= 0.6 for o in orders(out))


def test_convergence_bad_t_end():
    assert main(["convergence", "--problem", "harmonic", "--s", "1", "--k", "1", "--h0", "0.3", "--levels", "2", "--t-end", "1"]) == 2


# -- annulus ---------------------------------------------------------------


def test_annulus_coarse(tmp_path):
    args = ["annulus", "--s", "2", "--k", "5", "--h", "1", "--steps", "300", "--tol", "1e-3"]
    code, out = run(args + ["--out-dir", str(tmp_path)])
    assert code == 0
    header, row = rows(out)
    assert header == ["q0", "p0", "c_low", "c_high", "h_rel_err", "probes"]
    assert float(row[1]) == pytest.approx(0.3757, abs=2e-3)
    probes = rows((tmp_path / "probes.csv").read_text())
    assert probes[0] == ["c", "escaped", "steps_run", "reason"] and len(probes) - 1 == int(row[5])
    assert json.loads((tmp_path / "manifest.json").read_text())["problem"] == "quintic"
    code, out2 = run(args + ["--format", "json"])
    assert json.loads(out2)["p0"] == float(row[1])


def test_annulus_bad_radius():
    assert main(["annulus", "--s", "2", "--k", "5", "--escape-radius", "0.5", "--tol", "0.1"]) == 2


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hbvm.cli", "tableau", "--s", "1", "--k", "1"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and proc.stdout.splitlines()[1] == "0.5,1,0.5"
