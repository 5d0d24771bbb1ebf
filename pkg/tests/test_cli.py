import json
import subprocess
import sys

import numpy as np
import pytest

from hotspot import DivergenceError, isotropic_params
from hotspot.asymptotics import CONDBC_VALUE, D_hat_for_condition
from hotspot.cli import main
from hotspot.config import dump_config
from hotspot.report import check_report


def _ini(tmp_path, name, **kw):
    path = tmp_path / name
    path.write_text(dump_config(isotropic_params(**kw)))
    return str(path)


@pytest.fixture
def sym_ini(tmp_path):
    return _ini(tmp_path, "sym.ini", epsilon=0.05, D_hat=1.0, A0=1.0, A_bar=2.0)


@pytest.fixture
def asym_ini(tmp_path):
    return _ini(tmp_path, "asym.ini", epsilon=0.05, D_hat=0.1, A0=1.0, A_bar=5.0)


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    report = json.loads(out.out) if out.out.strip() else None
    return code, report, out.err


class TestPredict:
    def test_symmetric_three_spikes(self, capsys, sym_ini):
        code, rep, _ = _run(capsys, "predict", sym_ini, "--K", "3")
        assert code == 0
        assert check_report(rep) == []
        np.testing.assert_allclose(rep["predicted"]["pattern"]["positions"], (-2 / 3, 0.0, 2 / 3), atol=1e-12)

    def test_asymmetric(self, capsys, asym_ini):
        code, rep, _ = _run(capsys, "predict", asym_ini, "--mode", "asymmetric")
        assert code == 0
        assert rep["predicted"]["classification"] == "unique-solution"
        v = rep["predicted"]["pattern"]["v_amplitudes"]
        assert v[0] < v[1]

    def test_large_first(self, capsys, asym_ini):
        _, rep, _ = _run(capsys, "predict", asym_ini, "--mode", "asymmetric", "--order", "large-first")
        v = rep["predicted"]["pattern"]["v_amplitudes"]
        assert v[0] > v[1]

    def test_no_solution(self, capsys, tmp_path):
        ini = _ini(tmp_path, "none.ini", D_hat=2.0, A_bar=5.0)
        code, rep, err = _run(capsys, "predict", ini, "--mode", "asymmetric")
        assert code == 3
        assert rep["predicted"]["classification"] == "no-solution"
        assert "no asymmetric solution" in err

    def test_boundary_root(self, capsys, tmp_path):
        """On the branch-point boundary the root is reported but no pair exists."""
        base = isotropic_params(D_hat=0.1, A_bar=5.0)
        ini = _ini(tmp_path, "bnd.ini", D_hat=D_hat_for_condition(1.0, base), A_bar=5.0)
        code, rep, _ = _run(capsys, "predict", ini, "--mode", "asymmetric")
        assert code == 3
        assert rep["predicted"]["degenerate_root"] == pytest.approx(1.0)

    def test_out_file(self, capsys, tmp_path, sym_ini):
        dest = tmp_path / "r.json"
        code, rep, _ = _run(capsys, "predict", sym_ini, "--out", str(dest))
        assert code == 0 and rep is None
        assert check_report(json.loads(dest.read_text())) == []

    def test_deterministic(self, tmp_path, sym_ini):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["predict", sym_ini, "--K", "2", "--out", str(a)])
        main(["predict", sym_ini, "--K", "2", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestConfigErrors:
    def test_missing_file(self, capsys, tmp_path):
        code, rep, err = _run(capsys, "predict", str(tmp_path / "missing.ini"))
        assert code == 2 and rep is None
        assert "configuration error" in err

    def test_invalid_values(self, capsys, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[model]\nL = 1\nepsilon = 0.05\nD_hat = -1\n[A0]\nkind = constant\nparams = 1\n"
                       "[gamma]\nkind = constant\nparams = 1\n")
        code, _, err = _run(capsys, "predict", str(ini))
        assert code == 2
        assert "D_hat" in err

    def test_bad_eps_list(self, capsys, sym_ini):
        code, _, _ = _run(capsys, "validate", sym_ini, "--eps-list", "0.025,0.05")
        assert code == 2


class TestSteady:
    def test_converges(self, capsys, tmp_path, sym_ini):
        csv = tmp_path / "s.csv"
        code, rep, _ = _run(capsys, "steady", sym_ini, "--csv", str(csv))
        assert code == 0
        assert check_report(rep) == []
        assert rep["converged"] and rep["residual_norm"] <= 1e-8
        assert len(rep["pattern"]["positions"]) == 1
        assert csv.read_text().startswith("# t=")

    def test_not_converged(self, capsys, sym_ini):
        code, rep, _ = _run(capsys, "steady", sym_ini, "--tol", "1e-30")
        assert code == 4
        assert not rep["converged"]


class TestValidate:
    def test_symmetric_passes(self, capsys, sym_ini):
        code, rep, _ = _run(capsys, "validate", sym_ini)
        assert code == 0
        assert check_report(rep) == []
        assert rep["passed"] and rep["failures"] == []
        eps = [e["epsilon"] for e in rep["epsilon_trend"]]
        assert eps == sorted(eps, reverse=True)

    def test_parallel_matches_serial(self, capsys, sym_ini):
        _, one, _ = _run(capsys, "validate", sym_ini, "--eps-list", "0.1,0.05")
        _, two, _ = _run(capsys, "validate", sym_ini, "--eps-list", "0.1,0.05", "--jobs", "2")
        assert one == two


class TestSimulate:
    def test_zero_horizon(self, capsys, tmp_path, sym_ini):
        out_dir = tmp_path / "snaps"
        code, rep, _ = _run(capsys, "simulate", sym_ini, "--t-max", "0", "--out-dir", str(out_dir))
        assert code == 0
        assert check_report(rep) == []
        assert rep["steps"] == 0 and rep["t_final"] == 0
        assert [p.name for p in sorted(out_dir.iterdir())] == ["snapshot_00000.csv"]

    def test_restart_from_file(self, capsys, tmp_path, sym_ini):
        first = tmp_path / "a"
        _run(capsys, "simulate", sym_ini, "--t-max", "0.5", "--out-dir", str(first))
        last = sorted(first.iterdir())[-1]
        code, rep, _ = _run(capsys, "simulate", sym_ini, "--init", "file", "--init-file", str(last),
                            "--t-max", "0.6", "--out-dir", str(tmp_path / "b"))
        assert code == 0
        assert rep["t_final"] == pytest.approx(0.6)

    def test_missing_init_file(self, capsys, tmp_path, sym_ini):
        code, _, _ = _run(capsys, "simulate", sym_ini, "--init", "file", "--out-dir", str(tmp_path))
        assert code == 2

    def test_divergence(self, capsys, tmp_path, sym_ini, monkeypatch):
        import hotspot.cli as cli

        def blow_up(initial, *a, **kw):
            exc = DivergenceError("forced")
            exc.last_state = initial
            raise exc

        monkeypatch.setattr(cli, "run_to_steady", blow_up)
        code, rep, err = _run(capsys, "simulate", sym_ini, "--out-dir", str(tmp_path))
        assert code == 5
        assert check_report(rep) == []
        assert rep["last_stable_snapshot"].endswith("snapshot_00000.csv")
        assert "last stable snapshot" in err


class TestNlepCheck:
    def test_reference(self, capsys, asym_ini):
        code, rep, _ = _run(capsys, "nlep-check", asym_ini)
        assert code == 0
        assert check_report(rep) == []
        assert rep["nondegenerate"] is True
        assert rep["e_m2"] == pytest.approx(1.0)

    def test_condbc(self, capsys, tmp_path):
        base = isotropic_params(D_hat=0.1, A_bar=5.0)
        ini = _ini(tmp_path, "cbc.ini", D_hat=D_hat_for_condition(CONDBC_VALUE, base), A_bar=5.0)
        code, rep, _ = _run(capsys, "nlep-check", ini)
        assert code == 0
        assert rep["nondegenerate"] is False
        assert "pole" in rep["flags"]

    def test_no_solution(self, capsys, tmp_path):
        code, rep, _ = _run(capsys, "nlep-check", _ini(tmp_path, "n.ini", D_hat=2.0, A_bar=5.0))
        assert code == 3
        assert rep["classification"] == "no-solution"


class TestSweep:
    def test_one_result_per_value(self, capsys, asym_ini):
        code, rep, _ = _run(capsys, "sweep", asym_ini, "--mode", "asymmetric", "--param", "D_hat",
                            "--values", "0.1,2.0")
        assert code == 0
        assert check_report(rep) == []
        assert [r["status"] for r in rep["results"]] == ["ok", "no-solution"]

    def test_with_steady(self, capsys, sym_ini):
        code, rep, _ = _run(capsys, "sweep", sym_ini, "--param", "gamma", "--values", "1,2", "--steady")
        assert code == 0
        assert all(r["converged"] for r in rep["results"])

    def test_bad_values(self, capsys, sym_ini):
        code, _, _ = _run(capsys, "sweep", sym_ini, "--param", "L", "--values", "a,b")
        assert code == 2


def test_console_entry_point(sym_ini):
    """The installed module runs as a program."""
    proc = subprocess.run([sys.executable, "-m", "hotspot.cli", "predict", sym_ini],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "predict"
