import numpy as np
import pytest

from vmoment.cli import main


class TestExitCodes:
    def test_usage_error_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--bogus"])
        assert exc.value.code == 1

    def test_usage_error_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_unknown_problem_is_usage_error(self, capsys):
        code = main(["radial", "--problem", "not-a-problem"])
        assert code == 1

    def test_sweep_needs_exactly_one_list(self, capsys):
        with pytest.raises(SystemExit):
            main(["sweep", "--problem", "radial-ma-exp"])


class TestRadialCommand:
    def test_solve_and_outputs(self, tmp_path, capsys):
        out = tmp_path / "radial.csv"
        code = main(["radial", "--problem", "radial-ma-exp", "--eps", "0.05",
                     "--grid", "200", "--tol", "1e-8", "--out", str(out)])
        assert code == 0
        captured = capsys.readouterr().out
        assert "min radial Laplacian" in captured
        assert out.exists()
        assert (tmp_path / "radial.png").exists()
        header = out.read_text().splitlines()
        assert header[0].startswith("# problem: radial-ma-exp")

    def test_no_plot(self, tmp_path):
        out = tmp_path / "r.csv"
        main(["radial", "--problem", "radial-ma-exp", "--eps", "0.05",
              "--grid", "100", "--tol", "1e-8", "--out", str(out),
              "--no-plot"])
        assert out.exists()
        assert not (tmp_path / "r.png").exists()


class TestMixedCommand:
    def test_solve_checkpoint_and_plot(self, tmp_path, capsys):
        out = tmp_path / "mixed.csv"
        ckpt = tmp_path / "state.vmm"
        code = main(["mixed", "--problem", "ma-quadratic", "--eps", "1e-3",
                     "--grid", "6", "--degree", "1", "--tol", "1e-9",
                     "--out", str(out), "--checkpoint", str(ckpt)])
        assert code == 0
        assert out.exists() and ckpt.exists()
        assert ckpt.read_bytes()[:4] == b"VMM1"
        assert (tmp_path / "mixed.png").exists()
        assert "error L2" in capsys.readouterr().out


class TestSweepCommand:
    def test_h_sweep_csv_and_png(self, tmp_path, capsys):
        out = tmp_path / "table.csv"
        code = main(["sweep", "--problem", "ma-quartic", "--eps", "1e-3",
                     "--h-list", "0.125,0.0625", "--degree", "1",
                     "--tol", "1e-9", "--out", str(out)])
        assert code == 0
        text = out.read_text()
        assert "param,err_L2" in text
        assert (tmp_path / "table.png").exists()

    def test_radial_eps_sweep(self, tmp_path):
        out = tmp_path / "rad.csv"
        code = main(["sweep", "--problem", "radial-ma-exp",
                     "--eps-list", "0.1,0.05", "--grid", "150",
                     "--tol", "1e-8", "--out", str(out)])
        assert code == 0
        assert len(out.read_text().splitlines()) >= 3


class TestSurgeryCommand:
    def test_runs(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        code = main(["surgery", "--problem", "radial-ma-exp", "--eps", "0.01",
                     "--grid", "80", "--band", "10", "--iterations", "1",
                     "--tol", "1e-8", "--out", str(out)])
        assert code == 0
        assert "pass 0" in capsys.readouterr().out
        assert out.exists()
        assert (tmp_path / "s.png").exists()

    def test_invalid_iterations_is_usage_error(self):
        code = main(["surgery", "--problem", "radial-ma-exp", "--eps", "0.01",
                     "--grid", "50", "--iterations", "0"])
        assert code == 1
