import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmoment import harness
from vmoment.harness import (RateTable, SweepConfig, estimate_rate,
                             parse_rate_table, run_sweep)


class TestEstimateRate:
    def test_exact_power(self):
        rates = estimate_rate([4, 1], [2, 1])
        assert rates[0] is None
        assert rates[1] == pytest.approx(2.0)

    def test_geometric(self):
        rates = estimate_rate([1e-2, 2.5e-3, 6.25e-4], [0.1, 0.05, 0.025])
        assert rates[1] == pytest.approx(2.0)
        assert rates[2] == pytest.approx(2.0)

    def test_published_value(self):
        # Linf pair 1.99e-2 -> 7.36e-3 over eps 2.5e-2 -> 1.0e-2 gives 1.09
        rates = estimate_rate([1.99e-2, 7.36e-3], [2.5e-2, 1.0e-2])
        assert rates[1] == pytest.approx(1.09, abs=5e-3)

    def test_zero_error_marks_undefined(self):
        rates = estimate_rate([1.0, 0.0, 2.0], [4.0, 2.0, 1.0])
        assert rates[1] is None and rates[2] is None

    def test_length_validation(self):
        with pytest.raises(ValueError):
            estimate_rate([1.0], [1.0])

    @given(st.floats(0.2, 4.0), st.lists(st.floats(0.01, 1.0), min_size=3,
                                         max_size=6, unique=True))
    @settings(max_examples=40, deadline=None)
    def test_recovers_power_law(self, slope, params):
        params = sorted(params, reverse=True)
        errors = [p ** slope for p in params]
        rates = estimate_rate(errors, params)
        for r in rates[1:]:
            assert r == pytest.approx(slope, rel=1e-8)


class TestSweepConfig:
    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            SweepConfig(problem="x", sweep="eps", values=[0.1], grid=4)

    def test_monotone_required(self):
        with pytest.raises(ValueError):
            SweepConfig(problem="x", sweep="eps", values=[0.1, 0.4, 0.2],
                        grid=4)

    def test_eps_sweep_needs_grid(self):
        with pytest.raises(ValueError):
            SweepConfig(problem="x", sweep="eps", values=[0.1, 0.05])

    def test_h_sweep_needs_eps(self):
        with pytest.raises(ValueError):
            SweepConfig(problem="x", sweep="h", values=[0.1, 0.05])


class TestRateTable:
    def _small_table(self):
        t = RateTable(metadata={"problem": "demo", "build": "abc"})
        t.add_row(0.1, {"L2": 1e-2, "H1": 2e-1})
        t.add_row(0.05, {"L2": 2.5e-3, "H1": 1e-1})
        t.compute_rates()
        return t

    def test_round_trip(self, tmp_path):
        t = self._small_table()
        path = tmp_path / "t.csv"
        t.write(path)
        t2 = parse_rate_table(path)
        for r1, r2 in zip(t.rows, t2.rows):
            assert r1["param"] == r2["param"]
            assert r1["errors"] == r2["errors"]
            assert r1["rates"] == r2["rates"]

    def test_failed_rows_round_trip(self, tmp_path):
        t = RateTable(metadata={})
        t.add_row(0.1, {"L2": 1e-2})
        t.add_row(0.05, {}, failed=True)
        t.compute_rates()
        path = tmp_path / "f.csv"
        t.write(path)
        text = path.read_text()
        assert "FAILED" in text
        t2 = parse_rate_table(path)
        assert t2.rows[1]["failed"]

    def test_final_rate(self):
        t = self._small_table()
        assert t.final_rate("L2") == pytest.approx(2.0)
        assert t.final_rate("H2") is None

    def test_not_a_table(self, tmp_path):
        p = tmp_path / "junk.csv"
        p.write_text("hello\n")
        with pytest.raises(ValueError):
            parse_rate_table(p)


class TestRunSweep:
    def test_radial_two_values(self, tmp_path):
        out = tmp_path / "sweep.csv"
        cfg = SweepConfig(problem="radial-ma-exp", sweep="eps",
                          values=[1e-1, 5e-2], grid=200, tol=1e-9,
                          out=str(out))
        table = run_sweep(cfg)
        assert len(table.rows) == 2
        assert table.rows[0]["rates"]["L2"] is None
        assert table.rows[1]["rates"]["L2"] is not None
        assert out.exists()

    def test_deterministic_bytes(self):
        cfg = SweepConfig(problem="radial-ma-exp", sweep="eps",
                          values=[1e-1, 5e-2], grid=200, tol=1e-9)
        a = run_sweep(cfg).to_csv()
        b = run_sweep(cfg).to_csv()
        assert a == b

    def test_mixed_h_sweep_rates(self):
        cfg = SweepConfig(problem="ma-quartic", sweep="h",
                          values=[1 / 8, 1 / 16, 1 / 32], eps=1e-3, k=1,
                          tol=1e-9)
        table = run_sweep(cfg)
        assert table.final_rate("L2") == pytest.approx(2.0, abs=0.3)
        assert table.final_rate("H1") == pytest.approx(1.0, abs=0.2)

    def test_unknown_problem(self):
        cfg = SweepConfig(problem="nope", sweep="eps", values=[0.1, 0.05],
                          grid=8)
        with pytest.raises(KeyError):
            run_sweep(cfg)


class TestKStar:
    def test_bisection_contract_coarse(self):
        # coarse, fast configuration; the contract (monotone samples and a
        # bracket no wider than K_tol) is what matters here
        res = harness.estimate_k_star("gauss-kstar", eps=-0.001, h=0.1,
                                      K_tol=0.35, tol=1e-7)
        lo, hi = res["bracket"]
        assert hi - lo <= 0.35 + 1e-12
        assert res["k_star"] == pytest.approx(0.5 * (lo + hi))
        ks = [K for K, _ in res["samples"]]
        assert 0.0 in ks
        feas = [K for K, ok in res["samples"] if ok]
        infeas = [K for K, ok in res["samples"] if not ok]
        assert max(feas) <= min(infeas)

    def test_eps_sign_validation(self):
        with pytest.raises(ValueError):
            harness.estimate_k_star("gauss-kstar", eps=0.001, h=0.1,
                                    K_tol=0.1)
        with pytest.raises(ValueError):
            harness.estimate_k_star("gauss-kstar", eps=-0.001, h=0.1,
                                    K_tol=-0.1)


def test_run_surgery_emits_iteration_table(tmp_path):
    out = tmp_path / "surgery.csv"
    trace, table = harness.run_surgery("radial-ma-exp", eps=0.01, grid=80,
                                       c_band=10.0, iterations=2,
                                       out=str(out))
    text = out.read_text()
    assert "# mode: surgery" in text
    assert len(table.rows) == 3      # uncorrected pass + two corrections
    assert out.exists()
