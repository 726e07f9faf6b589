import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from singconv import cli
from singconv.cli import (
    CSV_COLUMNS,
    FAILED,
    INDETERMINATE,
    MonotonicityError,
    NoThresholdError,
    SweepConfig,
    ThresholdEstimate,
    bisect_outcome,
    estimate_lambda_star,
    estimate_mu_star,
    main,
    results_to_csv,
    results_to_json,
    sweep,
)
from singconv.grid import CONVERGED, NONEXISTENCE
from singconv.model import DomainError, NONEXISTENT, classify_regime, power_spec


def step(threshold, below=CONVERGED, above=NONEXISTENCE):
    return lambda x: below if x < threshold else above


class TestBisection:
    @given(st.floats(1.01, 99.0), st.sampled_from([0.01, 0.05]))
    def test_brackets_threshold(self, threshold, rtol):
        est = bisect_outcome(step(threshold), 1.0, 100.0, low=CONVERGED, high=NONEXISTENCE, rtol=rtol, parameter="x")
        assert est.lo < threshold <= est.hi
        assert est.width <= rtol and est.resolved
        assert est.lo_outcome != est.hi_outcome

    def test_reversed_orientation(self):
        est = bisect_outcome(step(7.0, NONEXISTENCE, CONVERGED), 1.0, 50.0, low=NONEXISTENCE, high=CONVERGED, rtol=0.01, parameter="x")
        assert est.contains(7.0)

    def test_no_sign_change(self):
        with pytest.raises(NoThresholdError) as exc:
            bisect_outcome(lambda x: CONVERGED, 1.0, 10.0, low=CONVERGED, high=NONEXISTENCE, rtol=0.01, parameter="x")
        assert len(exc.value.trace) == 2

    def test_wrong_orientation(self):
        with pytest.raises(NoThresholdError):
            bisect_outcome(step(5.0, NONEXISTENCE, CONVERGED), 1.0, 10.0, low=CONVERGED, high=NONEXISTENCE, rtol=0.01, parameter="x")

    def test_non_monotone_trace_is_hard_failure(self):
        # the midpoint is indeterminate and the quarter points disagree with the order
        def f(x):
            if x in (1.0, 16.0):
                return CONVERGED if x == 1.0 else NONEXISTENCE
            if x == pytest.approx(4.0):
                return INDETERMINATE
            return NONEXISTENCE if x < 4.0 else CONVERGED

        with pytest.raises(MonotonicityError):
            bisect_outcome(f, 1.0, 16.0, low=CONVERGED, high=NONEXISTENCE, rtol=0.01, parameter="x")

    def test_indeterminate_midpoint(self):
        def f(x):
            if abs(x - math.sqrt(10.0)) < 1e-9:
                return INDETERMINATE
            return CONVERGED if x < 4.0 else NONEXISTENCE

        est = bisect_outcome(f, 1.0, 10.0, low=CONVERGED, high=NONEXISTENCE, rtol=0.01, parameter="x")
        assert est.contains(4.0) and est.resolved

    def test_unresolved(self):
        def f(x):
            if x in (1.0, 16.0):
                return CONVERGED if x == 1.0 else NONEXISTENCE
            return INDETERMINATE

        est = bisect_outcome(f, 1.0, 16.0, low=CONVERGED, high=NONEXISTENCE, rtol=0.01, parameter="x")
        assert not est.resolved and (est.lo, est.hi) == (1.0, 16.0)

    def test_estimate_invariants(self):
        with pytest.raises(ValueError):
            ThresholdEstimate("x", 2.0, 1.0, CONVERGED, NONEXISTENCE, 0, [])
        with pytest.raises(ValueError):
            ThresholdEstimate("x", 1.0, 2.0, CONVERGED, CONVERGED, 0, [])


class TestPreconditions:
    def test_mu_star_needs_minus(self):
        with pytest.raises(DomainError):
            estimate_mu_star(power_spec(0.2, 0.3, sign="plus", q=0.5), 1.0, 10.0)

    def test_lambda_star_cases(self):
        with pytest.raises(DomainError):
            estimate_lambda_star(power_spec(0.2, 0.3, q=0.5, mu=-1.0), 1.0, 10.0)
        with pytest.raises(DomainError):
            estimate_lambda_star(power_spec(0.2, 0.3, sign="plus", q=0.5, mu=1.0, a=1.5), 1.0, 10.0)

    def test_lambda_star_plus(self):
        spec = power_spec(0.2, 0.3, sign="plus", q=0.5, mu=-1.0, a=0.5)
        est = estimate_lambda_star(spec, 8.0, 16.0, rtol=0.5)
        assert est.resolved and est.lo_outcome == NONEXISTENCE and est.hi_outcome == CONVERGED


GRID = SweepConfig(alphas=(0.25, 0.5, 2.0, 2.5), betas=(0.25, 1.0), a_values=(0.5,), mus=(1.0,), q=0.5)


@pytest.fixture(scope="module")
def grid_results():
    return sweep(GRID)


class TestSweep:
    def test_one_row_per_point_in_order(self, grid_results):
        assert len(grid_results) == 8
        keys = [(r.alpha, r.beta, r.a, r.mu) for r in grid_results]
        assert keys == sorted(keys)

    def test_existence_map(self, grid_results):
        for r in grid_results:
            if classify_regime(r.alpha, r.beta).regime == NONEXISTENT:
                assert r.outcome == NONEXISTENCE
            if r.alpha + r.beta < 1 and r.a < 1:
                assert r.outcome == CONVERGED
            if r.outcome == CONVERGED and r.alpha + r.beta > 1:
                assert r.exponent == pytest.approx((2 - r.alpha) / (1 + r.beta), abs=0.02)

    def test_deterministic_and_parallel(self, grid_results):
        again = sweep(GRID, jobs=2)
        assert results_to_csv(again) == results_to_csv(grid_results)
        assert results_to_json(again) == results_to_json(grid_results)

    def test_csv_format(self, grid_results):
        lines = results_to_csv(grid_results).splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        row = lines[1].split(",")
        assert row[6] in (CONVERGED, NONEXISTENCE, FAILED)
        assert all(len(f.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) <= 12 for f in row[7:9])

    def test_failures_are_recorded(self, monkeypatch):
        def boom(spec, **kw):
            raise ArithmeticError("solver blew up")

        monkeypatch.setattr(cli, "solve_point", boom)
        cfg = SweepConfig(alphas=(0.5, 1.0), betas=(0.5,), q=0.5)
        results = sweep(cfg)
        assert [r.outcome for r in results] == [FAILED, FAILED]


def write(tmp_path, text):
    path = tmp_path / "c.toml"
    path.write_text(text)
    return str(path)


BASE = 'alpha = 0.5\nbeta = 1.0\nq = 0.5\nmu = 1.0\na = 0.5\n'


class TestMain:
    def test_usage_errors(self, tmp_path, capsys):
        assert main(["sweep"]) == 1
        with pytest.raises(SystemExit) as exc:
            main(["nope"])
        assert exc.value.code == 1
        assert main(["solve-radial", "--config", write(tmp_path, "beta = 0.5\nwrong = 1\n")]) == 1
        assert main(["solve-radial", "--config", str(tmp_path / "missing.toml")]) == 1

    def test_check_conditions(self, tmp_path, capsys):
        assert main(["check-conditions", "--config", write(tmp_path, BASE)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["tp_integral"]["status"] == "finite" and out["regime"]["regime"] == "power"
        assert main(["check-conditions", "--config", write(tmp_path, "alpha = 2.0\nbeta = 0.5\nq = 0.5\n")]) == 2

    def test_solve_radial_outputs(self, tmp_path):
        out = tmp_path / "out"
        cfg = write(tmp_path, BASE + '[geometry]\nkind = "ball"\nradius = 1.0\ndim = 3\n')
        assert main(["solve-radial", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "solution.csv").read_text().startswith("r,u,du\n")
        assert json.loads((out / "report.json").read_text())["outcome"] == CONVERGED

    def test_nonexistence_exit(self, tmp_path):
        cfg = write(tmp_path, "alpha = 2.5\nbeta = 0.5\nq = 0.5\nmu = 1.0\n")
        assert main(["solve-radial", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_transform_and_bvp(self, tmp_path):
        cfg = write(tmp_path, "alpha = 0.0\nbeta = 0.5\n[transform]\nh_max = 4.0\n")
        assert main(["transform", "--config", cfg, "--out", str(tmp_path / "t")]) == 0
        assert (tmp_path / "t" / "transform.csv").read_text().startswith("y,h,dh\n")
        cfg = write(tmp_path, "alpha = 1.0\nbeta = 1.0\n")
        assert main(["solve-bvp", "--config", cfg, "--out", str(tmp_path / "b"), "--format", "json"]) == 0
        rows = json.loads((tmp_path / "b" / "bvp.json").read_text())
        assert set(rows[0]) == {"t", "H", "dH"}

    def test_verify_and_fit(self, tmp_path, capsys):
        cfg = write(tmp_path, 'sign = "plus"\nalpha = 0.2\nbeta = 0.3\nq = 0.5\nlambda = 300.0\nmu = -1.0\na = 0.5\n')
        assert main(["verify-candidate", "--config", cfg]) == 0
        assert json.loads(capsys.readouterr().out)["classification"]["verdict"] == "sub_solution"
        assert main(["fit-asymptotics", "--config", write(tmp_path, BASE)]) == 0
        assert json.loads(capsys.readouterr().out)["fit"]["exponent"] == pytest.approx(0.75, abs=0.02)

    def test_sweep_byte_identical(self, tmp_path):
        cfg = write(tmp_path, BASE + "[sweep]\nalpha = [0.5, 2.0]\nbeta = [0.25, 1.0]\n")
        texts = []
        for i, jobs in enumerate(("1", "2")):
            out = tmp_path / f"s{i}"
            assert main(["sweep", "--config", cfg, "--out", str(out), "--jobs", jobs]) == 0
            texts.append((out / "sweep.csv").read_bytes())
        assert texts[0] == texts[1]

    def test_threshold_no_sign_change(self, tmp_path, capsys):
        cfg = write(tmp_path, BASE + "[threshold]\nkind = \"mu\"\nlo = 1.0\nhi = 1000.0\n")
        assert main(["estimate-threshold", "--config", cfg]) == 3
        assert json.loads(capsys.readouterr().out)["threshold"] is None

    def test_threshold_missing_range(self, tmp_path):
        cfg = write(tmp_path, BASE + "[threshold]\nkind = \"mu\"\n")
        assert main(["estimate-threshold", "--config", cfg]) == 1
