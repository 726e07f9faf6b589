"""The ten acceptance criteria, each timed against its runtime budget.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

import oracles
from singconv.bvp1d import check_derivative_bounds, diagnose_family, local_model_H, solve_regularized_family, solve_taliaferro
from singconv.cli import (
    NoThresholdError,
    SweepConfig,
    estimate_linear_threshold,
    estimate_mu_star,
    solve_point,
    sweep,
)
from singconv.grid import CONVERGED, NONEXISTENCE, GridFunction
from singconv.model import LOG, Geometry, Singularity, Weight, classify_regime, power_spec
from singconv.quad import check_pg_integrable, check_tp_integrable
from singconv.radial import integrating_factor_residual, picard_iterate, radial_nodes, solve_mu_zero
from singconv.transform import build_transform, eval_h
from singconv.verify import SUB, SUPER, comparison_check, fit_boundary_asymptotics, minus_supersolution, plus_subsolution, residual_classify

RESULTS = {}
BALL = Geometry.ball(1.0, 3)
INTERVAL = Geometry.interval()


@contextmanager
def criterion(number, title, budget):
    start = time.perf_counter()
    RESULTS[number] = (title, False, math.nan, budget)
    yield
    elapsed = time.perf_counter() - start
    RESULTS[number] = (title, elapsed < budget, elapsed, budget)
    assert elapsed < budget, f"criterion {number} took {elapsed:.1f} s, budget {budget} s"


def test_01_condition_checkers():
    with criterion(1, "condition checkers", 1.0):
        for alpha in np.linspace(0.0, 1.6, 9):
            v = check_tp_integrable(Weight.power(alpha))
            assert v.is_finite and abs(v.value - 1 / (2 - alpha)) <= 1e-8 / (2 - alpha)
        pairs = [(0.0, 0.1), (0.1, 0.1), (0.2, 0.3), (0.3, 0.4), (0.1, 0.7), (0.5, 0.2), (0.6, 0.3), (0.05, 0.9), (0.4, 0.55)]
        for alpha, beta in pairs:
            v = check_pg_integrable(Weight.power(alpha), Singularity.power(beta))
            exact = 1 / (1 - alpha - beta)
            assert v.is_finite and abs(v.value - exact) <= 1e-8 * exact
        assert not check_tp_integrable(Weight.power(2.0)).is_finite
        for alpha, beta in [(0.5, 0.5), (0.25, 0.75), (0.0, 1.0)]:
            assert not check_pg_integrable(Weight.power(alpha), Singularity.power(beta)).is_finite


def test_02_transform():
    with criterion(2, "transform h = c y^(2/(1+γ))", 1.0):
        y = np.geomspace(0.01, 1.0, 200)
        for gamma in (0.3, 0.5, 0.7):
            c = oracles.transform_constant(gamma)
            table = build_transform(Weight.power(0.0), Singularity.power(gamma), 4.0)
            h, _ = eval_h(table, y)
            exact = c * y ** (2 / (1 + gamma))
            assert np.max(np.abs(h / exact - 1)) < 1e-4
            assert np.max(np.abs(table.psi(h) - y) / y) < 1e-8


def test_03_local_model():
    with criterion(3, "local model H = 2√t and Taliaferro exponent", 5.0):
        residual, K = oracles.local_model_residual(1, 1)
        assert residual == 0 and K == 2.0
        t = np.geomspace(1e-8, 1.0, 50)
        np.testing.assert_allclose(local_model_H(1.0, 1.0, t), 2 * np.sqrt(t), rtol=1e-15)
        H, rep = solve_taliaferro(Weight.power(1.0), Singularity.power(1.0))
        assert rep.converged
        sel = (H.nodes >= 1e-5) & (H.nodes <= 1e-3)
        slope = np.polyfit(np.log(H.nodes[sel]), np.log(H.values[sel]), 1)[0]
        assert abs(slope - 0.5) <= 0.02


def test_04_regime_table():
    with criterion(4, "regime table on the 7x7 grid", 120.0):
        values = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)
        cfg = SweepConfig(alphas=values, betas=values, a_values=(0.5,), mus=(1.0,), q=0.5)
        results = sweep(cfg)
        assert len(results) == 49
        for r in results:
            assert r.outcome == CONVERGED, (r.alpha, r.beta)
            reg = classify_regime(r.alpha, r.beta)
            if reg.regime == LOG:
                spec = power_spec(r.alpha, r.beta, q=0.5, mu=1.0, a=0.5)
                fit = fit_boundary_asymptotics(solve_point(spec).solution, INTERVAL, reg)
                assert fit.d_min < 1.1e-6 and fit.d_max > 0.9e-3
                assert fit.band_ratio < 10, (r.alpha, r.beta)
            else:
                assert abs(r.exponent - reg.predicted_exponent) <= 0.02, (r.alpha, r.beta)


def test_05_nonexistence_surrogate():
    with criterion(5, "nonexistence surrogate for α >= 2", 30.0):
        eps = [1e-1, 1e-2, 1e-3, 1e-4]
        for alpha in (2.0, 2.5):
            reports = solve_regularized_family(Weight.power(alpha), Singularity.power(0.5), eps)
            verdict = diagnose_family(reports)
            maxima = np.array(verdict.diagnostics["maxima"])
            ratios = np.array(verdict.diagnostics["ratios"])
            assert np.all(np.diff(maxima) > 0) and np.all(ratios > 0.5)
            assert verdict.status == NONEXISTENCE
        cfg = SweepConfig(alphas=(2.0, 2.5), betas=(0.5, 1.0), a_values=(0.5,), mus=(1.0,), q=0.5)
        assert all(r.outcome == NONEXISTENCE for r in sweep(cfg))


def test_06_picard_chain():
    with criterion(6, "Picard monotone chain on Ball(1, 3)", 10.0):
        spec = power_spec(0.5, 0.5, mu=1.0, geometry=BALL)
        w, rep = solve_mu_zero(spec, radial_nodes(BALL, fine=True))
        A = rep.diagnostics["A"]
        v, trace, prep = picard_iterate(spec, w, A, max_k=200, tol=1e-8)
        assert prep.converged and prep.iterations <= 200
        assert trace.deltas[-1] < 1e-8
        assert trace.monotone and trace.bounded
        assert np.all(v.values <= A) and np.all(v.values >= w.values)
        assert integrating_factor_residual(spec, v) < 1e-6


def test_07_linear_threshold():
    with criterion(7, "linear threshold brackets π²", 60.0):
        lam1 = math.pi**2
        spec = power_spec(0.5, 0.5, q=1, mu=1.0, a=0.5)
        est = estimate_linear_threshold(spec, 0.9 * lam1, 1.1 * lam1)
        assert est.trace[0] == (0.9 * lam1, CONVERGED)
        assert est.trace[1] == (1.1 * lam1, NONEXISTENCE)
        assert est.resolved and est.lo <= lam1 <= est.hi
        assert est.lo >= 0.95 * lam1 and est.hi <= 1.05 * lam1


def test_08_convection_dichotomy():
    with criterion(8, "convection dichotomy in a", 120.0):
        for geom in (INTERVAL, BALL):
            assert solve_point(power_spec(0.5, 0.5, q=0.5, a=0.5, mu=1e3, geometry=geom)).outcome == CONVERGED
        with pytest.raises(NoThresholdError):
            estimate_mu_star(power_spec(0.5, 0.5, q=0.5, a=0.5, geometry=BALL), 1.0, 1e3)
        est = estimate_mu_star(power_spec(0.5, 0.5, q=0.5, a=1.5, geometry=BALL), 1.0, 20.0)
        assert est.resolved and 1.0 < est.lo < est.hi < 20.0
        for mu in (1.0, 10.0, 100.0):
            assert solve_point(power_spec(0.5, 0.5, q=0.5, a=1.0, mu=mu, geometry=BALL)).outcome == CONVERGED


def test_09_constructions():
    with criterion(9, "sub/super-solution constructions", 10.0):
        for geom in (INTERVAL, BALL):
            plus = power_spec(0.2, 0.3, sign="plus", q=0.5, mu=-1.0, a=0.5, geometry=geom)
            cand = plus_subsolution(plus)
            k = cand.constants
            assert k["M"] == pytest.approx(max(1.0, 2.0 / (k["c"] * k["delta"]) ** 2))
            big = power_spec(0.2, 0.3, sign="plus", q=0.5, mu=-1.0, a=0.5, lam=k["lambda_required"], geometry=geom)
            assert residual_classify(cand.u, big).verdict == SUB
            minus = power_spec(0.5, 0.5, q=0.5, mu=0.1, a=0.5, geometry=geom)
            cand = minus_supersolution(minus)
            assert {"c", "M", "delta", "fraction"} <= set(cand.constants)
            assert residual_classify(cand.u, minus).verdict == SUPER


def test_10_structural_inequalities():
    with criterion(10, "structural inequalities", 10.0):
        rng = np.random.default_rng(20261015)
        t1, t2 = rng.uniform(0, 10, (2, 10_000))
        a = rng.uniform(0, 1, 10_000)
        assert np.all(t1**a + t2**a >= (t1 + t2) ** a * (1 - 1e-14))
        for alpha, beta in [(0.25, 0.25), (0.3, 0.2), (0.5, 0.5), (1.0, 1.0), (0.5, 1.0), (1.5, 0.5), (1.75, 1.75), (0.25, 1.75)]:
            w, g = Weight.power(alpha), Singularity.power(beta)
            H, rep = solve_taliaferro(w, g)
            assert rep.converged
            check = check_derivative_bounds(H, w, g)
            assert check.converged, (alpha, beta)
            assert check.diagnostics["H_above_tangent"], (alpha, beta)
        runs = [
            power_spec(0.5, 0.5, q=0.5, mu=1.0, a=0.5),
            power_spec(0.5, 1.0, q=0.5, mu=-2.0, a=0.5),
            power_spec(0.5, 0.5, q=0.5, mu=10.0, a=1.0, geometry=BALL),
            power_spec(0.2, 0.3, sign="plus", q=0.5, lam=300.0, mu=-1.0, a=0.5),
        ]
        bracketed = 0
        for spec in runs:
            u, rep = solve_point(spec).solution, solve_point(spec).report
            assert rep.converged
            for key, lower in (("sub", True), ("super", False)):
                if key in rep.diagnostics:
                    other = GridFunction(u.nodes, np.asarray(rep.diagnostics[key]))
                    assert comparison_check(other, u) if lower else comparison_check(u, other)
                    bracketed += 1
        assert bracketed >= len(runs)
