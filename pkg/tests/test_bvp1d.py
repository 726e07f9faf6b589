import itertools

import numpy as np
import pytest

import oracles
from singconv.bvp1d import (
    check_derivative_bounds,
    diagnose_family,
    local_model_H,
    solve_regularized_family,
    solve_taliaferro,
)
from singconv.grid import CONVERGED, NONEXISTENCE, GridFunction
from singconv.model import LOG, DomainError, Geometry, Singularity, Weight, classify_regime
from singconv.verify import fit_boundary_asymptotics

GRID = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75]
EPS = [1e-1, 1e-2, 1e-3, 1e-4]


def solve(alpha, beta, **kw):
    return solve_taliaferro(Weight.power(alpha), Singularity.power(beta), **kw)


@pytest.fixture(scope="module")
def grid_solutions():
    return {(a, b): solve(a, b) for a, b in itertools.product(GRID, GRID)}


class TestLocalModel:
    def test_examples(self):
        assert local_model_H(1.0, 1.0, 0.25) == pytest.approx(1.0, rel=1e-15)
        assert local_model_H(0.5, 1.0, 1.0) == pytest.approx(oracles.K_05_1, rel=1e-14)

    @pytest.mark.parametrize("alpha,beta", [(0.5, 0.5), (2.0, 0.5), (0.2, 0.3)])
    def test_rejects_outside_power_regime(self, alpha, beta):
        with pytest.raises(DomainError):
            local_model_H(alpha, beta, 0.5)

    @pytest.mark.parametrize("alpha,beta", [(1.0, 1.0), (0.5, 1.0), (1.5, 0.25), (0.25, 1.75)])
    def test_residual_by_differences(self, alpha, beta):
        t = np.geomspace(1e-6, 1.0, 40)
        h = 1e-4 * t
        d2 = (local_model_H(alpha, beta, t + h) - 2 * local_model_H(alpha, beta, t) + local_model_H(alpha, beta, t - h)) / h**2
        rhs = -(t**-alpha) * local_model_H(alpha, beta, t) ** -beta
        np.testing.assert_allclose(d2, rhs, rtol=1e-5)

    def test_fitter_calibration(self):
        t = np.geomspace(1e-12, 1.0, 400)
        H = GridFunction(t, local_model_H(0.5, 1.0, t))
        fit = fit_boundary_asymptotics(H, Geometry.interval(), classify_regime(0.5, 1.0))
        assert fit.exponent == pytest.approx(0.75, abs=1e-3)


class TestTaliaferro:
    def test_half_power_exponent(self):
        H, rep = solve(1.0, 1.0)
        assert rep.converged
        t = H.nodes
        sel = (t >= 1e-5) & (t <= 1e-3)
        slope = np.polyfit(np.log(t[sel]), np.log(H.values[sel]), 1)[0]
        assert slope == pytest.approx(0.5, abs=0.02)

    def test_nonexistence(self):
        H, rep = solve(2.0, 0.5)
        assert H is None and rep.status == NONEXISTENCE

    def test_linear_regime_has_finite_slope(self):
        H, rep = solve(0.3, 0.2)
        assert rep.converged
        assert np.isfinite(H.derivative[1]) and H.derivative[1] > 0
        ratio = H.values[1:50] / H.nodes[1:50]
        assert np.ptp(ratio) / ratio.mean() < 1e-3

    def test_refinement(self):
        coarse, fine = (solve(1.0, 1.0, rtol=r)[1].diagnostics["evaluator"] for r in (1e-10, 1e-12))
        t = np.geomspace(1e-10, 1.0 - 1e-9, 500)
        assert np.max(np.abs(coarse(t)[0] - fine(t)[0])) < 4e-8

    def test_closed_form_derivative_bound(self):
        t = np.geomspace(1e-10, 1.0, 300)
        H = GridFunction(t, 2 * np.sqrt(t), 1 / np.sqrt(t))
        rep = check_derivative_bounds(H, Weight.power(1.0), Singularity.power(1.0), 0.25)
        assert rep.converged and rep.diagnostics["nodes_checked"] > 100

    def test_bad_b(self):
        H, _ = solve(1.0, 1.0)
        with pytest.raises(ValueError):
            check_derivative_bounds(H, Weight.power(1.0), Singularity.power(1.0), 0.9)


class TestGrid:
    def test_all_converge_positive(self, grid_solutions):
        for (a, b), (H, rep) in grid_solutions.items():
            assert rep.converged, (a, b, rep.message)
            assert np.all(H.values[1:-1] > 0)
            assert abs(H.values[0]) == 0 and abs(H.values[-1]) == 0

    def test_rate_law(self, grid_solutions):
        for (a, b), (H, _) in grid_solutions.items():
            reg = classify_regime(a, b)
            fit = fit_boundary_asymptotics(H, Geometry.interval(), reg)
            if reg.regime == LOG:
                assert fit.band_ratio < 10, (a, b)
            else:
                assert fit.exponent == pytest.approx(reg.predicted_exponent, abs=0.02), (a, b)

    def test_structure(self, grid_solutions):
        for (a, b), (H, _) in grid_solutions.items():
            rep = check_derivative_bounds(H, Weight.power(a), Singularity.power(b))
            assert rep.converged, (a, b, rep.message)
            assert rep.diagnostics["H_above_tangent"] and rep.diagnostics["concave"], (a, b)


class TestRegularizedFamily:
    def test_divergent_weight(self):
        verdict = diagnose_family(solve_regularized_family(Weight.power(2.5), Singularity.power(0.5), EPS))
        assert verdict.status == NONEXISTENCE
        assert np.all(np.diff(verdict.diagnostics["maxima"]) > 0)

    def test_contracts_to_unregularized(self):
        w, g = Weight.power(0.5), Singularity.power(0.5)
        reports = solve_regularized_family(w, g, EPS)
        verdict = diagnose_family(reports)
        assert verdict.status == CONVERGED
        H, _ = solve_taliaferro(w, g)
        assert reports[-1].diagnostics["max_H"] == pytest.approx(H.max(), abs=1e-4)

    def test_inert_without_singularity(self):
        reports = solve_regularized_family(Weight.power(0.5), Singularity.power(0.0), EPS)
        maxima = {r.diagnostics["max_H"] for r in reports}
        assert len(maxima) == 1
        assert diagnose_family(reports).status == CONVERGED

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            solve_regularized_family(Weight.power(0.5), Singularity.power(0.5), [1e-3, 1e-2])
