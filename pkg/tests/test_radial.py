import math

import numpy as np
import pytest

import oracles
from singconv.grid import CONVERGED, NONEXISTENCE, differentiate
from singconv.model import DomainError, Geometry, power_spec
from singconv.radial import (
    eigenpair,
    integrating_factor_residual,
    picard_iterate,
    radial_nodes,
    solve_aux_mu_nonpositive,
    solve_linear_source,
    solve_mu_zero,
    solve_problem,
    solve_radial,
)

BALL = Geometry.ball(1.0, 3)


class TestEigenpair:
    def test_interval(self):
        e = eigenpair(Geometry.interval())
        assert e.lambda1 == pytest.approx(math.pi**2, rel=1e-14)
        np.testing.assert_allclose(e.phi1.values, np.sin(math.pi * e.phi1.nodes), atol=1e-14)

    def test_ball_three(self):
        e = eigenpair(BALL)
        assert e.lambda1 == pytest.approx(math.pi**2, rel=1e-14)
        r = e.phi1.nodes[1:-1]
        ref = np.sin(math.pi * r) / (math.pi * r)
        np.testing.assert_allclose(e.phi1.values[1:-1], ref, rtol=1e-10, atol=1e-14)

    def test_disc(self):
        assert eigenpair(Geometry.ball(1.0, 2)).lambda1 == pytest.approx(oracles.DISC_LAMBDA1, rel=1e-12)

    def test_radius_scaling(self):
        assert eigenpair(Geometry.ball(2.0, 3)).lambda1 == pytest.approx(math.pi**2 / 4, rel=1e-14)

    @pytest.mark.parametrize("geom", [Geometry.interval(), BALL, Geometry.ball(1.0, 2), Geometry.ball(1.5, 4)])
    def test_invariants(self, geom):
        e = eigenpair(geom)
        x, phi = e.phi1.nodes, e.phi1.values
        assert phi.max() == pytest.approx(1.0) and phi[-1] == 0
        d = geom.boundary_distance(x)
        assert np.all(phi[d > 0] > 0)
        c = e.sandwich_c
        assert 0 < c <= 1
        assert np.all(c * d <= phi * (1 + 1e-12)) and np.all(phi <= d / c * (1 + 1e-12))
        # -Δφ = λφ through the exact derivative data
        keep = (d > 1e-3) & (x > 1e-3)
        lap = differentiate(x, e.phi1.derivative, 1, 5)
        if geom.kind == "ball":
            lap[1:] += (geom.dim - 1) * e.phi1.derivative[1:] / x[1:]
        np.testing.assert_allclose(-lap[keep], e.lambda1 * phi[keep], rtol=1e-5, atol=1e-6)


class TestMuZero:
    def test_converges_and_decreases(self):
        w, rep = solve_mu_zero(power_spec(0.5, 0.5, geometry=BALL))
        assert rep.converged
        assert np.all(np.diff(w.values) <= 0)
        assert rep.diagnostics["A"] == w.values[0]

    def test_constant_source(self):
        # p ≡ 1 and g ≡ 1 make ψ ≡ 2, so w = (R² - r²)/N
        w, rep = solve_mu_zero(power_spec(0.0, 0.0, geometry=BALL))
        r = w.nodes
        np.testing.assert_allclose(w.values, (1 - r**2) / 3, atol=1e-4)

    def test_nonexistence(self):
        w, rep = solve_mu_zero(power_spec(2.2, 0.5, geometry=BALL))
        assert w is None and rep.status == NONEXISTENCE

    def test_needs_ball(self):
        with pytest.raises(DomainError):
            solve_mu_zero(power_spec(0.5, 0.5))


class TestPicard:
    def test_chain(self):
        spec = power_spec(0.5, 0.5, mu=1.0, geometry=BALL)
        w, rep = solve_mu_zero(spec)
        A = rep.diagnostics["A"]
        v1, trace1, _ = picard_iterate(spec, w, A, max_k=1)
        assert np.all(v1.values >= w.values - 1e-13)
        v, trace, rep = picard_iterate(spec, w, A, max_k=200)
        assert rep.converged and trace.monotone and trace.bounded
        assert max(trace.maxima) <= A * (1 + 1e-13)
        assert np.all(np.diff(trace.maxima) >= -1e-13)

    def test_requires_positive_mu(self):
        spec = power_spec(0.5, 0.5, mu=0.0, geometry=BALL)
        w, rep = solve_mu_zero(spec)
        with pytest.raises(ValueError):
            picard_iterate(spec, w, rep.diagnostics["A"])


class TestSolveRadial:
    @pytest.mark.parametrize(
        "kw", [dict(a=1.0, mu=10.0), dict(a=0.5, mu=-5.0), dict(a=0.5, mu=1.0), dict(a=1.5, mu=1.0)]
    )
    def test_converges_monotone_ordered(self, kw):
        spec = power_spec(0.5, 0.5, q=0.5, geometry=BALL, **kw)
        u, rep = solve_radial(spec)
        assert rep.converged, rep.message
        assert u.derivative[0] == 0 and np.all(u.derivative <= 1e-12 * np.abs(u.derivative).max())
        diag = rep.diagnostics
        if "sub" in diag:
            assert np.all(np.asarray(diag["sub"]) <= u.values * (1 + 1e-9))
        if "super" in diag:
            assert np.all(u.values <= np.asarray(diag["super"]) * (1 + 1e-9) + 1e-15)

    def test_a1_integral_route_is_mesh_stable(self):
        spec = power_spec(0.5, 0.5, q=0.5, a=1.0, mu=10.0, geometry=BALL)
        coarse, _ = solve_radial(spec)
        fine, _ = solve_radial(spec, radial_nodes(BALL, fine=True))
        assert coarse.max() == pytest.approx(fine.max(), rel=2e-3)

    def test_large_mu_fails(self):
        spec = power_spec(0.5, 0.5, q=0.5, a=1.5, mu=50.0, geometry=BALL)
        u, rep = solve_radial(spec)
        assert not rep.converged

    def test_nonexistence(self):
        u, rep = solve_radial(power_spec(2.5, 0.5, q=0.5, mu=1.0, geometry=BALL))
        assert u is None and rep.status == NONEXISTENCE

    def test_interval_solution_is_solution(self):
        from singconv.verify import SOLUTION, residual_classify

        spec = power_spec(0.5, 1.0, q=0.5, mu=1.0, a=0.5)
        u, rep = solve_problem(spec)
        assert rep.converged
        assert residual_classify(u, spec).verdict == SOLUTION

    def test_plus_large_lambda(self):
        spec = power_spec(0.2, 0.3, sign="plus", q=0.5, lam=300.0, mu=-1.0, a=0.5)
        u, rep = solve_problem(spec)
        assert rep.converged and rep.diagnostics["below_super"]


class TestIntegratingFactor:
    def test_identity(self):
        spec = power_spec(0.5, 0.5, mu=1.0, geometry=BALL)
        nodes = radial_nodes(BALL, fine=True)
        w, rep = solve_mu_zero(spec, nodes)
        v, _, prep = picard_iterate(spec, w, rep.diagnostics["A"])
        assert prep.converged
        assert integrating_factor_residual(spec, v) < 1e-6


class TestAux:
    def test_mu_zero_exact(self):
        spec = power_spec(0.5, 0.5, q=0.5, a=0.5, mu=0.0, geometry=BALL)
        v, rep = solve_aux_mu_nonpositive(spec)
        m = rep.diagnostics["m"]
        np.testing.assert_allclose(v.values, m * (1 - v.nodes**2) / 6, rtol=1e-9, atol=1e-12)

    @pytest.mark.parametrize("geom", [BALL, Geometry.interval()])
    def test_negative_mu(self, geom):
        spec = power_spec(0.5, 0.5, q=0.5, a=0.5, mu=-1.0, geometry=geom)
        v, rep = solve_aux_mu_nonpositive(spec)
        assert rep.converged and rep.diagnostics["positive"] and rep.diagnostics["below_super"]

    def test_m(self):
        # inf over t of t^-0.5 + t^0.5 is 2, at t = 1
        spec = power_spec(0.5, 0.5, q=0.5, mu=-1.0, geometry=BALL)
        v, rep = solve_aux_mu_nonpositive(spec)
        assert rep.diagnostics["m"] == pytest.approx(2.0, rel=1e-12)

    def test_rejects(self):
        with pytest.raises(ValueError):
            solve_aux_mu_nonpositive(power_spec(0.5, 0.5, q=0.5, mu=1.0, geometry=BALL))
        with pytest.raises(DomainError):
            solve_aux_mu_nonpositive(power_spec(0.5, 0.5, mu=-1.0, geometry=BALL))


class TestLinearSource:
    @pytest.mark.parametrize("ratio,status", [(0.9, CONVERGED), (1.1, NONEXISTENCE)])
    def test_decisions(self, ratio, status):
        spec = power_spec(0.5, 0.5, q=1, mu=1.0, a=0.5, lam=ratio * math.pi**2)
        u, rep = solve_linear_source(spec)
        assert rep.status == status

    def test_rejects(self):
        with pytest.raises((ValueError, DomainError)):
            solve_linear_source(power_spec(0.5, 0.5, q=1, mu=1.0, a=1.5))
