"""Radial and one-dimensional solves of (P)±, the first eigenpair and the
integral representation on the ball.

Two discretisations are used:

* the finite-volume operator of :mod:`singconv.discrete`, solved by damped
  Newton with continuation in μ; this is the general route;
* an integral form on the ball, for the Picard chain and for a = 1 with
  μ > 0, where the finite-difference system has condition number ~ e^(μR)
  and Newton stalls.

The integral form writes a radially decreasing solution as

    u(r) = A - ∫_0^r t^(1-N) ∫_0^t e^(-κ(t-s)) s^(N-1) ψ(s, u(s)) ds dt

and is discretised by a product trapezoid rule that integrates the
exponential exactly against the piecewise-linear interpolant of
s^(N-1) ψ.  All weights are positive, so the discrete map inherits the
order properties of the continuous one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import jv

from .discrete import Discretization, Equation, continuation, newton, relative_residual
from .grid import (
    CONVERGED,
    DIVERGED,
    MAX_ITERATIONS,
    NONEXISTENCE,
    GridFunction,
    SolveReport,
    make_mesh,
)
from .model import DomainError, Geometry, ProblemSpec, SourceTerm, Weight
from .quad import check_tp_integrable

# ---------------------------------------------------------------------------
# first eigenpair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenPair:
    """λ₁ and the max-normalised φ₁ (with φ₁' as derivative data).

    ``sandwich_c`` is the largest c with c d ≤ φ₁ ≤ d / c at the mesh nodes,
    d the distance to the boundary.
    """

    lambda1: float
    phi1: GridFunction
    sandwich_c: float


def _bessel_zero(nu: float) -> float:
    """First positive zero of J_ν."""
    # j_ν,1 lies in (ν, ν + 1.86 ν^(1/3) + 2.5) for ν >= 0
    lo = max(nu, 1e-3)
    hi = nu + 1.86 * max(nu, 1.0) ** (1.0 / 3.0) + 2.5
    while jv(nu, hi) > 0:
        hi += 0.5
    return brentq(lambda z: jv(nu, z), lo, hi, xtol=1e-15, rtol=1e-15)


def _normalised_bessel(nu: float, z: np.ndarray):
    """Λ(z) = Γ(ν+1) (z/2)^-ν J_ν(z) and its derivative; Λ(0) = 1."""
    z = np.asarray(z, dtype=float)
    small = z < 1e-6
    zs = np.where(small, 1.0, z)
    scale = math.gamma(nu + 1.0) * (zs / 2.0) ** (-nu)
    val = np.where(small, 1.0 - z**2 / (4.0 * (nu + 1.0)), scale * jv(nu, zs))
    # d/dz [z^-ν J_ν] = -z^-ν J_(ν+1)
    der = np.where(small, -z / (2.0 * (nu + 1.0)), -scale * jv(nu + 1.0, zs))
    return val, der


def eigenpair(geom: Geometry, nodes: np.ndarray | None = None) -> EigenPair:
    """First Dirichlet eigenpair of -Δ on the interval or (radially) the ball."""
    x = make_mesh(geom) if nodes is None else np.asarray(nodes, dtype=float)
    if geom.kind == "interval":
        lam = math.pi**2
        phi = np.sin(math.pi * x)
        dphi = math.pi * np.cos(math.pi * x)
        phi[[0, -1]] = 0.0
    elif geom.kind == "ball":
        R, N = geom.radius, geom.dim
        nu = N / 2.0 - 1.0
        j = math.pi if N == 3 else _bessel_zero(nu)
        lam = (j / R) ** 2
        phi, der = _normalised_bessel(nu, j * x / R)
        dphi = der * j / R
        phi[-1] = 0.0
    else:
        raise DomainError(f"unsupported geometry {geom.kind!r}")
    top = float(np.max(phi))
    phi, dphi = phi / top, dphi / top
    d = geom.boundary_distance(x)
    inner = d > 0
    ratio = phi[inner] / d[inner]
    c = float(min(np.min(ratio), 1.0 / np.max(ratio)))
    return EigenPair(lam, GridFunction(x, phi, dphi), c)


# ---------------------------------------------------------------------------
# integral form on the ball
# ---------------------------------------------------------------------------


def _phi1(z):
    """∫_0^1 e^(zτ) (1 - τ) dτ = (e^z - 1 - z) / z^2."""
    z = np.asarray(z, dtype=float)
    zs = np.where(np.abs(z) < 1e-3, 1.0, z)
    series = 0.5 + z / 6.0 + z**2 / 24.0 + z**3 / 120.0
    return np.where(np.abs(z) < 1e-3, series, (np.expm1(zs) - zs) / zs**2)


def _phi2(z):
    """∫_0^1 e^(zτ) τ dτ = (z e^z - e^z + 1) / z^2."""
    z = np.asarray(z, dtype=float)
    zs = np.where(np.abs(z) < 1e-3, 1.0, z)
    series = 0.5 + z / 3.0 + z**2 / 8.0 + z**3 / 30.0
    return np.where(np.abs(z) < 1e-3, series, (zs * np.exp(zs) - np.expm1(zs)) / zs**2)


class RadialKernel:
    """Discrete F ↦ Q(r) = ∫_0^r t^(1-N) ∫_0^t e^(-κ(t-s)) F(s) ds dt.

    F is given at the nodes r_0 = 0 < ... < r_n = R.  Inner integrals use
    the exponential weight exactly against the linear interpolant of F; on
    the last cell F is held at F_(n-1), since ψ is infinite at r = R.
    """

    def __init__(self, nodes: np.ndarray, dim: int, kappa: float):
        r = np.asarray(nodes, dtype=float)
        if r[0] != 0.0:
            raise ValueError("radial nodes must start at 0")
        if abs(kappa) * r[-1] > 700.0:
            raise OverflowError("|κ| R too large for the exponential weights")
        self.r, self.dim, self.kappa = r, dim, float(kappa)
        h = np.diff(r)
        z = -self.kappa * h
        # cell (i, i+1) contributes h (F_i φ2(z) + F_(i+1) φ1(z)) at r_(i+1)
        self.w_left = h * _phi2(z)
        self.w_right = h * _phi1(z)
        self.h = h
        self.radial = np.zeros_like(r)
        self.radial[1:] = r[1:] ** (1.0 - dim)

    def inner(self, F: np.ndarray) -> np.ndarray:
        """e^(-κt) ∫_0^t e^(κs) F(s) ds at the nodes."""
        F = np.array(F, dtype=float)
        F[-1] = F[-2]
        cells = self.w_left * F[:-1] + self.w_right * F[1:]
        k, r = self.kappa, self.r
        out = np.zeros_like(r)
        out[1:] = np.exp(-k * r[1:]) * np.cumsum(np.exp(k * r[1:]) * cells)
        return out

    def flux(self, F: np.ndarray) -> np.ndarray:
        """t^(1-N) × inner: minus the derivative of the represented function."""
        return self.radial * self.inner(F)

    def apply(self, F: np.ndarray) -> np.ndarray:
        G = self.flux(F)
        Q = np.zeros_like(G)
        Q[1:] = np.cumsum(0.5 * self.h * (G[:-1] + G[1:]))
        return Q

    def matrix(self) -> np.ndarray:
        """Dense matrix of F ↦ Q (columns by linearity)."""
        n = self.r.size
        M = np.empty((n, n))
        eye = np.eye(n)
        for j in range(n):
            M[:, j] = self.apply(eye[:, j])
        return M


@dataclass
class Psi:
    """ψ(r, u) = σ p(R - r) g(u) + λ f(u) + S on the radial nodes."""

    p: np.ndarray
    g: object
    sigma: float = 1.0
    lam: float = 0.0
    f: SourceTerm = field(default_factory=SourceTerm.none)
    constant: float = 0.0

    def __call__(self, u):
        u = np.maximum(u, 1e-300)
        out = self.sigma * self.p * self.g(u) + self.constant
        if self.lam:
            out = out + self.lam * self.f(u)
        return out

    def derivative(self, u):
        u = np.maximum(u, 1e-300)
        out = self.sigma * self.p * self.g.derivative(u)
        if self.lam:
            out = out + self.lam * self.f.derivative(u)
        return out


def _radial_weight(geom: Geometry, w: Weight, r: np.ndarray) -> np.ndarray:
    d = geom.weight_distance(r)
    p = np.full_like(r, np.inf)
    p[d > 0] = w(d[d > 0])
    return p


def default_damping(g) -> float:
    """θ = 1/(1+β): cancels the log-slope -β of the g term exactly."""
    beta = getattr(g, "beta", None)
    return 1.0 / (1.0 + (beta if beta is not None else 1.0))


def solve_integral(
    kernel: RadialKernel,
    psi: Psi,
    u0: np.ndarray,
    *,
    tol: float = 1e-12,
    max_iter: int = 5000,
    theta: float | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Fixed point of u = T(u) = Q(R) - Q(r^(N-1) ψ(u)), u(R) = 0.

    Iterates u <- u^(1-θ) T(u)^θ, a damped step in log u.  In the Thompson
    metric the g term of T has Lipschitz constant β and a u^q source q, so
    with θ = 1/(1+β) the step contracts with factor at most (β+q)/(1+β).
    """
    r = kernel.r
    rN = r ** (kernel.dim - 1)
    theta = default_damping(psi.g) if theta is None else theta
    u = np.array(u0, dtype=float)
    u[-1] = 0.0
    if np.any(u[:-1] <= 0):
        raise ValueError("starting guess must be positive below r = R")
    history = []
    status, message = MAX_ITERATIONS, "max iterations"
    for it in range(1, max_iter + 1):
        Q = kernel.apply(rN * psi(u))
        T = Q[-1] - Q[:-1]
        if not np.all(np.isfinite(T)) or np.any(T <= 0):
            status, message = DIVERGED, "integral map left the positive cone"
            break
        err = float(np.max(np.abs(u[:-1] - T)) / np.max(T))
        history.append(err)
        if err <= tol:
            u[:-1] = T
            status, message = CONVERGED, ""
            break
        u[:-1] = u[:-1] ** (1.0 - theta) * T**theta
    return u, SolveReport(
        status,
        iterations=len(history),
        residual_norm=history[-1] if history else math.nan,
        message=message,
        diagnostics={"theta": theta},
    )


# ---------------------------------------------------------------------------
# μ = 0 base problem and the Picard chain
# ---------------------------------------------------------------------------


@dataclass
class PicardTrace:
    maxima: list[float] = field(default_factory=list)
    deltas: list[float] = field(default_factory=list)
    final: GridFunction | None = None
    monotone: bool = True
    bounded: bool = True


def _require_ball(spec: ProblemSpec):
    if spec.geometry.kind != "ball":
        raise DomainError("this solve needs Ball geometry")


def _nonexistence_tp(spec: ProblemSpec):
    tp = check_tp_integrable(spec.weight)
    if tp.is_finite:
        return None
    return SolveReport(
        NONEXISTENCE,
        message="∫ t p(t) dt diverges at 0",
        diagnostics={"local_exponent": tp.local_exponent},
    )


def radial_nodes(geom: Geometry, *, fine: bool = False) -> np.ndarray:
    if fine:
        return make_mesh(geom, d_min=1e-13, ratio=1.005, h_max=2.5e-4)
    return make_mesh(geom, d_min=1e-13, ratio=1.05, h_max=0.005)


def solve_mu_zero(
    spec: ProblemSpec, nodes: np.ndarray | None = None, *, tol: float = 1e-12
) -> tuple[GridFunction | None, SolveReport]:
    """w with -Δw = p(R - r) g(w) + 1, w(R) = 0 (μ, λ and f are ignored).

    The fixed point is taken of the same discrete integral map the Picard
    chain uses, so that A = w(0) is consistent with it.  A finite-volume
    solve provides the starting guess.
    """
    _require_ball(spec)
    bad = _nonexistence_tp(spec)
    if bad is not None:
        return None, bad
    geom = spec.geometry
    r = radial_nodes(geom) if nodes is None else np.asarray(nodes, dtype=float)
    disc = Discretization(geom, r)
    eq = Equation(disc, weight=spec.weight, g=spec.g, sigma=1.0, source=1.0)
    guess = (1.0 - disc.xi**2) + 1e-3
    fd = newton(eq, guess, tol=1e-10, max_iter=200)
    start = disc.full(fd.U) if fd.converged else np.concatenate([guess, [0.0]])
    kernel = RadialKernel(r, geom.dim, 0.0)
    psi = Psi(_radial_weight(geom, spec.weight, r), spec.g, sigma=1.0, constant=1.0)
    w, report = solve_integral(kernel, psi, np.maximum(start, 1e-12), tol=tol)
    report.diagnostics.update({"A": float(w[0]), "fd_converged": fd.converged})
    deriv = -kernel.flux(r ** (geom.dim - 1) * psi(w))
    return GridFunction(r, w, deriv), report


def picard_iterate(
    spec: ProblemSpec,
    start: GridFunction,
    A: float,
    max_k: int = 200,
    *,
    tol: float = 1e-8,
) -> tuple[GridFunction, PicardTrace, SolveReport]:
    """The chain v_k = A - ∫_0^r e^(-μt) t^(1-N) ∫_0^t e^(μs) s^(N-1) ψ(s, v_(k-1)) ds dt.

    ψ(s, t) = p(R - s) g(t) + 1 and v_0 = ``start``.  The formula is applied
    as written (with e^(-μ(t-s)) as the combined kernel).  A decrease of any
    iterate at any node is a hard failure.
    """
    _require_ball(spec)
    if not spec.mu > 0:
        raise ValueError("the Picard chain is defined for μ > 0")
    geom = spec.geometry
    r = start.nodes
    kernel = RadialKernel(r, geom.dim, spec.mu)
    psi = Psi(_radial_weight(geom, spec.weight, r), spec.g, sigma=1.0, constant=1.0)
    rN = r ** (geom.dim - 1)
    v = np.array(start.values, dtype=float)
    trace = PicardTrace()
    slack = 1e-13 * A
    status, message = MAX_ITERATIONS, "max_k reached"
    for k in range(1, max_k + 1):
        new = A - kernel.apply(rN * psi(np.maximum(v, 1e-300)))
        if np.any(new < v - slack):
            i = int(np.argmax(v - new))
            trace.monotone = False
            raise ArithmeticError(f"Picard chain decreased at r = {r[i]:.6g} (step {k})")
        if np.any(new > A + slack):
            trace.bounded = False
            raise ArithmeticError(f"Picard iterate exceeds A at step {k}")
        delta = float(np.max(np.abs(new - v)))
        trace.maxima.append(float(new.max()))
        trace.deltas.append(delta)
        v = new
        if delta < tol:
            status, message = CONVERGED, ""
            break
    deriv = -kernel.flux(rN * psi(np.maximum(v, 1e-300)))
    final = GridFunction(r, v, deriv)
    trace.final = final
    report = SolveReport(
        status,
        iterations=len(trace.deltas),
        residual_norm=trace.deltas[-1] if trace.deltas else math.nan,
        message=message,
        diagnostics={"A": A, "mu": spec.mu},
    )
    return final, trace, report


def integrating_factor_residual(spec: ProblemSpec, v: GridFunction, *, kappa: float | None = None) -> float:
    """Check -(e^(κr) r^(N-1) v')' = e^(κr) r^(N-1) ψ(r, v) in integrated form.

    Compares e^(κr) r^(N-1) v'(r), with v' from five-point differences of the
    nodal values, against -∫_0^r e^(κs) s^(N-1) ψ ds.  Returns the maximum
    difference relative to the largest flux, over nodes away from r = R.
    κ defaults to μ (the representation as written).
    """
    from .grid import differentiate

    geom = spec.geometry
    k = spec.mu if kappa is None else kappa
    r = v.nodes
    kernel = RadialKernel(r, geom.dim, k)
    psi = Psi(_radial_weight(geom, spec.weight, r), spec.g, sigma=1.0, constant=1.0)
    rN = r ** (geom.dim - 1)
    inner = kernel.inner(rN * psi(np.maximum(v.values, 1e-300)))  # e^(-κr) ∫ e^(κs) ...
    dv = differentiate(r, v.values, 1, 5)
    lhs = rN * dv
    keep = (geom.radius - r) > 1e-3 * geom.radius
    return float(np.max(np.abs(lhs[keep] + inner[keep])) / np.max(np.abs(inner[keep])))


# ---------------------------------------------------------------------------
# finite-volume solves with continuation
# ---------------------------------------------------------------------------


def _equation(spec: ProblemSpec, disc: Discretization, mu: float, lam: float | None = None, source=0.0):
    return Equation(
        disc,
        weight=spec.weight,
        g=spec.g,
        sigma=spec.absorption_sign,
        lam=spec.lam if lam is None else lam,
        f=spec.f,
        mu=mu,
        a=spec.a,
        source=source,
    )


def _initial_guess(disc: Discretization) -> np.ndarray:
    if disc.geometry.kind == "interval":
        return np.sin(np.pi * disc.xi) + 1e-3
    return (1.0 - (disc.xi / disc.geometry.radius) ** 2) + 1e-3


def solve_fd(
    spec: ProblemSpec,
    nodes: np.ndarray | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 100,
    guess: np.ndarray | None = None,
) -> tuple[GridFunction | None, SolveReport]:
    """Finite-volume solve of spec, continued in μ from μ = 0.

    The μ = 0 solution is returned in the diagnostics as an ordering
    witness: it is a sub-solution for μ > 0 and a super-solution for μ < 0
    (for (P)⁻, where the convection enters with the sign of μ).
    """
    geom = spec.geometry
    x = make_mesh(geom) if nodes is None else np.asarray(nodes, dtype=float)
    disc = Discretization(geom, x)
    U0 = _initial_guess(disc) if guess is None else np.asarray(guess, dtype=float)[disc.unknowns]
    base = newton(_equation(spec, disc, 0.0), U0, tol=tol, max_iter=max_iter)
    if not base.converged:
        return None, SolveReport(
            DIVERGED, base.iterations, base.residual, message=f"μ = 0 solve failed: {base.reason}"
        )
    solves, its = 1, base.iterations
    U = base.U
    reached = 0.0
    path = [0.0]
    if spec.mu != 0.0:
        log_scale = abs(spec.mu) > 10.0
        if log_scale:
            # reach |μ| = 1 linearly, then continue in log μ
            sgn = math.copysign(1.0, spec.mu)
            first = continuation(
                lambda m: _equation(spec, disc, m), 0.0, sgn, U, tol=tol, max_iter=max_iter
            )
            solves += first.solves
            its += first.newton_iterations
            path += first.path[1:]
            if not first.converged:
                return _failed(disc, first, solves, its, path)
            cont = continuation(
                lambda m: _equation(spec, disc, sgn * m),
                1.0,
                abs(spec.mu),
                first.U,
                log_scale=True,
                tol=tol,
                max_iter=max_iter,
            )
            path += [sgn * m for m in cont.path[1:]]
        else:
            cont = continuation(
                lambda m: _equation(spec, disc, m), 0.0, spec.mu, U, tol=tol, max_iter=max_iter
            )
            path += cont.path[1:]
        solves += cont.solves
        its += cont.newton_iterations
        if not cont.converged:
            return _failed(disc, cont, solves, its, path)
        U = cont.U
        reached = spec.mu
    eq = _equation(spec, disc, reached)
    u = disc.full(U)
    du = disc.derivative_estimate(U)
    report = SolveReport(
        CONVERGED,
        iterations=its,
        residual_norm=relative_residual(eq, U),
        diagnostics={
            "solves": solves,
            "max_u": float(u.max()),
            "mu_path_end": path[-1],
            "mu0_solution": disc.full(base.U),
        },
    )
    return GridFunction(x, u, du), report


def _failed(disc, cont, solves, its, path):
    last = cont.last
    return None, SolveReport(
        DIVERGED,
        iterations=its,
        residual_norm=last.residual if last else math.nan,
        message=f"continuation stalled at μ = {path[-1]:.6g}",
        diagnostics={"solves": solves, "mu_reached": path[-1], "max_u": float(np.max(disc.full(cont.U)))},
    )


# ---------------------------------------------------------------------------
# (P)⁻ on the ball
# ---------------------------------------------------------------------------


def _sublinear_M(spec: ProblemSpec, umax: float) -> float:
    """Smallest convenient M > 1 with M >= λ f(M |u|_∞)."""
    q = spec.f.exponent
    if spec.f.kind == "none":
        return 1.0 + 1e-9
    if q >= 1.0:
        raise DomainError("the scaling step needs a sublinear source")
    return max(1.0 + 1e-9, (spec.lam * umax**q) ** (1.0 / (1.0 - q)) * (1.0 + 1e-9))


def _solve_a1_ball(spec: ProblemSpec, r: np.ndarray, tol: float):
    """a = 1, μ > 0: integral form with the kernel e^(μ(t-s)).

    Sub-solution: the μ-free solution ζ.  Super-solution: M u with u the
    solution of -Δu = p g(u) + 1 + μ|u'| and M >= λ f(M |u|_∞).  The
    solution is then found by Newton on the integral equation started at the
    super-solution and checked to lie between the two.
    """
    geom = spec.geometry
    kernel = RadialKernel(r, geom.dim, -spec.mu)
    p = _radial_weight(geom, spec.weight, r)
    free, free_rep = solve_fd(
        ProblemSpec(spec.sign, spec.weight, spec.g, spec.f, spec.lam, 0.0, spec.a, geom), r, tol=1e-10
    )
    if free is None:
        return None, SolveReport(DIVERGED, message="μ-free sub-solution failed: " + free_rep.message)
    # super-solution: continue the auxiliary problem in μ on the integral form
    aux_psi = Psi(p, spec.g, sigma=1.0, constant=1.0)
    w, _ = solve_mu_zero(spec, r)
    u, rep = solve_integral(RadialKernel(r, geom.dim, -spec.mu), aux_psi, w.values, tol=tol)
    if not rep.converged:
        return None, SolveReport(DIVERGED, message="auxiliary problem failed: " + rep.message)
    M = _sublinear_M(spec, float(u.max()))
    sup = M * u
    psi = Psi(p, spec.g, sigma=1.0, lam=spec.lam, f=spec.f)
    sol, rep = solve_integral(kernel, psi, sup, tol=tol)
    sub = free.values
    ok_low = bool(np.all(sub[:-1] <= sol[:-1] * (1 + 1e-9)))
    ok_high = bool(np.all(sol[:-1] <= sup[:-1] * (1 + 1e-9)))
    deriv = -kernel.flux(r ** (geom.dim - 1) * psi(np.maximum(sol, 1e-300)))
    rep.diagnostics.update(
        {
            "route": "integral",
            "M": M,
            "sub_below": ok_low,
            "below_super": ok_high,
            "max_u": float(sol.max()),
            "sub": sub,
            "super": sup,
        }
    )
    if rep.converged and not (ok_low and ok_high):
        rep.status = DIVERGED
        rep.message = "solution escaped the ordered pair"
    return GridFunction(r, sol, deriv), rep


def solve_radial(
    spec: ProblemSpec,
    nodes: np.ndarray | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> tuple[GridFunction | None, SolveReport]:
    """Solve (P)± on the ball.

    a = 1 with μ > 0 goes through the integral form (see ``_solve_a1_ball``);
    everything else through the finite-volume operator with μ-continuation.
    The report carries ``sub`` / ``super`` ordering witnesses where the
    construction provides them.
    """
    _require_ball(spec)
    if spec.sign == "minus":
        bad = _nonexistence_tp(spec)
        if bad is not None:
            return None, bad
    r = radial_nodes(spec.geometry) if nodes is None else np.asarray(nodes, dtype=float)
    if spec.sign == "minus" and spec.a == 1.0 and spec.mu > 0:
        return _solve_a1_ball(spec, r, max(tol, 1e-12))
    return solve_problem(spec, r, tol=tol, max_iter=max_iter)


def solve_problem(
    spec: ProblemSpec,
    nodes: np.ndarray | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> tuple[GridFunction | None, SolveReport]:
    """Finite-volume solve on either geometry with ordering witnesses.

    For (P)⁻ the μ = 0 solution is a sub-solution when μ > 0 and a
    super-solution when μ < 0.  For (P)⁺ the solve starts from the
    super-solution of the source problem -ΔU = λ f(U) + 1 scaled by M.
    """
    geom = spec.geometry
    x = make_mesh(geom) if nodes is None else np.asarray(nodes, dtype=float)
    if spec.sign == "plus":
        return _solve_plus(spec, x, tol=tol, max_iter=max_iter)
    u, rep = solve_fd(spec, x, tol=tol, max_iter=max_iter)
    if u is None:
        return None, rep
    base = rep.diagnostics.pop("mu0_solution")
    if spec.mu > 0:
        rep.diagnostics["sub"] = base
        rep.diagnostics["sub_below"] = bool(np.all(base <= u.values + 1e-9 * u.max()))
    elif spec.mu < 0:
        rep.diagnostics["super"] = base
        rep.diagnostics["below_super"] = bool(np.all(u.values <= base + 1e-9 * u.max()))
    rep.diagnostics["route"] = "finite-volume"
    return u, rep


def _source_amplitude(spec: ProblemSpec) -> float:
    """Amplitude A with A λ₁ = λ f(A) + 1, a starting scale for -Δv = λ f(v) + 1."""
    geom = spec.geometry
    lam1 = math.pi**2 if geom.kind == "interval" else (_bessel_zero(geom.dim / 2.0 - 1.0) / geom.radius) ** 2
    A = 1.0 / lam1
    for _ in range(200):
        A_new = (spec.lam * float(spec.f(np.array([A]))[0]) + 1.0) / lam1
        if abs(A_new - A) <= 1e-12 * A_new:
            break
        A = A_new
    return A_new


def source_super_solution(spec: ProblemSpec, x: np.ndarray, *, tol: float = 1e-10):
    """M v with -Δv = λ f(v) + 1; for μ > 0 and a < 1, M is raised until
    M >= M^a |v'|^a, so that M v is a super-solution of (P)⁺."""
    geom = spec.geometry
    disc = Discretization(geom, x)
    eq = Equation(disc, lam=spec.lam, f=spec.f, source=1.0)
    r = newton(eq, _source_amplitude(spec) * _initial_guess(disc), tol=tol)
    if not r.converged:
        raise ArithmeticError("source problem failed to converge")
    v = disc.full(r.U)
    dv = disc.derivative_estimate(r.U)
    M = 1.0
    if spec.mu > 0:
        if spec.a >= 1:
            raise DomainError("the source super-solution needs a < 1 when μ > 0")
        G = spec.mu * float(np.max(np.abs(dv))) ** spec.a
        M = max(1.0, G ** (1.0 / (1.0 - spec.a)) * 1.01)
    return GridFunction(x, M * v, M * dv), M


def _plus_from_super(spec: ProblemSpec, disc: Discretization, tol: float, max_iter: int):
    sup, M = source_super_solution(spec, disc.x)
    res = newton(_equation(spec, disc, spec.mu), np.maximum(sup.values[disc.unknowns], 1e-12), tol=tol, max_iter=max_iter)
    return res, sup, M


def _solve_plus(spec: ProblemSpec, x: np.ndarray, *, tol: float, max_iter: int, max_doublings: int = 12):
    """(P)⁺: Newton from the super-solution M v.

    When that fails, λ is doubled until Newton from the super-solution
    succeeds and the branch is continued back down to the requested λ; a
    stall on the way is reported with the λ reached.
    """
    geom = spec.geometry
    disc = Discretization(geom, x)
    try:
        res, sup, M = _plus_from_super(spec, disc, tol, max_iter)
        lam_ref, path = spec.lam, [spec.lam]
        if not res.converged:
            for k in range(1, max_doublings + 1):
                lam_ref = spec.lam * 2.0**k
                ref = replace(spec, lam=lam_ref)
                res, _, _ = _plus_from_super(ref, disc, tol, max_iter)
                if res.converged:
                    break
            if res.converged:
                cont = continuation(
                    lambda lam: _equation(replace(spec, lam=lam), disc, spec.mu),
                    lam_ref,
                    spec.lam,
                    res.U,
                    log_scale=True,
                    tol=tol,
                    # predictor steps converge in a few iterations; near the
                    # fold a long Newton run only delays the step halving
                    max_iter=min(max_iter, 30),
                )
                path = cont.path
                if not cont.converged:
                    return None, SolveReport(
                        DIVERGED,
                        iterations=cont.newton_iterations,
                        residual_norm=cont.last.residual if cont.last else math.nan,
                        message=f"λ-continuation stalled at λ = {path[-1]:.6g}",
                        diagnostics={"lambda_reached": path[-1], "lambda_ref": lam_ref},
                    )
                res = replace(res, U=cont.U, iterations=cont.newton_iterations)
    except (ArithmeticError, DomainError) as exc:
        return None, SolveReport(DIVERGED, message=str(exc))
    if not res.converged:
        return None, SolveReport(
            DIVERGED, res.iterations, res.residual, message=f"(P)+ Newton failed: {res.reason}"
        )
    eq = _equation(spec, disc, spec.mu)
    u = disc.full(res.U)
    rep = SolveReport(
        CONVERGED,
        iterations=res.iterations,
        residual_norm=relative_residual(eq, res.U),
        diagnostics={
            "route": "finite-volume",
            "max_u": float(u.max()),
            "super": sup.values,
            "below_super": bool(np.all(u <= sup.values + 1e-9 * sup.max())),
            "M": M,
            "lambda_path": path,
        },
    )
    return GridFunction(x, u, disc.derivative_estimate(res.U)), rep


# ---------------------------------------------------------------------------
# μ <= 0 auxiliary problem
# ---------------------------------------------------------------------------


def aux_lower_constant(spec: ProblemSpec) -> float:
    """m = inf over x and t > 0 of p(d(x)) g(t) + λ f(t).

    p is nonincreasing, so its smallest value is at the largest distance;
    the infimum in t is taken numerically on a log grid and polished.
    """
    geom = spec.geometry
    dmax = 1.0 if geom.kind == "interval" else geom.radius
    p_min = float(spec.weight(np.array([dmax]))[0])
    if spec.f.kind == "none":
        raise DomainError("m = inf(p g + f) is zero without a source term")

    def phi(logt):
        t = np.exp(logt)
        return p_min * spec.g(t) + spec.lam * spec.f(t)

    grid = np.linspace(-30.0, 30.0, 2401)
    vals = phi(grid)
    i = int(np.argmin(vals))

    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best = minimize_scalar(phi, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(best.fun, vals[i]))


def solve_aux_mu_nonpositive(
    spec: ProblemSpec, nodes: np.ndarray | None = None, *, tol: float = 1e-10
) -> tuple[GridFunction | None, SolveReport]:
    """-Δv = m + μ|∇v|^a, v = 0 on the boundary, for μ <= 0.

    Zero is a sub-solution and m (R² - r²)/(2N) (or m t(1-t)/2 on the
    interval) a super-solution; the report records the ordering.
    """
    if spec.mu > 0:
        raise ValueError("the auxiliary problem is posed for μ <= 0")
    m = aux_lower_constant(spec)
    geom = spec.geometry
    x = make_mesh(geom) if nodes is None else np.asarray(nodes, dtype=float)
    disc = Discretization(geom, x)
    if geom.kind == "interval":
        sup = 0.5 * m * x * (1.0 - x)
    else:
        sup = m * (geom.radius**2 - x**2) / (2.0 * geom.dim)
    U = sup[disc.unknowns]
    eq0 = Equation(disc, source=m)
    r0 = newton(eq0, U, tol=tol)
    U = r0.U
    if spec.mu != 0:
        cont = continuation(
            lambda mu: Equation(disc, source=m, mu=mu, a=spec.a), 0.0, spec.mu, U, tol=tol
        )
        if not cont.converged:
            return None, SolveReport(DIVERGED, message="continuation failed", diagnostics={"m": m})
        U = cont.U
    v = disc.full(U)
    eq = Equation(disc, source=m, mu=spec.mu, a=spec.a)
    rep = SolveReport(
        CONVERGED,
        residual_norm=relative_residual(eq, U),
        diagnostics={
            "m": m,
            "super": sup,
            "positive": bool(np.all(U > 0)),
            "below_super": bool(np.all(v <= sup * (1 + 1e-9) + 1e-15)),
        },
    )
    return GridFunction(x, v, disc.derivative_estimate(U)), rep


# ---------------------------------------------------------------------------
# linear source: monotone outer iteration
# ---------------------------------------------------------------------------


@dataclass
class LinearSourceTrace:
    maxima: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)


def solve_linear_source(
    spec: ProblemSpec,
    nodes: np.ndarray | None = None,
    *,
    tol: float = 1e-8,
    max_outer: int = 4000,
    blowup: float = 1e6,
    newton_every: int = 10,
) -> tuple[GridFunction | None, SolveReport]:
    """(P)⁻ with f(u) = u by the iteration u_(k+1) = S(λ u_k).

    S(s) solves -Δu = p g(u) + s + μ|∇u|^a; it is isotone for 0 < a < 1, so
    started from the λ = 0 solution the iterates increase and stay below any
    solution.  Every ``newton_every`` steps Newton on the full problem is
    tried from the Aitken-extrapolated iterate; a positive solution above the
    current iterate ends the run.  Iterates exceeding ``blowup`` times the
    starting maximum are reported as NonexistenceEvidence.

    The default tolerance is looser than elsewhere: with a < 1 the term
    |u'|^a is not differentiable at the maximum, and Newton stalls there a
    little above 1e-10.
    """
    if spec.sign != "minus" or spec.f.kind != "linear":
        raise DomainError("needs (P)- with a linear source")
    if not (0.0 < spec.a < 1.0) or spec.mu < 0:
        raise DomainError("needs 0 < a < 1 and mu >= 0")
    geom = spec.geometry
    x = make_mesh(geom) if nodes is None else np.asarray(nodes, dtype=float)
    disc = Discretization(geom, x)
    free = ProblemSpec(spec.sign, spec.weight, spec.g, SourceTerm.none(), 1.0, spec.mu, spec.a, geom)
    base, rep = solve_fd(free, x, tol=tol)
    if base is None:
        return None, SolveReport(DIVERGED, message="λ = 0 solve failed: " + rep.message)
    U = base.values[disc.unknowns]
    start_max = float(U.max())
    outer = _equation(free, disc, spec.mu, lam=0.0, source=0.0)
    full = _equation(spec, disc, spec.mu)
    trace = LinearSourceTrace(maxima=[start_max])
    prev_step = None
    status, message, solution = MAX_ITERATIONS, "outer iteration cap reached", None
    for k in range(1, max_outer + 1):
        outer.source[:] = spec.lam * U
        guess = U if prev_step is None else U + prev_step
        res = newton(outer, guess, tol=tol)
        if not res.converged and prev_step is not None:
            retry = newton(outer, U, tol=tol)
            res = retry if retry.residual < res.residual else res
        # a stall at the kink of |u'|^a is harmless for the outer step
        if not (res.converged or res.residual <= 100.0 * tol):
            status, message = DIVERGED, f"inner solve failed: {res.reason}"
            break
        step = res.U - U
        if np.any(step < -1e-9 * res.U.max()):
            status, message = DIVERGED, "outer iterates lost monotonicity"
            break
        rho = float(step.max() / prev_step.max()) if prev_step is not None and prev_step.max() > 0 else math.nan
        U_prev, U, prev_step = U, res.U, step
        trace.maxima.append(float(U.max()))
        trace.ratios.append(rho)
        if step.max() <= tol * U.max():
            solution = U
            status, message = CONVERGED, ""
            break
        if U.max() > blowup * start_max:
            status, message = NONEXISTENCE, f"outer iterates unbounded (max u = {U.max():.3e})"
            break
        if k % newton_every == 0 and 0.0 < rho < 1.0:
            guess = U + rho / (1.0 - rho) * (U - U_prev)
            cand = newton(full, guess, tol=tol)
            if cand.converged and np.all(cand.U > 0) and np.all(cand.U >= U * (1.0 - 1e-9)):
                solution = cand.U
                status, message = CONVERGED, ""
                break
    diagnostics = {"outer_iterations": len(trace.ratios), "trace": trace, "sub": base.values}
    if solution is None:
        diagnostics["max_u"] = trace.maxima[-1]
        return None, SolveReport(status, len(trace.ratios), math.nan, message=message, diagnostics=diagnostics)
    u = disc.full(solution)
    diagnostics.update(max_u=float(u.max()), sub_below=bool(np.all(base.values <= u + 1e-9 * u.max())))
    return GridFunction(x, u, disc.derivative_estimate(solution)), SolveReport(
        CONVERGED, len(trace.ratios), relative_residual(full, solution), diagnostics=diagnostics
    )
