"""Finite-volume discretisation of the radial / interval operator.

    R(u) = -Δ_h u - σ p(d) g(u) - λ f(u) - μ G_h(u)^a - S

with u = 0 at Dirichlet nodes (both ends of the interval, r = R on the
ball) and the symmetry condition u'(0) = 0 at the ball centre.  G_h is the
Godunov upwind approximation of |u'|, chosen so that R_i is nonincreasing in
the neighbouring values; the discrete comparison principle then holds and
sub/super-solution iterations stay ordered.

Sub-solutions satisfy R <= 0, super-solutions R >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .model import Geometry, Singularity, SourceTerm, Weight

ROUNDING_ULPS = 64.0


class Discretization:
    def __init__(self, geometry: Geometry, nodes: np.ndarray):
        x = np.asarray(nodes, dtype=float)
        self.geometry = geometry
        self.x = x
        n = x.size - 1
        self.n = n
        h = np.diff(x)
        self.h = h
        ball = geometry.kind == "ball"
        N = geometry.dim if ball else 1
        xm = 0.5 * (x[:-1] + x[1:])
        wm = xm ** (N - 1) / h  # flux coefficient per cell
        left = np.concatenate([[x[0]], xm])
        right = np.concatenate([xm, [x[-1]]])
        if ball:
            meas = (right**N - left**N) / N
            self.unknowns = np.arange(0, n)
        else:
            meas = right - left
            self.unknowns = np.arange(1, n)
        idx = self.unknowns
        self.measure = meas[idx]
        wl = np.where(idx > 0, wm[np.maximum(idx - 1, 0)], 0.0)
        wr = wm[idx]
        self.lower = -wl / self.measure
        self.upper = -wr / self.measure
        self.diag = (wl + wr) / self.measure
        self.h_right = h[idx]
        self.h_left = np.where(idx > 0, h[np.maximum(idx - 1, 0)], h[0])
        self.center = ball
        self.xi = x[idx]
        self.dist = geometry.weight_distance(self.xi)

    @property
    def m(self) -> int:
        return self.unknowns.size

    def full(self, U: np.ndarray) -> np.ndarray:
        u = np.zeros(self.n + 1)
        u[self.unknowns] = U
        return u

    def laplacian(self, U: np.ndarray, with_floor: bool = False):
        """-Δ_h applied to the unknowns (Dirichlet data zero).

        With ``with_floor`` also returns the rounding floor of the stencil,
        i.e. a few ulps of the sum of the absolute stencil terms.
        """
        u = self.full(U)
        idx = self.unknowns
        left = np.where(idx > 0, u[np.maximum(idx - 1, 0)], 0.0)
        tl, tc, tr = self.lower * left, self.diag * U, self.upper * u[idx + 1]
        lap = tl + tc + tr
        if not with_floor:
            return lap
        floor = ROUNDING_ULPS * np.finfo(float).eps * (np.abs(tl) + np.abs(tc) + np.abs(tr))
        return lap, floor

    def one_sided(self, U: np.ndarray):
        u = self.full(U)
        idx = self.unknowns
        dp = (u[idx + 1] - U) / self.h_right
        dm = np.where(idx > 0, (U - u[np.maximum(idx - 1, 0)]) / self.h_left, -dp)
        return dp, dm

    def upwind_gradient(self, U: np.ndarray, mu_sign: float):
        """|u'| upwinded for a term ``mu * |u'|^a`` on the right-hand side.

        Returns s and the (left, diag, right) derivatives of s.
        """
        dp, dm = self.one_sided(U)
        if mu_sign >= 0:
            A = np.maximum(dp, 0.0)
            B = np.maximum(-dm, 0.0)
            sgn = 1.0
        else:
            A = np.maximum(-dp, 0.0)
            B = np.maximum(dm, 0.0)
            sgn = -1.0
        useA = A >= B
        s = np.where(useA, A, B)
        hr, hl = self.h_right, self.h_left
        dr = np.where(useA & (A > 0), sgn / hr, 0.0)
        dd = np.where(useA, np.where(A > 0, -sgn / hr, 0.0), np.where(B > 0, -sgn / hl, 0.0))
        dl = np.where(~useA & (B > 0), sgn / hl, 0.0)
        if self.center:
            # ghost value u_{-1} = u_1 folds the left branch onto the right
            dr[0] = np.where(A[0] > 0, sgn / hr[0], 0.0)
            dd[0] = np.where(A[0] > 0, -sgn / hr[0], 0.0)
            dl[0] = 0.0
        return s, dl, dd, dr

    def derivative_estimate(self, U: np.ndarray) -> np.ndarray:
        """u' at every mesh node: centered inside, one-sided at the ends."""
        from .grid import central_derivative

        d = central_derivative(self.x, self.full(U))
        if self.center:
            d[0] = 0.0
        return d


@dataclass
class Equation:
    """Residual R(u) = -Δ_h u - σ p g(u) - λ f(u) - μ G^a - S on the unknowns."""

    disc: Discretization
    weight: Weight | None = None
    g: Singularity | None = None
    sigma: float = 0.0
    lam: float = 0.0
    f: SourceTerm = field(default_factory=SourceTerm.none)
    mu: float = 0.0
    a: float = 1.0
    source: np.ndarray | float = 0.0
    grad_floor: float = 1e-10

    def __post_init__(self):
        self.p = self.weight(self.disc.dist) if self.weight is not None else None
        self.source = np.broadcast_to(np.asarray(self.source, dtype=float), (self.disc.m,)).copy()

    @property
    def needs_positive(self) -> bool:
        return self.sigma != 0.0 and self.g is not None

    @property
    def positive_only(self) -> bool:
        """u^q with q < 1 is undefined below zero as well."""
        return self.needs_positive or (self.lam != 0.0 and self.f.kind == "sublinear")

    def terms(self, U: np.ndarray):
        lap, floor = self.disc.laplacian(U, with_floor=True)
        if self.needs_positive:
            absorb = self.sigma * self.p * self.g(U)
        else:
            absorb = np.zeros_like(U)
        src = self.lam * self.f(U) if self.lam else np.zeros_like(U)
        if self.mu:
            s, *_ = self.disc.upwind_gradient(U, self.mu)
            conv = self.mu * s**self.a
            # rounding in the one-sided difference propagated through s^a
            u = self.disc.full(U)
            idx = self.disc.unknowns
            nb = np.maximum(np.abs(u[idx + 1]), np.abs(u[np.maximum(idx - 1, 0)]))
            ds = ROUNDING_ULPS * np.finfo(float).eps * (np.abs(U) + nb) / np.minimum(
                self.disc.h_left, self.disc.h_right
            )
            floor = floor + abs(self.mu) * ((s + ds) ** self.a - s**self.a)
        else:
            conv = np.zeros_like(U)
        return lap, absorb, src, conv, floor

    def residual(self, U: np.ndarray):
        """Residual, the per-node term magnitude and the rounding floor."""
        lap, absorb, src, conv, floor = self.terms(U)
        R = lap - absorb - src - conv - self.source
        scale = np.abs(lap) + np.abs(absorb) + np.abs(src) + np.abs(conv) + np.abs(self.source)
        return R, scale, floor

    def jacobian(self, U: np.ndarray) -> np.ndarray:
        d = self.disc
        ab = np.zeros((3, d.m))
        ab[0, 1:] = d.upper[:-1]
        ab[1] = d.diag.copy()
        ab[2, :-1] = d.lower[1:]
        if self.needs_positive:
            ab[1] -= self.sigma * self.p * self.g.derivative(U)
        if self.lam:
            ab[1] -= self.lam * self.f.derivative(U)
        if self.mu:
            s, dl, dd, dr = d.upwind_gradient(U, self.mu)
            if self.a == 1.0:
                ds = np.ones_like(s)
            else:
                ds = self.a * np.maximum(s, self.grad_floor) ** (self.a - 1.0)
            c = self.mu * ds
            ab[1] -= c * dd
            ab[0, 1:] -= c[:-1] * dr[:-1]
            ab[2, :-1] -= c[1:] * dl[1:]
        return ab


@dataclass
class NewtonResult:
    U: np.ndarray
    converged: bool
    iterations: int
    residual: float
    reason: str = ""


def relative_errors(R, scale, floor) -> np.ndarray:
    """|R| relative to the term magnitudes, net of the rounding floor."""
    return np.maximum(np.abs(R) - floor, 0.0) / (scale + floor + 1e-300)


def relative_residual(eq: Equation, U: np.ndarray) -> float:
    return float(np.max(relative_errors(*eq.residual(U))))


def newton(
    eq: Equation,
    U0: np.ndarray,
    *,
    tol: float = 1e-10,
    max_iter: int = 100,
    floor_fraction: float = 0.1,
) -> NewtonResult:
    """Damped Newton with positivity-preserving backtracking."""
    U = np.array(U0, dtype=float)
    if eq.positive_only and np.any(U <= 0):
        raise ValueError("initial guess must be positive for the singular term")
    with np.errstate(all="ignore"):
        R, scale, floor = eq.residual(U)
    weights = 1.0 / (scale + floor + 1e-300)
    res = float(np.max(relative_errors(R, scale, floor)))
    stall = 0
    for it in range(1, max_iter + 1):
        if not np.isfinite(res):
            return NewtonResult(U, False, it - 1, res, "non-finite residual")
        if res <= tol:
            return NewtonResult(U, True, it - 1, res)
        with np.errstate(all="ignore"):
            J = eq.jacobian(U)
            try:
                delta = solve_banded((1, 1), J, -R)
            except (np.linalg.LinAlgError, ValueError):
                return NewtonResult(U, False, it - 1, res, "singular jacobian")
        if not np.all(np.isfinite(delta)):
            return NewtonResult(U, False, it - 1, res, "non-finite step")
        step = 1.0
        if eq.positive_only:
            neg = delta < 0
            if np.any(neg):
                step = min(1.0, float(np.min((1.0 - floor_fraction) * U[neg] / -delta[neg])))
        merit0 = float(np.sum((R * weights) ** 2))
        accepted = False
        for _ in range(40):
            trial = U + step * delta
            with np.errstate(all="ignore"):
                Rt, st, ft = eq.residual(trial)
            merit = float(np.sum((Rt * weights) ** 2))
            if np.isfinite(merit) and merit <= (1.0 - 1e-4 * step) * merit0:
                accepted = True
                break
            # near convergence the weighted merit is dominated by rounding at
            # the graded end; judge by the floor-adjusted error instead
            if np.isfinite(merit) and float(np.max(relative_errors(Rt, st, ft))) < (1.0 - 1e-4 * step) * res:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # accept a tiny step anyway if it is finite; stall counter decides
            if not np.isfinite(merit):
                return NewtonResult(U, False, it, res, "line search failed")
            stall += 1
            if stall > 5:
                return NewtonResult(U, False, it, res, "line search stalled")
        U = trial
        R, scale, floor = Rt, st, ft
        weights = 1.0 / (scale + floor + 1e-300)
        res = float(np.max(relative_errors(R, scale, floor)))
    return NewtonResult(U, res <= tol, max_iter, res, "" if res <= tol else "max iterations")


@dataclass
class ContinuationResult:
    U: np.ndarray
    reached: float
    target: float
    solves: int
    newton_iterations: int
    path: list[float]
    last: NewtonResult | None = None

    @property
    def converged(self) -> bool:
        return self.reached == self.target


def continuation(
    build,
    start: float,
    target: float,
    U0: np.ndarray,
    *,
    log_scale: bool = False,
    first_step: float | None = None,
    min_step: float = 1e-4,
    max_solves: int = 400,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> ContinuationResult:
    """Natural-parameter continuation from ``start`` to ``target``.

    ``build(value)`` returns the Equation at that parameter value.  The
    predictor extrapolates log u when u is positive (solutions of these
    problems often grow exponentially in the parameter), linearly otherwise.
    Steps grow by 1.5 on success and halve on failure; ``min_step`` is
    relative to the span in the chosen scale.
    """
    to_s = np.log if log_scale else (lambda v: v)
    from_s = np.exp if log_scale else (lambda s: s)
    s0, s1 = float(to_s(start)), float(to_s(target))
    span = s1 - s0
    r = newton(build(start), U0, tol=tol, max_iter=max_iter)
    solves, its = 1, r.iterations
    if not r.converged:
        return ContinuationResult(np.asarray(U0), start, target, solves, its, [], r)
    U, s = r.U, s0
    path = [start]
    prev = None
    h = first_step if first_step is not None else span / 8.0
    while s != s1 and solves < max_solves:
        sn = s1 if abs(s1 - s) <= abs(h) * 1.0001 else s + h
        guess = U
        if prev is not None:
            sp, Up = prev
            theta = (sn - s) / (s - sp)
            with np.errstate(all="ignore"):
                if np.all(U > 0) and np.all(Up > 0):
                    guess = U * (U / Up) ** theta
                else:
                    guess = U + theta * (U - Up)
            if not np.all(np.isfinite(guess)):
                guess = U
        eq = build(float(from_s(sn)))
        if eq.positive_only and np.any(guess <= 0):
            guess = U
        r = newton(eq, guess, tol=tol, max_iter=max_iter)
        solves += 1
        its += r.iterations
        if r.converged:
            prev = (s, U)
            U, s = r.U, sn
            path.append(float(from_s(s)))
            h *= 1.5
        else:
            h *= 0.5
            if abs(h) < min_step * abs(span):
                break
    reached = target if s == s1 else float(from_s(s))
    return ContinuationResult(U, reached, target, solves, its, path, r)
