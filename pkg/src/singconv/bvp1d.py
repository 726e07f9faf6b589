"""The singular two-point problem H'' = -p(t) g(H), H(0) = H(1) = 0.

The solver shoots from a small t0 on the free parameter of the local
asymptotic expansion at 0 and integrates in s = ln t, where the problem is
not stiff:

    y1 = H,  y2 = t H',   y1' = y2,   y2' = y2 - t^2 p(t) g(y1).

Local expansions (pure powers p = t^-α, g = u^-β):

* α + β > 1:  H = K t^γ + c t^m,  γ = (2-α)/(1+β), m(m-1) = βγ(1-γ), m > 1
* α + β = 1:  H = t ((1+β)(L + c))^(1/(1+β)),  L = -ln t
* α + β < 1:  H = s t - s^-β t^(2-α-β) / ((1-α-β)(2-α-β))

Larger c (or s) gives a larger solution, so the shooting map is monotone.

Past half its maximum, H itself becomes the independent variable (see
``_Descent``), so the shooting target is the location T(c) of the zero of H
and the condition H(1) = 0 reads T(c) = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .discrete import ROUNDING_ULPS, Discretization, Equation, newton, relative_errors
from .grid import (
    CONVERGED,
    DIVERGED,
    MAX_ITERATIONS,
    NONEXISTENCE,
    GridFunction,
    SolveReport,
    graded_distances,
    make_mesh,
)
from .model import DomainError, Geometry, Singularity, Weight, classify_regime
from .quad import check_tp_integrable

T0 = 1e-12


def local_model_H(alpha: float, beta: float, t):
    """K t^γ, the exact solution of H'' = -t^-α H^-β on (0, ∞) for α + β > 1."""
    if not alpha < 2 or not alpha + beta > 1:
        raise DomainError("the local model needs α < 2 and α + β > 1")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    gamma = (2.0 - alpha) / (1.0 + beta)
    K = ((1.0 + beta) ** 2 / ((2.0 - alpha) * (alpha + beta - 1.0))) ** (1.0 / (1.0 + beta))
    out = K * t**gamma
    return float(out) if out.ndim == 0 else out


def subdominant_exponent(alpha: float, beta: float) -> float:
    """The exponent m > 1 of the correction mode t^m around K t^γ."""
    gamma = (2.0 - alpha) / (1.0 + beta)
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * beta * gamma * (1.0 - gamma)))


# ---------------------------------------------------------------------------
# starters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Starter:
    kind: str
    alpha: float | None
    beta: float | None

    def state(self, t0: float, c: float):
        """(H, H') at t0 for shooting parameter c."""
        a, b = self.alpha, self.beta
        if self.kind == "power":
            gamma = (2.0 - a) / (1.0 + b)
            K = local_model_H(a, b, 1.0)
            m = subdominant_exponent(a, b)
            return (
                K * t0**gamma + c * t0**m,
                K * gamma * t0 ** (gamma - 1.0) + c * m * t0 ** (m - 1.0),
            )
        if self.kind == "log":
            L = -math.log(t0) + c
            phi = ((1.0 + b) * L) ** (1.0 / (1.0 + b))
            return t0 * phi, phi - phi ** (-b)
        # linear; the correction only exists for power data with α + β < 1
        s = c
        if a is None or b is None:
            return s * t0, s
        e = 1.0 - a - b
        return (
            s * t0 - s**-b * t0 ** (1.0 + e) / (e * (1.0 + e)),
            s - s**-b * t0**e / e,
        )

    def initial_guess(self, t0: float) -> tuple[float, float]:
        """A parameter value and a natural scale for bracketing."""
        if self.kind == "power":
            K = local_model_H(self.alpha, self.beta, 1.0)
            return 0.0, K
        if self.kind == "log":
            return 0.0, 1.0
        return 1.0, 1.0

    def admissible(self, t0: float, c: float) -> bool:
        try:
            H, dH = self.state(t0, c)
        except (ValueError, ZeroDivisionError, OverflowError):
            return False
        return H > 0 and dH > 0 and math.isfinite(H) and math.isfinite(dH)


def _starter(w: Weight, g: Singularity) -> _Starter:
    if w.alpha is not None and g.beta is not None and g.beta > 0:
        reg = classify_regime(w.alpha, g.beta).regime
        if reg in ("power", "log"):
            return _Starter(reg, w.alpha, g.beta)
        return _Starter("linear", w.alpha, g.beta)
    return _Starter("linear", None, None)


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------


class _Trajectory:
    """Piecewise dense output in s = ln t, each piece with its own variables."""

    def __init__(self):
        self.pieces = []  # (s_lo, s_hi, sol, to_H)

    def add(self, sol, to_H):
        self.pieces.append((sol.t[0], sol.t[-1], sol, to_H))

    @property
    def s_end(self) -> float:
        return self.pieces[-1][1]

    def __call__(self, s):
        """(H, H') at the points s (must lie within the integrated range)."""
        s = np.asarray(s, dtype=float)
        H = np.empty_like(s)
        dH = np.empty_like(s)
        done = np.zeros(s.shape, dtype=bool)
        for lo, hi, sol, to_H in self.pieces:
            sel = ~done & (s <= hi)
            if np.any(sel):
                Hs, dHs = to_H(s[sel], sol.sol(s[sel]))
                H[sel], dH[sel] = Hs, dHs
                done |= sel
        return H, dH

    def final(self):
        lo, hi, sol, to_H = self.pieces[-1]
        H, dH = to_H(np.array([hi]), sol.y[:, -1:])
        return float(H[0]), float(dH[0])


class _Descent:
    """Past the half maximum, H decreases to 0: use σ = -ln(H/H_s) as the
    independent variable with unknowns t and q = (H')^2 / 2.

        dt/dσ = H / sqrt(2q),   dq/dσ = H p(t) g(H),   H = H_s e^-σ.

    The right-hand side stays bounded as H -> 0 for every β, so the zero of
    H is reached smoothly and T(c) = t(σ = ∞) is a continuous shooting map.
    """

    SIGMA_MAX = 80.0

    def __init__(self, w, g, t_s, H_s, dH_s, rtol):
        self.H_s = H_s

        def rhs(sig, y):
            H = H_s * math.exp(-sig)
            return [H / math.sqrt(2.0 * y[1]), H * float(w(y[0])) * float(g(H))]

        self.sol = solve_ivp(
            rhs,
            (0.0, self.SIGMA_MAX),
            [t_s, 0.5 * dH_s * dH_s],
            method="DOP853",
            rtol=rtol,
            atol=1e-300,
            dense_output=True,
        )
        self.ok = self.sol.status == 0
        self.T = float(self.sol.y[0, -1])
        self.t_s = t_s

    def sample(self, n: int = 4000):
        sig = np.linspace(0.0, self.SIGMA_MAX, n)
        t, q = self.sol.sol(sig)
        H = self.H_s * np.exp(-sig)
        return t, H, -np.sqrt(2.0 * q)


@dataclass
class _Shot:
    c: float
    T: float  # where H reaches zero (an upper estimate H(1) > 0 is used otherwise)
    miss: float
    path: _Trajectory
    descent: _Descent | None


def _power_system(alpha, beta):
    """Power regime in z = H / (K t^γ) = 1 + v, s = ln t.

    Pure power data make the equation autonomous:
        v'' + (2γ - 1) v' + γ(1 - γ) ((1 + v)^-β - 1 - v) = 0,
    and the shooting mode is v ~ (c/K) t^(m-γ), which keeps full relative
    precision however small t0 is.  Once z drops to 1/2 the variable v no
    longer helps and the caller switches to (H, t H').
    """
    gamma = (2.0 - alpha) / (1.0 + beta)
    K = local_model_H(alpha, beta, 1.0)
    m = subdominant_exponent(alpha, beta)
    kk = gamma * (1.0 - gamma)
    lin = 2.0 * gamma - 1.0

    def rhs(s, y):
        v = max(y[0], -0.75)
        # z^-β - z without cancellation while v is tiny
        return [y[1], -lin * y[1] - kk * (math.expm1(-beta * math.log1p(v)) - v)]

    def initial(t0, c):
        v0 = c / K * t0 ** (m - gamma)
        return [v0, (m - gamma) * v0]

    def to_H(s, y):
        t = np.exp(s)
        base = K * t**gamma
        return base * (1.0 + y[0]), base / t * (gamma * (1.0 + y[0]) + y[1])

    def switch(s, y):
        return y[0] + 0.5

    return rhs, initial, to_H, switch


def _general_rhs(w, g):
    def rhs(s, y):
        t = math.exp(s)
        return [y[1], y[1] - t * t * float(w(t)) * float(g(max(y[0], 1e-300)))]

    def to_H(s, y):
        return y[0], y[1] / np.exp(s)

    return rhs, to_H


def _integrate(rhs, s0, y0, atol, rtol, events, s1=0.0):
    return solve_ivp(
        rhs, (s0, s1), y0, method="DOP853", rtol=rtol, atol=atol, events=events, dense_output=True
    )


def _shoot(w, g, starter, t0, c, rtol) -> _Shot:
    path = _Trajectory()
    s0 = math.log(t0)
    grhs, gto_H = _general_rhs(w, g)
    if starter.kind == "power":
        rhs, initial, to_H, switch = _power_system(starter.alpha, starter.beta)
        switch.terminal = True
        switch.direction = -1
        sol = _integrate(rhs, s0, initial(t0, c), 1e-18, rtol, switch)
        path.add(sol, to_H)
        s0 = sol.t[-1]
        H, dH = path.final()
        y0 = [H, math.exp(s0) * dH]
    else:
        H0, dH0 = starter.state(t0, c)
        y0 = [H0, t0 * dH0]

    # up to the maximum of H, then down to half of it (still in s = ln t)
    def top(s, y):
        return y[1]

    top.terminal = True
    top.direction = -1

    def dropped(s, y):
        return y[0] - dropped.level

    dropped.terminal = True
    dropped.direction = -1
    dropped.level = 0.0

    def below_zero(s, y):
        # a crude stop for shots far from the root; the stepper cannot
        # follow H all the way into the singularity at 0
        return y[0] - 1e-12

    below_zero.terminal = True
    below_zero.direction = -1

    if s0 < 0.0:
        if y0[1] < 0.0:
            # the maximum was passed during the power phase
            dropped.level = 0.5 * y0[0]
            sol = _integrate(grhs, s0, y0, 1e-30, rtol, [dropped, below_zero])
            path.add(sol, gto_H)
        else:
            sol = _integrate(grhs, s0, y0, 1e-30, rtol, [top, below_zero])
            path.add(sol, gto_H)
            if sol.status == 1 and sol.t_events[0].size:
                dropped.level = 0.5 * float(sol.y[0, -1])
                sol = _integrate(grhs, sol.t[-1], sol.y[:, -1], 1e-30, rtol, [dropped, below_zero])
                path.add(sol, gto_H)
    last = path.pieces[-1][2]
    if last.status == 1 and dropped.level > 0 and last.t_events[0].size:
        t_s = math.exp(last.t[-1])
        H_s, dH_s = path.final()
        descent = _Descent(w, g, t_s, H_s, dH_s, rtol)
        return _Shot(c, descent.T, descent.T - 1.0, path, descent)
    H1, _ = path.final()
    if last.status == 1:
        # H hit zero before reaching its maximum: a clear undershoot
        return _Shot(c, math.exp(last.t[-1]), math.exp(last.t[-1]) - 1.0, path, None)
    # survived to t = 1 above half its maximum: a clear overshoot
    return _Shot(c, math.inf, H1, path, None)


def _miss(shot: _Shot) -> float:
    return shot.miss


def solve_taliaferro(
    w: Weight,
    g: Singularity,
    tol: float = 1e-8,
    *,
    t0: float = T0,
    rtol: float = 1e-12,
    n_nodes_hint: float = 1.05,
):
    """Solve H'' = -p g(H), H(0) = H(1) = 0 by shooting from t0.

    Returns ``(GridFunction, SolveReport)``.  When ∫ t p diverges no solution
    exists and the report carries NonexistenceEvidence with the verdict.
    """
    tp = check_tp_integrable(w)
    if not tp.is_finite:
        report = SolveReport(
            NONEXISTENCE,
            message="∫ t p(t) dt diverges at 0",
            diagnostics={"local_exponent": tp.local_exponent},
        )
        return None, report
    starter = _starter(w, g)
    c0, scale = starter.initial_guess(t0)

    cache: dict[float, _Shot] = {}

    def F(c):
        if c not in cache:
            cache[c] = _shoot(w, g, starter, t0, c, rtol)
        return _miss(cache[c])

    # bracket: F is increasing in c
    if not starter.admissible(t0, c0):
        raise DomainError("starter is not admissible at its initial parameter")
    multiplicative = starter.kind == "linear"
    direction = -1.0 if F(c0) > 0 else 1.0
    current, step = c0, (1.0 if multiplicative else scale)
    lo = hi = None
    for _ in range(200):
        trial = current * 2.0 ** (direction * step) if multiplicative else current + direction * step
        if not starter.admissible(t0, trial):
            step *= 0.5
            continue
        f = F(trial)
        if direction < 0 and f <= 0:
            lo, hi = trial, current
            break
        if direction > 0 and f > 0:
            lo, hi = current, trial
            break
        current = trial
        step *= 2.0
    if lo is None:
        return None, SolveReport(DIVERGED, message="shooting bracket not found")
    c_star, info = brentq(F, lo, hi, xtol=1e-15 * max(1.0, abs(lo)), rtol=1e-15, full_output=True, maxiter=200)
    shot = cache.get(c_star) or _shoot(w, g, starter, t0, c_star, rtol)
    if shot.descent is None:
        return None, SolveReport(DIVERGED, message="shooting root did not reach the descent phase")
    H_grid, report = _collect(w, g, shot, t0, tol, n_nodes_hint)
    report.iterations = int(info.iterations)
    report.diagnostics.update(
        {"shooting_parameter": shot.c, "starter": starter.kind, "t0": t0, "evaluations": len(cache)}
    )
    return H_grid, report


def _output_nodes(t0: float, ratio: float) -> np.ndarray:
    left = graded_distances(0.5, t0, ratio, 0.005)
    right = 1.0 - graded_distances(0.5, 1e-9, ratio, 0.005)[::-1]
    return np.concatenate([[0.0], left[1:], right[1:]])


class _Solution:
    """(H, H') anywhere on (0, 1] from the dense output of a converged shot."""

    def __init__(self, shot: _Shot):
        self.path = shot.path
        d = shot.descent
        self.t_s = d.t_s
        t, H, dH = d.sample()
        dist = d.T - t
        keep = (dist > 1e-14 * d.T) & np.concatenate([[True], np.diff(t) > 0])
        keep &= np.cumprod(keep).astype(bool)
        # log-log in the distance to the zero: exact for the local power law
        ld = np.log(dist[keep])[::-1]
        # log-log in the distance to the zero gives a good first guess for σ(t)
        self._lH = PchipInterpolator(ld, np.log(H[keep])[::-1])
        self.descent = d
        self.T = d.T

    def _sigma(self, t):
        d = self.descent
        sig = np.log(d.H_s) - self._lH(np.log(self.T - t))
        sig = np.clip(sig, 0.0, d.SIGMA_MAX)
        for _ in range(8):
            tt, q = d.sol.sol(sig)
            slope = d.H_s * np.exp(-sig) / np.sqrt(2.0 * q)
            step = (tt - t) / slope
            sig = np.clip(sig - step, 0.0, d.SIGMA_MAX)
            if np.all(np.abs(step) <= 1e-14 * np.maximum(1.0, sig)):
                break
        return sig

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        H = np.zeros_like(t)
        dH = np.zeros_like(t)
        left = (t > 0) & (t <= self.t_s)
        if np.any(left):
            H[left], dH[left] = self.path(np.log(t[left]))
        right = (t > self.t_s) & (t < self.T)
        if np.any(right):
            sig = self._sigma(t[right])
            H[right] = self.descent.H_s * np.exp(-sig)
            dH[right] = -np.sqrt(2.0 * self.descent.sol.sol(sig)[1])
        return np.maximum(H, 0.0), dH


def _collect(w, g, shot: _Shot, t0, tol, ratio):
    t = _output_nodes(t0, ratio)
    sol = _Solution(shot)
    H, dH = sol(t)
    H[-1] = 0.0
    # H'(0+) may be infinite and H'(1-) too when β >= 1; store neighbours
    dH[0] = dH[1]
    dH[-1] = dH[-2]

    # flux residual per cell: H'(a) - H'(b) = ∫_a^b p g(H), Gauss rule on dense output
    gx, gw = np.polynomial.legendre.leggauss(6)
    a, b = t[1:-2], t[2:-1]
    mid = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * gx[None, :]
    Hm = np.maximum(sol(mid.ravel())[0].reshape(mid.shape), 1e-300)
    integral = 0.5 * (b - a) * ((w(mid) * g(Hm)) @ gw)
    jump = dH[1:-2] - dH[2:-1]
    scale = np.abs(dH[1:-2]) + np.abs(dH[2:-1]) + integral
    # node positions carry a rounding error of a few ulps, which moves H' by
    # |H''| times that much; it matters only next to t = 1
    curv = w(t[1:-1]) * g(np.maximum(H[1:-1], 1e-300))
    floor = ROUNDING_ULPS * np.finfo(float).eps * (curv[:-1] + curv[1:])
    resid = float(np.max(relative_errors(jump - integral, scale, floor)))
    boundary_miss = float(shot.miss)
    status = CONVERGED if (resid <= tol and abs(boundary_miss) <= tol) else MAX_ITERATIONS
    report = SolveReport(
        status,
        residual_norm=resid,
        message="" if status == CONVERGED else "residual or boundary miss above tolerance",
        diagnostics={
            "boundary_miss": boundary_miss,
            "max_H": float(H.max()),
            "zero_at": sol.T,
            "evaluator": sol,
        },
    )
    return GridFunction(t, H, dH), report


# ---------------------------------------------------------------------------
# the derivative bound used for the super-solution
# ---------------------------------------------------------------------------


def default_b(H: GridFunction) -> float:
    """Half the location of the maximum of H (H' > 0 on (0, b])."""
    return 0.5 * float(H.nodes[int(np.argmax(H.values))])


def check_derivative_bounds(
    H: GridFunction, w: Weight, g: Singularity, b: float | None = None, *, rtol: float = 1e-8
) -> SolveReport:
    """Check (H')^2(t) <= 2 H(b) p(t) g(H(t)) + (H')^2(b) on (0, b].

    Also reports the smallest C1, C2 with H' <= C1 p g(H) and
    (H')^2 <= C2 p g(H) on the same nodes, and the concavity checks
    H > t H' and H' nonincreasing.
    """
    if H.derivative is None:
        raise ValueError("H needs derivative values")
    if b is None:
        b = default_b(H)
    t = H.nodes
    sel = (t > 0) & (t <= b)
    if not np.any(sel):
        raise ValueError("no nodes in (0, b]")
    dH = H.derivative[sel]
    if np.any(dH <= 0):
        raise ValueError("H' is not positive on (0, b]: choose a smaller b")
    Hb = float(np.interp(b, t, H.values))
    dHb = float(np.interp(b, t, H.derivative))
    tt, HH = t[sel], H.values[sel]
    pg = w(tt) * g(HH)
    lhs = dH**2
    rhs = 2.0 * Hb * pg + dHb**2
    slack = rhs - lhs
    ok = bool(np.all(slack >= -rtol * rhs))
    C1 = float(np.max(dH / pg))
    C2 = float(np.max(dH**2 / pg))
    concave_tangent = bool(np.all(HH > tt * dH))
    # H' nonincreasing on the whole interval; the dense-output H' is used
    # since difference quotients of H are noisy on the 1e-9 cells at t = 1
    dd = np.diff(H.derivative)
    concave = bool(np.all(dd <= 1e-10 * np.max(np.abs(H.derivative))))
    worst = int(np.argmin(slack / rhs))
    return SolveReport(
        CONVERGED if ok else DIVERGED,
        residual_norm=float(max(0.0, -np.min(slack / rhs))),
        message="" if ok else f"bound violated at t = {tt[worst]:.3e}",
        diagnostics={
            "b": b,
            "C1": C1,
            "C2": C2,
            "nodes_checked": int(sel.sum()),
            "H_above_tangent": concave_tangent,
            "concave": concave,
        },
    )


# ---------------------------------------------------------------------------
# regularized family
# ---------------------------------------------------------------------------


class _Shifted:
    """x -> base(eps + x) with the base's derivative, for p and g."""

    def __init__(self, base, eps):
        self.base, self.eps = base, eps

    def __call__(self, x):
        return self.base(self.eps + np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.base.derivative(self.eps + np.asarray(x, dtype=float))


def solve_regularized(w: Weight, g: Singularity, eps: float, *, shift_weight: bool, nodes=None, tol=1e-10):
    geom = Geometry.interval()
    x = make_mesh(geom, d_min=1e-9, ratio=1.05, h_max=0.005) if nodes is None else nodes
    disc = Discretization(geom, x)
    weight = _Shifted(w, eps) if shift_weight else w
    eq = Equation(disc, weight=weight, g=_Shifted(g, eps), sigma=1.0)
    guess = np.sin(np.pi * disc.xi) + 1e-3
    res = newton(eq, guess, tol=tol, max_iter=200)
    u = disc.full(res.U)
    fn = GridFunction(x, u)
    status = CONVERGED if res.converged else MAX_ITERATIONS
    report = SolveReport(
        status,
        iterations=res.iterations,
        residual_norm=res.residual,
        message=res.reason,
        diagnostics={"eps": eps, "max_H": float(u.max()), "center": float(np.interp(0.5, x, u))},
    )
    return fn, report


def solve_regularized_family(w: Weight, g: Singularity, eps_list, *, tol: float = 1e-10):
    """Solve with g(ε + H) (and p(ε + t) when ∫ t p diverges) for each ε.

    The weight is only shifted when the unshifted problem has no solution even
    after regularising g; otherwise regularising g alone keeps the family
    exactly inert when g is bounded.
    """
    eps = [float(e) for e in eps_list]
    if any(not 0 < e < 1 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("ε values must lie in (0, 1) and decrease")
    shift = not check_tp_integrable(w).is_finite
    reports = []
    for e in eps:
        try:
            _, rep = solve_regularized(w, g, e, shift_weight=shift, tol=tol)
        except (ValueError, ArithmeticError) as exc:
            rep = SolveReport(DIVERGED, message=str(exc), diagnostics={"eps": e})
        rep.diagnostics["weight_shifted"] = shift
        reports.append(rep)
    return reports


def diagnose_family(reports, *, contraction: float = 0.5) -> SolveReport:
    """Aggregate verdict on a regularized family.

    Converged when the successive differences of the maxima contract by at
    least ``contraction`` per step; NonexistenceEvidence when the maxima grow
    monotonically and the differences do not contract.
    """
    if any(not r.converged for r in reports):
        return SolveReport(DIVERGED, message="a member of the family failed to converge")
    m = np.array([r.diagnostics["max_H"] for r in reports])
    diffs = np.diff(m)
    ratios = np.abs(diffs[1:]) / np.maximum(np.abs(diffs[:-1]), 1e-300)
    trace = {"maxima": m.tolist(), "differences": diffs.tolist(), "ratios": ratios.tolist()}
    if np.all(diffs <= 1e-12 * np.abs(m[:-1])):
        if np.allclose(m, m[0], rtol=1e-12, atol=0.0):
            return SolveReport(CONVERGED, message="family is inert", diagnostics=trace)
    growing = bool(np.all(diffs > 0))
    contracting = bool(ratios.size and np.all(ratios <= contraction))
    if contracting:
        return SolveReport(CONVERGED, residual_norm=float(abs(diffs[-1])), diagnostics=trace)
    if growing:
        return SolveReport(NONEXISTENCE, message="maxima grow without Cauchy contraction", diagnostics=trace)
    return SolveReport(DIVERGED, message="family neither contracts nor grows monotonically", diagnostics=trace)
