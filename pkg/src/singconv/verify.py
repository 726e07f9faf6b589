"""Residual-sign classification, ordering checks, boundary fits and the
explicit comparison functions M h(cφ₁) and M H(cφ₁).

Residuals use the convention R = -Δu - σ p g(u) - λ f(u) - μ|∇u|^a, with
σ = +1 for (P)⁻ and -1 for (P)⁺.  A sub-solution has R <= 0, a
super-solution R >= 0.  Each nodal residual is divided by the sum of the
magnitudes of the terms at that node before it is compared with the
tolerance, since p g(u) varies over many decades near the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bvp1d import default_b, solve_taliaferro
from .discrete import Discretization, Equation
from .grid import GridFunction, make_mesh
from .model import LOG, NONEXISTENT, DomainError, Geometry, ProblemSpec, RegimeClassification
from .radial import EigenPair, eigenpair, radial_nodes
from .transform import build_transform, eval_h

SUB = "sub_solution"
SUPER = "super_solution"
SOLUTION = "solution"
NEITHER = "neither"


# ---------------------------------------------------------------------------
# residual classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualClassification:
    verdict: str
    worst_node: float
    worst_residual: float
    max_residual: float
    min_residual: float
    tol: float


def _laplacian_exact(u: GridFunction, geom: Geometry):
    """-Δu and the magnitudes of its two parts from u', u''."""
    x, du, d2u = u.nodes, u.derivative, u.second
    if geom.kind == "interval":
        return -d2u, np.abs(d2u)
    n = geom.dim
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(x > 0, (n - 1) * du / x, (n - 1) * d2u)
    return -(d2u + radial), np.abs(d2u) + np.abs(radial)


def operator_residual(u: GridFunction, spec: ProblemSpec):
    """Signed relative residual at the interior nodes.

    Uses u' and u'' when the grid function carries them, and the
    finite-volume operator of the solvers otherwise.  Returns the interior
    nodes and the relative residuals there.
    """
    geom = spec.geometry
    x = u.nodes
    interior = geom.boundary_distance(x) > 0
    if np.any(u.values[interior] <= 0):
        raise DomainError("u must be positive at interior nodes")
    if u.derivative is not None and u.second is not None:
        lap, lap_scale = _laplacian_exact(u, geom)
        v = np.where(interior, u.values, 1.0)
        p = spec.weight(np.where(interior, geom.weight_distance(x), 1.0))
        absorb = spec.absorption_sign * p * spec.g(v)
        src = spec.lam * spec.f(v) if spec.f.kind != "none" else np.zeros_like(v)
        conv = spec.mu * np.abs(u.derivative) ** spec.a if spec.mu else np.zeros_like(v)
        R = lap - absorb - src - conv
        scale = lap_scale + np.abs(absorb) + np.abs(src) + np.abs(conv)
        return x[interior], (R / scale)[interior]
    disc = Discretization(geom, x)
    eq = Equation(
        disc,
        weight=spec.weight,
        g=spec.g,
        sigma=spec.absorption_sign,
        lam=spec.lam,
        f=spec.f,
        mu=spec.mu,
        a=spec.a,
    )
    R, scale, floor = eq.residual(u.values[disc.unknowns])
    rel = np.sign(R) * np.maximum(np.abs(R) - floor, 0.0) / (scale + floor + 1e-300)
    keep = interior[disc.unknowns]
    return disc.xi[keep], rel[keep]


def residual_classify(u: GridFunction, spec: ProblemSpec, tol: float = 1e-4) -> ResidualClassification:
    """Classify u as a sub-solution, super-solution or solution of spec."""
    nodes, rel = operator_residual(u, spec)
    hi, lo = float(np.max(rel)), float(np.min(rel))
    if hi <= tol and lo >= -tol:
        verdict = SOLUTION
    elif hi <= tol:
        verdict = SUB
    elif lo >= -tol:
        verdict = SUPER
    else:
        verdict = NEITHER
    i = int(np.argmax(np.abs(rel)))
    return ResidualClassification(verdict, float(nodes[i]), float(rel[i]), hi, lo, tol)


# ---------------------------------------------------------------------------
# ordering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonResult:
    ordered: bool
    worst_gap: float
    worst_node: float

    def __bool__(self):
        return self.ordered


def comparison_check(v: GridFunction, w: GridFunction, tol: float | None = None) -> ComparisonResult:
    """v <= w + tol at every node of v.

    w is resampled on v's nodes by monotone interpolation when the meshes
    differ.  ``worst_gap`` is max(v - w); the default tolerance is 1e-9
    times the larger maximum.
    """
    x = v.nodes
    if w.nodes.shape == x.shape and np.array_equal(w.nodes, x):
        wv = w.values
    else:
        wv = w(x)
        if not np.all(np.isfinite(wv)):
            raise ValueError("meshes are incompatible: v's nodes leave w's range")
    if tol is None:
        tol = 1e-9 * max(float(np.max(np.abs(v.values))), float(np.max(np.abs(wv))), 1e-300)
    gap = v.values - wv
    i = int(np.argmax(gap))
    return ComparisonResult(bool(gap[i] <= tol), float(gap[i]), float(x[i]))


# ---------------------------------------------------------------------------
# sandwich between multiples of H(cφ₁)
# ---------------------------------------------------------------------------

SANDWICH_GRID = 10.0 ** np.linspace(-6.0, 6.0, 241)


@dataclass(frozen=True)
class SandwichResult:
    ok: bool
    m: float | None
    M: float | None
    c: float
    ratio_range: tuple[float, float]

    def __bool__(self):
        return self.ok


def check_sandwich(
    u: GridFunction,
    H: GridFunction,
    phi1: GridFunction,
    *,
    c: float | None = None,
    max_spread: float = 1e6,
) -> SandwichResult:
    """Look for m <= M on the scan grid with m H(cφ₁) <= u <= M H(cφ₁).

    ``c`` defaults to b / max φ₁ with b = default_b(H), which keeps cφ₁ in
    the range where H is increasing.
    """
    if not np.array_equal(u.nodes, phi1.nodes):
        raise ValueError("u and φ₁ must share a mesh")
    if c is None:
        c = default_b(H) / float(np.max(phi1.values))
    y = c * phi1.values
    Hc = H(y)
    keep = (y > 0) & (u.values > 0) & np.isfinite(Hc) & (Hc > 0)
    ratio = u.values[keep] / Hc[keep]
    lo, hi = float(np.min(ratio)), float(np.max(ratio))
    below = SANDWICH_GRID[SANDWICH_GRID <= lo * (1 + 1e-12)]
    above = SANDWICH_GRID[SANDWICH_GRID >= hi * (1 - 1e-12)]
    m = float(below[-1]) if below.size else None
    M = float(above[0]) if above.size else None
    ok = m is not None and M is not None and M / m < max_spread
    return SandwichResult(ok, m, M, float(c), (lo, hi))


# ---------------------------------------------------------------------------
# boundary asymptotics
# ---------------------------------------------------------------------------

POWER_WINDOW = (1e-9, 1e-6)
LOG_WINDOW = (1e-6, 1e-3)


@dataclass(frozen=True)
class AsymptoticsFit:
    exponent: float
    log_power: float | None
    c1: float
    c2: float
    d_min: float
    d_max: float
    n_nodes: int

    @property
    def band_ratio(self) -> float:
        return self.c2 / self.c1


def fit_boundary_asymptotics(
    u: GridFunction,
    geom: Geometry,
    expected: RegimeClassification,
    *,
    window: tuple[float, float] | None = None,
    min_nodes: int = 10,
) -> AsymptoticsFit:
    """Fit u against the distance d to the singular boundary.

    Power and linear rates: least-squares slope of ln u against ln d, with
    the band of u / d^slope.  Log rate: band of u / (d (-ln d)^k) with
    k = expected.log_power, plus the plain slope for reference.
    """
    if expected.regime == NONEXISTENT:
        raise DomainError("no solution to fit in the nonexistent regime")
    if window is None:
        window = LOG_WINDOW if expected.regime == LOG else POWER_WINDOW
    d = geom.weight_distance(u.nodes)
    sel = (d >= window[0] * (1 - 1e-12)) & (d <= window[1] * (1 + 1e-12)) & (u.values > 0)
    n = int(sel.sum())
    if n < min_nodes:
        raise ValueError(f"fit window holds {n} nodes, fewer than {min_nodes}")
    ld, lu = np.log(d[sel]), np.log(u.values[sel])
    slope = float(np.polyfit(ld, lu, 1)[0])
    if expected.regime == LOG:
        k = float(expected.log_power)
        band = u.values[sel] / (d[sel] * (-np.log(d[sel])) ** k)
    else:
        k = None
        band = u.values[sel] / d[sel] ** slope
    return AsymptoticsFit(
        slope, k, float(band.min()), float(band.max()), float(d[sel].min()), float(d[sel].max()), n
    )


# ---------------------------------------------------------------------------
# explicit comparison functions
# ---------------------------------------------------------------------------


@dataclass
class Candidate:
    """A comparison function with exact u', u'' and the constants used."""

    u: GridFunction
    eigen: EigenPair
    constants: dict = field(default_factory=dict)


def _domain_nodes(geom: Geometry, nodes) -> np.ndarray:
    if nodes is not None:
        return np.asarray(nodes, dtype=float)
    return radial_nodes(geom) if geom.kind == "ball" else make_mesh(geom)


def _phi_second(eig: EigenPair, geom: Geometry) -> np.ndarray:
    """φ₁'' from -Δφ₁ = λ₁ φ₁."""
    x, phi, dphi = eig.phi1.nodes, eig.phi1.values, eig.phi1.derivative
    if geom.kind == "interval":
        return -eig.lambda1 * phi
    n = geom.dim
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, -eig.lambda1 * phi - (n - 1) * dphi / x, -eig.lambda1 * phi / n)
    return out


def _length(geom: Geometry) -> float:
    return 1.0 if geom.kind == "interval" else geom.radius


def plus_subsolution(
    spec: ProblemSpec,
    *,
    nodes=None,
    fraction: float = 0.1,
    min_fraction: float = 1e-4,
) -> Candidate:
    """M h(cφ₁), a sub-solution of (P)⁺ for λ large.

    c is halved until h(cφ₁) <= d at every node; ω is the set where the
    distance to the boundary exceeds ``fraction`` times the size of the
    domain, δ = min |φ₁'| outside ω and M = max(1, 2 (cδ)^-2).  If the
    boundary-layer inequality fails outside ω the fraction is halved.
    ``constants["lambda_required"]`` is the λ that makes the construction
    work inside ω.
    """
    if spec.sign != "plus":
        raise DomainError("the construction is for (P)+")
    if spec.f.kind == "none":
        raise DomainError("the construction needs a source term")
    geom = spec.geometry
    x = _domain_nodes(geom, nodes)
    eig = eigenpair(geom, x)
    phi, dphi = eig.phi1.values, eig.phi1.derivative
    d2phi = _phi_second(eig, geom)
    dW = geom.weight_distance(x)
    dB = geom.boundary_distance(x)
    inner = dB > 0
    table = build_transform(spec.weight, spec.g, float(dW.max()))
    c = min(1.0, table.psi_max)
    for _ in range(200):
        h, dh = eval_h(table, c * phi)
        if np.all(h[inner] <= dW[inner]):
            break
        c *= 0.5
    else:
        raise ArithmeticError("no c with h(cφ₁) <= d found")
    p = spec.weight(np.where(inner, dW, 1.0))
    hg = spec.g(np.where(inner, h, 1.0))
    absorb_mu = max(-spec.mu, 0.0)
    frac = fraction
    while frac >= min_fraction:
        outside = inner & (dB <= frac * _length(geom))
        delta = float(np.min(np.abs(dphi[outside])))
        M = max(1.0, 2.0 / (c * delta) ** 2)
        layer = -p * hg + M * c * eig.lambda1 * phi * dh + absorb_mu * (M * c * dh * np.abs(dphi)) ** spec.a
        if np.all(layer[outside] < 0):
            break
        frac *= 0.5
    else:
        raise ArithmeticError("boundary-layer inequality fails for every ω tried")
    omega = inner & ~outside
    need = p * hg + M * c * eig.lambda1 * phi * dh + absorb_mu * (M * c * dh * np.abs(dphi)) ** spec.a
    fu = spec.f(np.where(omega, M * h, 1.0))
    lam_req = float(np.max(need[omega]) / np.min(fu[omega]))
    u = M * h
    du = M * c * dh * dphi
    d2u = M * c**2 * spec.weight(np.where(inner, h, 1.0)) * hg * dphi**2 + M * c * dh * d2phi
    du[~inner] = 0.0
    d2u[~inner] = 0.0
    cand = Candidate(
        GridFunction(x, u, du, d2u),
        eig,
        {"c": c, "M": M, "delta": delta, "fraction": frac, "lambda_required": lam_req},
    )
    return cand


def smallest_sub_lambda(cand: Candidate, spec: ProblemSpec, *, tol: float = 1e-4, levels: int = 60) -> float | None:
    """Smallest λ = λ_req 2^(-k/4), k = 0..levels, for which the candidate
    still classifies as a sub-solution; None if even λ_req fails."""
    lam_req = cand.constants["lambda_required"]
    best = None
    for k in range(levels + 1):
        lam = lam_req * 2.0 ** (-k / 4.0)
        verdict = residual_classify(cand.u, replace(spec, lam=lam), tol).verdict
        if verdict not in (SUB, SOLUTION):
            break
        best = lam
    return best


def minus_supersolution(
    spec: ProblemSpec,
    *,
    nodes=None,
    fraction: float = 0.1,
    min_fraction: float = 1e-4,
    margin: float = 1.01,
) -> Candidate:
    """M H(cφ₁), a super-solution of (P)⁻ for μ > 0 and 0 < a < 1.

    H solves H'' = -p g(H) on (0, 1) with zero boundary values; b is
    default_b(H) and c the largest value with cφ₁ <= min(b, d).  M is the
    smallest value meeting every lower bound of the construction, times
    ``margin``.
    """
    if spec.sign != "minus":
        raise DomainError("the construction is for (P)-")
    if not (0.0 < spec.a < 1.0):
        raise DomainError("the construction needs 0 < a < 1")
    if spec.mu < 0:
        raise DomainError("the construction is for mu >= 0")
    geom = spec.geometry
    x = _domain_nodes(geom, nodes)
    eig = eigenpair(geom, x)
    phi, dphi = eig.phi1.values, eig.phi1.derivative
    d2phi = _phi_second(eig, geom)
    dW = geom.weight_distance(x)
    dB = geom.boundary_distance(x)
    inner = dB > 0
    Hgrid, rep = solve_taliaferro(spec.weight, spec.g)
    if Hgrid is None:
        raise DomainError("H does not exist: " + rep.message)
    evaluate = rep.diagnostics["evaluator"]
    b = default_b(Hgrid)
    c = float(np.min(np.minimum(b, dW[inner]) / phi[inner]))
    y = c * phi
    H, dH = evaluate(y)
    pc = spec.weight(np.where(inner, y, 1.0))
    gH = spec.g(np.where(inner, H, 1.0))
    fH = spec.lam * spec.f(np.where(inner, H, 1.0)) if spec.f.kind != "none" else np.zeros_like(H)
    curv = c**2 * pc * gH * dphi**2
    frac = fraction
    while frac >= min_fraction:
        outside = inner & (dB <= frac * _length(geom))
        if np.all(curv[outside] >= 3.0 * fH[outside]):
            break
        frac *= 0.5
    else:
        raise ArithmeticError("the boundary-layer inequality fails for every ω tried")
    omega = inner & ~outside
    delta = float(np.min(np.abs(dphi[outside])))
    a, mu = spec.a, spec.mu
    lin = c * eig.lambda1 * phi * dH
    bounds = {"gradient_layer": 3.0 / (c * delta) ** 2}
    if mu > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            conv_out = 3.0 * mu * (c * dH * np.abs(dphi)) ** a / curv
            conv_in = 3.0 * mu * (c * dH * np.abs(dphi)) ** a / lin
        bounds["convection_layer"] = float(np.max(conv_out[outside])) ** (1.0 / (1.0 - a))
        bounds["convection_interior"] = float(np.max(conv_in[omega])) ** (1.0 / (1.0 - a))
    bounds["absorption_interior"] = float(np.max(3.0 * spec.weight(dW[omega]) * gH[omega] / lin[omega]))
    if spec.f.kind == "sublinear":
        q = spec.f.exponent
        src = 3.0 * spec.lam * H[omega] ** q / lin[omega]
        bounds["source_interior"] = float(np.max(src)) ** (1.0 / (1.0 - q))
    M = margin * max(1.0, *bounds.values())
    u = M * H
    du = M * c * dH * dphi
    d2u = -M * c**2 * pc * gH * dphi**2 + M * c * dH * d2phi
    du[~inner] = 0.0
    d2u[~inner] = 0.0
    u[~inner] = 0.0
    return Candidate(
        GridFunction(x, u, du, d2u),
        eig,
        {"c": c, "b": b, "M": M, "delta": delta, "fraction": frac, "bounds": bounds, "H": Hgrid},
    )
