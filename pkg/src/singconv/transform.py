"""The transform Ψ(t) = ∫_0^t (2∫_0^s Φ)^(-1/2) ds and its inverse h.

h solves h'' = Φ(h), h(0) = h'(0) = 0, and has the first integral
h' = sqrt(2 J(h)) with J(h) = ∫_0^h Φ.  Both J and Ψ are tabulated on a
geometric grid in the h variable; interpolation is done on log-log data by
monotone cubics, which is exact for pure powers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .grid import CONVERGED, DIVERGED, SolveReport, differentiate
from .model import DomainError, Singularity, Weight
from .quad import check_pg_integrable, integrate_singular

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TransformTable:
    """Tabulated (h, Ψ(h), h'(Ψ(h))) with h_nodes[0] = 0."""

    h_nodes: np.ndarray
    psi_values: np.ndarray
    dh_values: np.ndarray
    phi: Callable = field(repr=False)
    _log_psi: PchipInterpolator = field(init=False, repr=False)
    _log_j: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        h = _frozen(self.h_nodes)
        psi = _frozen(self.psi_values)
        dh = _frozen(self.dh_values)
        if h[0] != 0.0 or psi[0] != 0.0 or dh[0] != 0.0:
            raise ValueError("table must start at h = Ψ = h' = 0")
        if np.any(np.diff(h) <= 0) or np.any(np.diff(psi) <= 0):
            raise ValueError("h and Ψ must be strictly increasing")
        if np.any(np.diff(dh) < 0):
            raise ValueError("h' must be nondecreasing")
        object.__setattr__(self, "h_nodes", h)
        object.__setattr__(self, "psi_values", psi)
        object.__setattr__(self, "dh_values", dh)
        lh = np.log(h[1:])
        object.__setattr__(self, "_log_psi", PchipInterpolator(lh, np.log(psi[1:])))
        object.__setattr__(self, "_log_j", PchipInterpolator(lh, np.log(0.5 * dh[1:] ** 2)))

    @property
    def h_max(self) -> float:
        return float(self.h_nodes[-1])

    @property
    def psi_max(self) -> float:
        return float(self.psi_values[-1])

    def _edge_slope(self, interp):
        x = interp.x
        y = interp(x[:2])
        return (y[1] - y[0]) / (x[1] - x[0])

    def _loglog(self, interp, h):
        """Interpolate, extrapolating as a power law below the first node."""
        lh = np.log(h)
        x0 = interp.x[0]
        out = np.where(
            lh >= x0,
            interp(np.clip(lh, x0, interp.x[-1])),
            interp(x0) + self._edge_slope(interp) * (lh - x0),
        )
        return np.exp(out)

    def psi(self, h):
        """Ψ on [0, h_max] (the monotone interpolant of the table)."""
        h = np.asarray(h, dtype=float)
        if np.any(h < 0) or np.any(h > self.h_max * (1 + 1e-12)):
            raise DomainError("h outside the tabulated range")
        hp = np.maximum(h, 1e-300)
        return np.where(h > 0, self._loglog(self._log_psi, hp), 0.0)

    def J(self, h):
        """∫_0^h Φ, interpolated."""
        h = np.asarray(h, dtype=float)
        hp = np.maximum(h, 1e-300)
        return np.where(h > 0, self._loglog(self._log_j, hp), 0.0)


def _cellwise_J(phi, h):
    """J at the nodes: exact-exponent singular quadrature on the first cell,
    8-point Gauss-Legendre on the remaining (geometric) cells."""
    verdict = integrate_singular(lambda s: float(phi(s)), 0.0, h[1], "lower", rtol=1e-13, atol=0.0)
    if not verdict.is_finite:
        raise DomainError("∫ Φ diverges at 0")
    a, b = h[1:-1], h[2:]
    pts = a[:, None] + (b - a)[:, None] * _GL_X[None, :]
    cells = (b - a) * (phi(pts) @ _GL_W)
    return np.concatenate([[0.0, verdict.value], verdict.value + np.cumsum(cells)])


def _cellwise_psi(phi, h, J):
    """Ψ at the nodes.  First cell: J is a pure power there to within the
    grid resolution, so ∫ (2J)^(-1/2) is done in closed form."""
    kappa = math.log(J[2] / J[1]) / math.log(h[2] / h[1])
    first = h[1] / math.sqrt(2.0 * J[1]) / (1.0 - 0.5 * kappa)
    a, b = h[1:-1], h[2:]
    width = b - a
    # J at the outer Gauss points, each by an inner Gauss rule from the cell start
    s = a[:, None] + width[:, None] * _GL_X[None, :]
    inner = (s - a[:, None])[:, :, None] * _GL_X[None, None, :] + a[:, None, None]
    J_s = J[1:-1, None] + (s - a[:, None]) * (phi(inner) @ _GL_W)
    cells = width * ((2.0 * J_s) ** -0.5 @ _GL_W)
    return np.concatenate([[0.0, first], first + np.cumsum(cells)])


def build_transform_phi(
    phi: Callable, h_max: float, *, ratio: float = 1.05, span: float = 1e14
) -> TransformTable:
    """Tabulate the transform for a given positive, nonincreasing Φ.

    The grid is 0 followed by a geometric progression from ``h_max / span``
    to ``h_max`` with the given ratio.
    """
    if not h_max > 0:
        raise ValueError("h_max must be positive")
    n = int(math.ceil(math.log(span) / math.log(ratio)))
    h = np.concatenate([[0.0], h_max * np.geomspace(1.0 / span, 1.0, n + 1)])
    with np.errstate(all="ignore"):
        J = _cellwise_J(phi, h)
        psi = _cellwise_psi(phi, h, J)
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(psi))):
        raise ArithmeticError("quadrature failure while tabulating the transform")
    return TransformTable(h, psi, np.sqrt(2.0 * J), phi)


def build_transform(w: Weight, g: Singularity, h_max: float, **kw) -> TransformTable:
    """Transform for Φ(s) = p(s) g(s); requires ∫_0 Φ < ∞."""
    if not check_pg_integrable(w, g).is_finite:
        raise DomainError("∫ p g diverges: the transform is not defined")

    def phi(s):
        return w(s) * g(s)

    return build_transform_phi(phi, h_max, **kw)


def _invert_psi(table: TransformTable, y: np.ndarray) -> np.ndarray:
    """Solve Ψ(h) = y exactly for the interpolant (safeguarded Newton)."""
    P = table._log_psi
    ly = np.log(y)
    x = P.x
    Y = P(x)
    slope0 = table._edge_slope(P)
    out = np.empty_like(ly)
    below = ly < Y[0]
    out[below] = x[0] + (ly[below] - Y[0]) / slope0
    idx = np.clip(np.searchsorted(Y, ly[~below]) - 1, 0, x.size - 2)
    lo, hi = x[idx], x[idx + 1]
    target = ly[~below]
    z = lo + (hi - lo) * (target - Y[idx]) / (Y[idx + 1] - Y[idx])
    dP = P.derivative()
    for _ in range(60):
        f = P(z) - target
        d = dP(z)
        lo = np.where(f < 0, z, lo)
        hi = np.where(f > 0, z, hi)
        with np.errstate(all="ignore"):
            step = np.where(d > 0, z - f / d, 0.5 * (lo + hi))
        bad = ~((step > lo) & (step < hi))
        z_new = np.where(bad, 0.5 * (lo + hi), step)
        if np.all(np.abs(z_new - z) <= 1e-15 * np.maximum(1.0, np.abs(z))):
            z = z_new
            break
        z = z_new
    out[~below] = z
    return np.exp(out)


def eval_h(table: TransformTable, y):
    """h(y) and h'(y) for 0 <= y <= Ψ(h_max)."""
    y_arr = np.asarray(y, dtype=float)
    flat = np.atleast_1d(y_arr).ravel()
    if np.any(flat < 0) or np.any(flat > table.psi_max * (1 + 1e-12)):
        raise DomainError(f"y outside [0, Ψ(h_max) = {table.psi_max:g}]")
    h = np.zeros_like(flat)
    pos = flat > 0
    if np.any(pos):
        h[pos] = np.minimum(_invert_psi(table, flat[pos]), table.h_max)
    dh = np.sqrt(2.0 * table.J(h))
    if y_arr.ndim == 0:
        return float(h[0]), float(dh[0])
    return h.reshape(y_arr.shape), dh.reshape(y_arr.shape)


def verify_transform(
    table: TransformTable, *, y_min: float = 0.01, ratio: float = 1.005, tol: float = 1e-4
) -> SolveReport:
    """Check h'' = Φ(h) by finite differences on an independent y grid.

    Also reports the round-trip error max |Ψ(h(y)) - y| / y.
    """
    y_max = table.psi_max
    y_min = min(y_min, 0.5 * y_max)
    n = max(int(math.ceil(math.log(y_max / y_min) / math.log(ratio))), 8)
    y = np.geomspace(y_min, y_max, n + 1)
    h, _ = eval_h(table, y)
    d2 = differentiate(y, h, order=2, width=5)
    target = table.phi(h)
    rel = np.abs(d2 - target) / np.abs(target)
    inner = rel[2:-2]
    roundtrip = float(np.max(np.abs(table.psi(h) - y) / y))
    worst = float(np.max(inner))
    status = CONVERGED if worst <= tol else DIVERGED
    return SolveReport(
        status,
        iterations=0,
        residual_norm=worst,
        message=f"max relative |h'' - Φ(h)| = {worst:.3e} on y in [{y_min:g}, {y_max:g}]",
        diagnostics={"roundtrip": roundtrip, "n_points": int(y.size)},
    )
