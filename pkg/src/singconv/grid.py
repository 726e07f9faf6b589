"""Graded meshes, nodal functions and solver reports."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import PchipInterpolator

from .model import Geometry

CONVERGED = "converged"
DIVERGED = "diverged"
NONEXISTENCE = "nonexistence_evidence"
MAX_ITERATIONS = "max_iterations"


def _frozen(a):
    if a is None:
        return None
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a strictly increasing mesh.

    ``derivative`` and ``second`` are optional exact derivative values; when
    absent, consumers fall back on finite differences.
    """

    nodes: np.ndarray
    values: np.ndarray
    derivative: np.ndarray | None = None
    second: np.ndarray | None = None

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        values = _frozen(self.values)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        for name in ("derivative", "second"):
            arr = getattr(self, name)
            if arr is not None:
                arr = _frozen(arr)
                if arr.shape != nodes.shape:
                    raise ValueError(f"{name} has the wrong shape")
                object.__setattr__(self, name, arr)

    def __len__(self):
        return self.nodes.size

    def max(self) -> float:
        return float(np.max(self.values))

    def scaled(self, factor: float) -> "GridFunction":
        return GridFunction(
            self.nodes,
            factor * self.values,
            None if self.derivative is None else factor * self.derivative,
            None if self.second is None else factor * self.second,
        )

    def __call__(self, x):
        return PchipInterpolator(self.nodes, self.values, extrapolate=False)(x)

    def resample(self, nodes) -> "GridFunction":
        nodes = np.asarray(nodes, dtype=float)
        return GridFunction(nodes, self(nodes))

    def grading_ratio(self) -> float:
        h = np.diff(self.nodes)
        r = h[1:] / h[:-1]
        return float(np.max(np.maximum(r, 1.0 / r)))


def _plain(v) -> bool:
    """True for values that serialise to JSON (solver objects are dropped)."""
    if isinstance(v, (str, int, float, bool, type(None), np.ndarray, np.generic)):
        return True
    if isinstance(v, (list, tuple)):
        return all(_plain(x) for x in v)
    if isinstance(v, dict):
        return True
    return False


@dataclass
class SolveReport:
    status: str
    iterations: int = 0
    residual_norm: float = math.nan
    boundary_fit: dict[str, float] | None = None
    message: str = ""
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self) -> dict[str, Any]:
        def clean(v):
            if isinstance(v, np.ndarray):
                return [clean(x) for x in v.tolist()]
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, dict):
                return {str(k): clean(x) for k, x in v.items() if _plain(x)}
            if isinstance(v, (np.floating, float)):
                v = float(v)
                return v if math.isfinite(v) else str(v)
            if isinstance(v, np.integer):
                return int(v)
            return v

        return clean(
            {
                "status": self.status,
                "iterations": self.iterations,
                "residual_norm": self.residual_norm,
                "boundary_fit": self.boundary_fit,
                "message": self.message,
                "diagnostics": self.diagnostics,
            }
        )


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------


def graded_distances(length: float, d_min: float, ratio: float, h_max: float) -> np.ndarray:
    """Distances 0 = s_0 < s_1 < ... < s_n = length from a singular end.

    Spacing starts at ``d_min`` and grows geometrically by ``ratio`` until it
    reaches ``h_max``; the rest of the span is covered uniformly.
    """
    if not 1.0 < ratio <= 1.5:
        raise ValueError("grading ratio must lie in (1, 1.5]")
    if not 0 < d_min < h_max <= length:
        raise ValueError("need 0 < d_min < h_max <= length")
    s = [0.0]
    h = d_min
    while h < h_max and s[-1] + h < length:
        s.append(s[-1] + h)
        h *= ratio
    rest = length - s[-1]
    n_uniform = max(1, int(math.ceil(rest / h_max)))
    s.extend(s[-1] + rest * np.arange(1, n_uniform + 1) / n_uniform)
    s = np.asarray(s)
    s[-1] = length
    return s


def make_mesh(
    geometry: Geometry,
    *,
    d_min: float = 1e-13,
    ratio: float = 1.05,
    h_max: float = 0.01,
) -> np.ndarray:
    """Graded nodes for the interval (both ends) or the radius [0, R]."""
    if geometry.kind == "interval":
        half = graded_distances(0.5, d_min, ratio, h_max)
        return np.concatenate([half, 1.0 - half[-2::-1]])
    R = geometry.radius
    d = graded_distances(R, d_min * R, ratio, h_max * R)
    return (R - d)[::-1].copy()


def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for the m-th derivative at z from nodes x."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def differentiate(x: np.ndarray, y: np.ndarray, order: int = 1, width: int = 5) -> np.ndarray:
    """Finite-difference derivative on a nonuniform mesh (centered inside)."""
    n = x.size
    half = width // 2
    out = np.empty(n)
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        idx = slice(lo, lo + width)
        out[i] = fd_weights(x[i], x[idx], order) @ y[idx]
    return out


def central_derivative(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Three-point derivative: centered inside, one-sided at the ends."""
    return differentiate(x, y, 1, 3)
