"""Problem data for singular elliptic problems with a convection term.

A problem is

    -Δu ± p(d(x)) g(u) = λ f(u) + μ |∇u|^a,   u > 0 in Ω,   u = 0 on ∂Ω,

posed on the unit interval (weight singular at t = 0 only) or on a ball
B_R(0) ⊂ R^N (radial solutions).  ``sign = "minus"`` moves the absorption
term to the right-hand side, ``sign = "plus"`` keeps it on the left.

Everything here is immutable; the numerical modules only read it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

import tomli_w


class DomainError(ValueError):
    """Argument outside the domain of a weight, nonlinearity or source."""


class SingularOverflow(ArithmeticError):
    """Value is not representable this close to a singularity."""


# ---------------------------------------------------------------------------
# helpers for monotone tables
# ---------------------------------------------------------------------------


def _as_table(nodes) -> tuple[tuple[float, float], ...]:
    pairs = tuple((float(t), float(v)) for t, v in nodes)
    if len(pairs) < 2:
        raise ValueError("a table needs at least two nodes")
    ts = [t for t, _ in pairs]
    if any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] <= 0:
        raise ValueError("table abscissae must be positive and strictly increasing")
    if any(v <= 0 or not math.isfinite(v) for _, v in pairs):
        raise ValueError("table values must be finite and strictly positive")
    return pairs


def _loglog_eval(table, x: np.ndarray) -> np.ndarray:
    """Piecewise power-law interpolation with power-law extrapolation."""
    lt = np.log([t for t, _ in table])
    lv = np.log([v for _, v in table])
    lx = np.log(x)
    out = np.interp(lx, lt, lv)
    lo_slope = (lv[1] - lv[0]) / (lt[1] - lt[0])
    hi_slope = (lv[-1] - lv[-2]) / (lt[-1] - lt[-2])
    below = lx < lt[0]
    above = lx > lt[-1]
    out[below] = lv[0] + lo_slope * (lx[below] - lt[0])
    out[above] = lv[-1] + hi_slope * (lx[above] - lt[-1])
    return np.exp(out)


# ---------------------------------------------------------------------------
# data families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Weight:
    """Anisotropic potential p, either ``t**-alpha`` or a nonincreasing table."""

    alpha: float | None = None
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if (self.alpha is None) == (self.table is None):
            raise ValueError("give exactly one of alpha or table")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("p = t**-alpha is nonincreasing only for alpha >= 0")
        if self.table is not None:
            table = _as_table(self.table)
            vals = [v for _, v in table]
            if any(b > a for a, b in zip(vals, vals[1:])):
                raise ValueError("tabulated weight must be nonincreasing")
            object.__setattr__(self, "table", table)

    @classmethod
    def power(cls, alpha: float) -> "Weight":
        return cls(alpha=float(alpha))

    @classmethod
    def tabulated(cls, nodes) -> "Weight":
        return cls(table=_as_table(nodes))

    @property
    def kind(self) -> str:
        return "power" if self.alpha is not None else "tabulated"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.alpha is not None:
            return t ** (-self.alpha)
        return _loglog_eval(self.table, np.atleast_1d(t)).reshape(t.shape)

    def cell_integral(self, lo, hi):
        """∫_lo^hi p(t) dt for 0 <= lo < hi (vectorised, exact for powers)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.alpha is not None:
            e = 1.0 - self.alpha
            if e == 0.0:
                return np.log(hi / lo)
            return (hi**e - lo**e) / e
        # power law through the cell endpoints (through hi/2 when lo = 0)
        anchor = np.where(lo > 0, lo, 0.5 * hi)
        phi = self(hi)
        k = np.log(self(anchor) / phi) / np.log(hi / anchor)
        e = 1.0 - k
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = lo / hi
            val = np.where(
                np.abs(e) > 1e-12,
                phi * hi / e * (1.0 - ratio**e),
                phi * hi * np.log(1.0 / ratio),
            )
        return val


@dataclass(frozen=True)
class Singularity:
    """Decreasing nonlinearity g with g(0+) = +inf.

    ``beta == 0`` is accepted and gives g ≡ 1; it is not singular and is only
    meant for inert-regularisation checks.
    """

    beta: float | None = None
    table: tuple[tuple[float, float], ...] | None = None
    blowup_threshold: float = 1e3

    def __post_init__(self):
        if (self.beta is None) == (self.table is None):
            raise ValueError("give exactly one of beta or table")
        if self.beta is not None and self.beta < 0:
            raise ValueError("g = u**-beta needs beta > 0")
        if self.table is not None:
            table = _as_table(self.table)
            vals = [v for _, v in table]
            if any(b >= a for a, b in zip(vals, vals[1:])):
                raise ValueError("tabulated singularity must be strictly decreasing")
            if vals[0] < self.blowup_threshold:
                raise ValueError(
                    f"first node value {vals[0]:g} does not dominate the "
                    f"blow-up threshold {self.blowup_threshold:g}"
                )
            object.__setattr__(self, "table", table)

    @classmethod
    def power(cls, beta: float) -> "Singularity":
        return cls(beta=float(beta))

    @classmethod
    def tabulated(cls, nodes, blowup_threshold: float = 1e3) -> "Singularity":
        return cls(table=_as_table(nodes), blowup_threshold=blowup_threshold)

    @property
    def kind(self) -> str:
        return "power" if self.beta is not None else "tabulated"

    @property
    def is_singular(self) -> bool:
        return self.beta is None or self.beta > 0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.beta is not None:
            return u ** (-self.beta)
        return _loglog_eval(self.table, np.atleast_1d(u)).reshape(u.shape)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.beta is not None:
            return -self.beta * u ** (-self.beta - 1.0)
        # local power-law slope of the table
        h = 1e-6
        return (self(u * (1 + h)) - self(u * (1 - h))) / (2 * h * u)


@dataclass(frozen=True)
class SourceTerm:
    """Source f(u): none, sublinear ``u**q`` (0 < q < 1) or linear ``u``."""

    kind: str = "none"
    q: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "sublinear", "linear"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "sublinear":
            if self.q is None or not 0.0 < self.q < 1.0:
                raise ValueError("sublinear source needs 0 < q < 1")
        elif self.q is not None:
            expected = 1.0 if self.kind == "linear" else None
            if self.q != expected:
                raise ValueError(f"q is not used by a {self.kind} source")

    @classmethod
    def none(cls) -> "SourceTerm":
        return cls("none")

    @classmethod
    def sublinear(cls, q: float) -> "SourceTerm":
        return cls("sublinear", float(q))

    @classmethod
    def linear(cls) -> "SourceTerm":
        return cls("linear", 1.0)

    @property
    def exponent(self) -> float:
        return {"none": 0.0, "linear": 1.0}.get(self.kind, self.q)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "none":
            return np.zeros_like(u)
        if self.kind == "linear":
            return u.copy()
        return np.maximum(u, 0.0) ** self.q

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "none":
            return np.zeros_like(u)
        if self.kind == "linear":
            return np.ones_like(u)
        return self.q * np.maximum(u, 1e-300) ** (self.q - 1.0)


@dataclass(frozen=True)
class Geometry:
    """Unit interval (0, 1) or the ball B_R(0) in R^N (radial)."""

    kind: str = "interval"
    radius: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if self.kind == "interval":
            if self.radius != 1.0 or self.dim != 1:
                raise ValueError("the interval model is always (0, 1)")
        elif self.kind == "ball":
            if not self.radius > 0:
                raise ValueError("ball radius must be positive")
            if int(self.dim) != self.dim or self.dim < 2:
                raise ValueError("ball dimension must be an integer >= 2")
            object.__setattr__(self, "dim", int(self.dim))
        else:
            raise ValueError(f"unsupported geometry {self.kind!r}")

    @classmethod
    def interval(cls) -> "Geometry":
        return cls("interval")

    @classmethod
    def ball(cls, radius: float = 1.0, dim: int = 3) -> "Geometry":
        return cls("ball", float(radius), int(dim))

    @property
    def length(self) -> float:
        return self.radius

    def weight_distance(self, x):
        """Argument of the weight: t on the interval, R - r on the ball."""
        x = np.asarray(x, dtype=float)
        return x if self.kind == "interval" else self.radius - x

    def boundary_distance(self, x):
        """True distance to the boundary of the domain."""
        x = np.asarray(x, dtype=float)
        if self.kind == "interval":
            return np.minimum(x, 1.0 - x)
        return self.radius - x


@dataclass(frozen=True)
class ProblemSpec:
    sign: str
    weight: Weight
    g: Singularity
    f: SourceTerm = field(default_factory=SourceTerm.none)
    lam: float = 1.0
    mu: float = 0.0
    a: float = 1.0
    geometry: Geometry = field(default_factory=Geometry.interval)

    def __post_init__(self):
        if self.sign not in ("plus", "minus"):
            raise ValueError("sign must be 'plus' or 'minus'")
        if not 0.0 < self.a <= 2.0:
            raise ValueError("convection exponent a must lie in (0, 2]")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def absorption_sign(self) -> float:
        """+1 when p g(u) sits on the right-hand side, i.e. (P)^-."""
        return 1.0 if self.sign == "minus" else -1.0


# ---------------------------------------------------------------------------
# evaluation with distinct error kinds
# ---------------------------------------------------------------------------


def _checked(value: float, what: str, arg: float) -> float:
    if not math.isfinite(value):
        raise SingularOverflow(f"{what}({arg!r}) overflows near the singularity")
    return value


def eval_p(w: Weight, t: float) -> float:
    if not t > 0:
        raise DomainError(f"p is defined for t > 0, got {t!r}")
    with np.errstate(over="ignore", divide="ignore"):
        return _checked(float(w(t)), "p", t)


def eval_g(s: Singularity, u: float) -> float:
    if not u > 0:
        raise DomainError(f"g is defined for u > 0, got {u!r}")
    with np.errstate(over="ignore", divide="ignore"):
        return _checked(float(s(u)), "g", u)


def eval_f(f: SourceTerm, u: float) -> float:
    if not u > 0:
        raise DomainError(f"f is evaluated for u > 0, got {u!r}")
    return _checked(float(f(u)), "f", u)


# ---------------------------------------------------------------------------
# analytic classification
# ---------------------------------------------------------------------------

NONEXISTENT = "nonexistent"
POWER = "power"
LOG = "log"
LINEAR = "linear"


@dataclass(frozen=True)
class RegimeClassification:
    regime: str
    predicted_exponent: float | None = None
    log_power: float | None = None


def classify_regime(alpha: float, beta: float) -> RegimeClassification:
    """Boundary behaviour of solutions of -Δu = d^-α u^-β + f(u) + μ|∇u|^a.

    The boundary α + β = 1 is decided exactly on the input floats (no
    rounding in the sum); round the inputs first if a tolerance is wanted.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if alpha >= 2:
        return RegimeClassification(NONEXISTENT)
    s = Fraction(alpha) + Fraction(beta)
    if s > 1:
        return RegimeClassification(POWER, (2.0 - alpha) / (1.0 + beta))
    if s == 1:
        return RegimeClassification(LOG, 1.0, 1.0 / (2.0 - alpha))
    return RegimeClassification(LINEAR, 1.0)


def classify_existence(spec: ProblemSpec, lambda1: float | None = None) -> str:
    """Predicted existence outcome for a power-data problem.

    Returns one of ``"exists"``, ``"nonexistent"``, ``"threshold"`` (a
    bifurcation value in λ or μ separates the two) or ``"unknown"``.
    """
    alpha = spec.weight.alpha
    beta = spec.g.beta
    if alpha is None or beta is None:
        return "unknown"
    a, mu = spec.a, spec.mu
    if spec.sign == "plus":
        if Fraction(alpha) + Fraction(beta) >= 1:
            return "nonexistent"
        if spec.f.kind == "sublinear" and (mu == -1 or (mu == 1 and a < 1)):
            return "threshold"
        return "unknown"
    if alpha >= 2:
        return "nonexistent"
    if spec.f.kind == "linear":
        if a < 1 and mu >= 0 and lambda1 is not None:
            return "exists" if spec.lam < lambda1 else "nonexistent"
        return "unknown"
    if spec.f.kind == "none":
        return "exists" if mu == 0 else "unknown"
    if a < 1 or mu <= 0:
        return "exists"
    if a == 1:
        return "exists" if spec.geometry.kind == "ball" else "unknown"
    return "threshold"


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_TOP_KEYS = {"sign", "alpha", "beta", "q", "lambda", "mu", "a", "geometry"}
_GEOM_KEYS = {"kind", "radius", "dim"}


def spec_from_dict(data: Mapping[str, Any]) -> ProblemSpec:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    geom = dict(data.get("geometry", {"kind": "interval"}))
    unknown = set(geom) - _GEOM_KEYS
    if unknown:
        raise ValueError(f"unknown geometry keys: {sorted(unknown)}")
    kind = geom.get("kind", "interval")
    if kind == "interval":
        geometry = Geometry.interval()
    else:
        geometry = Geometry(kind, float(geom.get("radius", 1.0)), int(geom.get("dim", 3)))
    q = data.get("q")
    if q is None or q == 0:
        f = SourceTerm.none()
    elif q == 1:
        f = SourceTerm.linear()
    else:
        f = SourceTerm.sublinear(q)
    return ProblemSpec(
        sign=data.get("sign", "minus"),
        weight=Weight.power(data.get("alpha", 0.0)),
        g=Singularity.power(data["beta"]),
        f=f,
        lam=float(data.get("lambda", 1.0)),
        mu=float(data.get("mu", 0.0)),
        a=float(data.get("a", 1.0)),
        geometry=geometry,
    )


def spec_to_dict(spec: ProblemSpec) -> dict[str, Any]:
    if spec.weight.alpha is None or spec.g.beta is None:
        raise ValueError("only power data can be written to a config file")
    out: dict[str, Any] = {
        "sign": spec.sign,
        "alpha": spec.weight.alpha,
        "beta": spec.g.beta,
        "lambda": spec.lam,
        "mu": spec.mu,
        "a": spec.a,
    }
    if spec.f.kind != "none":
        out["q"] = spec.f.exponent
    geom = asdict(spec.geometry)
    if spec.geometry.kind == "interval":
        geom = {"kind": "interval"}
    out["geometry"] = geom
    return out


def load_config(path: str | Path) -> dict[str, Any]:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_spec(path: str | Path) -> ProblemSpec:
    return spec_from_dict(load_config(path))


def dump_spec(spec: ProblemSpec, path: str | Path) -> None:
    with open(path, "wb") as fh:
        tomli_w.dump(spec_to_dict(spec), fh)


def power_spec(
    alpha: float,
    beta: float,
    *,
    sign: str = "minus",
    q: float | None = None,
    lam: float = 1.0,
    mu: float = 0.0,
    a: float = 1.0,
    geometry: Geometry | None = None,
) -> ProblemSpec:
    """Shorthand for the pure-power problems used throughout the tests."""
    if q is None:
        f = SourceTerm.none()
    elif q == 1:
        f = SourceTerm.linear()
    else:
        f = SourceTerm.sublinear(q)
    return ProblemSpec(
        sign=sign,
        weight=Weight.power(alpha),
        g=Singularity.power(beta),
        f=f,
        lam=lam,
        mu=mu,
        a=a,
        geometry=geometry or Geometry.interval(),
    )
