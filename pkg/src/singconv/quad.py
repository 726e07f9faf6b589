"""Quadrature for integrands with an algebraic endpoint singularity.

The integral conditions that decide existence, namely ∫ p g, ∫ t p and the
Keller-Osserman integral, are all of the form ∫_0^1 F with F possibly
blowing up like t^e at 0.  ``integrate_singular`` first estimates the local
exponent e from the partial integrals over the dyadic slabs
(2^-(k+1), 2^-k) and declares divergence when these slabs stop contracting
(e <= -1).  Otherwise the endpoint is flattened with t = lower + τ^κ and the
smooth remainder goes to QUADPACK.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .model import Singularity, Weight

FINITE = "finite"
DIVERGENT = "divergent"

ATOL = 1e-10
RTOL = 1e-8


class EvaluationFailure(ArithmeticError):
    """The integrand returned NaN or inf away from the singular endpoint."""


@dataclass(frozen=True)
class IntegralVerdict:
    status: str
    value: float | None = None
    error_estimate: float | None = None
    local_exponent: float | None = None

    @property
    def is_finite(self) -> bool:
        return self.status == FINITE

    @classmethod
    def finite(cls, value, error, exponent=None) -> "IntegralVerdict":
        return cls(FINITE, float(value), float(error), exponent)

    @classmethod
    def divergent(cls, exponent) -> "IntegralVerdict":
        return cls(DIVERGENT, local_exponent=float(exponent))


def _quad(fun, lo, hi, atol, rtol):
    with np.errstate(all="ignore"):
        value, err = integrate.quad(fun, lo, hi, epsabs=atol, epsrel=rtol, limit=400)
    if not (math.isfinite(value) and math.isfinite(err)):
        raise EvaluationFailure(f"integrand not evaluable on ({lo:g}, {hi:g})")
    return value, err


def _check_interior(integrand, lower, upper):
    xs = lower + (upper - lower) * np.linspace(0.05, 0.95, 7)
    for x in xs:
        with np.errstate(all="ignore"):
            v = float(integrand(x))
        if not math.isfinite(v):
            raise EvaluationFailure(f"integrand is {v} at interior point {x:g}")


def slab_exponent(
    integrand: Callable[[float], float],
    lower: float,
    upper: float,
    singular_end: str = "lower",
    *,
    k0: int = 10,
    n_cutoffs: int = 8,
) -> tuple[float, np.ndarray]:
    """Local exponent at the singular end from dyadic slab integrals.

    Returns the exponent estimate and the contraction ratios of successive
    Cauchy differences S_{k+1} - S_k of the partial integrals.
    """
    width = upper - lower
    eps = width * 2.0 ** -np.arange(k0, k0 + n_cutoffs + 2, dtype=float)
    slabs = []
    for hi_e, lo_e in zip(eps[:-1], eps[1:]):
        if singular_end == "lower":
            a, b = lower + lo_e, lower + hi_e
        else:
            a, b = upper - hi_e, upper - lo_e
        val, _ = _quad(integrand, a, b, 0.0, 1e-12)
        slabs.append(abs(val))
    slabs = np.asarray(slabs)
    if np.all(slabs == 0):
        return math.inf, np.zeros(len(slabs) - 1)
    if np.any(slabs == 0):
        return math.inf, slabs[1:] / np.maximum(slabs[:-1], 1e-300)
    ratios = slabs[1:] / slabs[:-1]
    # |D_k| ~ eps_k^(1+e): least-squares slope in log-log
    slope = np.polyfit(np.log(eps[:-1]), np.log(slabs), 1)[0]
    return float(slope - 1.0), ratios


def integrate_singular(
    integrand: Callable[[float], float],
    lower: float,
    upper: float,
    singular_end: str | None = "lower",
    *,
    atol: float = ATOL,
    rtol: float = RTOL,
    n_cutoffs: int = 8,
    band: float = 1e-6,
) -> IntegralVerdict:
    """Integrate ``integrand`` over (lower, upper) or report divergence.

    Parameters
    ----------
    singular_end:
        ``"lower"``, ``"upper"`` or ``None``.
    n_cutoffs:
        Number of successive halvings over which the Cauchy differences must
        fail to contract before divergence is declared.
    band:
        Confidence band on the exponent: divergence needs e <= -1 + band.
    """
    if not lower < upper:
        raise ValueError("need lower < upper")
    if singular_end not in ("lower", "upper", None):
        raise ValueError(f"bad singular_end {singular_end!r}")
    _check_interior(integrand, lower, upper)
    if singular_end is None:
        value, err = _quad(integrand, lower, upper, atol, rtol)
        return IntegralVerdict.finite(value, err)

    exponent, ratios = slab_exponent(
        integrand, lower, upper, singular_end, n_cutoffs=n_cutoffs
    )
    no_contraction = ratios.size and np.all(ratios >= 2.0 ** (-band) - 1e-12)
    if exponent <= -1.0 + band and no_contraction:
        return IntegralVerdict.divergent(exponent)
    value, err = integrate_with_exponent(
        integrand, lower, upper, singular_end, exponent, atol=atol, rtol=rtol
    )
    return IntegralVerdict.finite(value, err, exponent)


def flattening_power(exponent: float) -> float:
    """κ = 2/(1+e) clamped to [1, 8]."""
    if not math.isfinite(exponent) or exponent >= 1.0:
        return 1.0
    if exponent <= -1.0:
        return 8.0
    return min(max(2.0 / (1.0 + exponent), 1.0), 8.0)


def integrate_with_exponent(
    integrand, lower, upper, singular_end, exponent, *, atol=ATOL, rtol=RTOL
) -> tuple[float, float]:
    """Integrate after the substitution t = end ± τ^κ (no divergence probe)."""
    kappa = flattening_power(exponent)
    span = (upper - lower) ** (1.0 / kappa)
    if singular_end == "lower":
        def fun(tau):
            return kappa * tau ** (kappa - 1.0) * integrand(lower + tau**kappa)
    else:
        def fun(tau):
            return kappa * tau ** (kappa - 1.0) * integrand(upper - tau**kappa)

    def safe(tau):
        if tau <= 0.0:
            return 0.0 if kappa > 1.0 else fun(1e-300)
        return fun(tau)

    return _quad(safe, 0.0, span, atol, rtol)


# ---------------------------------------------------------------------------
# the integral conditions
# ---------------------------------------------------------------------------


def check_pg_integrable(w: Weight, g: Singularity, **kw) -> IntegralVerdict:
    """∫_0^1 p(t) g(t) dt; necessary for (P)^+ to have a solution."""
    return integrate_singular(lambda t: float(w(t) * g(t)), 0.0, 1.0, "lower", **kw)


def check_tp_integrable(w: Weight, **kw) -> IntegralVerdict:
    """∫_0^1 t p(t) dt; necessary and sufficient for (P)^- with μ = 0."""
    return integrate_singular(lambda t: float(t * w(t)), 0.0, 1.0, "lower", **kw)


def check_keller_osserman(w: Weight, g: Singularity, **kw) -> IntegralVerdict:
    """∫_0^1 (∫_0^t p g)^(-1/2) dt.

    The inner integral must be finite for t > 0, otherwise the verdict is
    divergent (with the inner exponent attached).
    """

    def phi(s):
        return float(w(s) * g(s))

    inner = check_pg_integrable(w, g)
    if not inner.is_finite:
        return inner
    e_inner = inner.local_exponent

    def outer(t):
        val, _ = integrate_with_exponent(phi, 0.0, t, "lower", e_inner, atol=0.0, rtol=1e-12)
        return val**-0.5

    return integrate_singular(outer, 0.0, 1.0, "lower", **kw)
