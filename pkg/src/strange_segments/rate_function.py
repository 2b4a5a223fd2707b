"""Numerical evaluation of the workload rate functions.

Two convex log-MGF limits drive all asymptotics of long deviant segments:

* the limit curve ``Lambda(lam) = log_mgf(lam * phi * beta_bar)``, which
  governs segments far from the start of the horizon, and
* the position-indexed curve for a window spanning offsets ``(k, k+1)`` in
  units of the window length,

  ``Lambda_k(lam) = integral_k^{k+1} log_mgf(w_k(y) * lam * phi * beta_bar) dy``,
  ``w_k(y) = (alpha+1) y**alpha / ((k+1)**(alpha+1) - k**(alpha+1))``,

  which reduces to the limit curve as ``k -> infinity``.

Their Fenchel-Legendre transforms ``f*(x) = sup_lam {lam x - f(lam)}`` are
computed by solving ``f'(lam) = x`` (the derivative is continuous and
increasing, so bracketing plus bisection is globally safe) and the capacity
inversion solves ``Lambda*(C) = target`` on the increasing branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import expm1, log1p
from typing import Union

import numpy as np

from .errors import BracketError, ModelValidationError, QuadratureError
from .innovations import GaussianInnovations
from .model_core import ModelSpec
from .segments import ThresholdSet

# Gauss-Legendre order is doubled until two successive estimates agree to
# quad_tol; the cap only guards against a non-smooth integrand, which the
# closed-form log-MGF contract rules out.
_MAX_QUAD_ORDER = 8192
_MAX_BRACKET_DOUBLINGS = 60

WhichCurve = Union[str, float]  # "limit" or a window offset k >= 0


@dataclass(frozen=True)
class RateFunctionCtx:
    """Numerical context: model reference plus tolerances."""

    spec: ModelSpec
    quad_order: int = 32
    quad_tol: float = 1e-10
    root_tol: float = 1e-12
    lambda_bracket_max: float = 1.0

    def __post_init__(self):
        if self.quad_order < 16:
            raise ModelValidationError("quad_order_min", "quad_order must be >= 16")
        if self.quad_tol <= 0 or self.root_tol <= 0:
            raise ModelValidationError(
                "tolerances_positive", "quad_tol and root_tol must be > 0"
            )


@dataclass(frozen=True)
class LegendreResult:
    """Value of a Fenchel-Legendre transform and the maximizing lambda."""

    value: float
    argmax_lambda: float
    converged: bool


@lru_cache(maxsize=32)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _interval_mass(alpha: float, k: float, p: float = 1.0) -> float:
    """(k+p)**(alpha+1) - k**(alpha+1), stably for large k."""
    if k == 0.0:
        return p ** (alpha + 1.0)
    return k ** (alpha + 1.0) * expm1((alpha + 1.0) * log1p(p / k))


def lambda_limit(ctx: RateFunctionCtx, lam: float) -> float:
    """Limit log-MGF: log_mgf(lam * phi * beta_bar)."""
    spec = ctx.spec
    return spec.innovations.log_mgf(lam * spec.phi_total * spec.beta_bar)


def lambda_limit_prime(ctx: RateFunctionCtx, lam: float) -> float:
    """Derivative of the limit log-MGF in lam."""
    spec = ctx.spec
    v = spec.phi_total * spec.beta_bar
    return float(v @ spec.innovations.grad_log_mgf(lam * v))


def _segment_quadrature(ctx: RateFunctionCtx, k: float, lam: float, differentiated: bool) -> float:
    """Adaptive Gauss-Legendre over (k, k+1) of the (optionally differentiated)
    window integrand."""
    spec = ctx.spec
    denom = _interval_mass(spec.alpha, k)
    coeff = spec.phi_total * (spec.alpha + 1.0) / denom
    beta_bar = spec.beta_bar
    model = spec.innovations

    def estimate(order: int) -> float:
        nodes, weights = _leggauss(order)
        y = k + 0.5 * (nodes + 1.0)
        g = coeff * y**spec.alpha
        if differentiated:
            vals = g * model.grad_log_mgf_ray(beta_bar, g * lam)
        else:
            vals = model.log_mgf_ray(beta_bar, g * lam)
        return 0.5 * float(weights @ vals)

    order = ctx.quad_order
    prev = estimate(order)
    while order < _MAX_QUAD_ORDER:
        order *= 2
        cur = estimate(order)
        if abs(cur - prev) < ctx.quad_tol:
            return cur
        prev = cur
    raise QuadratureError(
        f"quadrature did not reach tolerance {ctx.quad_tol:g} by order {_MAX_QUAD_ORDER}",
        achieved=abs(cur - prev),
    )


def lambda_k(ctx: RateFunctionCtx, k: float, lam: float) -> float:
    """Window log-MGF at offset ``k`` (exactly 0 at lam = 0)."""
    if k < 0:
        raise ValueError("window offset k must be >= 0")
    if lam == 0.0:
        return 0.0
    return _segment_quadrature(ctx, k, lam, differentiated=False)


def lambda_k_prime(ctx: RateFunctionCtx, k: float, lam: float) -> float:
    """Derivative of the window log-MGF in lam, by the differentiated integrand."""
    if k < 0:
        raise ValueError("window offset k must be >= 0")
    return _segment_quadrature(ctx, k, lam, differentiated=True)


def _curve(ctx: RateFunctionCtx, which: WhichCurve):
    """Return (f, f') callables for the requested curve."""
    if isinstance(which, str):
        if which != "limit":
            raise ValueError(f"unknown curve {which!r}; expected 'limit' or a window offset")
        return (lambda lam: lambda_limit(ctx, lam), lambda lam: lambda_limit_prime(ctx, lam))
    k = float(which)
    if k < 0:
        raise ValueError("window offset k must be >= 0")
    return (lambda lam: lambda_k(ctx, k, lam), lambda lam: lambda_k_prime(ctx, k, lam))


def legendre(ctx: RateFunctionCtx, which: WhichCurve, x: float) -> LegendreResult:
    """Fenchel-Legendre transform of the selected curve at ``x``.

    Solves ``f'(lam) = x`` by doubling the bracket from lambda_bracket_max
    until the derivative passes ``x`` (failure here means the model is not
    steep along the loading direction), then bisects to root_tol and applies
    one Newton polish. ``x`` exactly at the mean slope ``f'(0)`` returns 0
    without any root finding.
    """
    f, fprime = _curve(ctx, which)
    mean = fprime(0.0)
    if x == mean:
        return LegendreResult(0.0, 0.0, True)

    side = 1.0 if x > mean else -1.0
    b = ctx.lambda_bracket_max
    for _ in range(_MAX_BRACKET_DOUBLINGS):
        if side * (fprime(side * b) - x) > 0.0:
            break
        b *= 2.0
    else:
        raise BracketError(
            "steepness violation: derivative of the log-MGF never passed "
            f"x={x:g} within {_MAX_BRACKET_DOUBLINGS} bracket doublings"
        )
    lo, hi = (0.0, side * b) if side > 0 else (side * b, 0.0)
    while hi - lo > ctx.root_tol:
        mid = 0.5 * (lo + hi)
        if fprime(mid) < x:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    step = 1e-6 * max(1.0, abs(lam))
    curvature = (fprime(lam + step) - fprime(lam - step)) / (2.0 * step)
    if np.isfinite(curvature) and curvature > 0.0:
        polished = lam - (fprime(lam) - x) / curvature
        if lo <= polished <= hi:
            lam = polished
    value = lam * x - f(lam)
    return LegendreResult(max(value, 0.0), lam, True)


def gaussian_closed_form(spec: ModelSpec, x: float) -> float:
    """Closed-form transform of the limit curve for Gaussian innovations.

    ``x**2 / (2 phi**2 beta_bar' cov beta_bar)``; the quadratic form must be
    positive for the model to be steep along the loading direction.
    """
    model = spec.innovations
    if not isinstance(model, GaussianInnovations):
        raise ModelValidationError(
            "gaussian_innovations_required",
            "the closed form applies only to Gaussian innovation models",
        )
    quad = float(spec.beta_bar @ model.cov @ spec.beta_bar)
    if quad <= 0.0:
        raise ModelValidationError(
            "gaussian_direction_variance",
            "beta_bar' cov beta_bar must be positive for a usable Gaussian model",
        )
    return x * x / (2.0 * spec.phi_total**2 * quad)


def invert_capacity(ctx: RateFunctionCtx, target_rate: float) -> float:
    """Capacity headroom C with ``Lambda*(C) = target_rate`` (above-mean branch).

    The transform is continuous, 0 at the mean slope and increasing to the
    right of it, so the inverse is found by doubling an upper bracket and
    bisecting until the rate residual is within root_tol.
    """
    if target_rate <= 0.0:
        raise ValueError("target rate must be > 0")
    mean = lambda_limit_prime(ctx, 0.0)
    hi = mean + 1.0
    for _ in range(200):
        if legendre(ctx, "limit", hi).value >= target_rate:
            break
        hi = mean + 2.0 * (hi - mean)
    else:
        raise BracketError(
            f"could not bracket the capacity for target rate {target_rate:g}"
        )
    lo = mean
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = legendre(ctx, "limit", mid).value
        if abs(val - target_rate) <= ctx.root_tol:
            return mid
        if val < target_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lorenz(alpha: float, k: float, p: float) -> float:
    """Lorenz curve of the normalized power-growth weight on (k, k+1).

    ``((k+p)**(alpha+1) - k**(alpha+1)) / ((k+1)**(alpha+1) - k**(alpha+1))``
    for 0 <= p <= 1; pointwise nondecreasing in k, which is what makes the
    window log-MGF shrink toward the limit curve as the window moves out.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if k < 0:
        raise ValueError("window offset k must be >= 0")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return _interval_mass(alpha, k, p) / _interval_mass(alpha, k, 1.0)


def set_rate(ctx: RateFunctionCtx, which: WhichCurve, tset: ThresholdSet) -> float:
    """inf over an open threshold set of the selected transform.

    The transform is convex with its minimum (value 0) at the mean slope, so
    the infimum over an open interval-type set is attained at the endpoint
    nearest the mean, or is 0 when the set reaches the mean. By continuity
    the infimum over the closure is the same, so a single number covers both
    the optimistic and conservative asymptotic bounds.
    """
    _, fprime = _curve(ctx, which)
    mean = fprime(0.0)
    if tset.kind == "above":
        return 0.0 if tset.a <= mean else legendre(ctx, which, tset.a).value
    if tset.kind == "below":
        return 0.0 if tset.a >= mean else legendre(ctx, which, tset.a).value
    if mean <= tset.a:
        return legendre(ctx, which, tset.a).value
    if mean >= tset.b:
        return legendre(ctx, which, tset.b).value
    return 0.0
