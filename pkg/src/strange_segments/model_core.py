"""Static workload-model description and deterministic population arithmetic.

A server hosts ``K_groups`` customer groups. Group ``i`` has ``n_i(t) =
c_i * floor(t**alpha)`` customers at integer time ``t >= 0``, each with mean
workload ``mu_i`` and loading weights ``beta_i`` onto a shared K-dimensional
moving-average driver. Everything in this module is deterministic and exact:
populations and the cumulative normalizer ``N(t)`` are integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Mapping, TYPE_CHECKING

import numpy as np

from .errors import ModelValidationError

if TYPE_CHECKING:  # pragma: no cover
    from .innovations import InnovationModel, NoiseModel

# Relative half-width of the near-integer band in which floor(t**alpha) is
# resolved exactly instead of trusting the floating-point power.
_FLOOR_GUARD = 1e-9

# Largest denominator for which alpha is treated as an exact small rational
# and the floor is settled by integer exponentiation.
_MAX_RATIONAL_DEN = 64


def floor_power(t: int, alpha: float) -> int:
    """floor(t**alpha) with a guard against floating-point boundary error.

    When ``t**alpha`` computed in floats lands within a small band around an
    integer ``n``, the plain floor may be off by one (e.g. ``4**0.5`` or
    ``1000**(1/3)``). Inside the band the result is settled exactly by
    integer exponentiation when ``alpha`` is a small rational ``p/q``
    (``t**alpha >= n`` iff ``t**p >= n**q``); otherwise the value is snapped
    to the nearest integer, which recovers the intended value whenever the
    float ``alpha`` itself is an approximation (1/3, 0.1, ...).
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return 0
    v = float(t) ** alpha
    n = round(v)
    if abs(v - n) <= _FLOOR_GUARD * max(1.0, abs(v)):
        frac = Fraction(alpha).limit_denominator(_MAX_RATIONAL_DEN)
        if frac == Fraction(alpha) and frac.denominator <= _MAX_RATIONAL_DEN:
            p, q = frac.numerator, frac.denominator
            return n if t**p >= n**q else n - 1
        return n
    return int(np.floor(v))


def floor_power_prefix(t_max: int, alpha: float) -> np.ndarray:
    """Array of floor(t**alpha) for t = 0..t_max (int64).

    Vectorized float power everywhere except inside the near-integer guard
    band, where the same exact resolution as ``floor_power`` is applied
    (vectorized for integer alpha, where every index lands in the band).
    Agrees with ``floor_power`` element by element.
    """
    t = np.arange(t_max + 1, dtype=np.float64)
    v = t**alpha
    out = np.floor(v).astype(np.int64)
    n = np.rint(v)
    risky = np.flatnonzero(np.abs(v - n) <= _FLOOR_GUARD * np.maximum(1.0, np.abs(v)))
    if risky.size == 0:
        return out
    frac = Fraction(alpha).limit_denominator(_MAX_RATIONAL_DEN)
    if frac == Fraction(alpha) and frac.denominator <= _MAX_RATIONAL_DEN:
        p, q = frac.numerator, frac.denominator
        if q == 1 and p * max(t_max, 2).bit_length() < 62:
            out[risky] = risky.astype(np.int64) ** p
        else:
            for i in risky.tolist():
                ni = int(n[i])
                out[i] = ni if i**p >= ni**q else ni - 1
    else:
        out[risky] = n[risky].astype(np.int64)
    return out


@dataclass(frozen=True)
class CustomerGroup:
    """One customer group: size coefficient, mean workload, loading weights."""

    c: int
    mu: float
    beta: tuple[float, ...]

    def __post_init__(self):
        if not isinstance(self.c, int) or isinstance(self.c, bool) or self.c < 1:
            raise ModelValidationError(
                "group_c_positive_integer",
                f"group size coefficient c must be a positive integer, got {self.c!r}",
            )
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))


@dataclass(frozen=True)
class MACoefficients:
    """Finite two-sided moving-average coefficients phi_k, keyed by lag.

    ``trunc_tol`` records the tail-mass bound that was accepted when the
    family was truncated from a generator; it is 0 for literal families.
    """

    coeffs: Mapping[int, float]
    trunc_tol: float = 0.0

    def __post_init__(self):
        items = {int(k): float(v) for k, v in dict(self.coeffs).items()}
        object.__setattr__(self, "coeffs", items)
        if self.trunc_tol < 0:
            raise ModelValidationError("trunc_tol_nonnegative", "trunc_tol must be >= 0")
        if not items:
            raise ModelValidationError("phi_nonempty", "at least one MA coefficient is required")

    @classmethod
    def from_generator(
        cls,
        pairs: Iterable[tuple[int, float]],
        trunc_tol: float,
        max_terms: int = 100_000,
        probation: int = 32,
    ) -> "MACoefficients":
        """Truncate an infinite (lag, value) family down to finite support.

        Terms are consumed until ``probation`` consecutive terms each
        contribute less than ``trunc_tol / probation`` in absolute value, so
        the retained family is within the requested tail mass of any family
        whose discarded terms keep shrinking. Raises if ``max_terms`` terms
        never satisfy that criterion.
        """
        if trunc_tol <= 0:
            raise ModelValidationError(
                "trunc_tol_positive", "a positive trunc_tol is required to truncate a generator"
            )
        kept: dict[int, float] = {}
        quiet = 0
        it: Iterator[tuple[int, float]] = iter(pairs)
        for count, (lag, value) in enumerate(it):
            if count >= max_terms:
                break
            if abs(value) < trunc_tol / probation:
                quiet += 1
            else:
                quiet = 0
            kept[int(lag)] = kept.get(int(lag), 0.0) + float(value)
            if quiet >= probation:
                return cls(kept, trunc_tol=trunc_tol)
        else:
            # generator exhausted: support was finite after all
            return cls(kept, trunc_tol=trunc_tol)
        raise ModelValidationError(
            "trunc_tol_unachievable",
            f"coefficient generator did not decay below the truncation tolerance "
            f"within {max_terms} terms",
        )

    @property
    def lags(self) -> tuple[int, ...]:
        return tuple(sorted(self.coeffs))

    @property
    def max_lag(self) -> int:
        """Largest positive lag L+ (0 when all lags are <= 0)."""
        return max(max(self.coeffs), 0)

    @property
    def min_lag(self) -> int:
        """Smallest lag; -min_lag is the look-ahead depth L-."""
        return min(min(self.coeffs), 0)

    def total(self) -> float:
        return float(sum(self.coeffs.values()))

    def abs_total(self) -> float:
        return float(sum(abs(v) for v in self.coeffs.values()))


@dataclass(frozen=True)
class ModelSpec:
    """Full workload model: growth exponent, groups, MA driver, noise.

    Immutable after construction; all derived aggregates are cached and
    recomputed deterministically from the fields.
    """

    alpha: float
    groups: tuple[CustomerGroup, ...]
    ma: MACoefficients
    innovations: "InnovationModel"
    noise: "NoiseModel | None" = None

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.alpha <= 0:
            raise ModelValidationError("alpha_positive", f"alpha must be > 0, got {self.alpha}")
        if not self.groups:
            raise ModelValidationError("groups_nonempty", "at least one customer group is required")
        k = self.innovations.dim
        for i, g in enumerate(self.groups, start=1):
            if len(g.beta) != k:
                raise ModelValidationError(
                    "beta_dimension",
                    f"group {i} has beta of length {len(g.beta)}, expected innovation dim {k}",
                )
        if self.ma.total() == 0.0:
            raise ModelValidationError(
                "phi_total_nonzero",
                "the MA coefficients must not sum to zero (phi != 0)",
            )

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def dim(self) -> int:
        return self.innovations.dim

    @cached_property
    def total_c(self) -> int:
        """C = sum of the group size coefficients."""
        return sum(g.c for g in self.groups)

    @cached_property
    def beta_sum(self) -> np.ndarray:
        """beta = sum_i c_i beta_i (unnormalized aggregate loading)."""
        out = np.zeros(self.dim)
        for g in self.groups:
            out += g.c * np.asarray(g.beta)
        out.setflags(write=False)
        return out

    @cached_property
    def beta_bar(self) -> np.ndarray:
        """Group-averaged loading vector beta_sum / C."""
        out = self.beta_sum / self.total_c
        out.setflags(write=False)
        return out

    @cached_property
    def phi_total(self) -> float:
        return self.ma.total()


def population(spec: ModelSpec, i: int, t: int) -> int:
    """Number of group-``i`` customers at time ``t``: c_i * floor(t**alpha).

    ``i`` is 1-based. Exact integer result; see ``floor_power`` for how the
    boundary at exact powers is handled.
    """
    if not 1 <= i <= spec.n_groups:
        raise ModelValidationError(
            "group_index", f"group index {i} outside 1..{spec.n_groups}"
        )
    return spec.groups[i - 1].c * floor_power(t, spec.alpha)


def cumulative_population(spec: ModelSpec, t: int) -> int:
    """Normalizer N(t) = sum_{k=1..t} sum_i n_i(k), exactly (N(0) = 0).

    Computed in arbitrary-precision integers, so it is exact for any horizon.
    Strictly increasing for t >= 1 because every group contributes at least
    c_i per step once floor(k**alpha) >= 1.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    return spec.total_c * sum(floor_power(k, spec.alpha) for k in range(1, t + 1))


def cumulative_population_prefix(spec: ModelSpec, t_max: int) -> np.ndarray:
    """Prefix array N(0..t_max) as int64, with an overflow guard.

    Must agree exactly with ``cumulative_population`` at every index; the
    guard rejects horizons whose normalizer would not fit in 64-bit.
    """
    bound = spec.total_c * (t_max + 1) * max(floor_power(t_max, spec.alpha), 1)
    if bound >= 2**62:
        raise ModelValidationError(
            "normalizer_width",
            f"N({t_max}) may exceed 64-bit integer range for alpha={spec.alpha}; "
            "reduce the horizon",
        )
    steps = spec.total_c * floor_power_prefix(t_max, spec.alpha)
    return np.cumsum(steps, dtype=np.int64)


def aggregate_beta(spec: ModelSpec) -> np.ndarray:
    """Average loading vector beta_bar = C^{-1} sum_i c_i beta_i."""
    return spec.beta_bar


def total_phi(spec: ModelSpec) -> float:
    """Total MA mass phi = sum_k phi_k; re-asserts phi != 0."""
    phi = spec.phi_total
    if phi == 0.0:
        raise ModelValidationError(
            "phi_total_nonzero", "the MA coefficients must not sum to zero (phi != 0)"
        )
    return phi
