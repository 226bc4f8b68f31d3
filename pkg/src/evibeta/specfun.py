"""Gamma-family special functions and beta-distribution primitives.

All three psi-family functions use the same scheme: shift the argument up by a
fixed recurrence so the asymptotic (de Moivre / Bernoulli) expansion applies,
then evaluate the series. This keeps absolute error well below 1e-12 for
log_gamma, 1e-10 for digamma and 1e-8 for trigamma across (0, 1e6] without any
branching, and vectorizes trivially.

Density and KL computations stay in log space: alpha + beta grows with total
evidence, and Gamma(alpha + beta) overflows float64 long before the losses do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BetaParams",
    "log_gamma",
    "digamma",
    "trigamma",
    "beta_log_pdf",
    "beta_pdf",
    "beta_kl_to_uniform",
]

# Number of upward recurrence steps before switching to the asymptotic series.
# After the shift the argument is >= _SHIFT, where the truncated Bernoulli
# series is accurate to ~1e-14 absolute.
_SHIFT = 12

_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)

# Bernoulli-number coefficients B_2n / (2n (2n - 1)) for ln Gamma.
_LGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
)

# B_2n coefficients for psi: psi(x) ~ ln x - 1/(2x) - sum B_2n / (2n x^2n).
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
)

# Coefficients of x^-(2n+1) in the psi' expansion beyond 1/x + 1/(2x^2).
_TRIGAMMA_SERIES = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
)


def _validate_positive(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    if np.any(x <= 0.0):
        raise ValueError(f"{name} must be > 0")


def log_gamma(x):
    """ln Gamma(x) for x > 0. Accepts scalars or arrays."""
    x = np.asarray(x, dtype=np.float64)
    _validate_positive(x, "x")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    shifted = x + _SHIFT
    correction = np.zeros_like(x)
    for i in range(_SHIFT):
        correction += np.log(x + i)

    inv2 = 1.0 / (shifted * shifted)
    series = np.zeros_like(x)
    power = 1.0 / shifted
    for c in _LGAMMA_SERIES:
        series += c * power
        power *= inv2

    out = (shifted - 0.5) * np.log(shifted) - shifted + _HALF_LOG_TWO_PI + series
    out -= correction
    return float(out[0]) if scalar else out


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0. Accepts scalars or arrays."""
    x = np.asarray(x, dtype=np.float64)
    _validate_positive(x, "x")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    shifted = x + _SHIFT
    correction = np.zeros_like(x)
    for i in range(_SHIFT):
        correction += 1.0 / (x + i)

    inv2 = 1.0 / (shifted * shifted)
    series = np.zeros_like(x)
    power = inv2.copy()
    for c in _DIGAMMA_SERIES:
        series += c * power
        power *= inv2

    out = np.log(shifted) - 0.5 / shifted - series - correction
    return float(out[0]) if scalar else out


def trigamma(x):
    """psi'(x), the derivative of digamma, for x > 0."""
    x = np.asarray(x, dtype=np.float64)
    _validate_positive(x, "x")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    shifted = x + _SHIFT
    correction = np.zeros_like(x)
    for i in range(_SHIFT):
        correction += 1.0 / ((x + i) * (x + i))

    inv = 1.0 / shifted
    inv2 = inv * inv
    series = inv + 0.5 * inv2
    power = inv * inv2
    for c in _TRIGAMMA_SERIES:
        series += c * power
        power *= inv2

    out = series + correction
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a beta distribution, both strictly positive."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("beta parameters must be finite")
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("beta parameters must be > 0")


def log_beta(alpha, beta):
    """ln B(alpha, beta) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a+b)."""
    return log_gamma(alpha) + log_gamma(beta) - log_gamma(alpha + beta)


def beta_log_pdf(y: float, params: BetaParams) -> float:
    """Log density of Beta(alpha, beta) at y in (0, 1)."""
    if not (0.0 < y < 1.0):
        raise ValueError(f"y must be in (0, 1), got {y}")
    a, b = params.alpha, params.beta
    return (a - 1.0) * math.log(y) + (b - 1.0) * math.log1p(-y) - log_beta(a, b)


def beta_pdf(y: float, params: BetaParams) -> float:
    """Density of Beta(alpha, beta) at y in (0, 1), computed in log space."""
    return math.exp(beta_log_pdf(y, params))


def beta_kl_to_uniform(params: BetaParams) -> float:
    """KL divergence from Beta(alpha, beta) to the uniform Beta(1, 1).

    Closed form:
        ln[Gamma(a+b) / (Gamma(a) Gamma(b))]
        + (a-1)(psi(a) - psi(a+b)) + (b-1)(psi(b) - psi(a+b))

    Only defined here for a, b >= 1; callers evaluating the regularizer clamp
    parameters before calling.
    """
    a, b = params.alpha, params.beta
    if a < 1.0 or b < 1.0:
        raise ValueError(f"KL to uniform requires alpha, beta >= 1, got ({a}, {b})")
    s = a + b
    psi_s = digamma(s)
    kl = (
        -log_beta(a, b)
        + (a - 1.0) * (digamma(a) - psi_s)
        + (b - 1.0) * (digamma(b) - psi_s)
    )
    # Analytically nonnegative; guard against -1e-17 style roundoff at (1, 1).
    return max(kl, 0.0)
