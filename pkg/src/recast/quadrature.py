"""
Univariate integration of the per-observation marginal likelihood terms.

Continuous labels: after the substitution u = (beta - y/f) / (sigma/|f|) the
i-th term is

    I_i = int N(u | 0, 1) / sigma * Cauchy(u | m_i, s_i) du,
    m_i = |f| / sigma * (delta - y / f),   s_i = |f| * gamma / sigma,

truncated to [-B, B]. The neglected mass is at most {phi(-B) + phi(B)} / sigma.
I_i already equals int N(y | beta f, sigma^2) Cauchy(beta | delta, gamma) dbeta;
the 1/|f| of the beta-form is absorbed by the substitution.

Binary labels: substituting the Cauchy CDF, beta(t) = delta + gamma tan(pi (t - 1/2)),
maps the real line onto (0, 1) exactly, so

    J_i = int_0^1 expit{beta(t) f}^y [1 - expit{beta(t) f}]^(1-y) dt

has a bounded integrand and no truncation error. Gauss-Kronrod nodes are
interior, so t = 0 and t = 1 are never evaluated.
"""
import logging
import math
import warnings
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from .errors import DataError, DomainError, NumericalError, QuadratureError
from .schemas import QuadratureConfig
from .stats_core import TINY

logger = logging.getLogger(__name__)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class FloorDiagnostics:
    """Counts integrals that underflowed and were floored before taking logs."""

    def __init__(self) -> None:
        self.floor_events = 0

    def record(self, count: int) -> None:
        if count:
            self.floor_events += int(count)
            logger.debug(f"{count} marginal likelihood term(s) underflowed and were floored at {TINY:.3e}")


def integrate_adaptive(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    cfg: Optional[QuadratureConfig] = None,
    points: Optional[Sequence[float]] = None,
) -> Tuple[float, float]:
    """Adaptive Gauss-Kronrod (QUADPACK) integral of f over [lo, hi].

    Args:
        f: integrand, must be finite on [lo, hi]
        lo, hi: finite limits with lo < hi
        cfg: tolerances and subdivision budget
        points: optional interior break points (peaks, kinks)

    Returns:
        (value, error estimate)
    """
    cfg = cfg or QuadratureConfig()
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise DomainError(f"integration limits must be finite with lo < hi, got [{lo}, {hi}]")

    def guarded(x: float) -> float:
        value = f(x)
        if not math.isfinite(value):
            raise NumericalError(f"non-finite integrand value {value!r} at abscissa x={x!r}")
        return value

    interior = None
    if points is not None:
        interior = sorted({float(p) for p in points if lo < p < hi}) or None

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        result = integrate.quad(
            guarded, lo, hi,
            epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
            limit=cfg.max_subdivisions, points=interior, full_output=1,
        )
    value, err_est, info = float(result[0]), float(result[1]), result[2]
    if len(result) > 3:
        # QUADPACK reported a problem; only an exhausted budget is fatal
        if info.get("last", 0) >= cfg.max_subdivisions:
            raise QuadratureError(
                f"subdivision budget of {cfg.max_subdivisions} exhausted on [{lo}, {hi}]", value, err_est
            )
        logger.debug(f"quadrature on [{lo}, {hi}] returned with a warning: {result[3]}")
    return value, err_est


# ---------------------------------------------------------------------------
# Continuous response
# ---------------------------------------------------------------------------

def _substituted_location_scale(y, f_score, delta, gamma, sigma):
    abs_f = np.abs(f_score)
    m = abs_f / sigma * (delta - y / f_score)
    s = abs_f * gamma / sigma
    return m, s


def continuous_integral_i(
    y: float,
    f_score: float,
    delta: float,
    gamma: float,
    sigma: float,
    cfg: Optional[QuadratureConfig] = None,
) -> float:
    """Marginal likelihood of one continuous label; see the module docstring."""
    cfg = cfg or QuadratureConfig()
    if f_score == 0.0:
        raise DataError("zero source score violates a.s. condition")
    if not sigma > 0.0 or not gamma > 0.0:
        raise DomainError(f"sigma and gamma must be positive, got sigma={sigma}, gamma={gamma}")
    m, s = _substituted_location_scale(y, f_score, delta, gamma, sigma)
    m, s = float(m), float(s)

    if cfg.method == "voigt":
        return float(special.voigt_profile(m, 1.0, s)) / sigma

    scale = s / math.pi

    def integrand(u: float) -> float:
        d = u - m
        return _INV_SQRT_2PI * math.exp(-0.5 * u * u) * scale / (s * s + d * d)

    bound = cfg.continuous_bound
    value, _ = integrate_adaptive(integrand, -bound, bound, cfg, points=(m, 0.0))
    return value / sigma


def continuous_integrals(
    y: np.ndarray,
    f_scores: np.ndarray,
    delta: float,
    gamma: float,
    sigma: float,
    cfg: Optional[QuadratureConfig] = None,
) -> np.ndarray:
    """continuous_integral_i for every observation, in input order."""
    cfg = cfg or QuadratureConfig()
    y = np.asarray(y, dtype=float)
    f_scores = np.asarray(f_scores, dtype=float)
    if np.any(f_scores == 0.0):
        raise DataError("zero source score violates a.s. condition")
    if cfg.method == "voigt":
        if not sigma > 0.0 or not gamma > 0.0:
            raise DomainError(f"sigma and gamma must be positive, got sigma={sigma}, gamma={gamma}")
        m, s = _substituted_location_scale(y, f_scores, delta, gamma, sigma)
        return special.voigt_profile(m, 1.0, s) / sigma
    return np.array([
        continuous_integral_i(yi, fi, delta, gamma, sigma, cfg) for yi, fi in zip(y, f_scores)
    ])


# ---------------------------------------------------------------------------
# Binary response
# ---------------------------------------------------------------------------

def binary_integral_i(
    y: int,
    f_score: float,
    delta: float,
    gamma: float,
    cfg: Optional[QuadratureConfig] = None,
) -> float:
    """P(label = y) for one observation, marginal over beta ~ Cauchy(delta, gamma)."""
    cfg = cfg or QuadratureConfig()
    if y not in (0, 1):
        raise DomainError(f"binary label must be 0 or 1, got {y!r}")
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    sign = 1.0 if y == 1 else -1.0
    if f_score == 0.0:
        return 0.5

    def integrand(t: float) -> float:
        beta = delta + gamma * math.tan(math.pi * (t - 0.5))
        return float(special.expit(sign * beta * f_score))

    value, _ = integrate_adaptive(integrand, 0.0, 1.0, cfg)
    return min(max(value, 0.0), 1.0)


def binary_integrals(
    y: np.ndarray,
    f_scores: np.ndarray,
    delta: float,
    gamma: float,
    cfg: Optional[QuadratureConfig] = None,
) -> np.ndarray:
    """binary_integral_i for every observation via one vector-valued adaptive integral.

    All observations share the subdivision; the error criterion is on the
    max-norm of the vector, which is meaningful because every entry lies in [0, 1].
    """
    cfg = cfg or QuadratureConfig()
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    y = np.asarray(y, dtype=float)
    f_scores = np.asarray(f_scores, dtype=float)
    signed = np.where(y == 1.0, 1.0, -1.0) * f_scores

    def integrand(t: float) -> np.ndarray:
        beta = delta + gamma * math.tan(math.pi * (t - 0.5))
        return special.expit(beta * signed)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err_est, info = integrate.quad_vec(
            integrand, 0.0, 1.0,
            epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
            norm="max", limit=cfg.max_subdivisions, full_output=True,
        )
    if not np.all(np.isfinite(value)):
        raise NumericalError("non-finite binary marginal likelihood")
    if not info.success:
        raise QuadratureError(
            f"vector quadrature did not converge: {info.message}", float(np.max(value)), float(err_est)
        )
    return np.clip(value, 0.0, 1.0)


def floored_log(values: np.ndarray, diagnostics: Optional[FloorDiagnostics] = None) -> np.ndarray:
    """log(max(value, TINY)); counts floor events on the diagnostics object."""
    values = np.asarray(values, dtype=float)
    below = values < TINY
    if np.any(below) and diagnostics is not None:
        diagnostics.record(int(np.count_nonzero(below)))
    return np.log(np.where(below, TINY, values))
