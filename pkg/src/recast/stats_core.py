"""
Probability primitives: Gaussian, Cauchy and log-normal densities, CDFs,
quantiles and samplers, the Gaussian-ratio Cauchy map, and the seeded
random stream helpers every stochastic operation is threaded through.

Distribution functions are pure. A ``numpy.random.Generator`` is the random
state; one generator per thread of execution, children via ``split_rng``.
"""
import hashlib
import logging
import math
from typing import Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special, stats

from .errors import DomainError
from .schemas import CauchyParams, GaussianParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray, Sequence[float]]
Rng = np.random.Generator

# smallest positive normal double; floor for log-space consumers
TINY = float(np.finfo(float).tiny)

expit = special.expit


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def make_rng(seed: Optional[Union[int, np.random.SeedSequence]] = None) -> Rng:
    """PCG64 generator; identical seed gives an identical stream."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.default_rng(seed)


def split_rng(rng: Rng, n: int) -> List[Rng]:
    """Spawn n independent child generators (SeedSequence stream splitting).

    Children depend only on the parent's seed sequence and how many children
    were spawned before, never on how many numbers the parent has drawn.
    """
    return rng.spawn(n)


def derive_seed_sequence(master_seed: int, *key: Hashable) -> np.random.SeedSequence:
    """Seed sequence determined by (master_seed, key) alone.

    The key is hashed with SHA-256 so the mapping is stable across processes
    and Python versions (unlike ``hash``).
    """
    digest = hashlib.sha256(repr(tuple(key)).encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence([int(master_seed), *words])


def derive_rng(master_seed: int, *key: Hashable) -> Rng:
    return make_rng(derive_seed_sequence(master_seed, *key))


# ---------------------------------------------------------------------------
# Gaussian ratio -> Cauchy
# ---------------------------------------------------------------------------

def cauchy_ratio_params(a: ArrayLike, b: ArrayLike) -> CauchyParams:
    """Cauchy law of (x^T a) / (x^T b) for x ~ N(0, I).

    delta = a^T b / |b|^2 and gamma = sqrt(|b|^2 |a|^2 - (a^T b)^2) / |b|^2.
    The radicand is clamped at 0: near-collinear vectors can make it slightly
    negative in floating point, and 0 is the correct degenerate limit.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape or a.size < 1:
        raise DomainError(f"vectors must have equal nonzero length, got {a.size} and {b.size}")
    bb = float(b @ b)
    if bb == 0.0 or not math.isfinite(bb):
        raise DomainError("degenerate denominator vector")
    ab = float(a @ b)
    radicand = max(bb * float(a @ a) - ab * ab, 0.0)
    return CauchyParams(delta=ab / bb, gamma=math.sqrt(radicand) / bb)


# ---------------------------------------------------------------------------
# Cauchy
# ---------------------------------------------------------------------------

def _require_scale(params: CauchyParams) -> None:
    if params.gamma <= 0.0:
        raise DomainError(f"Cauchy scale must be positive, got gamma={params.gamma}")


def cauchy_pdf(params: CauchyParams, x: ArrayLike) -> ArrayLike:
    _require_scale(params)
    return stats.cauchy.pdf(x, loc=params.delta, scale=params.gamma)


def cauchy_logpdf(params: CauchyParams, x: ArrayLike) -> ArrayLike:
    _require_scale(params)
    return stats.cauchy.logpdf(x, loc=params.delta, scale=params.gamma)


def cauchy_cdf(params: CauchyParams, x: ArrayLike) -> ArrayLike:
    """1/2 + arctan((x - delta) / gamma) / pi."""
    _require_scale(params)
    return stats.cauchy.cdf(x, loc=params.delta, scale=params.gamma)


def cauchy_quantile(params: CauchyParams, p: ArrayLike) -> ArrayLike:
    _require_scale(params)
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise DomainError("Cauchy quantile requires p in (0, 1)")
    return stats.cauchy.ppf(p, loc=params.delta, scale=params.gamma)


def standard_cauchy_sample(rng: Rng, size: Union[int, Tuple[int, ...], None] = None) -> ArrayLike:
    """Inverse-CDF draws: tan(pi (U - 1/2)); exactly one uniform per draw."""
    u = rng.random(size)
    return np.tan(np.pi * (u - 0.5))


def cauchy_sample(rng: Rng, params: CauchyParams, size: Union[int, Tuple[int, ...], None] = None) -> ArrayLike:
    _require_scale(params)
    return params.delta + params.gamma * standard_cauchy_sample(rng, size)


# ---------------------------------------------------------------------------
# Gaussian
# ---------------------------------------------------------------------------

def gaussian_pdf(params: GaussianParams, x: ArrayLike) -> ArrayLike:
    return stats.norm.pdf(x, loc=params.mean, scale=params.sd)


def gaussian_logpdf(params: GaussianParams, x: ArrayLike) -> ArrayLike:
    return stats.norm.logpdf(x, loc=params.mean, scale=params.sd)


def gaussian_cdf(params: GaussianParams, x: ArrayLike) -> ArrayLike:
    return stats.norm.cdf(x, loc=params.mean, scale=params.sd)


def gaussian_quantile(params: GaussianParams, p: ArrayLike) -> ArrayLike:
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise DomainError("Gaussian quantile requires p in (0, 1)")
    return stats.norm.ppf(p, loc=params.mean, scale=params.sd)


def gaussian_sample(rng: Rng, params: GaussianParams, size: Union[int, Tuple[int, ...], None] = None) -> ArrayLike:
    return rng.normal(params.mean, params.sd, size)


# ---------------------------------------------------------------------------
# Log-normal
# ---------------------------------------------------------------------------

def lognormal_logpdf(params: GaussianParams, x: ArrayLike) -> ArrayLike:
    """Log density of exp(Z), Z ~ N(mean, sd^2); -inf for x <= 0."""
    x_arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(x_arr > 0.0, x_arr, 1.0)
        out = stats.norm.logpdf(np.log(safe), loc=params.mean, scale=params.sd) - np.log(safe)
    out = np.where(x_arr > 0.0, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def lognormal_pdf(params: GaussianParams, x: ArrayLike) -> ArrayLike:
    """gaussian_pdf(log x) / x for x > 0, else 0."""
    out = np.exp(lognormal_logpdf(params, x))
    return float(out) if np.ndim(out) == 0 else out


def lognormal_sample(rng: Rng, params: GaussianParams, size: Union[int, Tuple[int, ...], None] = None) -> ArrayLike:
    return np.exp(gaussian_sample(rng, params, size))
