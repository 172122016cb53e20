"""
Random walk Metropolis-Hastings with burn-in proposal adaptation, and chain
thinning to the posterior sample used for prediction.
"""
import logging
import math
from typing import Callable, Optional

import numpy as np

from .errors import DataError, NumericalError
from .schemas import CONTINUOUS_PARAM_NAMES, Chain, MhConfig
from .stats_core import Rng, make_rng

logger = logging.getLogger(__name__)

HIGH_REJECTION_RATE = 0.01


def run_rwmh(log_target: Callable[[np.ndarray], float], cfg: Optional[MhConfig] = None, rng: Optional[Rng] = None) -> Chain:
    """
    Random walk Metropolis-Hastings with independent Gaussian proposals per coordinate.

    During burn-in, at the end of every ``adapt_interval`` iterations each
    proposal sd is multiplied by exp(adapt_rate * (a - target_accept)) with a
    the acceptance rate of that window. The sds are frozen after burn-in, so
    the retained states come from a fixed kernel. The final ``keep_last``
    states are retained.

    Args:
        log_target: log density up to a constant; may expose ``dimension``,
            ``param_names`` and ``floor_events``
        cfg: schedule and initial state (truncated to the target dimension)
        rng: random stream; ``cfg.seed`` is used only when no stream is passed

    Returns:
        Chain
    """
    cfg = cfg or MhConfig()
    if rng is None:
        if cfg.seed is None:
            raise ValueError("run_rwmh needs an rng or MhConfig.seed")
        rng = make_rng(cfg.seed)

    dim = int(getattr(log_target, "dimension", len(cfg.init)))
    if dim > len(cfg.init):
        raise ValueError(f"initial state has {len(cfg.init)} coordinates, target needs {dim}")
    param_names = tuple(getattr(log_target, "param_names", CONTINUOUS_PARAM_NAMES[:dim]))

    x = np.asarray(cfg.init[:dim], dtype=float)
    lp = float(log_target(x))
    if not math.isfinite(lp):
        raise NumericalError(f"log target is not finite at the initial state {x.tolist()}: {lp}")

    n_iter = cfg.total_iters
    noise = rng.standard_normal((n_iter, dim))
    log_u = np.log(rng.random(n_iter))
    sds = np.full(dim, cfg.init_proposal_sd)

    keep_from = n_iter - cfg.keep_last
    samples = np.empty((cfg.keep_last, dim))
    log_target_values = np.empty(cfg.keep_last)
    window_accepts = 0
    post_burn_accepts = 0
    progress_every = max(1, n_iter // 10)

    logger.info(
        f"Starting RWMH: {n_iter} iterations, burn-in {cfg.burn_in}, keeping the last {cfg.keep_last}, dimension {dim}"
    )
    for t in range(n_iter):
        proposal = x + sds * noise[t]
        lp_prop = float(log_target(proposal))
        accepted = math.isfinite(lp_prop) and log_u[t] < lp_prop - lp
        if accepted:
            x, lp = proposal, lp_prop

        iteration = t + 1
        if iteration <= cfg.burn_in:
            window_accepts += accepted
            if iteration % cfg.adapt_interval == 0:
                rate = window_accepts / cfg.adapt_interval
                sds = sds * math.exp(cfg.adapt_rate * (rate - cfg.target_accept))
                window_accepts = 0
                logger.debug(f"iteration {iteration}: window acceptance {rate:.3f}, proposal sds {sds}")
        else:
            post_burn_accepts += accepted

        if t >= keep_from:
            samples[t - keep_from] = x
            log_target_values[t - keep_from] = lp

        if iteration % progress_every == 0:
            logger.info(f"RWMH progress {iteration}/{n_iter}")

    n_post_burn = n_iter - cfg.burn_in
    accept_rate = post_burn_accepts / n_post_burn
    high_rejection = accept_rate < HIGH_REJECTION_RATE
    if high_rejection:
        logger.warning(
            f"Acceptance rate after adaptation is {accept_rate:.4f}; more than 99% of proposals were rejected"
        )
    floor_events = int(getattr(log_target, "floor_events", 0))
    if floor_events:
        logger.warning(f"{floor_events} likelihood term(s) underflowed and were floored during sampling")
    logger.info(f"RWMH done: acceptance after burn-in {accept_rate:.3f}, proposal sds {np.round(sds, 4).tolist()}")

    return Chain(
        samples=samples,
        log_target=log_target_values,
        param_names=param_names,
        accept_rate=accept_rate,
        proposal_sds=sds,
        floor_events=floor_events,
        total_iters=n_iter,
        burn_in=cfg.burn_in,
        high_rejection=high_rejection,
    )


def thin_indices(keep_last: int, n_post: int) -> np.ndarray:
    """
    0-based positions of the thinned states.

    With stride = keep_last // n_post the 1-based positions are
    stride, 2 * stride, ..., n_post * stride.
    """
    if n_post < 1:
        raise DataError(f"n_post must be at least 1, got {n_post}")
    if n_post > keep_last:
        raise DataError(f"n_post ({n_post}) exceeds the number of retained states ({keep_last})")
    stride = keep_last // n_post
    return np.arange(1, n_post + 1) * stride - 1


def thin_chain(chain: Chain, n_post: int) -> np.ndarray:
    """n_post equally spaced retained states, in sampling coordinates."""
    return chain.samples[thin_indices(chain.keep_last, n_post)].copy()


def to_natural_scale(states: np.ndarray) -> np.ndarray:
    """(delta, log gamma[, log sigma^2]) -> (delta, gamma[, sigma])."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    out = states.copy()
    out[:, 1] = np.exp(states[:, 1])
    if states.shape[1] > 2:
        out[:, 2] = np.exp(0.5 * states[:, 2])
    return out


def posterior_sample_from_chain(chain: Chain, n_post: int) -> np.ndarray:
    """Thinned posterior sample as (delta, gamma[, sigma]) rows."""
    return to_natural_scale(thin_chain(chain, n_post))
