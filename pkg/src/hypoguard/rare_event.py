"""Rare-event probability estimators: naive Monte Carlo and
cross-entropy adaptive importance sampling.

Both estimators target ``p = P0(f(X) <= gamma)``. Everything operates
in logit space through a :class:`~hypoguard.distributions.GaussianMeanFamily`
whose center is the base mean: P0 itself is the member at ``theta =
center``, so naive MC is the identity-sampler special case and all
likelihood ratios are ratios of fixed-covariance Gaussians (the
observation-space Jacobian cancels).

``risk_fn(z, rng)`` maps an (n, d) batch of logit-space draws to an
(n,) array of risks; it receives the estimator's random stream so that
any auxiliary randomness (e.g. per-rollout sensor-noise seeds) stays
reproducible.

Cross-entropy training follows the multilevel scheme: per iteration,
draw a batch from the current sampler, relax the level to the elite
quantile capped at the target (levels approach gamma from above, never
passing it), take the self-normalized likelihood-ratio-weighted elite
mean, smooth it into the previous mean, and project onto the search
ball. The returned sampler is the iterate whose batch had the lowest
elite quantile.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import ce_projection_update
from .errors import TrainingFailedError

__all__ = [
    "LOG_RATIO_CLAMP",
    "Estimate",
    "CEIteration",
    "CEState",
    "mc_estimate",
    "cross_entropy_train",
    "is_estimate",
    "event_count_comparison",
]

logger = logging.getLogger(__name__)

# Per-sample log likelihood ratios are clamped to +-this before
# exponentiation; clamp events are counted and reported.
LOG_RATIO_CLAMP = 50.0


@dataclass(frozen=True)
class Estimate:
    """A probability estimate with its sampling diagnostics."""

    p_hat: float
    std_err: float
    events: int
    n: int
    method: str                 # "MC" or "CE-IS"
    clamped_ratios: int = 0
    ess: float = float("nan")   # (sum w)^2 / sum w^2

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("estimate needs at least one sample")
        if self.events > self.n or self.events < 0:
            raise ValueError("event count must lie in [0, n]")
        if self.std_err < 0:
            raise ValueError("standard error must be nonnegative")

    def to_dict(self):
        return {
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "events": self.events,
            "n": self.n,
            "method": self.method,
            "clamped_ratios": self.clamped_ratios,
            "ess": self.ess,
        }


@dataclass(frozen=True)
class CEIteration:
    """History row: the sampler used at iteration k and what it saw."""

    theta: np.ndarray     # mean the batch was drawn from
    gamma_k: float        # relaxed level, capped at the target from above
    quantile: float       # raw elite quantile of the batch risks
    elite_count: int
    weight_mass: float
    clamped: int
    stalled: bool


@dataclass(frozen=True)
class CEState:
    """Final iterate plus the full per-iteration history."""

    theta_k: np.ndarray
    gamma_k: float
    iteration: int
    history: list = field(default_factory=list)

    @property
    def best_iteration(self):
        """Index of the iteration with the lowest quantile (ties: earliest)."""
        return int(np.argmin([h.quantile for h in self.history]))

    def summary(self):
        return [
            {
                "k": k,
                "gamma_k": h.gamma_k,
                "quantile": h.quantile,
                "elite_count": h.elite_count,
                "weight_mass": h.weight_mass,
                "clamped": h.clamped,
                "stalled": h.stalled,
            }
            for k, h in enumerate(self.history)
        ]


def _lower_quantile(values, rho):
    """Lower empirical rho-quantile: order statistic ceil(rho*N)."""
    n = values.shape[0]
    k = max(int(math.ceil(rho * n)), 1) - 1
    return float(np.partition(values, k)[k])


def mc_estimate(family, risk_fn, gamma, n, rng, return_summands=False):
    """Naive Monte Carlo estimate of P0(f <= gamma) from n base draws.

    ``return_summands=True`` also returns the per-sample indicator
    array (the estimator's summands), e.g. for bootstrap resampling.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    z = family.sample(family.center, rng, n)
    risks = np.asarray(risk_fn(z, rng))
    summands = (risks <= gamma).astype(float)
    events = int(summands.sum())
    p_hat = events / n
    std_err = math.sqrt(p_hat * (1.0 - p_hat) / n)
    est = Estimate(p_hat=p_hat, std_err=std_err, events=events, n=n,
                   method="MC", clamped_ratios=0, ess=float(n))
    return (est, summands) if return_summands else est


def _broadcast(value, k, name):
    if np.isscalar(value):
        return [value] * k
    seq = list(value)
    if len(seq) != k:
        raise ValueError(f"{name} must be a scalar or length-{k} sequence")
    return seq


def cross_entropy_train(family, risk_fn, gamma, *, rho, alphas, batch_sizes,
                        iterations, rng, normalize_weights=True):
    """Multilevel cross-entropy search for a low-variance sampler mean.

    Returns (theta_hat, CEState). theta_hat is the iterate whose batch
    achieved the lowest elite quantile of the risk (earliest such
    iteration on ties). Iterations whose elite weight mass vanishes
    keep the current iterate (stall) rather than aborting; if every
    iteration stalls, raises :class:`TrainingFailedError`.

    ``normalize_weights=False`` divides the weighted elite statistic by
    the batch size instead of the elite weight mass (the unnormalized
    mixture-projection form); the self-normalized default is standard
    cross-entropy practice.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    if iterations < 1:
        raise ValueError("need at least one iteration")
    alphas = _broadcast(alphas, iterations, "alphas")
    batch_sizes = _broadcast(batch_sizes, iterations, "batch_sizes")

    theta = np.array(family.center, dtype=float)
    history = []
    stalls = 0
    for k in range(iterations):
        n_k = int(batch_sizes[k])
        z = family.sample(theta, rng, n_k)
        risks = np.asarray(risk_fn(z, rng))
        quantile = _lower_quantile(risks, rho)
        # Levels relax toward the target from above and never pass it.
        gamma_k = max(gamma, quantile)
        elite = risks <= gamma_k
        elite_count = int(np.sum(elite))

        log_w = np.atleast_1d(
            family.log_likelihood_ratio(family.center, theta, z[elite]))
        clamped = int(np.sum(np.abs(log_w) > LOG_RATIO_CLAMP))
        w = np.exp(np.clip(log_w, -LOG_RATIO_CLAMP, LOG_RATIO_CLAMP))
        mass = float(np.sum(w)) if normalize_weights else float(n_k)

        stalled = elite_count == 0 or mass <= 0.0
        if stalled:
            stalls += 1
            logger.warning("CE iteration %d stalled (elite=%d, mass=%g)",
                           k, elite_count, mass)
        else:
            weighted_stat = w @ z[elite]
            theta_next = ce_projection_update(family, theta, weighted_stat,
                                              mass, alphas[k])
        history.append(CEIteration(
            theta=theta.copy(), gamma_k=gamma_k, quantile=quantile,
            elite_count=elite_count, weight_mass=mass, clamped=clamped,
            stalled=stalled))
        if not stalled:
            theta = theta_next

    if stalls == iterations:
        raise TrainingFailedError(
            f"all {iterations} cross-entropy iterations stalled")

    state = CEState(theta_k=theta, gamma_k=history[-1].gamma_k,
                    iteration=iterations, history=history)
    theta_hat = history[state.best_iteration].theta.copy()
    return theta_hat, state


def is_estimate(family, theta_hat, risk_fn, gamma, n, rng, return_summands=False):
    """Importance-sampling estimate of P0(f <= gamma) from P_theta draws.

    p_hat averages w_i * 1{f <= gamma} with w_i = p0(z_i)/p_theta(z_i);
    std_err is the plain sample standard deviation of those summands
    over sqrt(n), keeping the estimator exactly unbiased.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    theta_hat = np.asarray(theta_hat, dtype=float)
    if not family.contains(theta_hat):
        raise ValueError("theta_hat lies outside the admissible ball")
    z = family.sample(theta_hat, rng, n)
    risks = np.asarray(risk_fn(z, rng))
    log_w = np.atleast_1d(family.log_likelihood_ratio(family.center, theta_hat, z))
    clamped = int(np.sum(np.abs(log_w) > LOG_RATIO_CLAMP))
    w = np.exp(np.clip(log_w, -LOG_RATIO_CLAMP, LOG_RATIO_CLAMP))
    indicator = risks <= gamma
    summands = w * indicator
    p_hat = float(np.mean(summands))
    std_err = float(np.std(summands, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    ess = float(np.sum(w) ** 2 / np.sum(w ** 2))
    est = Estimate(p_hat=p_hat, std_err=std_err, events=int(np.sum(indicator)),
                   n=n, method="CE-IS", clamped_ratios=clamped, ess=ess)
    return (est, summands) if return_summands else est


def event_count_comparison(family, theta_hat, risk_fn, gamma, n, rng):
    """Count events among n draws from P0 versus n draws from P_theta_hat."""
    z0 = family.sample(family.center, rng, n)
    mc_events = int(np.sum(np.asarray(risk_fn(z0, rng)) <= gamma))
    z1 = family.sample(np.asarray(theta_hat, dtype=float), rng, n)
    ce_events = int(np.sum(np.asarray(risk_fn(z1, rng)) <= gamma))
    return {
        "mc_events": mc_events,
        "ce_events": ce_events,
        "ratio": ce_events / max(mc_events, 1),
    }
