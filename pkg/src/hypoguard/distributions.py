"""Logit-normal distributions, Gaussian mean-family machinery, and a
sparse precision estimator.

The logit-normal family lives on a box ``[a, b]^d``: a multivariate
Gaussian in "logit space" is squashed through the elementwise logistic
function and rescaled onto the box. Because every distribution in play
shares the same box and the same squashing map, likelihood ratios reduce
to ratios of the underlying Gaussians (the transform Jacobian cancels),
which is what :class:`GaussianMeanFamily` exploits.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    DataError,
    DegenerateDataError,
    NoEliteMassError,
)

__all__ = [
    "sigmoid",
    "logit",
    "LogitNormal",
    "fit_logit_normal",
    "GaussianMeanFamily",
    "ce_projection_update",
    "graphical_lasso",
    "graphical_lasso_objective",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def sigmoid(t):
    """Elementwise logistic function 1/(1+exp(-t)), overflow-safe."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    if out.ndim == 0:
        return float(out)
    return out


def logit(t):
    """Elementwise inverse of :func:`sigmoid`; defined on the open (0, 1).

    Raises
    ------
    ValueError
        If any element lies outside the open interval (0, 1).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or np.any(t >= 1.0):
        raise ValueError("logit is defined only on the open interval (0, 1)")
    out = np.log(t) - np.log1p(-t)
    if out.ndim == 0:
        return float(out)
    return out


def _psd_factor(sigma):
    """Matrix square root L with L @ L.T = sigma; tolerates PSD-singular."""
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(sigma)
        w = np.clip(w, 0.0, None)
        return v * np.sqrt(w)


@dataclass(frozen=True)
class LogitNormal:
    """Logit-normal distribution on the box [a, b]^d.

    A draw is ``Y = (b - a) * sigmoid(Z) + a`` with ``Z ~ N(mu, sigma)``.
    ``a``/``b`` carry the units of the modeled quantity; ``mu``/``sigma``
    are dimensionless logit-space parameters.
    """

    a: np.ndarray
    b: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        d = a.shape[0]
        if b.shape != (d,) or mu.shape != (d,) or sigma.shape != (d, d):
            raise DataError("inconsistent parameter shapes for LogitNormal")
        if not np.all(b > a):
            raise DataError("LogitNormal requires b > a elementwise")
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise DataError("LogitNormal covariance must be symmetric")
        if np.linalg.eigvalsh(sigma).min() < -1e-10:
            raise DataError("LogitNormal covariance must be positive semidefinite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self):
        return self.a.shape[0]

    def sample_logit(self, rng, n):
        """Draw n logit-space vectors Z ~ N(mu, sigma); (n, d) array."""
        factor = _psd_factor(self.sigma)
        eps = rng.standard_normal((n, self.dim))
        return self.mu + eps @ factor.T

    def sample(self, rng, n):
        """Draw n observation-space vectors, strictly inside (a, b)."""
        return self.to_observation(self.sample_logit(rng, n))

    def to_observation(self, z):
        """Map logit-space points onto the box: (b-a)*sigmoid(z)+a."""
        z = np.asarray(z, dtype=float)
        return (self.b - self.a) * sigmoid(z) + self.a

    def to_logit(self, y):
        """Inverse of :meth:`to_observation`; y must be interior to (a, b)."""
        y = np.asarray(y, dtype=float)
        return logit((y - self.a) / (self.b - self.a))

    def log_density(self, y):
        """Observation-space log density at y (rows if y is a matrix).

        Gaussian logit-space density plus the log-Jacobian of the
        logistic rescaling. Requires nonsingular sigma.
        """
        y = np.asarray(y, dtype=float)
        u = (y - self.a) / (self.b - self.a)
        z = logit(u)
        dz = np.atleast_2d(z - self.mu)
        prec = np.linalg.inv(self.sigma)
        sign, logdet = np.linalg.slogdet(self.sigma)
        if sign <= 0:
            raise np.linalg.LinAlgError("singular logit-space covariance")
        quad = np.einsum("ni,ij,nj->n", dz, prec, dz)
        log_gauss = -0.5 * (self.dim * _LOG_2PI + logdet + quad)
        log_jac = np.sum(
            np.log(self.b - self.a) + np.log(np.atleast_2d(u)) + np.log1p(-np.atleast_2d(u)),
            axis=1,
        )
        out = log_gauss - log_jac
        if np.asarray(y).ndim == 1:
            return float(out[0])
        return out


def fit_logit_normal(samples, pad=0.01, support=None):
    """Fit a LogitNormal to an (n, d) sample matrix.

    The support is the per-column data range widened symmetrically by
    ``pad`` times the range (a plain min/max support would map the
    extreme datapoints to infinite logits). ``mu``/``sigma`` are the
    mean and 1/n-weighted covariance of the logit-transformed data.

    Pass ``support=(a, b)`` to fit on a known box instead of the data
    range; with the data-driven box the recovered logit-space mean is
    a statistic of *that* box, not of the generating one.
    """
    y = np.atleast_2d(np.asarray(samples, dtype=float))
    if y.shape[0] == 1 and y.shape[1] > 1 and np.asarray(samples).ndim == 1:
        y = y.T
    n, d = y.shape
    if n < 2:
        raise DataError(f"need at least 2 samples to fit, got {n}")
    lo = y.min(axis=0)
    hi = y.max(axis=0)
    span = hi - lo
    const = np.nonzero(span <= 0)[0]
    if const.size:
        raise DegenerateDataError(
            f"constant column(s) {const.tolist()}: cannot fit a bounded support"
        )
    if support is not None:
        a = np.broadcast_to(np.asarray(support[0], dtype=float), (d,)).copy()
        b = np.broadcast_to(np.asarray(support[1], dtype=float), (d,)).copy()
    else:
        a = lo - pad * span
        b = hi + pad * span
    u = (y - a) / (b - a)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise DegenerateDataError(
            "datapoints on the support boundary map to infinite logits; "
            "use pad > 0"
        )
    z = np.log(u) - np.log1p(-u)
    mu = z.mean(axis=0)
    sigma = np.atleast_2d(np.cov(z, rowvar=False, bias=True))
    return LogitNormal(a=a, b=b, mu=mu, sigma=sigma)


@dataclass(frozen=True)
class GaussianMeanFamily:
    """Gaussian family in logit space with fixed covariance, mean-searched.

    Admissible means form the Euclidean ball of ``radius`` around
    ``center``. Likelihood ratios between two members reduce to a
    difference of quadratic forms because the covariance is shared.
    """

    cov: np.ndarray
    center: np.ndarray
    radius: float
    _chol: np.ndarray = field(init=False, repr=False, compare=False)
    _prec: np.ndarray = field(init=False, repr=False, compare=False)
    _logdet: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        d = center.shape[0]
        if cov.shape != (d, d):
            raise DataError("covariance shape does not match the center")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise DataError("family covariance must be symmetric")
        if self.radius < 0:
            raise DataError("search radius must be nonnegative")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise DataError("family covariance must be positive definite") from exc
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_prec", np.linalg.inv(cov))
        object.__setattr__(self, "_logdet", 2.0 * np.sum(np.log(np.diag(chol))))

    @property
    def dim(self):
        return self.center.shape[0]

    def contains(self, theta, tol=1e-9):
        theta = np.asarray(theta, dtype=float)
        return float(np.linalg.norm(theta - self.center)) <= self.radius + tol

    def project(self, theta):
        """Euclidean projection onto the admissible ball."""
        theta = np.asarray(theta, dtype=float)
        delta = theta - self.center
        norm = float(np.linalg.norm(delta))
        if norm <= self.radius:
            return theta
        return self.center + delta * (self.radius / norm)

    def sample(self, theta, rng, n):
        """Draw n logit-space vectors from N(theta, cov); (n, d) array."""
        theta = np.asarray(theta, dtype=float)
        eps = rng.standard_normal((n, self.dim))
        return theta + eps @ self._chol.T

    def _quad(self, theta, z):
        dz = np.atleast_2d(np.asarray(z, dtype=float)) - np.asarray(theta, dtype=float)
        return np.einsum("ni,ij,nj->n", dz, self._prec, dz)

    def log_density(self, theta, z):
        """log N(z; theta, cov), per row of z."""
        out = -0.5 * (self.dim * _LOG_2PI + self._logdet + self._quad(theta, z))
        if np.asarray(z).ndim == 1:
            return float(out[0])
        return out

    def log_likelihood_ratio(self, theta0, theta, z):
        """log p_{theta0}(z) - log p_{theta}(z), per row of z.

        Valid unchanged for the induced observation-space densities:
        both members share the box and squashing map, so the Jacobian
        cancels from the ratio.
        """
        out = 0.5 * (self._quad(theta, z) - self._quad(theta0, z))
        if np.asarray(z).ndim == 1:
            return float(out[0])
        return out


def ce_projection_update(family, theta_k, weighted_stat, weight_mass, alpha):
    """One cross-entropy mean update, smoothed then ball-projected.

    The KL projection onto a fixed-covariance Gaussian family has the
    closed form ``alpha * (weighted_stat / weight_mass) + (1 - alpha) *
    theta_k`` (a convex combination of the weighted elite mean and the
    previous mean); the result is then projected onto the admissible
    ball.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if weight_mass <= 0.0:
        raise NoEliteMassError("zero elite weight mass; no update possible")
    theta_k = np.asarray(theta_k, dtype=float)
    elite_mean = np.asarray(weighted_stat, dtype=float) / weight_mass
    candidate = alpha * elite_mean + (1.0 - alpha) * theta_k
    return family.project(candidate)


def graphical_lasso_objective(S, T, lam):
    """Penalized negative log-likelihood tr(ST) - logdet(T) + lam*|T|_off."""
    sign, logdet = np.linalg.slogdet(T)
    if sign <= 0:
        return np.inf
    off_l1 = np.abs(T).sum() - np.abs(np.diag(T)).sum()
    return float(np.trace(S @ T) - logdet + lam * off_l1)


def _lasso_cd(w11, s12, lam, beta0, tol, max_iter=1000):
    """Coordinate descent for min_b 0.5 b'W11 b - b's12 + lam*|b|_1."""
    beta = beta0.copy()
    p = beta.shape[0]
    for _ in range(max_iter):
        delta = 0.0
        for k in range(p):
            r = s12[k] - w11[k] @ beta + w11[k, k] * beta[k]
            new = np.sign(r) * max(abs(r) - lam, 0.0) / w11[k, k]
            delta = max(delta, abs(new - beta[k]))
            beta[k] = new
        if delta < tol:
            break
    return beta


def graphical_lasso(S, lam, tol=1e-6, max_sweeps=500, return_objective_trace=False):
    """Sparse precision estimate: minimize tr(ST) - logdet(T) + lam*|T|_off.

    Block coordinate descent over columns of the working covariance W,
    each column solved as an l1-penalized regression (coordinate
    descent; exact solve when lam == 0). Off-diagonal entries only are
    penalized, so diag(W) stays pinned at diag(S). Converged when
    successive W iterates move less than ``tol`` in max-norm.

    Returns the precision matrix T (symmetric positive definite), or
    raises :class:`ConvergenceError` carrying the last iterate.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] != S.shape[1]:
        raise DataError("covariance matrix must be square")
    if not np.allclose(S, S.T, atol=1e-8):
        raise DataError("covariance matrix must be symmetric")
    if lam < 0:
        raise DataError("penalty must be nonnegative")
    d = S.shape[0]
    if np.any(np.diag(S) <= 0):
        raise DataError("covariance diagonal must be positive")
    if d == 1:
        T = np.array([[1.0 / S[0, 0]]])
        return (T, [graphical_lasso_objective(S, T, lam)]) if return_objective_trace else T

    W = S.copy()
    betas = np.zeros((d, d - 1))
    trace = []
    converged = False
    for _ in range(max_sweeps):
        w_old = W.copy()
        for j in range(d):
            idx = np.arange(d) != j
            w11 = W[np.ix_(idx, idx)]
            s12 = S[idx, j]
            if lam == 0.0:
                beta = np.linalg.solve(w11, s12)
            else:
                beta = _lasso_cd(w11, s12, lam, betas[j], tol=0.1 * tol)
            betas[j] = beta
            w12 = w11 @ beta
            W[idx, j] = w12
            W[j, idx] = w12
        if return_objective_trace:
            trace.append(graphical_lasso_objective(S, _recover_precision(W, betas), lam))
        if np.max(np.abs(W - w_old)) < tol:
            converged = True
            break
    T = _recover_precision(W, betas)
    if not converged:
        raise ConvergenceError(
            f"graphical lasso did not converge in {max_sweeps} sweeps",
            last_iterate=T,
        )
    if return_objective_trace:
        return T, trace
    return T


def _recover_precision(W, betas):
    d = W.shape[0]
    T = np.zeros((d, d))
    for j in range(d):
        idx = np.arange(d) != j
        beta = betas[j]
        t_jj = 1.0 / (W[j, j] - W[idx, j] @ beta)
        T[j, j] = t_jj
        T[idx, j] = -beta * t_jj
    return 0.5 * (T + T.T)
