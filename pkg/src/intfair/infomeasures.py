"""Entropies, total correlations and the log-ratio variables L and L_y.

For a partition q of the attributes,

    L   = log p_A(A) / prod_t p_{A_t}(A_t)               A ~ p_A
    L_y = log p_{A|Y}(A|Y) / prod_t p_{A_t|Y}(A_t|Y)     (A, Y) ~ p_{A,Y}

so that E[L] = C(A^(q)) and E[L_y] = C(A^(q) | Y).  Everything is in nats and
cells of zero probability are dropped (0 log 0 = 0).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterError
from .pmf_core import JointPMF, Partition, block_sum

WEIGHT_ATOL = 1e-9


def _check_weights(weights):
    w = np.asarray(weights, dtype=np.float64).ravel()
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ParameterError("weights must be finite and non-negative")
    if abs(math.fsum(w) - 1.0) > WEIGHT_ATOL:
        raise ParameterError("weights sum to %.12g, not 1" % math.fsum(w))
    return w


def _h(p):
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return -math.fsum(p * np.log(p))


def entropy(weights) -> float:
    """Shannon entropy in nats."""
    return _h(_check_weights(weights))


def plugin_q(weights) -> float:
    """Q(P) = sum p log^2 p, with 0 log^2 0 = 0."""
    p = _check_weights(weights)
    p = p[p > 0]
    return math.fsum(p * np.log(p) ** 2)


def _q(pmf, q):
    q = Partition.singletons(pmf.d) if q is None else q
    return q.check(pmf.d)


def total_correlation(pmf: JointPMF, q: Partition = None) -> float:
    q = _q(pmf, q)
    p_a = pmf.p_a
    tc = math.fsum([_h(block_sum(pmf.probs, b).sum(axis=-1)) for b in q]) - _h(p_a)
    return max(tc, 0.0)


def conditional_total_correlation(pmf: JointPMF, q: Partition = None) -> float:
    # H(A_t | Y) = H(A_t, Y) - H(Y)
    q = _q(pmf, q)
    h_y = _h(pmf.p_y)
    tc = math.fsum([_h(block_sum(pmf.probs, b)) - h_y for b in q]) - (_h(pmf.probs) - h_y)
    return max(tc, 0.0)


def mutual_information(pmf: JointPMF, block=None) -> float:
    """I(A_block, Y); the full attribute vector when ``block`` is None."""
    joint = pmf.probs if block is None else block_sum(pmf.probs, tuple(sorted(block)))
    return _h(joint.sum(axis=-1)) + _h(pmf.p_y) - _h(joint)


def _broadcast(arr, d, block, with_label):
    """Reshape a block marginal so it broadcasts against the full table."""
    cards = arr.shape[: len(block)]
    shape = [1] * d
    for k, c in zip(block, cards):
        shape[k] = c
    if with_label:
        shape.append(arr.shape[-1])
    return arr.reshape(shape)


def log_ratio_law(pmf: JointPMF, q: Partition = None, conditional=False):
    """Support points and weights of L (or L_y when ``conditional``).

    Returns ``(values, weights)`` restricted to cells of positive mass.
    """
    q = _q(pmf, q)
    d = pmf.d
    if conditional:
        p_y = pmf.p_y
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(p_y > 0, pmf.probs / p_y, 0.0)
        log_prod = np.zeros(pmf.probs.shape)
        for b in q:
            m = block_sum(cond, b)
            with np.errstate(divide="ignore"):
                log_prod = log_prod + _broadcast(np.log(m), d, b, True)
        w = pmf.probs
        top = cond
    else:
        p_a = pmf.p_a
        log_prod = np.zeros(p_a.shape)
        for b in q:
            m = block_sum(pmf.probs, b).sum(axis=-1)
            with np.errstate(divide="ignore"):
                log_prod = log_prod + _broadcast(np.log(m), d, b, False)
        w = p_a
        top = p_a
    keep = w > 0
    values = np.log(top[keep]) - log_prod[keep]
    return values, w[keep]


def _moments(values, weights):
    mu = math.fsum(values * weights)
    var = math.fsum(weights * (values - mu) ** 2)
    return mu, math.sqrt(max(var, 0.0))


def s_star(sigma, sigma_y):
    return (sigma ** (2 / 3) + sigma_y ** (2 / 3)) ** 1.5


@dataclass(frozen=True)
class MomentSummary:
    """Moments of L and L_y for one pmf and partition.

    ``gamma`` is ``mu - mu_y``; ``gamma_mi`` is the same quantity computed
    from mutual informations and serves as a numerical cross-check.
    """

    mu: float
    sigma: float
    mu_y: float
    sigma_y: float
    s_star: float
    gamma: float
    gamma_mi: float
    partition: tuple = ()

    def to_json(self):
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "mu_y": self.mu_y,
            "sigma_y": self.sigma_y,
            "s_star": self.s_star,
            "gamma": self.gamma,
            "gamma_mi": self.gamma_mi,
            "partition": [list(b) for b in self.partition],
        }


def moment_summary(pmf: JointPMF, q: Partition = None) -> MomentSummary:
    q = _q(pmf, q)
    mu, sigma = _moments(*log_ratio_law(pmf, q, conditional=False))
    mu_y, sigma_y = _moments(*log_ratio_law(pmf, q, conditional=True))
    # KL divergences: clip round-off below zero
    mu, mu_y = max(mu, 0.0), max(mu_y, 0.0)
    gamma_mi = math.fsum([mutual_information(pmf, b) for b in q]) - mutual_information(pmf)
    return MomentSummary(
        mu=mu,
        sigma=sigma,
        mu_y=mu_y,
        sigma_y=sigma_y,
        s_star=s_star(sigma, sigma_y),
        gamma=mu - mu_y,
        gamma_mi=gamma_mi,
        partition=q.blocks,
    )


def cumulant(pmf: JointPMF, q: Partition, t, conditional=False):
    """kappa(t) = log E[exp(t L)] (or of L_y); vectorised over ``t``."""
    values, weights = log_ratio_law(pmf, q, conditional)
    return cgf(values, weights, t)


def cgf(values, weights, t):
    t = np.asarray(t, dtype=np.float64)
    lw = np.log(weights)
    # renormalise so that kappa(0) = 0 holds exactly, not just to rounding
    out = logsumexp(lw[None, :] + t.reshape(-1, 1) * values[None, :], axis=1) - logsumexp(lw)
    out[t.reshape(-1) == 0] = 0.0
    return out.reshape(t.shape) if t.ndim else float(out[0])


def renyi_divergence(p, r, order):
    """D_order(P || R) for discrete P, R; cells with p = 0 are skipped."""
    p = np.asarray(p, dtype=np.float64).ravel()
    r = np.asarray(r, dtype=np.float64).ravel()
    keep = p > 0
    p, r = p[keep], r[keep]
    if order == 1:
        return math.fsum(p * (np.log(p) - np.log(r)))
    return float(logsumexp(order * np.log(p) - (order - 1) * np.log(r))) / (order - 1)


def _product_of_marginals(arr, q):
    d = arr.ndim
    out = np.ones(arr.shape)
    for b in q:
        other = tuple(k for k in range(d) if k not in b)
        out = out * (arr.sum(axis=other, keepdims=True) if other else arr)
    return out


def cumulant_renyi(pmf: JointPMF, q: Partition, t: float, conditional=False) -> float:
    """kappa(t) through Renyi divergences, kappa(t) = t D_{t+1}(p || prod of marginals).

    The conditional version averages exp(t D_{t+1}) over labels.  Independent
    of ``cumulant`` and used to cross-check it.
    """
    q = _q(pmf, q)
    if not conditional:
        p_a = pmf.p_a
        return t * renyi_divergence(p_a, _product_of_marginals(p_a, q), t + 1)
    p_y = pmf.p_y
    terms = []
    for y in range(pmf.schema.label_card):
        if p_y[y] <= 0:
            continue
        cond = pmf.probs[..., y] / p_y[y]
        terms.append(math.log(p_y[y]) + t * renyi_divergence(cond, _product_of_marginals(cond, q), t + 1))
    return float(logsumexp(terms))
