"""Gibbs sampler for the mass-nonlocal factor model.

One sweep updates, in order: loadings, local shrinkage, global shrinkage,
spike/slab indicators (with the slab score integrated out), slab scores by
random-walk Metropolis-Hastings, slab weights and noise variances.

The indicator update runs before the score update. ``z_ih`` is drawn with
``eta_ih`` marginalised; when a cell moves from spike to slab its score is
drawn exactly from the slab conditional so the (z, eta) block stays exact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import distributions as dist
from .model import Hyperparams, ModelState, PosteriorDraws, check_data, init_state, log_likelihood

logger = logging.getLogger(__name__)


class SamplerError(FloatingPointError):
    """A conditional update produced a non-finite quantity."""


@dataclass
class SweepDiagnostics:
    mh_accept_rate: float
    column_accept: np.ndarray
    active_counts: np.ndarray
    loglik: float


def residuals(state: ModelState, Y) -> np.ndarray:
    return Y - state.eta @ state.lam.T


# ---------------------------------------------------------------------------
# loadings and MGPS shrinkage
# ---------------------------------------------------------------------------

def update_loadings(state: ModelState, Y, hp: Hyperparams, rng) -> np.ndarray:
    """Row-wise conjugate draw of Lambda.

    Row j has precision ``diag(phi_j * tau) + eta^T eta / sigma2_j`` and
    linear term ``eta^T y^(j) / sigma2_j``.
    """
    eta = state.eta
    prec_noise = 1.0 / state.sigma2
    gram = eta.T @ eta
    precision = prec_noise[:, None, None] * gram[None, :, :]
    diag = np.arange(state.k)
    precision[:, diag, diag] += state.phi * state.tau
    linear = (Y.T @ eta) * prec_noise[:, None]
    bad = ~np.isfinite(precision).all(axis=(1, 2))
    if bad.any():
        raise SamplerError(f"update_loadings: non-finite precision in row j={int(np.argmax(bad))}")
    try:
        lam, _ = dist.mvnormal_from_precision(precision, linear, rng, label="update_loadings")
    except dist.PrecisionError:
        for j in range(state.p):
            try:
                np.linalg.cholesky(precision[j])
            except np.linalg.LinAlgError:
                raise dist.PrecisionError(
                    f"update_loadings: precision of row j={j} is not positive definite") from None
        raise
    state.lam = lam
    return lam


def update_local_shrinkage(state: ModelState, hp: Hyperparams, rng) -> np.ndarray:
    """``phi_jh ~ Ga((nu + 1)/2, (nu + tau_h lam_jh^2)/2)``."""
    rate = 0.5 * (hp.nu + state.tau * state.lam**2)
    state.phi = dist.gamma_sample(0.5 * (hp.nu + 1.0), rate, rng)
    return state.phi


def update_global_shrinkage(state: ModelState, hp: Hyperparams, rng) -> np.ndarray:
    """Sequential draw of each ``delta_h``; ``tau`` follows as the running product.

    The rate sums over columns ``l >= h``, the only columns whose ``tau_l``
    contains ``delta_h``.
    """
    p, k = state.lam.shape
    col = np.sum(state.phi * state.lam**2, axis=0)
    delta = state.delta
    for h in range(k):
        tau_excl = np.cumprod(delta)[h:] / delta[h]
        rate = 1.0 + 0.5 * np.sum(tau_excl * col[h:])
        shape = (hp.a1 if h == 0 else hp.a2) + 0.5 * p * (k - h)
        delta[h] = dist.gamma_sample(shape, rate, rng)
    return delta


# ---------------------------------------------------------------------------
# scores and indicators
# ---------------------------------------------------------------------------

def _column_terms(state: ModelState, partial_resid, h):
    """Precision ``H`` and linear terms ``b_i`` of score column h.

    ``partial_resid`` is ``Y - Lambda_(-h) eta_(-h)``; the slab conditional is
    ``pi(eta | c, d)`` with ``c = H/2`` and ``d = b/2``.
    """
    w = state.lam[:, h] / state.sigma2
    H = 1.0 / state.psi[h] + state.lam[:, h] @ w
    b = partial_resid @ w
    return H, b


def log_slab_ratio(H, b, psi):
    """Log of T, the slab marginal likelihood over the spike likelihood.

    Integrating ``pMOM(eta | psi) N(y; r + lam eta, Sigma) / N(y; r, Sigma)``
    over eta by completing the square gives, with ``M = b / H``::

        T = psi^(-3/2) H^(-1/2) (1/H + M^2) exp(H M^2 / 2)

    The printed constant ``K = 2 pi psi^(-3/2) exp(H M^2 / 2)`` in the source
    overstates T by (2 pi)^2; the version here matches quadrature.
    """
    M = b / H
    return -1.5 * np.log(psi) - 0.5 * np.log(H) + np.log(1.0 / H + M * M) + 0.5 * H * M * M


def update_z(state: ModelState, Y, hp: Hyperparams, rng, resid=None) -> np.ndarray:
    """Collapsed draw of every indicator, column by column.

    ``Pr(z_ih = 1 | -) = theta_h T / (1 - theta_h + theta_h T)``. Cells that
    flip to the spike get ``eta = 0.0``; cells that flip to the slab get an
    exact draw from ``pi(eta | c, d)``. ``resid`` (full residual matrix) is
    updated in place when given.
    """
    if resid is None:
        resid = residuals(state, Y)
    with np.errstate(divide="ignore"):
        log_odds_prior = np.log(state.theta) - np.log1p(-state.theta)
    for h in range(state.k):
        lam_h = state.lam[:, h]
        old = state.eta[:, h].copy()
        partial = resid + np.outer(old, lam_h)
        H, b = _column_terms(state, partial, h)
        log_t = log_slab_ratio(H, b, state.psi[h])
        if not np.all(np.isfinite(log_t)):
            i = int(np.argmax(~np.isfinite(log_t)))
            raise SamplerError(f"update_z: non-finite T at (i={i}, h={h}); H={H}, M={b[i] / H}")
        with np.errstate(invalid="ignore"):
            p1 = expit(log_odds_prior[h] + log_t)
        z_new = (rng.random(state.n) < p1).astype(np.int8)
        born = (z_new == 1) & (state.z[:, h] == 0)
        eta_h = np.where(z_new == 1, old, 0.0)
        if born.any():
            eta_h[born] = dist.slab_conditional_sample(0.5 * H, 0.5 * b[born], rng)
        state.z[:, h] = z_new
        state.eta[:, h] = eta_h
        resid[:] = partial - np.outer(eta_h, lam_h)
    return state.z


def mh_slab_scores(x, c, d, proposal_sd, n_iter, rng):
    """Random-walk Metropolis on ``pi(eta | c, d)`` for a vector of cells.

    Returns the final states and the number of accepted moves.
    """
    x = np.array(x, dtype=float)
    log_cur = dist.slab_conditional_log_density(x, c, d)
    accepted = 0
    for _ in range(n_iter):
        prop = x + proposal_sd * rng.standard_normal(x.shape)
        log_prop = dist.slab_conditional_log_density(prop, c, d)
        with np.errstate(invalid="ignore"):
            ok = np.log(rng.random(x.shape)) < log_prop - log_cur
        x = np.where(ok, prop, x)
        log_cur = np.where(ok, log_prop, log_cur)
        accepted += int(ok.sum())
    return x, accepted


def update_scores(state: ModelState, Y, hp: Hyperparams, rng, proposal_sd=None, resid=None):
    """Advance every slab score by ``hp.mh.inner_iters`` Metropolis-Hastings steps.

    Spike cells are untouched. Returns per-column acceptance rates
    (``nan`` for columns without slab cells).
    """
    if resid is None:
        resid = residuals(state, Y)
    if proposal_sd is None:
        proposal_sd = np.full(state.k, hp.mh.proposal_sd)
    n_iter = hp.mh.inner_iters
    rates = np.full(state.k, np.nan)
    for h in range(state.k):
        active = state.z[:, h] == 1
        if not active.any():
            continue
        lam_h = state.lam[:, h]
        old = state.eta[active, h]
        partial = resid[active] + np.outer(old, lam_h)
        H, b = _column_terms(state, partial, h)
        new, acc = mh_slab_scores(old, 0.5 * H, 0.5 * b, proposal_sd[h], n_iter, rng)
        state.eta[active, h] = new
        resid[active] = partial - np.outer(new, lam_h)
        rates[h] = acc / (n_iter * old.size)
    return rates


def update_theta(state: ModelState, hp: Hyperparams, rng) -> np.ndarray:
    """``theta_h ~ Beta(sum_i z_ih + a_theta, n - sum_i z_ih + b_theta)``."""
    active = state.z.sum(axis=0)
    state.theta = dist.beta_sample(active + hp.a_theta, state.n - active + hp.b_theta, rng)
    return state.theta


def update_noise(state: ModelState, Y, hp: Hyperparams, rng, resid=None) -> np.ndarray:
    """``1/sigma2_j ~ Ga(a_sigma + n/2, b_sigma + sum_i resid_ij^2 / 2)``."""
    if resid is None:
        resid = residuals(state, Y)
    rate = hp.b_sigma + 0.5 * np.sum(resid**2, axis=0)
    state.sigma2 = 1.0 / dist.gamma_sample(hp.a_sigma + 0.5 * state.n, rate, rng)
    return state.sigma2


def update_shared(state: ModelState, Y, hp: Hyperparams, rng):
    """Loadings and MGPS steps, common to both samplers."""
    update_loadings(state, Y, hp, rng)
    update_local_shrinkage(state, hp, rng)
    update_global_shrinkage(state, hp, rng)


def sweep(state: ModelState, Y, hp: Hyperparams, rng, proposal_sd=None, check=False):
    """One full Gibbs sweep, updating ``state`` in place."""
    update_shared(state, Y, hp, rng)
    resid = residuals(state, Y)
    update_z(state, Y, hp, rng, resid=resid)
    rates = update_scores(state, Y, hp, rng, proposal_sd=proposal_sd, resid=resid)
    update_theta(state, hp, rng)
    update_noise(state, Y, hp, rng, resid=resid)
    if check:
        state.check()
    active = state.z.sum(axis=0)
    total = np.nansum(rates * active) / max(active.sum(), 1)
    loglik = float(-0.5 * np.sum(resid**2 / state.sigma2)
                   - 0.5 * state.n * np.sum(np.log(2 * np.pi * state.sigma2)))
    return state, SweepDiagnostics(float(total), rates, active, loglik)


class ProposalAdapter:
    """Robbins-Monro tuning of per-column proposal scales during burn-in."""

    def __init__(self, k, initial_sd, target=0.44, enabled=True):
        self.log_sd = np.full(k, np.log(initial_sd))
        self.target = target
        self.enabled = enabled
        self.t = 0

    @property
    def sd(self):
        return np.exp(self.log_sd)

    def update(self, rates):
        if not self.enabled:
            return
        self.t += 1
        gain = min(0.5, 5.0 / (self.t + 10) ** 0.6)
        seen = np.isfinite(rates)
        self.log_sd[seen] += gain * (rates[seen] - self.target)


def run_chain(Y, hp: Hyperparams, rng, state=None, model="bfman", check=False) -> PosteriorDraws:
    """Run a chain from a prior draw (or ``state``) and keep thinned post-burn-in draws.

    ``hp`` must already be validated. ``model`` selects ``"bfman"`` or the
    normal-score ``"mgps"`` baseline.
    """
    from .baseline_mgps import init_mgps_state, sweep_mgps

    Y = check_data(Y)
    ch = hp.chain
    if state is None:
        state = init_state(hp, Y, rng) if model == "bfman" else init_mgps_state(hp, Y, rng)
    adapter = ProposalAdapter(state.k, hp.mh.proposal_sd, hp.mh.target_accept,
                              enabled=hp.mh.adapt and model == "bfman")
    keep = [it for it in range(ch.burnin, ch.iters) if (it - ch.burnin) % ch.thin == 0]
    S, n, p, k = len(keep), state.n, state.p, state.k
    out = dict(lam=np.empty((S, p, k)), eta=np.empty((S, n, k)), z=np.empty((S, n, k), np.int8),
               theta=np.empty((S, k)), sigma2=np.empty((S, p)), tau=np.empty((S, k)))
    loglik = np.empty(ch.iters)
    accept = np.full(ch.iters, np.nan)
    s = 0
    for it in range(ch.iters):
        if model == "bfman":
            _, diag = sweep(state, Y, hp, rng, proposal_sd=adapter.sd, check=check)
            accept[it] = diag.mh_accept_rate
            if it < ch.burnin:
                adapter.update(diag.column_accept)
            loglik[it] = diag.loglik
        else:
            sweep_mgps(state, Y, hp, rng, check=check)
            loglik[it] = log_likelihood(state, Y)
        if not np.isfinite(loglik[it]):
            raise SamplerError(f"chain diverged at iteration {it}")
        if s < S and it == keep[s]:
            for name in ("lam", "eta", "z", "theta", "sigma2"):
                out[name][s] = getattr(state, name)
            out["tau"][s] = state.tau
            s += 1
    zero_prop = 1.0 - out["z"].mean(axis=1)
    return PosteriorDraws(**out, loglik=loglik, accept_rate=accept, zero_prop=zero_prop,
                          burnin=ch.burnin, thin=ch.thin, model=model)
