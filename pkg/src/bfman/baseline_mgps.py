"""MGPS factor model with standard normal scores, the comparison sampler.

Loadings, shrinkage and noise updates are the same functions the
mass-nonlocal sampler uses; only the score step differs. The indicator
matrix is held at one and ``theta`` at one throughout.
"""

from __future__ import annotations

import numpy as np

from . import distributions as dist
from .gibbs import residuals, update_noise, update_shared
from .model import Hyperparams, ModelState, PosteriorDraws, init_state


def init_mgps_state(hp: Hyperparams, Y, rng) -> ModelState:
    state = init_state(hp, Y, rng)
    state.z = np.ones_like(state.z)
    state.theta = np.ones_like(state.theta)
    state.eta = rng.standard_normal(state.eta.shape)
    return state


def update_scores_normal(state: ModelState, Y, hp: Hyperparams, rng) -> np.ndarray:
    """``eta_i ~ N(P^{-1} Lambda^T Sigma^{-1} y_i, P^{-1})``, ``P = I + Lambda^T Sigma^{-1} Lambda``."""
    w = state.lam / state.sigma2[:, None]
    precision = np.eye(state.k) + state.lam.T @ w
    linear = Y @ w
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise dist.PrecisionError("update_scores_normal: precision is not positive definite") from exc
    from scipy.linalg import cho_solve, solve_triangular

    mean = cho_solve((chol, True), linear.T).T
    noise = solve_triangular(chol.T, rng.standard_normal((state.k, state.n)), lower=False).T
    state.eta = mean + noise
    return state.eta


def sweep_mgps(state: ModelState, Y, hp: Hyperparams, rng, check=False) -> ModelState:
    update_shared(state, Y, hp, rng)
    update_scores_normal(state, Y, hp, rng)
    update_noise(state, Y, hp, rng, resid=residuals(state, Y))
    if check:
        assert np.all(state.z == 1)
    return state


def run_mgps(Y, hp: Hyperparams, rng, state=None) -> PosteriorDraws:
    from .gibbs import run_chain

    return run_chain(Y, hp, rng, state=state, model="mgps")


def active_columns(lam, eps=1e-2, prop=0.05) -> np.ndarray:
    """Boolean mask of loading columns with more than ``prop`` of ``|lam_jh| > eps``."""
    lam = np.asarray(lam)
    return np.mean(np.abs(lam) > eps, axis=-2) > prop


def mgps_effective_factors(draws: PosteriorDraws, eps=1e-2, prop=0.05) -> int:
    """Posterior mode of the number of active loading columns."""
    if draws.n_draws == 0:
        raise ValueError("no draws")
    counts = active_columns(draws.lam, eps, prop).sum(axis=1)
    return int(np.argmax(np.bincount(counts)))
