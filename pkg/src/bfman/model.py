"""Model state, hyperparameters and posterior-draw containers.

The factor model is ``y_i = Lambda eta_i + eps_i`` with ``eps_i ~ N_p(0, Sigma)``,
``Sigma = diag(sigma2)``. Scores follow a mass-nonlocal prior
``(1 - theta_h) delta_0 + theta_h pMOM(psi_h)`` and loadings an MGPS prior.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import distributions as dist


class ConfigError(ValueError):
    """Raised with every violated hyperparameter constraint listed."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class MHSettings:
    proposal_sd: float = 1.0
    inner_iters: int = 5
    adapt: bool = True
    target_accept: float = 0.44


@dataclass
class ChainSettings:
    iters: int = 3000
    burnin: int = 1000
    thin: int = 5
    seed: int = 0


@dataclass
class Hyperparams:
    a_sigma: float = 1.0
    b_sigma: float = 0.3
    a_theta: float = 0.02
    b_theta: float = 1.0
    nu: float = 3.0
    a1: float = 2.1
    a2: float = 3.1
    psi: float | list = 0.5
    K: int | None = None
    mh: MHSettings = field(default_factory=MHSettings)
    chain: ChainSettings = field(default_factory=ChainSettings)

    def __post_init__(self):
        if isinstance(self.mh, dict):
            self.mh = MHSettings(**self.mh)
        if isinstance(self.chain, dict):
            self.chain = ChainSettings(**self.chain)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError([f"unknown field {name!r}" for name in sorted(unknown)])
        mh = MHSettings(**d.pop("mh", {}) or {})
        chain = ChainSettings(**d.pop("chain", {}) or {})
        return cls(mh=mh, chain=chain, **d)

    @classmethod
    def from_json(cls, path) -> "Hyperparams":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        if isinstance(out["psi"], np.ndarray):
            out["psi"] = out["psi"].tolist()
        return out

    def psi_vector(self, k: int) -> np.ndarray:
        psi = np.asarray(self.psi, dtype=float)
        if psi.ndim == 0:
            return np.full(k, float(psi))
        return psi[:k].copy()

    def replace(self, **changes) -> "Hyperparams":
        d = self.to_dict()
        for key in ("mh", "chain"):
            if key in changes:
                d[key].update(changes.pop(key))
        d.update(changes)
        return Hyperparams.from_dict(d)


def default_K(n: int, p: int) -> int:
    """Factor upper bound ``min(ceil(5 ln p), n, p)``, at least 1."""
    return max(1, min(math.ceil(5.0 * math.log(p)), n, p))


def check_data(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 1 or Y.shape[1] < 1:
        raise ValueError(f"data must be a non-empty n x p matrix, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        i, j = np.argwhere(~np.isfinite(Y))[0]
        raise ValueError(f"data has a non-finite entry at row {i}, column {j}")
    return Y


def validate(hp: Hyperparams, Y) -> Hyperparams:
    """Check every constraint and fill ``K`` when absent.

    Raises :class:`ConfigError` listing all violations at once.
    """
    n, p = check_data(Y).shape
    problems = []
    for name in ("a_sigma", "b_sigma", "a_theta", "b_theta", "nu", "a1", "a2"):
        value = getattr(hp, name)
        if not (isinstance(value, (int, float)) and value > 0):
            problems.append(f"{name} must be > 0")
    psi = np.asarray(hp.psi, dtype=float)
    if psi.ndim > 1 or psi.size == 0 or not np.all(psi > 0):
        problems.append("psi must be > 0 (scalar or per-factor vector)")
    K = default_K(n, p) if hp.K is None else hp.K
    if not (isinstance(K, (int, np.integer)) and K >= 1):
        problems.append("K must be an integer >= 1")
    elif psi.ndim == 1 and psi.size < K:
        problems.append(f"psi vector has {psi.size} entries, needs K={K}")
    if not hp.mh.proposal_sd > 0:
        problems.append("mh.proposal_sd must be > 0")
    if not (isinstance(hp.mh.inner_iters, int) and hp.mh.inner_iters >= 1):
        problems.append("mh.inner_iters must be an integer >= 1")
    if not 0 < hp.mh.target_accept < 1:
        problems.append("mh.target_accept must be in (0, 1)")
    ch = hp.chain
    if not ch.iters >= 1:
        problems.append("chain.iters must be >= 1")
    if not 0 <= ch.burnin < ch.iters:
        problems.append("chain.burnin must be >= 0 and < chain.iters")
    if not ch.thin >= 1:
        problems.append("chain.thin must be >= 1")
    if problems:
        raise ConfigError(problems)
    out = hp.replace(K=int(K))
    return out


@dataclass
class ModelState:
    """All latent quantities at one iteration.

    Shapes: ``lam`` (p, k), ``eta`` and ``z`` (n, k), ``phi`` (p, k),
    ``delta`` / ``theta`` / ``psi`` (k,), ``sigma2`` (p,).
    ``tau`` is always recomputed as the running product of ``delta``.
    """

    lam: np.ndarray
    eta: np.ndarray
    z: np.ndarray
    phi: np.ndarray
    delta: np.ndarray
    theta: np.ndarray
    sigma2: np.ndarray
    psi: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return np.cumprod(self.delta)

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    @property
    def p(self) -> int:
        return self.lam.shape[0]

    @property
    def k(self) -> int:
        return self.lam.shape[1]

    def copy(self) -> "ModelState":
        return ModelState(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def check(self):
        """Assert shape consistency, positivity and exact spike/slab coupling."""
        n, k = self.eta.shape
        p = self.lam.shape[0]
        assert self.lam.shape == (p, k) and self.phi.shape == (p, k)
        assert self.z.shape == (n, k)
        assert self.delta.shape == self.theta.shape == self.psi.shape == (k,)
        assert self.sigma2.shape == (p,)
        assert np.all(self.phi > 0) and np.all(self.delta > 0) and np.all(self.sigma2 > 0)
        assert np.all((self.theta >= 0) & (self.theta <= 1))
        assert np.array_equal(self.z == 0, self.eta == 0.0), "spike/slab coupling broken"


def init_state(hp: Hyperparams, Y, rng) -> ModelState:
    """Draw an initial state from the prior (``hp`` must be validated)."""
    n, p = np.shape(Y)
    k = hp.K
    psi = hp.psi_vector(k)
    phi = dist.gamma_sample(hp.nu / 2.0, hp.nu / 2.0, rng, size=(p, k))
    delta = np.concatenate([
        dist.gamma_sample(hp.a1, 1.0, rng, size=1),
        dist.gamma_sample(hp.a2, 1.0, rng, size=k - 1),
    ])
    tau = np.cumprod(delta)
    lam = rng.standard_normal((p, k)) / np.sqrt(phi * tau)
    theta = dist.beta_sample(hp.a_theta, hp.b_theta, rng, size=k)
    z = (rng.random((n, k)) < theta).astype(np.int8)
    eta = np.where(z == 1, dist.pmom_sample(1.0, rng, size=(n, k)) * np.sqrt(psi), 0.0)
    sigma2 = 1.0 / dist.gamma_sample(hp.a_sigma, hp.b_sigma, rng, size=p)
    return ModelState(lam=lam, eta=eta, z=z, phi=phi, delta=delta, theta=theta,
                      sigma2=sigma2, psi=psi)


def simulate_data(state: ModelState, rng) -> np.ndarray:
    """``Y = eta Lambda^T + eps`` with ``eps_ij ~ N(0, sigma2_j)``."""
    n, p = state.n, state.p
    return state.eta @ state.lam.T + rng.standard_normal((n, p)) * np.sqrt(state.sigma2)


def log_likelihood(state: ModelState, Y) -> float:
    resid = Y - state.eta @ state.lam.T
    n = Y.shape[0]
    return float(-0.5 * np.sum(resid**2 / state.sigma2)
                 - 0.5 * n * np.sum(np.log(2 * np.pi * state.sigma2)))


@dataclass
class PosteriorDraws:
    """Thinned retained iterations of the chain plus run diagnostics.

    Stacked arrays carry the draw index on axis 0. ``loglik`` and
    ``accept_rate`` cover every iteration (burn-in included).
    """

    lam: np.ndarray
    eta: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    sigma2: np.ndarray
    tau: np.ndarray
    loglik: np.ndarray
    accept_rate: np.ndarray
    zero_prop: np.ndarray
    burnin: int = 0
    thin: int = 1
    model: str = "bfman"

    @property
    def n_draws(self) -> int:
        return self.lam.shape[0]

    @property
    def k(self) -> int:
        return self.lam.shape[2]

    def mean(self, name: str) -> np.ndarray:
        return getattr(self, name).mean(axis=0)

    def inclusion_prob(self) -> np.ndarray:
        return self.z.mean(axis=0)

    def gram_means(self, columns=None):
        """Posterior means of ``Lambda Lambda^T`` and ``eta eta^T``."""
        lam, eta = self.lam, self.eta
        if columns is not None:
            lam, eta = lam[:, :, columns], eta[:, :, columns]
        ll = np.einsum("sjh,slh->jl", lam, lam) / self.n_draws
        ee = np.einsum("sih,slh->il", eta, eta) / self.n_draws
        return ll, ee

    def subset(self, columns) -> "PosteriorDraws":
        columns = np.asarray(columns, dtype=int)
        return PosteriorDraws(
            lam=self.lam[:, :, columns], eta=self.eta[:, :, columns],
            z=self.z[:, :, columns], theta=self.theta[:, columns],
            sigma2=self.sigma2, tau=self.tau[:, columns], loglik=self.loglik,
            accept_rate=self.accept_rate, zero_prop=self.zero_prop[:, columns],
            burnin=self.burnin, thin=self.thin, model=self.model,
        )
