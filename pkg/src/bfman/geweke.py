"""Joint-distribution ("getting it right") check for the samplers.

Marginal-conditional draws sample the state from the prior and data from
the likelihood. Successive-conditional draws alternate a sampler sweep with
fresh data given the state. A correct sampler leaves both with the same
joint law, so monitored statistics must agree up to Monte-Carlo error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baseline_mgps import init_mgps_state, sweep_mgps
from .gibbs import sweep
from .model import Hyperparams, ModelState, init_state, simulate_data


def geweke_hyperparams(K=2, **changes) -> Hyperparams:
    """Settings whose monitored statistics have finite variance."""
    base = dict(a_sigma=5.0, b_sigma=2.0, a_theta=2.0, b_theta=2.0, nu=10.0,
                a1=4.0, a2=4.0, psi=0.5, K=K, mh={"adapt": False})
    base.update(changes)
    return Hyperparams().replace(**base)


def statistics(state: ModelState, model="bfman") -> dict:
    out = {}
    for j, s in enumerate(state.sigma2):
        out[f"sigma2[{j}]"] = s
    for (j, h), v in np.ndenumerate(state.lam):
        out[f"lam2[{j},{h}]"] = v * v
    for h in range(state.k):
        out[f"delta[{h}]"] = state.delta[h]
        out[f"eta2[{h}]"] = np.mean(state.eta[:, h] ** 2)
        if model == "bfman":
            out[f"theta[{h}]"] = state.theta[h]
            out[f"sumz[{h}]"] = state.z[:, h].sum()
    return out


def _stack(rows):
    names = list(rows[0])
    return names, np.array([[r[k] for k in names] for r in rows], dtype=float)


def marginal_conditional(hp, n, p, n_draws, rng, model="bfman"):
    prior = init_state if model == "bfman" else init_mgps_state
    shape = np.empty((n, p))
    return _stack([statistics(prior(hp, shape, rng), model) for _ in range(n_draws)])


def successive_conditional(hp, n, p, n_draws, rng, model="bfman", thin=1):
    prior = init_state if model == "bfman" else init_mgps_state
    state = prior(hp, np.empty((n, p)), rng)
    Y = simulate_data(state, rng)
    rows = []
    for it in range(n_draws * thin):
        if model == "bfman":
            sweep(state, Y, hp, rng, check=True)
        else:
            sweep_mgps(state, Y, hp, rng, check=True)
        Y = simulate_data(state, rng)
        if (it + 1) % thin == 0:
            rows.append(statistics(state, model))
    return _stack(rows)


def batch_means_se(x, n_batches=50):
    """Standard error of the mean of each column of ``x`` by batch means."""
    m = x.shape[0] // n_batches
    means = x[: m * n_batches].reshape(n_batches, m, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


@dataclass
class GewekeResult:
    names: list
    prior_mean: np.ndarray
    chain_mean: np.ndarray
    zscore: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.zscore)))

    def passed(self, bound=3.0) -> bool:
        return bool(np.all(np.abs(self.zscore) < bound))

    def table(self) -> str:
        lines = [f"{'statistic':<14}{'prior':>12}{'sampler':>12}{'z':>8}"]
        for name, a, b, z in zip(self.names, self.prior_mean, self.chain_mean, self.zscore):
            lines.append(f"{name:<14}{a:>12.4f}{b:>12.4f}{z:>8.2f}")
        return "\n".join(lines)


def geweke_test(hp=None, n=5, p=4, n_draws=20000, seed=0, model="bfman") -> GewekeResult:
    hp = geweke_hyperparams() if hp is None else hp
    ss = np.random.SeedSequence(seed)
    rng_mc, rng_sc = (np.random.default_rng(s) for s in ss.spawn(2))
    names, mc = marginal_conditional(hp, n, p, n_draws, rng_mc, model)
    names2, sc = successive_conditional(hp, n, p, n_draws, rng_sc, model)
    assert names == names2
    se = np.sqrt(mc.std(axis=0, ddof=1) ** 2 / mc.shape[0] + batch_means_se(sc) ** 2)
    z = (sc.mean(axis=0) - mc.mean(axis=0)) / se
    return GewekeResult(names, mc.mean(axis=0), sc.mean(axis=0), z)


def convergence_zscore(trace, first=0.1, last=0.5, n_batches=20) -> float:
    """Geweke convergence diagnostic comparing the early and late parts of a trace.

    Standard errors come from batch means within each segment.
    """
    x = np.asarray(trace, dtype=float)
    a = x[: int(first * x.size)]
    b = x[x.size - int(last * x.size):]
    nb_a = min(n_batches, a.size // 2)
    nb_b = min(n_batches, b.size // 2)
    if nb_a < 2 or nb_b < 2:
        raise ValueError("trace too short for the convergence diagnostic")
    se2 = batch_means_se(a[:, None], nb_a)[0] ** 2 + batch_means_se(b[:, None], nb_b)[0] ** 2
    return float((a.mean() - b.mean()) / np.sqrt(se2))
