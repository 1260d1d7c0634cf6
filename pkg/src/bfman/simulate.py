"""Synthetic data for the four benchmark scenarios.

Each replicate draws ``Z_ih ~ Bern(theta_h)``, scores from the mass-nonlocal
prior with ``psi = 0.5``, loading columns ``N_p(0, I)``, noise variances
``Unif(0, 1)`` and ``Y_i = Lambda eta_i + eps_i``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import distributions as dist


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    p: int
    k: int
    theta: tuple
    psi: float = 0.5
    noise: str = "uniform(0,1)"
    replicates: int = 50
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        if min(self.n, self.p, self.k) < 1:
            raise ValueError("n, p and k must be positive")
        if len(self.theta) != self.k:
            raise ValueError(f"theta has {len(self.theta)} entries but k={self.k}")
        if not all(0 < t <= 1 for t in self.theta):
            raise ValueError("every theta must lie in (0, 1]")
        if not self.psi > 0:
            raise ValueError("psi must be > 0")
        if self.noise != "uniform(0,1)":
            raise ValueError(f"unsupported noise law {self.noise!r}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["theta"] = tuple(float(t) for t in d["theta"])
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        out = asdict(self)
        out["theta"] = list(self.theta)
        return out

    def with_(self, **changes):
        return ScenarioSpec.from_dict({**self.to_dict(), **changes})


def builtin_scenarios() -> dict:
    return {
        1: ScenarioSpec(100, 20, 3, (0.4, 0.4, 0.4), name="scenario1"),
        2: ScenarioSpec(100, 20, 3, (0.8, 0.6, 0.4), name="scenario2"),
        3: ScenarioSpec(30, 60, 5, (0.9, 0.8, 0.7, 0.6, 0.5), name="scenario3"),
        4: ScenarioSpec(3000, 60, 6, (0.8, 0.7, 0.6, 0.5, 0.4, 0.3), name="scenario4"),
    }


@dataclass
class GeneratedDataset:
    Y: np.ndarray
    lam: np.ndarray
    eta: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    sigma2: np.ndarray
    seed: list = field(default_factory=list)

    def truth_dict(self):
        return {
            "n": int(self.Y.shape[0]), "p": int(self.Y.shape[1]), "k": int(self.lam.shape[1]),
            "seed": list(self.seed), "theta": self.theta.tolist(), "sigma2": self.sigma2.tolist(),
            "lam": self.lam.tolist(), "eta": self.eta.tolist(), "z": self.z.tolist(),
        }

    @classmethod
    def from_truth(cls, truth: dict, Y=None):
        eta = np.asarray(truth["eta"], dtype=float)
        return cls(
            Y=np.empty((eta.shape[0], len(truth["sigma2"]))) if Y is None else Y,
            lam=np.asarray(truth["lam"], dtype=float), eta=eta,
            z=np.asarray(truth["z"], dtype=np.int8), theta=np.asarray(truth["theta"]),
            sigma2=np.asarray(truth["sigma2"]), seed=truth.get("seed", []),
        )


def replicate_seed(base_seed: int, replicate: int) -> np.random.SeedSequence:
    """Stable per-replicate stream derived from ``(base_seed, replicate)``."""
    return np.random.SeedSequence([int(base_seed), int(replicate)])


def generate(spec: ScenarioSpec, replicate: int = 0, rng=None) -> GeneratedDataset:
    """Draw one replicate. Without ``rng`` the stream is ``replicate_seed(spec.seed, replicate)``."""
    if rng is None:
        rng = np.random.default_rng(replicate_seed(spec.seed, replicate))
    n, p, k = spec.n, spec.p, spec.k
    theta = np.asarray(spec.theta, dtype=float)
    z = (rng.random((n, k)) < theta).astype(np.int8)
    eta = np.where(z == 1, dist.pmom_sample(spec.psi, rng, size=(n, k)), 0.0)
    lam = rng.standard_normal((p, k))
    sigma2 = rng.uniform(0.0, 1.0, size=p)
    Y = eta @ lam.T + rng.standard_normal((n, p)) * np.sqrt(sigma2)
    return GeneratedDataset(Y=Y, lam=lam, eta=eta, z=z, theta=theta, sigma2=sigma2,
                            seed=[int(spec.seed), int(replicate)])
