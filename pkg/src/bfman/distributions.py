"""Densities and exact samplers for the pMOM slab, the mass-nonlocal mixture
and the conjugate families used by the Gibbs sweep.

Every sampler takes an explicit ``numpy.random.Generator``; nothing here
touches global random state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LOG_2PI = np.log(2.0 * np.pi)


class PrecisionError(np.linalg.LinAlgError):
    """A precision matrix handed to a Gaussian sampler is not positive definite."""


@dataclass(frozen=True)
class PMomParams:
    psi: float = 0.5

    def __post_init__(self):
        if not self.psi > 0:
            raise ValueError(f"psi must be > 0, got {self.psi}")


@dataclass(frozen=True)
class MassNonlocalParams:
    theta: float
    psi: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if not self.psi > 0:
            raise ValueError(f"psi must be > 0, got {self.psi}")


def pmom_log_density(x, psi):
    """Log density of the second-order product moment (pMOM) distribution.

    ``p(x | psi) = x**2 * exp(-x**2 / (2 psi)) / sqrt(2 pi psi**3)``.
    Returns ``-inf`` at ``x == 0``. Works elementwise on arrays.
    """
    if isinstance(psi, PMomParams):
        psi = psi.psi
    x = np.asarray(x, dtype=float)
    x2 = x * x
    with np.errstate(divide="ignore"):
        out = np.log(x2) - x2 / (2.0 * psi) - 0.5 * (_LOG_2PI + 3.0 * np.log(psi))
    return out[()] if out.ndim == 0 else out


def pmom_cdf(x, psi):
    """Closed-form CDF of pMOM(psi).

    With ``s = sqrt(psi)`` the CDF is ``Phi(x/s) - (x/s) phi(x/s)``.
    """
    from scipy.stats import norm

    u = np.asarray(x, dtype=float) / np.sqrt(psi)
    return norm.cdf(u) - u * norm.pdf(u)


def pmom_sample(psi, rng, size=None):
    """Exact pMOM draws: ``|x| = sqrt(psi) * chi_3`` with a uniformly random sign."""
    if isinstance(psi, PMomParams):
        psi = psi.psi
    magnitude = np.sqrt(psi * rng.chisquare(3.0, size=size))
    sign = np.where(rng.random(size=size) < 0.5, -1.0, 1.0)
    out = sign * magnitude
    return float(out) if size is None else out


def mass_nonlocal_sample(params: MassNonlocalParams, rng, size=None):
    """Draw ``(z, eta)`` from ``(1 - theta) delta_0 + theta pMOM(psi)``.

    Spike draws are exactly ``0.0`` and carry ``z == 0``.
    """
    z = rng.random(size=size) < params.theta
    slab = pmom_sample(params.psi, rng, size=size)
    eta = np.where(z, slab, 0.0)
    if size is None:
        return int(z), float(eta)
    return z.astype(np.int8), eta


# ---------------------------------------------------------------------------
# slab full conditional  pi(eta | c, d)  ∝  eta^2 exp{-c (eta - d/c)^2}
# ---------------------------------------------------------------------------

def slab_conditional_log_density(eta, c, d):
    """Unnormalised log of ``eta**2 * exp(-c (eta - d/c)**2)``."""
    eta = np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore"):
        return 2.0 * np.log(np.abs(eta)) - c * (eta - d / c) ** 2


def slab_conditional_log_normaliser(c, d):
    """``log ∫ eta^2 exp{-c (eta - d/c)^2} d eta``."""
    m = d / c
    s2 = 0.5 / c
    return 0.5 * (np.log(np.pi) - np.log(c)) + np.log(s2 + m * m)


def slab_conditional_sample(c, d, rng):
    """Exact draws from ``pi(eta | c, d)`` by rejection.

    Writing ``eta = m + s u`` with ``m = d/c`` and ``s**2 = 1/(2c)``, the target
    in ``u`` is ``(m + s u)**2 phi(u)``. The envelope ``2 (m**2 + s**2 u**2) phi(u)``
    is a mixture of N(0, 1) and a signed chi_3, and accepts half the time.
    ``c`` is a scalar or broadcasts against ``d``; returns an array shaped like ``d``.
    """
    d = np.asarray(d, dtype=float)
    c = np.broadcast_to(np.asarray(c, dtype=float), d.shape)
    m = d / c
    s = np.sqrt(0.5 / c)
    out = np.empty(d.shape)
    todo = np.ones(d.shape, dtype=bool)
    while todo.any():
        mi, si = m[todo], s[todo]
        k = mi.size
        w_normal = mi * mi / (mi * mi + si * si)
        pick_normal = rng.random(k) < w_normal
        chi = np.sqrt(rng.chisquare(3.0, size=k)) * np.where(rng.random(k) < 0.5, -1.0, 1.0)
        u = np.where(pick_normal, rng.standard_normal(k), chi)
        num = (mi + si * u) ** 2
        den = 2.0 * (mi * mi + si * si * u * u)
        accept = rng.random(k) * den < num
        idx = np.flatnonzero(todo)[accept]
        out.flat[idx] = (mi + si * u)[accept]
        todo.flat[idx] = False
    return out


# ---------------------------------------------------------------------------
# conjugate primitives
# ---------------------------------------------------------------------------

def gamma_sample(shape, rate, rng, size=None):
    """Gamma draws in the shape/rate parameterisation."""
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def beta_sample(a, b, rng, size=None):
    return rng.beta(a, b, size=size)


def bernoulli_sample(p, rng, size=None):
    p = np.asarray(p, dtype=float)
    if size is None:
        size = p.shape
    return (rng.random(size) < p).astype(np.int8)


def mvnormal_sample(mean, rng, cov=None, precision=None, label="mvnormal"):
    """Multivariate normal draws from a covariance or a precision.

    ``mean`` may be stacked, shape ``(..., k)``, with matching ``(..., k, k)``
    matrices. With ``precision`` the draw is ``mean + L^{-T} e`` where
    ``L L^T = precision``; no explicit inverse is formed.
    """
    mean = np.asarray(mean, dtype=float)
    if (cov is None) == (precision is None):
        raise ValueError("give exactly one of cov or precision")
    eps = rng.standard_normal(mean.shape)
    try:
        if cov is not None:
            chol = np.linalg.cholesky(cov)
            return mean + np.einsum("...ij,...j->...i", chol, eps)
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise PrecisionError(f"{label}: matrix is not positive definite") from exc
    return mean + np.linalg.solve(np.swapaxes(chol, -1, -2), eps[..., None])[..., 0]


def mvnormal_from_precision(precision, linear, rng, label="mvnormal"):
    """Draw from ``N(P^{-1} b, P^{-1})`` given precision ``P`` and ``b``.

    Stacked over leading axes. Returns ``(draw, mean)``.
    """
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise PrecisionError(f"{label}: precision is not positive definite") from exc
    chol_t = np.swapaxes(chol, -1, -2)
    half = np.linalg.solve(chol, linear[..., None])
    mean = np.linalg.solve(chol_t, half)[..., 0]
    eps = rng.standard_normal(mean.shape)
    draw = mean + np.linalg.solve(chol_t, eps[..., None])[..., 0]
    return draw, mean
