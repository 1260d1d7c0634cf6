"""RV coefficients, sparsity recovery and slab-weight recovery."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import PosteriorDraws
from .selection import FactorReport


def rv_coefficient(S1, S2) -> float:
    """``tr(S1 S2) / sqrt(tr(S1^2) tr(S2^2))`` for symmetric PSD matrices."""
    S1 = np.asarray(S1, dtype=float)
    S2 = np.asarray(S2, dtype=float)
    if S1.shape != S2.shape or S1.ndim != 2 or S1.shape[0] != S1.shape[1]:
        raise ValueError(f"need two square matrices of equal size, got {S1.shape} and {S2.shape}")
    # tr(AB) = sum(A * B) for symmetric A, B
    n1 = np.sum(S1 * S1)
    n2 = np.sum(S2 * S2)
    if n1 == 0 and n2 == 0:
        raise ValueError("RV coefficient undefined for two zero matrices")
    if n1 == 0 or n2 == 0:
        return 0.0
    return float(np.clip(np.sum(S1 * S2) / np.sqrt(n1 * n2), 0.0, 1.0))


def match_columns(true_eta, est_eta):
    """Match estimated score columns to true ones by absolute correlation.

    Returns ``(true_idx, est_idx)`` from a maximum-weight assignment.
    Constant columns count as uncorrelated.
    """
    def _standardise(a):
        a = a - a.mean(axis=0)
        norm = np.linalg.norm(a, axis=0)
        return np.divide(a, norm, out=np.zeros_like(a), where=norm > 0)

    corr = np.abs(_standardise(np.asarray(true_eta, float)).T @ _standardise(np.asarray(est_eta, float)))
    return linear_sum_assignment(-corr)


@dataclass
class EvalResult:
    rv_loading: float
    rv_score: float
    tp: int
    fp: int
    tn: int
    fn: int
    true_k: int
    selected_k: int
    theta_true: list
    theta_hat: list
    theta_surplus: list

    def row(self, **extra) -> dict:
        out = {**extra, **asdict(self)}
        for key in ("theta_true", "theta_hat", "theta_surplus"):
            out[key] = ";".join(f"{v:.6g}" for v in out[key])
        return out


def evaluate_fit(truth, fit, report: FactorReport | None = None, inclusion=0.5) -> EvalResult:
    """Compare a fit (``PosteriorDraws`` or ``FitSummary``) with the generating truth.

    RVs use posterior-mean Gram matrices over the retained columns. True
    columns are matched to retained fitted ones by score correlation; the
    confusion counts and ``theta_hat`` follow that matching (an unmatched
    true column is compared with an all-spike column and gets ``nan``).
    ``theta_surplus`` lists posterior-mean weights of every fitted column not
    matched to a true one.
    """
    columns = None if report is None else report.retained_columns
    fit = summarize(fit, columns) if isinstance(fit, PosteriorDraws) else fit.restrict(columns)
    lam_true = np.asarray(truth.lam)
    eta_true = np.asarray(truth.eta)
    z_true = np.asarray(truth.z).astype(bool)
    n, k_true = eta_true.shape
    if lam_true.shape[0] != fit.lam_mean.shape[0] or n != fit.eta_mean.shape[0]:
        raise ValueError(
            f"dimension mismatch: truth has n={n}, p={lam_true.shape[0]}, "
            f"fit has n={fit.eta_mean.shape[0]}, p={fit.lam_mean.shape[0]}")
    rv_l = rv_coefficient(lam_true @ lam_true.T, fit.gram_lambda)
    rv_s = rv_coefficient(eta_true @ eta_true.T, fit.gram_eta)

    retained = fit.retained_columns
    z_hat_all = fit.inclusion >= inclusion
    eta_hat = np.where(z_hat_all, fit.eta_mean, 0.0)
    t_idx, e_idx = match_columns(eta_true, eta_hat[:, retained]) if retained.size else ([], [])
    e_idx = retained[np.asarray(e_idx, dtype=int)]
    z_hat = np.zeros_like(z_true)
    theta_hat = np.full(k_true, np.nan)
    for t, e in zip(t_idx, e_idx):
        z_hat[:, t] = z_hat_all[:, e]
        theta_hat[t] = fit.theta_mean[e]
    matched = set(e_idx.tolist())
    surplus = [float(fit.theta_mean[h]) for h in range(fit.theta_mean.size) if h not in matched]
    return EvalResult(
        rv_loading=rv_l, rv_score=rv_s,
        tp=int(np.sum(z_true & z_hat)), fp=int(np.sum(~z_true & z_hat)),
        tn=int(np.sum(~z_true & ~z_hat)), fn=int(np.sum(z_true & ~z_hat)),
        true_k=int(k_true), selected_k=int(retained.size),
        theta_true=np.asarray(truth.theta, float).tolist(), theta_hat=theta_hat.tolist(),
        theta_surplus=surplus,
    )


@dataclass
class FitSummary:
    """Posterior means needed for evaluation, without the full draws.

    Per-column arrays cover every fitted column; ``gram_lambda`` and
    ``gram_eta`` are posterior means over ``retained_columns`` only.
    """

    lam_mean: np.ndarray
    eta_mean: np.ndarray
    inclusion: np.ndarray
    theta_mean: np.ndarray
    sigma2_mean: np.ndarray
    gram_lambda: np.ndarray
    gram_eta: np.ndarray
    retained_columns: np.ndarray

    def restrict(self, columns):
        if columns is None or np.array_equal(columns, self.retained_columns):
            return self
        raise ValueError("a FitSummary carries Gram matrices for its own retained columns only")


def summarize(draws: PosteriorDraws, columns=None) -> FitSummary:
    columns = np.arange(draws.k) if columns is None else np.asarray(columns, dtype=int)
    gl, ge = draws.gram_means(columns)
    return FitSummary(
        lam_mean=draws.lam.mean(axis=0), eta_mean=draws.eta.mean(axis=0),
        inclusion=draws.z.mean(axis=0), theta_mean=draws.theta.mean(axis=0),
        sigma2_mean=draws.sigma2.mean(axis=0), gram_lambda=gl, gram_eta=ge,
        retained_columns=columns,
    )
