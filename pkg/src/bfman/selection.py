"""Factor-count selection from score sparsity, and GLT ordering of point estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PosteriorDraws


@dataclass
class FactorReport:
    zero_proportion: np.ndarray
    retained: np.ndarray
    threshold: float
    permutation: np.ndarray | None = None
    signs: np.ndarray | None = None

    @property
    def k(self) -> int:
        return int(np.sum(self.retained))

    @property
    def retained_columns(self) -> np.ndarray:
        return np.flatnonzero(self.retained)

    def to_dict(self) -> dict:
        return {
            "selected_k": self.k,
            "threshold": self.threshold,
            "zero_proportion": np.asarray(self.zero_proportion).tolist(),
            "retained": np.asarray(self.retained, dtype=bool).tolist(),
            "permutation": None if self.permutation is None else np.asarray(self.permutation).tolist(),
            "signs": None if self.signs is None else np.asarray(self.signs).tolist(),
        }


def zero_proportions(draws: PosteriorDraws) -> np.ndarray:
    """Posterior mean over draws of the fraction of spike cells in each column."""
    if draws.n_draws == 0:
        raise ValueError("no draws")
    return 1.0 - draws.z.mean(axis=(0, 1))


def select_k(draws: PosteriorDraws, threshold: float = 0.8) -> FactorReport:
    """Keep column h iff its posterior zero proportion is below ``threshold``."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    zp = zero_proportions(draws)
    return FactorReport(zero_proportion=zp, retained=zp < threshold, threshold=threshold)


def glt_order(lam, eta, tol=1e-8):
    """Canonical column order and signs from the score matrix.

    Columns are sorted by the row index of their leading entry (first
    ``|eta_ih| > tol``); ties go to the larger leading magnitude and all-zero
    columns go last. Each column is then flipped so the leading entry is
    positive. Returns ``(perm, signs, lam_ordered, eta_ordered)`` with
    ``eta_ordered = eta[:, perm] * signs``.
    """
    lam = np.asarray(lam, dtype=float)
    eta = np.asarray(eta, dtype=float)
    n, k = eta.shape
    nz = np.abs(eta) > tol
    has = nz.any(axis=0)
    lead = np.where(has, np.argmax(nz, axis=0), n)
    lead_val = np.where(has, eta[np.minimum(lead, n - 1), np.arange(k)], 0.0)
    perm = np.lexsort((np.arange(k), -np.abs(lead_val), lead))
    signs = np.where(lead_val[perm] < 0, -1.0, 1.0)
    return perm, signs, lam[:, perm] * signs, eta[:, perm] * signs


def point_estimates(draws: PosteriorDraws, columns=None, inclusion=0.5):
    """Posterior-mean loadings and scores, with scores zeroed where inclusion < ``inclusion``."""
    lam = draws.lam.mean(axis=0)
    eta = draws.eta.mean(axis=0)
    eta = np.where(draws.z.mean(axis=0) >= inclusion, eta, 0.0)
    if columns is not None:
        lam, eta = lam[:, columns], eta[:, columns]
    return lam, eta


def report_with_order(draws: PosteriorDraws, threshold=0.8, tol=1e-8) -> FactorReport:
    """``select_k`` followed by GLT ordering of the retained point estimates."""
    report = select_k(draws, threshold)
    lam, eta = point_estimates(draws, report.retained_columns)
    perm, signs, _, _ = glt_order(lam, eta, tol)
    report.permutation = report.retained_columns[perm]
    report.signs = signs
    return report
