"""Fit-select-refit pipeline shared by the CLI, the demos and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baseline_mgps import active_columns, mgps_effective_factors
from .gibbs import run_chain
from .model import Hyperparams, PosteriorDraws, check_data, validate
from .selection import FactorReport, report_with_order

MODELS = ("bfman", "mgps")


@dataclass
class FitResult:
    model: str
    hp: Hyperparams
    draws: PosteriorDraws
    report: FactorReport
    final_hp: Hyperparams | None = None
    final_draws: PosteriorDraws | None = None
    final_report: FactorReport | None = None
    effective_factors: int | None = None

    @property
    def selected_k(self) -> int:
        return self.effective_factors if self.model == "mgps" else self.report.k


def _mgps_report(draws: PosteriorDraws, eps, prop) -> FactorReport:
    active = active_columns(draws.lam, eps, prop).mean(axis=0)
    # loading-activity stand-in for the zero proportion: share of draws where the column is inactive
    return FactorReport(zero_proportion=1.0 - active, retained=np.ones(draws.k, dtype=bool),
                        threshold=float("nan"))


def fit(Y, hp: Hyperparams | None = None, model="bfman", k="auto", threshold=0.8,
        refit=True, eps=1e-2, prop=0.05) -> FitResult:
    """Fit ``model`` to ``Y``.

    With ``k="auto"`` the mass-nonlocal model is fitted at the upper bound,
    columns are selected by score sparsity and, when ``refit`` is set, the
    model is refitted at the selected number of factors. An integer ``k``
    fits exactly that many factors. The MGPS baseline is fitted once at the
    bound (or ``k``) and its effective factor count is reported.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    Y = check_data(Y)
    hp = Hyperparams() if hp is None else hp
    if k != "auto":
        hp = hp.replace(K=int(k))
    hp = validate(hp, Y)
    seeds = np.random.SeedSequence(hp.chain.seed).spawn(2)
    draws = run_chain(Y, hp, np.random.default_rng(seeds[0]), model=model)
    if model == "mgps":
        return FitResult(model, hp, draws, _mgps_report(draws, eps, prop),
                         effective_factors=mgps_effective_factors(draws, eps, prop))
    report = report_with_order(draws, threshold)
    result = FitResult(model, hp, draws, report)
    if k == "auto" and refit and report.k >= 1:
        hp2 = validate(hp.replace(K=report.k, psi=_psi_subset(hp, report)), Y)
        result.final_hp = hp2
        result.final_draws = run_chain(Y, hp2, np.random.default_rng(seeds[1]))
        result.final_report = report_with_order(result.final_draws, threshold)
    return result


def _psi_subset(hp: Hyperparams, report: FactorReport):
    psi = np.asarray(hp.psi, dtype=float)
    if psi.ndim == 0:
        return float(psi)
    return psi[report.permutation].tolist()
