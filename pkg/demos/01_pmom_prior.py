"""The mass-nonlocal score prior.

A pMOM slab puts no mass near zero, so a score is either exactly zero
(spike) or clearly away from it. This script draws from the prior and
checks the draws against the closed-form slab CDF.
"""

import numpy as np
from scipy import stats

from bfman.distributions import MassNonlocalParams, mass_nonlocal_sample, pmom_cdf

rng = np.random.default_rng(1)
params = MassNonlocalParams(theta=0.4, psi=0.5)
z, eta = mass_nonlocal_sample(params, rng, size=200_000)

print(f"share of exact zeros: {np.mean(eta == 0):.3f} (expected {1 - params.theta})")

slab = eta[z == 1]
print(f"smallest |eta| among slab draws: {np.abs(slab).min():.2e}")
print(f"slab mass within 0.1 of zero: {np.mean(np.abs(slab) < 0.1):.5f}")
normal = stats.norm(scale=np.sqrt(3 * params.psi))
print(f"a normal slab with the same variance would put {normal.cdf(0.1) - normal.cdf(-0.1):.4f} there")

for x in (-1.0, 0.0, 0.5, 1.5):
    print(f"  F({x:+.1f}): empirical {np.mean(slab <= x):.4f}, closed form {pmom_cdf(x, params.psi):.4f}")
