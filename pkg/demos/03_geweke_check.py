"""Check the samplers against their own prior.

Draws of the state from the prior are compared with a chain that
alternates one sampler sweep and fresh data. Any bug in a conditional
shows up as a shift in some monitored mean.

Squared loadings are heavy tailed, so short runs give noisy z-scores;
a few thousand cycles are not enough for a fair verdict.
"""

from bfman.geweke import geweke_test

for model in ("bfman", "mgps"):
    res = geweke_test(n=5, p=4, n_draws=20_000, seed=0, model=model)
    print(f"{model}: max |z| = {res.max_abs_z:.2f} over {len(res.names)} statistics")
    print(res.table())
    print()
