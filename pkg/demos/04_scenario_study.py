"""A small replicate study of one benchmark scenario.

Each replicate has its own seed stream, so any replicate can be rerun on
its own. Pass a scenario number (1 to 3) and a replicate count.
"""

import sys

import numpy as np

from bfman.metrics import evaluate_fit
from bfman.model import Hyperparams
from bfman.simulate import builtin_scenarios, generate
from bfman.workflow import fit

scenario = int(sys.argv[1]) if len(sys.argv) > 1 else 1
reps = int(sys.argv[2]) if len(sys.argv) > 2 else 3
spec = builtin_scenarios()[scenario]

rows = []
for r in range(reps):
    data = generate(spec, r)
    res = fit(data.Y, Hyperparams().replace(chain={"seed": r}), refit=False)
    ev = evaluate_fit(data, res.draws, res.report)
    rows.append(ev)
    print(f"rep {r}: k={ev.selected_k} RV(LL')={ev.rv_loading:.3f} RV(ee')={ev.rv_score:.3f}")

print(f"median RV(LL')={np.median([e.rv_loading for e in rows]):.3f}, "
      f"RV(ee')={np.median([e.rv_score for e in rows]):.3f}")
print("median theta_hat:", np.round(np.nanmedian([e.theta_hat for e in rows], axis=0), 3).tolist())
