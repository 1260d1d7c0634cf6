"""Normal scores versus mass-nonlocal scores on the same data.

With normal scores the shrinkage prior alone decides how many loading
columns stay active, and it tends to keep too many. The sparse-score
model drops the surplus columns because their scores collapse to zero.
"""

from bfman.model import Hyperparams
from bfman.simulate import builtin_scenarios, generate
from bfman.workflow import fit

spec = builtin_scenarios()[1]
for r in range(3):
    data = generate(spec, r)
    hp = Hyperparams().replace(chain={"seed": r})
    sparse = fit(data.Y, hp, refit=False)
    normal = fit(data.Y, hp, model="mgps")
    print(f"rep {r}: true k={spec.k}, sparse scores k={sparse.selected_k}, "
          f"normal scores active columns={normal.selected_k}")
