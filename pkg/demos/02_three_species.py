"""Inside one heteroclinic triangle: the three-species restriction.

Run with ``python demos/02_three_species.py``.
"""

# %%
import numpy as np

from hclab import canonical_p5
from hclab.geometry3d import (
    converge_to_sink,
    dominates,
    in_region,
    invariant_region_check,
    planes,
    restrict_triple,
)

params = canonical_p5()
tri = restrict_triple(params, 1)
print("species", tri.indices)

# %% [markdown]
# The three nullcline planes and the simplex, by intercepts.  P_3 lies
# above the simplex, which lies above P_1, so x_1 decays and x_3 grows
# under P_3.

# %%
pl = planes(tri)
for name, p in pl.items():
    print(f"{name:6s}", np.round(p.intercepts, 4))
for a in pl:
    print(a, "dominates", [b for b in pl if dominates(pl[a], pl[b])])

v = invariant_region_check(tri)
print(v)

# %% [markdown]
# Random starts under P_3 all end at O_3 = (0, 0, 1).

# %%
rng = np.random.default_rng(0)
times = []
while len(times) < 20:
    x0 = rng.uniform(0, 1.3, size=3)
    if in_region(tri, x0) and x0[2] > 0:
        times.append(converge_to_sink(tri, x0, tol=1e-6, t_max=300.0).t_hit)
print("arrival times:", np.round(sorted(times), 1))
