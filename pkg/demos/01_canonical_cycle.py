"""The canonical five-species cycle: conditions, spectra and an itinerary.

Run with ``python demos/01_canonical_cycle.py``.
"""

# %%
import numpy as np

from hclab import canonical_p5
from hclab.conditions import check_all
from hclab.integrator import IntegrationOptions, integrate, neighborhoods
from hclab.model import spectrum_at
from hclab.stability import extract_itinerary

params = canonical_p5()
print(params.rho)

# %% [markdown]
# Every saddle O_k has two unstable directions, k+1 and k+2, and the
# weakest contraction beats the strongest expansion by a factor of 1.5.

# %%
for k in range(1, 6):
    sp = spectrum_at(params, k)
    print(k, np.round(sp.eigenvalues, 3), sp.unstable_set, round(sp.nu, 12))

rep = check_all(params)
print("all conditions hold:", rep.all_ok)
for r in rep.per_k:
    print(r.k, {name: round(v, 3) for name, v in r.to_dict()["margins"].items()})

# %% [markdown]
# A start close to O_1 visits the saddles in steps of one or two.  The
# residence times grow geometrically, the signature of an attracting
# heteroclinic network.

# %%
x0 = np.array([0.9, 0.01, 0.02, 1e-3, 1e-3])
traj = integrate(params, x0, 600.0, IntegrationOptions(neighborhoods=neighborhoods(params)))
it = extract_itinerary(traj, params)
print("saddles:", it.saddles)
print("steps:  ", it.labels)
entries = [e.time for e in traj.events if e.kind.name == "ENTER_V"]
print("entry times:", np.round(entries, 1))
