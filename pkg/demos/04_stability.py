"""Contraction near a saddle and a short stability run.

Run with ``python demos/04_stability.py``; about half a minute.
"""

# %%
import numpy as np

from hclab import build_gamma, canonical_p5
from hclab.stability import contraction_experiment, mesh_floor, stability_experiment

params = canonical_p5()

# %% [markdown]
# A single passage past O_1 maps an unstable offset eta to a stable
# offset xi ~ C eta^s; the exponent sits at the saddle value 1.5.

# %%
fit = contraction_experiment(params, 1)
print(f"s = {fit.s:.4f}, C = {fit.C:.3f}, nu = {fit.nu:.3f}")
for e, x, T in zip(fit.eta0, fit.xi_T, fit.T):
    print(f"eta0 {e:.0e}  xi(T) {x:.3e}  T {T:.1f}")

weak = contraction_experiment(params.with_rho(4, 1, 1.1), 1)
print(f"weak stable direction: s = {weak.s:.3f}, dissipative = {weak.dissipative}")

# %% [markdown]
# Distances to the meshed surface are trustworthy down to the mesh floor,
# estimated by comparing with a refined mesh.

# %%
mesh = build_gamma(params, 33, 64)
floor = mesh_floor(params, mesh)
print(f"mesh floor {floor:.2e}")

rep = stability_experiment(params, mesh, 1e-3, laps=2, trials=5, floor=floor)
for t in rep.trials:
    print(t.trial, np.array(t.lap_entry).round(7), np.array(t.lap_exit).round(7),
          f"max {t.max_distance:.2e}", t.itinerary.labels[:8])
print(rep.to_dict()["summary"])
