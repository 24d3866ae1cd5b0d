"""Meshing the heteroclinic surface and reading off its topology.

Run with ``python demos/03_surface.py [outdir]``; an OBJ file of the
p = 5 surface is written to ``outdir`` (default: the current directory).
"""

# %%
import sys
import time
from pathlib import Path

from hclab import canonical_p5
from hclab.conditions import sample_params
from hclab.manifold import build_gamma, classify_combinatorial, classify_topology, trace_fan

params = canonical_p5()
out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")

# %% [markdown]
# One fan of W^u(O_1).  The phi = 0 orbit runs straight to O_3; the
# phi = pi/2 orbit detours through O_2, so it is much longer.

# %%
fan = trace_fan(params, 1, 9)
for phi, D in zip(fan.angles, fan.arclengths):
    print(f"phi = {phi:.4f}   D = {D:.4f}")
print("b =", round(fan.b, 4))

# %%
t0 = time.perf_counter()
mesh = build_gamma(params, 33, 64)
print(f"{mesh.num_vertices} vertices, {mesh.num_triangles} triangles, "
      f"area {mesh.area():.4f}, {time.perf_counter() - t0:.1f} s")
print(classify_topology(mesh))
mesh.save_obj(out / "gamma_p5.obj")

# %% [markdown]
# Parity decides: odd cycles give a Moebius strip, even ones a cylinder.

# %%
for p in (5, 6, 7, 8):
    m = build_gamma(params if p == 5 else sample_params(p, p, p), 9, 16)
    print(p, classify_topology(m).classification, classify_combinatorial(p).classification)
