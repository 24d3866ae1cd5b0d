"""Combinatorial invariants of triangulated surfaces."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, InvalidMeshError, UnsupportedCycleError

CYLINDER = "Cylinder"
MOBIUS = "MobiusStrip"
OTHER = "Other"


@dataclass(frozen=True)
class TopologyReport:
    boundary_components: int
    orientable: bool
    euler_characteristic: int
    classification: str

    def to_dict(self):
        return {
            "classification": self.classification,
            "boundary_components": self.boundary_components,
            "orientable": self.orientable,
            "euler": self.euler_characteristic,
        }


def classify(boundary, orientable, chi):
    if chi == 0 and boundary == 2 and orientable:
        return CYLINDER
    if chi == 0 and boundary == 1 and not orientable:
        return MOBIUS
    return OTHER


def edge_table(triangles):
    """Unique undirected edges and, per edge, the incident triangles.

    Returns (edges (E, 2) sorted pairs, incidence (E, 2) triangle indices
    with -1 for a missing second triangle, directions (E, 2) with +1 when
    the triangle traverses the edge from the smaller to the larger vertex).
    Raises InvalidMeshError for edges shared by three or more triangles.
    """
    tris = np.asarray(triangles, dtype=np.int64)
    F = tris.shape[0]
    a = tris.reshape(-1)
    b = tris[:, [1, 2, 0]].reshape(-1)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    direction = np.where(a < b, 1, -1)
    owner = np.repeat(np.arange(F), 3)
    key = np.column_stack([lo, hi])
    edges, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    if np.any(counts > 2):
        e = edges[np.argmax(counts > 2)]
        raise InvalidMeshError(
            f"non-manifold edge ({e[0]}, {e[1]}) bounds {counts.max()} triangles"
        )
    order = np.argsort(inv, kind="stable")
    inc = np.full((edges.shape[0], 2), -1, dtype=np.int64)
    dirs = np.zeros((edges.shape[0], 2), dtype=np.int64)
    first = np.ones(order.size, dtype=bool)
    first[1:] = inv[order][1:] != inv[order][:-1]
    slot = np.where(first, 0, 1)
    inc[inv[order], slot] = owner[order]
    dirs[inv[order], slot] = direction[order]
    return edges, inc, dirs


def _boundary_components(edges, inc):
    bd = edges[inc[:, 1] < 0]
    if bd.size == 0:
        return 0
    verts, local = np.unique(bd, return_inverse=True)
    local = local.reshape(-1, 2)
    parent = np.arange(verts.size)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for u, v in local:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    return len({find(i) for i in range(verts.size)})


def _orientable(F, inc, dirs):
    """Propagate orientations across interior edges; False on conflict."""
    inner = inc[:, 1] >= 0
    t1, t2 = inc[inner, 0], inc[inner, 1]
    # flipping t2 relative to t1 is needed when both traverse the edge the same way
    rel = -(dirs[inner, 0] * dirs[inner, 1])
    adj = [[] for _ in range(F)]
    for a, b, r in zip(t1.tolist(), t2.tolist(), rel.tolist()):
        adj[a].append((b, r))
        adj[b].append((a, r))
    sign = np.zeros(F, dtype=np.int64)
    for start in range(F):
        if sign[start]:
            continue
        sign[start] = 1
        queue = deque([start])
        while queue:
            t = queue.popleft()
            for u, r in adj[t]:
                want = sign[t] * r
                if sign[u] == 0:
                    sign[u] = want
                    queue.append(u)
                elif sign[u] != want:
                    return False
    return True


def classify_triangles(triangles):
    tris = np.asarray(triangles, dtype=np.int64)
    if tris.ndim != 2 or tris.shape[1] != 3 or tris.shape[0] == 0:
        raise InvalidMeshError("need a non-empty (F, 3) triangle array")
    if np.any(tris[:, 0] == tris[:, 1]) or np.any(tris[:, 1] == tris[:, 2]) or np.any(
            tris[:, 0] == tris[:, 2]):
        raise InvalidMeshError("degenerate triangle with a repeated vertex")
    edges, inc, dirs = edge_table(tris)
    V = np.unique(tris).size
    chi = int(V - edges.shape[0] + tris.shape[0])
    nb = _boundary_components(edges, inc)
    orient = _orientable(tris.shape[0], inc, dirs)
    return TopologyReport(nb, orient, chi, classify(nb, orient, chi))


def classify_topology(mesh):
    """Invariants of a GammaMesh (or anything with a ``triangles`` array)."""
    return classify_triangles(mesh.triangles)


def combinatorial_triangles(p):
    if p == 3:
        raise UnsupportedCycleError("p = 3 is unsupported")
    if p < 4:
        raise InvalidInputError(f"need p >= 4, got {p}")
    k = np.arange(p)
    return np.column_stack([k, (k + 1) % p, (k + 2) % p])


def classify_combinatorial(p):
    """Abstract complex with vertices O_k and faces T_k = (k, k+1, k+2)."""
    return classify_triangles(combinatorial_triangles(p))
