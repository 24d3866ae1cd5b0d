"""Triangulated model of the heteroclinic surface Gamma.

Gamma is the union of the closures of the p unstable manifolds W^u(O_k),
each a curved triangle T_k with corners O_k, O_{k+1}, O_{k+2}.  T_k is
meshed on its (u, phi) chart: rows are orbits of its fan resampled at
uniform normalized arclength u, consecutive rows are zipped into a
triangle strip.  Neighbouring triangles T_{k-1} and T_k share the edge
Gamma_{k,k+1}, whose vertices are created once; the edges Gamma_{k,k+2}
belong to T_k alone and form the boundary of Gamma.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from ..errors import InvalidInputError, MeshConsistencyError
from ..io import SCHEMA, atomic_write, dumps, read_json
from ..model import wrap
from .fan import trace_fan
from .topology import edge_table


def chart_map(u, phi, b):
    """Chart of one heteroclinic triangle onto the planar triangle
    A = (0, 0), B = (b, 1/2), C = (1, 0):

        v = u / (2b) tan(phi/2)              for u <= b
        v = (1 - u) / (2(1 - b)) tan(phi/2)  for u >= b
    """
    u = np.asarray(u, dtype=float)
    t = np.tan(np.asarray(phi, dtype=float) / 2)
    v = np.where(u <= b, u / (2 * b) * t, (1 - u) / (2 * (1 - b)) * t)
    return u, v


@dataclass(frozen=True)
class ChartInfo:
    k: int
    b: float
    D_xy: float
    D_yz: float
    angles: tuple
    arclengths: tuple

    def to_dict(self):
        return {
            "k": self.k,
            "b": self.b,
            "D_xy": self.D_xy,
            "D_yz": self.D_yz,
            "angles": list(self.angles),
            "arclengths": list(self.arclengths),
        }


@dataclass(eq=False)
class GammaMesh:
    """Indexed triangle mesh of Gamma in the ambient n-space.

    ``tags[i] = (k, u, phi)`` gives the chart of vertex i; the saddle
    vertex O_k carries (k, 0, 0).  ``provenance[f]`` is the k of the
    triangle T_k that face f belongs to.
    """

    n: int
    p: int
    vertices: np.ndarray
    tags: np.ndarray
    triangles: np.ndarray
    provenance: np.ndarray
    charts: tuple = ()
    m_arc: int = 0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.tags = np.asarray(self.tags, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.provenance = np.asarray(self.provenance, dtype=np.int64)
        self._edges = None
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise InvalidInputError("triangle index out of range")

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    def edge_adjacency(self):
        """(edges, incident triangles, traversal directions); see edge_table."""
        if self._edges is None:
            self._edges = edge_table(self.triangles)
        return self._edges

    def boundary_edges(self):
        edges, inc, _ = self.edge_adjacency()
        return edges[inc[:, 1] < 0]

    def saddle_vertex(self, k):
        """Index of the vertex at O_k."""
        hit = np.flatnonzero((self.tags[:, 0] == k) & (self.tags[:, 1] == 0.0))
        return int(hit[0])

    def area(self):
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        ab, ac = b - a, c - a
        g = (np.einsum("ij,ij->i", ab, ab) * np.einsum("ij,ij->i", ac, ac)
             - np.einsum("ij,ij->i", ab, ac) ** 2)
        return float(0.5 * np.sqrt(np.maximum(g, 0.0)).sum())

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "n": self.n,
            "p": self.p,
            "vertices": self.vertices.tolist(),
            "tags": self.tags.tolist(),
            "triangles": self.triangles.tolist(),
            "provenance": self.provenance.tolist(),
            "charts": [c.to_dict() for c in self.charts],
            "m_arc": self.m_arc,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            charts = tuple(
                ChartInfo(c["k"], c["b"], c["D_xy"], c["D_yz"], tuple(c["angles"]),
                          tuple(c["arclengths"]))
                for c in d.get("charts", [])
            )
            return cls(n=int(d["n"]), p=int(d["p"]), vertices=np.array(d["vertices"], dtype=float),
                       tags=np.array(d["tags"], dtype=float),
                       triangles=np.array(d["triangles"], dtype=np.int64).reshape(-1, 3),
                       provenance=np.array(d["provenance"], dtype=np.int64), charts=charts,
                       m_arc=int(d.get("m_arc", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed mesh: {exc}") from None

    def save_json(self, path):
        atomic_write(path, dumps(self.to_dict()))

    @classmethod
    def load_json(cls, path):
        return cls.from_dict(read_json(path))

    def to_obj(self):
        """Wavefront OBJ text, one group per chart, each chart projected onto
        its own triple coordinates (x_k, x_{k+1}, x_{k+2})."""
        lines = ["# hclab heteroclinic surface", f"# schema: {SCHEMA}"]
        base = 1
        for k in range(1, self.p + 1):
            faces = self.triangles[self.provenance == k]
            if faces.size == 0:
                continue
            used, local = np.unique(faces, return_inverse=True)
            cols = [wrap(k + i, self.p) - 1 for i in range(3)]
            lines.append(f"g chart_{k}")
            for v in self.vertices[used][:, cols]:
                lines.append("v %.17g %.17g %.17g" % tuple(v))
            for f in local.reshape(-1, 3) + base:
                lines.append("f %d %d %d" % tuple(f))
            base += used.size
        return "\n".join(lines) + "\n"

    def save_obj(self, path):
        atomic_write(path, self.to_obj())


def _zip_rows(ia, ua, ib, ub):
    """Triangulate the strip between two rows sharing both end vertices."""
    out = []
    i = j = 0
    na, nb = len(ia) - 1, len(ib) - 1
    while i < na or j < nb:
        if j == nb or (i < na and ua[i + 1] <= ub[j + 1]):
            tri = (ia[i], ia[i + 1], ib[j])
            i += 1
        else:
            tri = (ia[i], ib[j + 1], ib[j])
            j += 1
        if len(set(tri)) == 3:
            out.append(tri)
    return out


def _stitch_check(fans, tol, m=129):
    """Fan k's path beyond O_{k+1} and fan (k+1)'s path up to O_{k+2} both
    trace Gamma_{k+1,k+2}; compare lengths and positions."""
    p = len(fans)
    for a in range(p):
        f, g = fans[a], fans[(a + 1) % p]
        D1, D2 = f.D_yz, g.D_xy
        if abs(D1 - D2) > tol * max(D1, D2):
            raise MeshConsistencyError(
                f"edge Gamma_{f.triple[1]},{f.triple[2]}: lengths {D1:.9g} vs {D2:.9g}"
            )
        s = np.linspace(0.0, 1.0, m)
        pf = f.orbits[-1][f.split:]
        cf = f.cumlen[-1][f.split:] - f.cumlen[-1][f.split]
        pg = g.orbits[-1][: g.split + 1]
        cg = g.cumlen[-1][: g.split + 1]
        # fan k sees (x_k, x_{k+1}, x_{k+2}); fan k+1 sees (x_{k+1}, x_{k+2}, x_{k+3})
        A = np.column_stack([np.interp(s * D1, cf, pf[:, i]) for i in (1, 2)])
        B = np.column_stack([np.interp(s * D2, cg, pg[:, i]) for i in (0, 1)])
        dev = np.abs(A - B).max()
        if dev > tol * max(D1, D2):
            raise MeshConsistencyError(
                f"edge Gamma_{f.triple[1]},{f.triple[2]}: positions differ by {dev:.3g}"
            )


def trace_all(params, m_angles, jobs=1, **trace_kw):
    """Fans for k = 1..p, optionally in worker processes (results in k order)."""
    ks = list(range(1, params.p + 1))
    fn = partial(_trace_one, params, m_angles, trace_kw)
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, ks))
    return [fn(k) for k in ks]


def _trace_one(params, m_angles, kw, k):
    return trace_fan(params, k, m_angles, **kw)


def build_gamma(params, m_angles=33, m_arc=64, *, jobs=1, stitch_tol=1e-3, fans=None,
                **trace_kw):
    """Trace every fan and assemble the mesh of Gamma."""
    if m_arc < 4:
        raise InvalidInputError("m_arc must be at least 4")
    p, n = params.p, params.n
    if fans is None:
        fans = trace_all(params, m_angles, jobs=jobs, **trace_kw)
    _stitch_check(fans, stitch_tol)

    verts, tags = [], []

    def add(points, tag_rows):
        start = sum(len(v) for v in verts)
        verts.append(points)
        tags.append(tag_rows)
        return np.arange(start, start + len(points))

    saddle = {}
    for k in range(1, p + 1):
        pt = np.zeros((1, n))
        pt[0, k - 1] = params.sigma[k - 1]
        saddle[k] = int(add(pt, np.array([[k, 0.0, 0.0]]))[0])

    # shared vertices of Gamma_{a,a+1}, owned by fan a (first half of its pi/2 row)
    n_e = max(1, m_arc // 2 - 1)
    edge_idx, edge_d = {}, {}
    for f in fans:
        a = f.k
        c = f.cumlen[-1][: f.split + 1]
        pts = f.orbits[-1][: f.split + 1]
        d = np.linspace(0.0, f.D_xy, n_e + 2)[1:-1]
        p3 = np.column_stack([np.interp(d, c, pts[:, i]) for i in range(3)])
        tag = np.column_stack([np.full(n_e, a), d / f.D_pi2, np.full(n_e, np.pi / 2)])
        edge_idx[a] = add(f.embed(p3, n), tag)
        edge_d[a] = d

    tris, prov = [], []
    u_grid = np.linspace(0.0, 1.0, m_arc)
    for f in fans:
        k, k1, k2 = f.triple
        rows = []
        for j in range(len(f.angles) - 1):
            inner = u_grid[1:-1]
            p3 = f.sample(j, inner)
            tag = np.column_stack([np.full(inner.size, k), inner, np.full(inner.size, f.angles[j])])
            idx = add(f.embed(p3, n), tag)
            rows.append((np.concatenate([[saddle[k]], idx, [saddle[k2]]]), u_grid))
        g = fans[(k1 - 1)]
        u_last = np.concatenate([
            [0.0], edge_d[k] / f.D_pi2, [f.b],
            (f.D_xy + edge_d[k1] * (f.D_yz / g.D_xy)) / f.D_pi2, [1.0],
        ])
        i_last = np.concatenate([[saddle[k]], edge_idx[k], [saddle[k1]], edge_idx[k1], [saddle[k2]]])
        rows.append((i_last, u_last))
        for (ia, ua), (ib, ub) in zip(rows[:-1], rows[1:]):
            t = _zip_rows(ia, ua, ib, ub)
            tris.extend(t)
            prov.extend([k] * len(t))

    charts = tuple(
        ChartInfo(f.k, f.b, f.D_xy, f.D_yz, tuple(f.angles.tolist()), tuple(f.arclengths.tolist()))
        for f in fans
    )
    return GammaMesh(
        n=n, p=p,
        vertices=np.vstack(verts),
        tags=np.vstack(tags),
        triangles=np.array(tris, dtype=np.int64).reshape(-1, 3),
        provenance=np.array(prov, dtype=np.int64),
        charts=charts,
        m_arc=m_arc,
    )


def row_spacing(fan):
    """Largest gap between neighbouring D_phi values (continuity diagnostic)."""
    return float(np.max(np.abs(np.diff(fan.arclengths)))) if len(fan.arclengths) > 1 else math.nan
