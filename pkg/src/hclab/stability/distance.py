"""Euclidean distance from points to a triangle mesh in R^n.

The closest point on a triangle follows Ericson's region classification
(Real-Time Collision Detection, 5.1.5).  Brute force and the accelerated
index evaluate every (point, triangle) pair with the same compiled
routine, so the accelerated query reproduces the exhaustive scan bit for
bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from ..errors import InvalidInputError


@njit(cache=True)
def _dot(a, b):
    acc = 0.0
    for i in range(a.size):
        acc += a[i] * b[i]
    return acc


@njit(cache=True)
def _seg_sq(P, A, B, w):
    for i in range(P.size):
        w[i] = B[i] - A[i]
    den = _dot(w, w)
    t = 0.0
    if den > 0.0:
        num = 0.0
        for i in range(P.size):
            num += (P[i] - A[i]) * w[i]
        t = min(max(num / den, 0.0), 1.0)
    acc = 0.0
    for i in range(P.size):
        d = P[i] - (A[i] + t * w[i])
        acc += d * d
    return acc


@njit(cache=True)
def _pair_sq(P, A, B, C, ab, ac, w):
    n = P.size
    for i in range(n):
        ab[i] = B[i] - A[i]
        ac[i] = C[i] - A[i]
    d1 = d2 = d3 = d4 = d5 = d6 = 0.0
    for i in range(n):
        ap, bp, cp = P[i] - A[i], P[i] - B[i], P[i] - C[i]
        d1 += ab[i] * ap
        d2 += ac[i] * ap
        d3 += ab[i] * bp
        d4 += ac[i] * bp
        d5 += ab[i] * cp
        d6 += ac[i] * cp
    # barycentric weights (1 - v - w, v, w) of the closest point
    if d1 <= 0.0 and d2 <= 0.0:
        v, t = 0.0, 0.0
    elif d3 >= 0.0 and d4 <= d3:
        v, t = 1.0, 0.0
    else:
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            v, t = d1 / (d1 - d3), 0.0
        elif d6 >= 0.0 and d5 <= d6:
            v, t = 0.0, 1.0
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            v, t = 0.0, d2 / (d2 - d6)
        elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            v = 1.0 - t
        else:
            s = va + vb + vc
            if s == 0.0:
                v, t = np.nan, np.nan
            else:
                v, t = vb / s, vc / s
    acc = 0.0
    for i in range(n):
        d = P[i] - (A[i] + v * ab[i] + t * ac[i])
        acc += d * d
    if not np.isfinite(acc):
        # zero-area triangle: nearest of its three edges
        acc = min(_seg_sq(P, A, B, w), _seg_sq(P, B, C, w), _seg_sq(P, C, A, w))
    return acc


@njit(cache=True)
def _pairs(X, pi, A, B, C, ti, out):
    n = X.shape[1]
    ab, ac, w = np.empty(n), np.empty(n), np.empty(n)
    for r in range(pi.size):
        i, f = pi[r], ti[r]
        out[r] = np.sqrt(_pair_sq(X[i], A[f], B[f], C[f], ab, ac, w))


@njit(cache=True)
def _brute(X, A, B, C, out):
    n = X.shape[1]
    ab, ac, w = np.empty(n), np.empty(n), np.empty(n)
    for i in range(X.shape[0]):
        best = np.inf
        for f in range(A.shape[0]):
            d = np.sqrt(_pair_sq(X[i], A[f], B[f], C[f], ab, ac, w))
            if d < best:
                best = d
        out[i] = best


def point_triangle_distance(P, A, B, C):
    """Row-wise distance from P[i] to triangle (A[i], B[i], C[i])."""
    P, A, B, C = (np.ascontiguousarray(np.atleast_2d(M), dtype=float) for M in (P, A, B, C))
    idx = np.arange(P.shape[0])
    out = np.empty(P.shape[0])
    _pairs(P, idx, A, B, C, idx, out)
    return out


def _check(mesh):
    if mesh.triangles.size == 0:
        raise InvalidInputError("mesh has no triangles")


def _points(x, n):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != n:
        raise InvalidInputError(f"points have dimension {X.shape[1]}, mesh has {n}")
    return X, single


def distance_brute(x, mesh):
    """Exhaustive scan over all triangles."""
    _check(mesh)
    X, single = _points(x, mesh.n)
    V, T = mesh.vertices, mesh.triangles
    out = np.empty(X.shape[0])
    _brute(X, V[T[:, 0]], V[T[:, 1]], V[T[:, 2]], out)
    return out[0] if single else out


class TriangleIndex:
    """k-d tree over triangle centroids with a bounding-radius prune.

    For a query point the k nearest centroids give an upper bound U on the
    distance.  Any triangle at distance <= U has its centroid within
    U + r_f of the point, r_f being its centroid-to-vertex radius, so a
    ball query of radius U + max r_f followed by that per-triangle test
    keeps every minimizer.
    """

    def __init__(self, mesh, k_near=8, chunk=4096):
        _check(mesh)
        self.mesh = mesh
        V, T = mesh.vertices, mesh.triangles
        self.A, self.B, self.C = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
        self.cen = (self.A + self.B + self.C) / 3.0
        self.r = np.max(np.stack([np.linalg.norm(M - self.cen, axis=1)
                                  for M in (self.A, self.B, self.C)]), axis=0)
        self.r_max = float(self.r.max())
        self.tree = cKDTree(self.cen)
        self.k_near = min(k_near, T.shape[0])
        self.chunk = chunk

    def _pair_dist(self, X, pi, ti):
        out = np.empty(pi.size)
        _pairs(X, pi.astype(np.int64), self.A, self.B, self.C, ti.astype(np.int64), out)
        return out

    def _query(self, X):
        m = X.shape[0]
        _, near = self.tree.query(X, k=self.k_near)
        near = np.asarray(near).reshape(m, -1)
        pi = np.repeat(np.arange(m), near.shape[1])
        ub = self._pair_dist(X, pi, near.reshape(-1)).reshape(m, -1).min(axis=1)
        # the relative pads only enlarge candidate sets, never drop a minimizer
        pad = 1 + 1e-9
        cand = self.tree.query_ball_point(X, (ub + self.r_max) * pad + 1e-300)
        counts = np.array([len(c) for c in cand])
        pi = np.repeat(np.arange(m), counts)
        ti = np.concatenate([np.asarray(c, dtype=np.int64) for c in cand])
        lower = np.linalg.norm(X[pi] - self.cen[ti], axis=1) - self.r[ti]
        keep = lower <= ub[pi] * pad + 1e-300
        pi, ti = pi[keep], ti[keep]
        out = np.full(m, np.inf)
        np.minimum.at(out, pi, self._pair_dist(X, pi, ti))
        return out

    def query(self, x):
        X, single = _points(x, self.mesh.n)
        X = np.ascontiguousarray(X)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], self.chunk):
            out[s: s + self.chunk] = self._query(X[s: s + self.chunk])
        return out[0] if single else out


def mesh_index(mesh):
    idx = getattr(mesh, "_index", None)
    if idx is None:
        idx = TriangleIndex(mesh)
        mesh._index = idx
    return idx


def distance_to_gamma(x, mesh):
    """Distance from x (or each row of x) to the mesh of Gamma."""
    return mesh_index(mesh).query(x)
