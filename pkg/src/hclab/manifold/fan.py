"""Orbit fans sweeping the two-dimensional unstable manifold of O_k.

W^u(O_k) in the orthant lies in the coordinate subspace of the triple
(k, k+1, k+2).  Its orbits leave O_k tangent to the plane spanned by the
two unstable eigenvectors and end at O_{k+2}; the two extreme orbits are
the heteroclinic connections Gamma_{k,k+2} (phi = 0) and the chain
Gamma_{k,k+1} + Gamma_{k+1,k+2} (phi = pi/2).

Each orbit is seeded at radius delta0 by flowing a point of the sup-square
of radius r_ref backwards under the linearization.  The square is swept by
a graded coordinate (see _SeedMap) because the faster unstable direction
dominates by the time orbits leave the saddle, so evenly spaced seeds
bunch up next to one extreme orbit.  Interior orbits are then inserted
where neighbouring rows are furthest apart on the surface.  The label phi
of an orbit is the angle of its unstable coefficients at r_ref,
(a_{k+1}, a_{k+2}) = |a| (sin phi, cos phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from ..errors import DivergenceError, PreconditionError, TraceFailure
from ..integrator import EventKind, IntegrationOptions, LogFlow, SaddleNeighborhood
from ..model import eigenvalues_at, eigenvector_at, wrap


@dataclass(frozen=True)
class Edge:
    """Heteroclinic orbit from O_a to O_b inside the (a, b) coordinate plane.

    ``points`` has columns (x_a, x_b), starts exactly at O_a and ends exactly
    at O_b; ``cumlen`` is the cumulative polyline length.
    """

    a: int
    b: int
    points: np.ndarray
    cumlen: np.ndarray

    @property
    def length(self):
        return float(self.cumlen[-1])


@dataclass(frozen=True, eq=False)
class OrbitFan:
    """Orbits of W^u(O_k) in the triple coordinates (x_k, x_{k+1}, x_{k+2}).

    The last orbit (phi = pi/2) is the composite Gamma_{k,k+1} followed by
    Gamma_{k+1,k+2}; ``split`` is the index of O_{k+1} in its polyline.
    """

    k: int
    triple: tuple
    angles: np.ndarray
    orbits: tuple
    cumlen: tuple
    arclengths: np.ndarray
    D_xy: float
    D_yz: float
    split: int
    delta0: float

    @property
    def D_pi2(self):
        return self.D_xy + self.D_yz

    @property
    def b(self):
        """Chart position of O_{k+1}: D_xy / D_{pi/2}."""
        return self.D_xy / self.D_pi2

    @property
    def D_xz(self):
        return float(self.arclengths[0])

    def sample(self, j, u):
        """Points of orbit j at normalized arclength u = d / D_phi."""
        d = np.asarray(u, dtype=float) * self.arclengths[j]
        c = self.cumlen[j]
        pts = self.orbits[j]
        return np.column_stack([np.interp(d, c, pts[:, i]) for i in range(3)])

    def embed(self, pts3, n):
        out = np.zeros((pts3.shape[0], n))
        out[:, np.array(self.triple) - 1] = pts3
        return out


def _polyline_length(pts):
    seg = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
    return np.concatenate([[0.0], np.cumsum(seg)])


def _run_to(params, x0, target, tol_end, t_max, gap, rtol, atol, what):
    """Integrate until the sup-distance to O_target drops below tol_end."""
    nb = SaddleNeighborhood(target, tol_end, tol_end / 10)
    opts = IntegrationOptions(rtol=rtol, atol=atol, neighborhoods=(nb,),
                              stop=lambda ev: ev.kind == EventKind.ENTER_V)
    try:
        traj = LogFlow(params, x0, opts).run(t_max)
    except DivergenceError as exc:
        raise TraceFailure(f"{what}: integration diverged at t = {exc.last_time:.6g}") from None
    if not traj.events or traj.events[-1].kind != EventKind.ENTER_V:
        o = np.zeros(params.n)
        o[target - 1] = params.sigma[target - 1]
        dist = float(np.abs(traj.final - o).max())
        raise TraceFailure(
            f"{what}: no arrival at O_{target} by t = {t_max:g} "
            f"(sup distance {dist:.3g}, final state {np.round(traj.final, 6).tolist()})"
        )
    _, xs = traj.refined(gap)
    return xs


def _defaults(params, k, delta0, r_ref, tol_end, t_max):
    sk = float(params.sigma[k - 1])
    delta0 = 1e-4 * sk if delta0 is None else float(delta0)
    r_ref = max(1e-2 * sk, 10 * delta0) if r_ref is None else float(r_ref)
    tol_end = 1e-7 * float(params.sigma.min()) if tol_end is None else float(tol_end)
    t_max = 5000.0 if t_max is None else float(t_max)
    return delta0, r_ref, tol_end, t_max


def trace_edge(params, a, b, *, delta0=None, tol_end=None, t_max=None, rtol=1e-10,
               atol=1e-10, gap=None):
    """Heteroclinic connection O_a -> O_b traced in the (a, b) plane."""
    lam = eigenvalues_at(params, a)
    if not lam[b - 1] > 0:
        raise PreconditionError(f"x_{b} is not an unstable direction at O_{a}")
    delta0, _, tol_end, t_max = _defaults(params, a, delta0, None, tol_end, t_max)
    gap = 1e-3 * float(params.sigma.min()) if gap is None else gap
    v = eigenvector_at(params, a, b)
    x0 = np.zeros(params.n)
    x0[a - 1] = params.sigma[a - 1]
    x0 += delta0 * v
    xs = _run_to(params, x0, b, tol_end, t_max, gap, rtol, atol, f"edge O_{a} -> O_{b}")
    pts = xs[:, [a - 1, b - 1]]
    pts = np.vstack([[params.sigma[a - 1], 0.0], pts, [0.0, params.sigma[b - 1]]])
    return Edge(a, b, pts, _polyline_length(pts))


def _pullback(a1, a2, lam1, lam2, delta0):
    """Flow (a1, a2) backwards under the linearization to radius delta0."""
    if a1 == 0.0:
        return 0.0, delta0
    if a2 == 0.0:
        return delta0, 0.0

    def radius(tau):
        return math.log(math.hypot(a1 * math.exp(-lam1 * tau), a2 * math.exp(-lam2 * tau)) / delta0)

    hi = 1.0
    while radius(hi) > 0:
        hi *= 2
    tau = brentq(radius, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return a1 * math.exp(-lam1 * tau), a2 * math.exp(-lam2 * tau)


def _grade(t, L):
    return math.expm1(L * t) / math.expm1(L)


class _SeedMap:
    """Seed coordinate mu in [0, 1] -> unstable coefficients at sup-radius r_ref.

    mu in [0, 1/2] runs along the face a_{k+2} = r_ref, mu in [1/2, 1] along
    a_{k+1} = r_ref.  The small coefficient is graded exponentially: by the
    time the orbit leaves the saddle it has been amplified by roughly
    (sigma_k / r_ref)^(ratio of rates), so equal steps in mu would waste
    almost every orbit on one side of the fan.
    """

    def __init__(self, lam1, lam2, sk, r_ref):
        self.r = r_ref
        self.LA = math.log1p((sk / r_ref) ** (lam1 / lam2)) + 1.0
        self.LB = math.log1p((sk / r_ref) ** (lam2 / lam1)) + 1.0

    def __call__(self, mu):
        if mu <= 0.5:
            return self.r * _grade(2 * mu, self.LA), self.r
        return self.r, self.r * _grade(2 * (1 - mu), self.LB)

    def uniform_angle(self, phi):
        """Coefficients at angle phi on the circle of radius r_ref."""
        return self.r * math.sin(phi), self.r * math.cos(phi)


def _row_gap(a, b, ca, cb, m=257):
    """Symmetric Hausdorff distance between two orbits sampled at equal u."""
    u = np.linspace(0.0, 1.0, m)
    pa = np.column_stack([np.interp(u * ca[-1], ca, a[:, i]) for i in range(3)])
    pb = np.column_stack([np.interp(u * cb[-1], cb, b[:, i]) for i in range(3)])
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return max(da.max(), db.max())


def _check_saddle(params, k):
    p = params.p
    lam = eigenvalues_at(params, k)
    k1, k2 = wrap(k + 1, p), wrap(k + 2, p)
    if not (lam[k1 - 1] > 0 and lam[k2 - 1] > 0):
        raise PreconditionError(f"O_{k} does not have unstable directions x_{k1}, x_{k2}")
    others = [j for j in range(1, params.n + 1) if j not in (k, k1, k2)]
    bad = [j for j in others if not lam[j - 1] < 0]
    if bad:
        raise PreconditionError(f"O_{k} has non-stable direction(s) {bad}")
    return lam[k1 - 1], lam[k2 - 1]


def trace_fan(params, k, m_angles=33, delta0=None, *, spacing="adaptive", r_ref=None,
              tol_end=None, t_max=None, rtol=1e-10, atol=1e-10, gap=None, edges=None):
    """Trace m_angles orbits of W^u(O_k), from phi = 0 to phi = pi/2.

    phi is the direction of the unstable coefficients
    (a_{k+1}, a_{k+2}) = |a| (sin phi, cos phi) where the orbit crosses the
    sup-radius r_ref.  With ``spacing="uniform"`` the angles are
    (j/(m-1)) pi/2.  With ``spacing="adaptive"`` (default) the interior
    orbits are inserted one at a time, each bisecting (in the graded seed
    coordinate) the pair of neighbouring orbits that are furthest apart, so
    the rows end up roughly equidistant on the surface.

    ``edges`` may map (a, b) to precomputed ``Edge`` objects and is filled
    in with the edges traced here.
    """
    if m_angles < 3:
        raise PreconditionError("m_angles must be at least 3")
    if spacing not in ("adaptive", "uniform"):
        raise PreconditionError(f"unknown spacing {spacing!r}")
    if not 1 <= k <= params.p:
        raise PreconditionError(f"saddle index {k} outside 1..{params.p}")
    lam1, lam2 = _check_saddle(params, k)
    p = params.p
    k1, k2 = wrap(k + 1, p), wrap(k + 2, p)
    _check_saddle(params, k1)
    delta0, r_ref, tol_end, t_max = _defaults(params, k, delta0, r_ref, tol_end, t_max)
    gap = 1e-3 * float(params.sigma.min()) if gap is None else gap
    sk = float(params.sigma[k - 1])
    v1 = eigenvector_at(params, k, k1)
    v2 = eigenvector_at(params, k, k2)
    tri = np.array([k, k1, k2]) - 1
    ok_pt = np.array([sk, 0.0, 0.0])
    end_pt = np.array([0.0, 0.0, params.sigma[k2 - 1]])
    edges = {} if edges is None else edges
    seeds = _SeedMap(lam1, lam2, sk, r_ref)

    def edge(a, b):
        if (a, b) not in edges:
            edges[(a, b)] = trace_edge(params, a, b, delta0=1e-4 * params.sigma[a - 1],
                                       tol_end=tol_end, t_max=t_max, rtol=rtol, atol=atol,
                                       gap=gap)
        return edges[(a, b)]

    def interior(a1, a2):
        phi = math.atan2(a1, a2)
        b1, b2 = _pullback(a1, a2, lam1, lam2, delta0)
        x0 = np.zeros(params.n)
        x0[k - 1] = sk
        x0 += b1 * v1 + b2 * v2
        xs = _run_to(params, x0, k2, tol_end, t_max, gap, rtol, atol,
                     f"W^u(O_{k}) orbit at phi = {phi:.6g}")
        return phi, np.vstack([ok_pt, xs[:, tri], end_pt])

    e = edge(k, k2)
    first_row = np.column_stack([e.points[:, 0], np.zeros(len(e.points)), e.points[:, 1]])
    e1, e2 = edge(k, k1), edge(k1, k2)
    half = np.column_stack([e1.points[:, 0], e1.points[:, 1], np.zeros(len(e1.points))])
    last_row = np.vstack([half, np.column_stack([np.zeros(len(e2.points)), e2.points])[1:]])
    split = len(half) - 1

    if spacing == "uniform":
        rows = [(0.0, first_row)]
        for phi in np.linspace(0.0, np.pi / 2, m_angles)[1:-1]:
            rows.append(interior(*seeds.uniform_angle(phi)))
        rows.append((np.pi / 2, last_row))
    else:
        mus = [0.0, 1.0]
        rows = [(0.0, first_row), (np.pi / 2, last_row)]
        cums = [_polyline_length(first_row), _polyline_length(last_row)]
        gaps = [_row_gap(first_row, last_row, cums[0], cums[1])]
        while len(rows) < m_angles:
            i = int(np.argmax(gaps))
            mu = 0.5 * (mus[i] + mus[i + 1])
            phi, pts = interior(*seeds(mu))
            c = _polyline_length(pts)
            mus.insert(i + 1, mu)
            rows.insert(i + 1, (phi, pts))
            cums.insert(i + 1, c)
            gaps[i: i + 1] = [
                _row_gap(rows[i][1], pts, cums[i], c),
                _row_gap(pts, rows[i + 2][1], c, cums[i + 2]),
            ]

    angles = np.array([r[0] for r in rows])
    orbits = tuple(r[1] for r in rows)
    cums = tuple(_polyline_length(o) for o in orbits)
    D = np.array([c[-1] for c in cums])
    D_xy = float(cums[-1][split])
    return OrbitFan(
        k=k,
        triple=(k, k1, k2),
        angles=angles,
        orbits=orbits,
        cumlen=cums,
        arclengths=D,
        D_xy=D_xy,
        D_yz=float(D[-1] - D_xy),
        split=split,
        delta0=delta0,
    )
