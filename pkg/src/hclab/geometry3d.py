"""Three-dimensional restriction to the triple (k, k+1, k+2).

In the restriction the coordinates are relabelled 1, 2, 3 and the
nullcline of x_i is the plane P_i: x_i + sum_{j != i} rho_ij x_j = sigma_i.
Planes are compared through their axis intercepts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .integrator import IntegrationOptions, LogFlow
from .model import wrap


@dataclass(frozen=True, eq=False)
class TripleParams:
    """Restricted 3D system; ``indices`` are the original 1-based labels."""

    sigma: np.ndarray
    rho: np.ndarray
    indices: tuple = (1, 2, 3)

    n = 3

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        rho = np.array(self.rho, dtype=float)
        if sigma.shape != (3,) or rho.shape != (3, 3):
            raise InvalidInputError("a triple needs 3 growth rates and a 3x3 matrix")
        if np.any(sigma <= 0) or np.any(rho <= 0):
            raise InvalidInputError("triple parameters must be positive")
        sigma.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)

    def r(self, i, j):
        """1-based rho_ij."""
        return float(self.rho[i - 1, j - 1])

    def s(self, i):
        return float(self.sigma[i - 1])


@dataclass(frozen=True)
class Plane3:
    label: str
    intercepts: tuple

    def height(self, x1, x2):
        """Graph z(x1, x2) of the plane over the (x1, x2) plane."""
        a1, a2, a3 = self.intercepts
        return a3 * (1.0 - np.asarray(x1) / a1 - np.asarray(x2) / a2)


def restrict_triple(params, k):
    if not 1 <= k <= params.p:
        raise InvalidInputError(f"triple index {k} outside 1..{params.p}")
    idx = [wrap(k + i, params.p) for i in range(3)]
    z = np.array(idx) - 1
    return TripleParams(params.sigma[z], params.rho[np.ix_(z, z)], tuple(idx))


def eigen_margins(tri):
    """Signed slack of (ev1)-(ev5); positive means satisfied."""
    s, r = tri.s, tri.r
    return {
        "ev1": min(s(2) - r(2, 1) * s(1), s(3) - r(3, 1) * s(1)),
        "ev2": s(3) - r(3, 2) * s(2),
        "ev3": r(1, 2) * s(2) - s(1),
        "ev4": r(1, 3) * s(3) - s(1),
        "ev5": r(2, 3) * s(3) - s(2),
    }


def planes(tri):
    s, r = tri.s, tri.r
    return {
        "P1": Plane3("P1", (s(1), s(1) / r(1, 2), s(1) / r(1, 3))),
        "P2": Plane3("P2", (s(2) / r(2, 1), s(2), s(2) / r(2, 3))),
        "P3": Plane3("P3", (s(3) / r(3, 1), s(3) / r(3, 2), s(3))),
        "Sigma": Plane3("Sigma", (s(1), s(2), s(3))),
    }


def dominates(S, R):
    """True iff R^i <= S^i for every axis with at least one strict."""
    a = np.asarray(S.intercepts)
    b = np.asarray(R.intercepts)
    return bool(np.all(b <= a) and np.any(b < a))


def triple_field(tri, x):
    x = np.asarray(x, dtype=float)
    return x * (tri.sigma - x @ tri.rho.T)


def p3_grid(tri, m=200):
    """Cell-centred points of P_3 inside the box B, strictly interior.

    Parameterized by (x1, x2) in (0, sigma_1) x (0, sigma_2) with
    x3 = sigma_3 - rho_31 x1 - rho_32 x2; points with x3 <= 0 are dropped.
    """
    s1, s2, s3 = tri.sigma
    u = (np.arange(m) + 0.5) / m
    x1, x2 = np.meshgrid(s1 * u, s2 * u, indexing="ij")
    x3 = s3 - tri.r(3, 1) * x1 - tri.r(3, 2) * x2
    keep = x3 > 0
    return np.column_stack([x1[keep], x2[keep], x3[keep]])


def box_p23_max(tri, m=200):
    """Largest value of dx2/dt over the P_3 grid (advisory box criterion)."""
    pts = p3_grid(tri, m)
    if pts.shape[0] == 0:
        return float("nan")
    return float(triple_field(tri, pts)[:, 1].max())


@dataclass(frozen=True)
class RegionVerdict:
    holds: bool
    via: str | None
    order_margin: float
    flux_max: float
    flux_min: float
    grid_points: int

    def to_dict(self):
        return {
            "holds": self.holds,
            "via": self.via,
            "order_margin": self.order_margin,
            "flux_max": self.flux_max,
            "flux_min": self.flux_min,
            "grid_points": self.grid_points,
        }


def invariant_region_check(tri, m=200):
    """Is the region under P_3 in the positive octant forward invariant?

    Accepted by the plane-domination hypothesis sigma_2/rho_21 <=
    sigma_3/rho_31, or else numerically: the outward flux
    rho_31 dx1/dt + rho_32 dx2/dt must be negative on every grid point of
    P_3 inside B.  ``flux_max`` is the worst grid value.
    """
    bad = [name for name, v in eigen_margins(tri).items() if not v > 0]
    if bad:
        raise PreconditionError(f"eigenvalue condition(s) violated: {', '.join(bad)}")
    order = tri.s(3) / tri.r(3, 1) - tri.s(2) / tri.r(2, 1)
    pts = p3_grid(tri, m)
    f = triple_field(tri, pts)
    flux = tri.r(3, 1) * f[:, 0] + tri.r(3, 2) * f[:, 1]
    fmax, fmin = float(flux.max()), float(flux.min())
    if order >= 0:
        holds, via = True, "domination"
    elif fmax < 0:
        holds, via = True, "grid"
    else:
        holds, via = False, None
    return RegionVerdict(holds, via, float(order), fmax, fmin, int(pts.shape[0]))


@dataclass(frozen=True)
class SinkVerdict:
    converged: bool
    t_hit: float | None
    final_distance: float


def in_region(tri, x):
    """Closed region under P_3 in the positive octant."""
    x = np.asarray(x, dtype=float)
    below = tri.s(3) - tri.r(3, 1) * x[0] - tri.r(3, 2) * x[1] - x[2]
    return bool(np.all(x >= 0) and below >= 0)


def converge_to_sink(tri, x0, tol=1e-6, t_max=500.0, rtol=1e-10, atol=1e-10):
    """Does the orbit of x0 come within ``tol`` (sup norm) of (0, 0, sigma_3)?"""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (3,):
        raise InvalidInputError("x0 must have 3 components")
    if not in_region(tri, x0):
        raise PreconditionError("x0 is not in the region under P_3")
    if not x0[2] > 0:
        raise PreconditionError("x0 lies in the plane x3 = 0, which is invariant")
    sink = np.array([0.0, 0.0, tri.s(3)])
    flow = LogFlow(tri, x0, IntegrationOptions(rtol=rtol, atol=atol))
    traj = flow.run(t_max)
    ts, xs = traj.times, traj.states
    dist = np.abs(xs - sink).max(axis=1)
    hit = np.flatnonzero(dist < tol)
    if hit.size == 0:
        return SinkVerdict(False, None, float(dist[-1]))
    i = hit[0]
    if i == 0:
        return SinkVerdict(True, 0.0, float(dist[0]))
    lo, hi = ts[i - 1], ts[i]
    for _ in range(100):
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if np.abs(traj.at(mid) - sink).max() < tol:
            hi = mid
        else:
            lo = mid
    return SinkVerdict(True, float(hi), float(np.abs(traj.at(hi) - sink).max()))
