"""Generalized Lotka-Volterra system and its axial equilibria.

The vector field is

    dx_i/dt = x_i (sigma_i - sum_j rho_ij x_j),   i = 1..n,

with rho_ii = 1.  Saddle ``k`` is the axial equilibrium O_k = sigma_k e_k.
Saddle indices are 1-based throughout the public API and wrap modulo p on
the cycle; coordinates p+1..n never belong to the cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSaddleError,
    InvalidInputError,
    UnsupportedCycleError,
)


def wrap(k, p):
    """Map any integer onto the cycle labels 1..p."""
    return (k - 1) % p + 1


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Dimensions, growth rates and inhibition matrix of the system."""

    n: int
    p: int
    sigma: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        sigma = _frozen(self.sigma)
        rho = _frozen(self.rho)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)
        n, p = self.n, self.p
        if int(n) != n or n < 1:
            raise InvalidInputError(f"n must be a positive integer, got {n!r}")
        if int(p) != p:
            raise InvalidInputError(f"p must be an integer, got {p!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "p", int(p))
        if p == 3:
            raise UnsupportedCycleError(
                "p = 3 is unsupported: the triples (k, k+1, k+2) close on themselves"
            )
        if not 4 <= p <= n:
            raise InvalidInputError(f"need 4 <= p <= n, got p={p}, n={n}")
        if sigma.shape != (n,):
            raise InvalidInputError(f"sigma has shape {sigma.shape}, expected ({n},)")
        if rho.shape != (n, n):
            raise InvalidInputError(f"rho has shape {rho.shape}, expected ({n}, {n})")
        if not (np.all(np.isfinite(sigma)) and np.all(sigma > 0)):
            raise InvalidInputError("all sigma_i must be finite and positive")
        if not (np.all(np.isfinite(rho)) and np.all(rho > 0)):
            bad = np.argwhere(~(np.isfinite(rho) & (rho > 0)))[0] + 1
            raise InvalidInputError(
                f"all rho_ij must be finite and positive (row {bad[0]}, column {bad[1]})"
            )
        off = np.flatnonzero(np.diag(rho) != 1.0)
        if off.size:
            raise InvalidInputError(f"rho_ii must equal 1 (row {off[0] + 1})")

    def replace(self, **changes):
        fields = dict(n=self.n, p=self.p, sigma=self.sigma, rho=self.rho)
        fields.update(changes)
        return SystemParams(**fields)

    def with_rho(self, i, j, value):
        """Copy with a single 1-based entry rho_ij changed."""
        rho = np.array(self.rho)
        rho[i - 1, j - 1] = value
        return self.replace(rho=rho)

    def to_dict(self):
        return {
            "n": self.n,
            "p": self.p,
            "sigma": self.sigma.tolist(),
            "rho": self.rho.tolist(),
        }


@dataclass(frozen=True)
class Equilibrium:
    k: int
    point: np.ndarray


@dataclass(frozen=True)
class SaddleSpectrum:
    """Closed-form eigenvalues at O_k.

    ``eigenvalues[j-1]`` is lambda_j^k.  Rates are ``None`` when the
    corresponding set is empty.
    """

    k: int
    eigenvalues: np.ndarray
    unstable_set: tuple
    leading_unstable: float | None
    strongest_unstable: float | None
    leading_stable: float | None
    nu: float | None


def _as_state(params, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (params.n,):
        raise InvalidInputError(f"state has shape {x.shape}, expected last axis {params.n}")
    return x


def vector_field(params, x):
    """Evaluate F(x); accepts a single state or a stack of states."""
    x = _as_state(params, x)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("state has non-finite components")
    return x * (params.sigma - x @ params.rho.T)


def jacobian(params, x):
    """Analytic Jacobian DF(x)."""
    x = _as_state(params, x)
    g = params.sigma - params.rho @ x
    return np.diag(g) - x[:, None] * params.rho


def equilibria(params):
    out = []
    for k in range(1, params.n + 1):
        pt = np.zeros(params.n)
        pt[k - 1] = params.sigma[k - 1]
        out.append(Equilibrium(k, pt))
    return out


def saddle_point(params, k):
    pt = np.zeros(params.n)
    pt[k - 1] = params.sigma[k - 1]
    return pt


def eigenvalues_at(params, k):
    """lambda_j^k = sigma_j - rho_jk sigma_k, with lambda_k^k = -sigma_k."""
    if not 1 <= k <= params.n:
        raise InvalidInputError(f"saddle index {k} outside 1..{params.n}")
    s = params.sigma
    lam = s - params.rho[:, k - 1] * s[k - 1]
    lam[k - 1] = -s[k - 1]
    return lam


def saddle_value(lam):
    """min |stable| / max unstable; None without unstable directions."""
    pos = lam[lam > 0]
    neg = lam[lam < 0]
    if pos.size == 0 or neg.size == 0:
        return None
    return float(np.min(-neg) / np.max(pos))


def spectrum_at(params, k):
    lam = eigenvalues_at(params, k)
    scale = np.maximum(params.sigma, params.rho[:, k - 1] * params.sigma[k - 1])
    zero = np.flatnonzero(np.abs(lam) <= 8 * np.finfo(float).eps * scale)
    if zero.size:
        raise DegenerateSaddleError(
            f"O_{k} is not hyperbolic: lambda_{zero[0] + 1} = 0"
        )
    pos = lam[lam > 0]
    neg = lam[lam < 0]
    lam.setflags(write=False)
    return SaddleSpectrum(
        k=k,
        eigenvalues=lam,
        unstable_set=tuple(int(j) + 1 for j in np.flatnonzero(lam > 0)),
        leading_unstable=float(pos.min()) if pos.size else None,
        strongest_unstable=float(pos.max()) if pos.size else None,
        leading_stable=float(neg.max()) if neg.size else None,
        nu=saddle_value(lam),
    )


def eigenvector_at(params, k, j):
    """Eigenvector of DF(O_k) for lambda_j^k, j != k.

    DF(O_k) is diagonal except for row k, so back-substitution gives
    e_j + c e_k with c = -sigma_k rho_kj / (lambda_j + sigma_k).  When
    lambda_j = -sigma_k the pair forms a Jordan block; the axis direction
    e_j is returned and the k-component is left at zero.
    """
    if j == k:
        v = np.zeros(params.n)
        v[k - 1] = 1.0
        return v
    lam = eigenvalues_at(params, k)
    sk = params.sigma[k - 1]
    v = np.zeros(params.n)
    v[j - 1] = 1.0
    den = lam[j - 1] + sk
    if abs(den) > 1e-12 * sk:
        v[k - 1] = -sk * params.rho[k - 1, j - 1] / den
    return v
