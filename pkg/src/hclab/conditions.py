"""Certification of the inequality families and a constructive sampler.

For saddle k of the cycle (indices mod p) with eigenvalues
lambda_j = sigma_j - rho_jk sigma_k:

* unstable:    lambda_{k+1} > 0 and lambda_{k+2} > 0
* stable:      lambda_j < 0 for every j outside {k, k+1, k+2}, 1 <= j <= n
* dissipative: max(lambda_{k+1}, lambda_{k+2}) < min(|lambda_j|, sigma_k)
* p23:         sigma_{k+1}/rho_{k+1,k} <= sigma_{k+2}/rho_{k+2,k}

Margins are signed slacks: positive means the inequality holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry3d import box_p23_max, eigen_margins, restrict_triple
from .model import SystemParams, eigenvalues_at, saddle_value, wrap

FAMILIES = ("unstable", "stable", "dissipative", "p23")


@dataclass(frozen=True)
class Violation:
    family: str
    k: int
    j: int | None
    margin: float

    def to_dict(self):
        return {"family": self.family, "k": self.k, "j": self.j, "margin": self.margin}


@dataclass(frozen=True)
class SaddleConditions:
    k: int
    unstable_ok: bool
    stable_ok: bool
    dissipative_ok: bool
    p23_ok: bool
    nu: float | None
    unstable_margin: float
    stable_margin: float
    dissipative_margin: float
    p23_margin: float
    box_p23_max: float
    triple_ev: dict

    @property
    def box_p23_ok(self):
        return bool(self.box_p23_max < 0)

    @property
    def triple_ok(self):
        return all(v > 0 for v in self.triple_ev.values())

    def to_dict(self):
        return {
            "k": self.k,
            "unstable_ok": self.unstable_ok,
            "stable_ok": self.stable_ok,
            "dissipative_ok": self.dissipative_ok,
            "p23_ok": self.p23_ok,
            "nu": self.nu,
            "margins": {
                "unstable": self.unstable_margin,
                "stable": self.stable_margin,
                "dissipative": self.dissipative_margin,
                "p23": self.p23_margin,
            },
            "box_p23_max": self.box_p23_max,
            "box_p23_ok": self.box_p23_ok,
            "triple_ev": dict(self.triple_ev),
            "triple_ok": self.triple_ok,
        }


@dataclass(frozen=True)
class ConditionReport:
    per_k: tuple
    violations: tuple

    @property
    def hyperbolic_cycle(self):
        return all(r.unstable_ok and r.stable_ok for r in self.per_k)

    @property
    def dissipative(self):
        return all(r.dissipative_ok for r in self.per_k)

    @property
    def p23(self):
        return all(r.p23_ok for r in self.per_k)

    @property
    def all_ok(self):
        return self.hyperbolic_cycle and self.dissipative and self.p23

    @property
    def box_p23(self):
        return all(r.box_p23_ok for r in self.per_k)

    @property
    def triples_ok(self):
        return all(r.triple_ok for r in self.per_k)

    def to_dict(self):
        return {
            "all_ok": self.all_ok,
            "hyperbolic_cycle": self.hyperbolic_cycle,
            "dissipative": self.dissipative,
            "p23": self.p23,
            "box_p23": self.box_p23,
            "triples_ok": self.triples_ok,
            "per_k": [r.to_dict() for r in self.per_k],
            "violations": [v.to_dict() for v in self.violations],
        }


def _saddle(params, k, viol):
    p, n = params.p, params.n
    s = params.sigma
    lam = eigenvalues_at(params, k)
    k1, k2 = wrap(k + 1, p), wrap(k + 2, p)
    unst = {k1: lam[k1 - 1], k2: lam[k2 - 1]}
    for j, v in unst.items():
        if not v > 0:
            viol.append(Violation("unstable", k, j, float(v)))
    others = [j for j in range(1, n + 1) if j not in (k, k1, k2)]
    stable_m = {j: -lam[j - 1] for j in others}
    for j, v in stable_m.items():
        if not v > 0:
            viol.append(Violation("stable", k, j, float(v)))
    bound = min([abs(lam[j - 1]) for j in others] + [s[k - 1]])
    diss = bound - max(unst.values())
    if not diss > 0:
        viol.append(Violation("dissipative", k, None, float(diss)))
    p23 = s[k2 - 1] / params.rho[k2 - 1, k - 1] - s[k1 - 1] / params.rho[k1 - 1, k - 1]
    if not p23 >= 0:
        viol.append(Violation("p23", k, None, float(p23)))
    tri = restrict_triple(params, k)
    return SaddleConditions(
        k=k,
        unstable_ok=all(v > 0 for v in unst.values()),
        stable_ok=all(v > 0 for v in stable_m.values()),
        dissipative_ok=bool(diss > 0),
        p23_ok=bool(p23 >= 0),
        nu=saddle_value(lam),
        unstable_margin=float(min(unst.values())),
        stable_margin=float(min(stable_m.values())) if stable_m else float("inf"),
        dissipative_margin=float(diss),
        p23_margin=float(p23),
        box_p23_max=box_p23_max(tri),
        triple_ev={key: float(v) for key, v in eigen_margins(tri).items()},
    )


def check_all(params):
    viol = []
    per_k = tuple(_saddle(params, k, viol) for k in range(1, params.p + 1))
    return ConditionReport(per_k, tuple(viol))


def canonical_p5():
    """sigma = 1, rho_{k+1,k} = 0.9, rho_{k+2,k} = 0.8, all others 1.3."""
    p = 5
    rho = np.full((p, p), 1.3)
    for k in range(p):
        rho[k, k] = 1.0
        rho[(k + 1) % p, k] = 0.9
        rho[(k + 2) % p, k] = 0.8
    return SystemParams(n=p, p=p, sigma=np.ones(p), rho=rho)


def _rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_params(n, p, seed, *, sigma=None, eps0=0.05, max_tries=10_000):
    """Random parameters inside the open region of all four families.

    Column k of rho is built for saddle k: first rho_{k+1,k} and
    rho_{k+2,k} so that both unstable eigenvalues lie in (m, sigma_k - m)
    and the p23 ordering holds, then every other entry of the column is put
    above the bound (sigma_{k+i} + sigma_j)/sigma_k - rho_{k+i,k}, which
    makes lambda_j negative and larger in modulus than both unstable rates.
    Columns of non-cycle coordinates only need positive entries.
    """
    if p == 3 or not 4 <= p <= n:
        # let SystemParams produce the canonical error
        SystemParams(n=n, p=p, sigma=np.ones(n), rho=np.ones((n, n)))
    rng = _rng(seed)
    if sigma is None:
        sig = rng.uniform(0.5, 2.0, size=n)
    else:
        sig = np.broadcast_to(np.asarray(sigma, dtype=float), (n,)).copy()
    m = 0.05 * float(sig.min())
    rho = np.eye(n)
    for k in range(p):
        i1, i2 = (k + 1) % p, (k + 2) % p
        sk, s1, s2 = sig[k], sig[i1], sig[i2]
        for _ in range(max_tries):
            lo1 = max(eps0, (s1 - sk + m) / sk)
            hi1 = (s1 - m) / sk
            r1 = rng.uniform(lo1, hi1)
            lo2 = max(eps0, (s2 - sk + m) / sk)
            hi2 = min((s2 - m) / sk, r1 * s2 / s1)
            if hi2 > lo2:
                r2 = rng.uniform(lo2, hi2)
                break
        else:
            raise RuntimeError("sampler failed to find admissible rates")
        rho[i1, k], rho[i2, k] = r1, r2
        lam1, lam2 = s1 - r1 * sk, s2 - r2 * sk
        for j in range(n):
            if j in (k, i1, i2):
                continue
            low = (max(lam1, lam2) + sig[j]) / sk
            rho[j, k] = low + rng.uniform(0.05, 1.0)
    for k in range(p, n):
        for j in range(n):
            if j != k:
                rho[j, k] = sig[j] / sig[k] + rng.uniform(0.05, 1.0)
    return SystemParams(n=n, p=p, sigma=sig, rho=rho)
