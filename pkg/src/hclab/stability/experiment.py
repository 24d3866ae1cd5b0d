"""Contraction and stability experiments around the heteroclinic surface.

A trajectory that starts close to Gamma passes the saddles in turn.  Near
O_k the distance to Gamma is carried by the stable coordinates xi, and one
passage maps an entry offset |eta| to an exit offset of order
C |eta|^{nu - e}.  With nu > 1 at every saddle the distance shrinks
faster than geometrically, lap after lap, until it reaches the resolution
of the mesh that stands in for Gamma.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ..conditions import check_all
from ..errors import ChannelViolationError, InvalidInputError, PreconditionError
from ..integrator import (
    EventKind,
    IntegrationOptions,
    LogFlow,
    default_delta,
    neighborhoods,
    off_triple,
    passage_map,
)
from ..model import eigenvalues_at, wrap
from .distance import mesh_index


@dataclass(frozen=True)
class PassageRecord:
    """One visit to V_k: distances to Gamma and offsets at entry and exit."""

    k: int
    entry_distance: float
    exit_distance: float
    entry_eta: float
    exit_xi: float
    T: float
    t_entry: float = 0.0

    def __post_init__(self):
        if self.entry_distance < 0 or self.exit_distance < 0:
            raise InvalidInputError("distances must be non-negative")
        if not self.T > 0:
            raise InvalidInputError("passage time must be positive")

    def to_dict(self):
        return {
            "k": self.k,
            "entry_distance": self.entry_distance,
            "exit_distance": self.exit_distance,
            "entry_eta": self.entry_eta,
            "exit_xi": self.exit_xi,
            "T": self.T,
            "t_entry": self.t_entry,
        }


def transition_labels(saddles, p):
    labels = []
    for a, b in zip(saddles[:-1], saddles[1:]):
        step = (b - a) % p
        if step not in (1, 2):
            raise ChannelViolationError(f"transition O_{a} -> O_{b} is not +1 or +2 mod {p}")
        labels.append(step)
    return tuple(labels)


@dataclass(frozen=True)
class Itinerary:
    saddles: tuple
    labels: tuple

    def counts(self):
        return {1: self.labels.count(1), 2: self.labels.count(2)}

    def to_dict(self):
        return {"saddles": list(self.saddles), "labels": list(self.labels)}


def extract_itinerary(traj, params, delta=None):
    """Saddles in the order their neighbourhoods are entered.

    ``traj`` is a Trajectory or a plain list of events.  With ``delta``
    given, only events of neighbourhoods of that radius count.
    """
    events = traj.events if hasattr(traj, "events") else list(traj)
    seq = tuple(
        e.k for e in events
        if e.kind == EventKind.ENTER_V and (delta is None or e.delta == delta)
    )
    return Itinerary(seq, transition_labels(seq, params.p))


# ---------------------------------------------------------------- contraction


@dataclass(frozen=True)
class ContractionFit:
    k: int
    s: float
    C: float
    e: float
    nu: float
    dissipative: bool
    eta0: tuple
    xi_T: tuple
    T: tuple
    residuals: tuple
    direction: tuple

    @property
    def max_residual(self):
        return max(abs(r) for r in self.residuals)

    def to_dict(self):
        return {
            "k": self.k,
            "s": self.s,
            "C": self.C,
            "e": self.e,
            "nu": self.nu,
            "dissipative": self.dissipative,
            "direction": list(self.direction),
            "points": [
                {"eta0": a, "xi_T": b, "T": c, "residual_log10": r}
                for a, b, c, r in zip(self.eta0, self.xi_T, self.T, self.residuals)
            ],
        }


def contraction_experiment(params, k, delta=None, eps_list=(1e-3, 1e-4, 1e-5, 1e-6), *,
                           direction=None, epsilon=None, rtol=1e-10, atol=1e-10):
    """Fit log10|xi(T)| = log10 C + s log10|eta(0)| over single passages.

    Each passage starts with every stable coordinate at delta and
    eta(0) = eps * direction / max(direction).  The fit runs whether or not
    the dissipative inequality holds at O_k; ``dissipative`` reports it.
    """
    if not 1 <= k <= params.p:
        raise InvalidInputError(f"saddle index {k} outside 1..{params.p}")
    delta = default_delta(params) if delta is None else float(delta)
    eps = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if eps.size < 2 or np.any(eps <= 0):
        raise PreconditionError("eps_list needs at least two positive values")
    if math.log10(eps[0] / eps[-1]) < 3 - 1e-9:
        raise PreconditionError("eps_list must span at least three decades")
    d = np.array([1.0, 1.0] if direction is None else direction, dtype=float)
    if d.shape != (2,) or np.any(d < 0) or not d.max() > 0:
        raise InvalidInputError("direction must be two non-negative numbers, not both zero")
    d = d / d.max()
    off = off_triple(params, k)
    xi0 = np.full(off.size, delta)
    T, xi = [], []
    for e in eps:
        res = passage_map(params, k, xi0, e * d, delta, epsilon=epsilon, rtol=rtol, atol=atol)
        T.append(res.T)
        xi.append(float(np.max(np.abs(res.xi_T))))
    lx, ly = np.log10(eps), np.log10(xi)
    s, logC = np.polyfit(lx, ly, 1)
    resid = ly - (logC + s * lx)
    rep = check_all(params).per_k[k - 1]
    nu = rep.nu
    return ContractionFit(
        k=k, s=float(s), C=float(10**logC), e=float(max(0.0, nu - s)), nu=float(nu),
        dissipative=bool(rep.dissipative_ok),
        eta0=tuple(eps.tolist()), xi_T=tuple(xi), T=tuple(T),
        residuals=tuple(resid.tolist()), direction=tuple(d.tolist()),
    )


# ---------------------------------------------------------------- mesh floor


def mesh_floor(params, mesh, *, jobs=1, **trace_kw):
    """Discretization error of ``mesh``: the largest distance from a vertex
    of the mesh refined twice in both chart directions to ``mesh``."""
    from ..manifold import build_gamma

    if not mesh.charts or not mesh.m_arc:
        raise InvalidInputError("mesh does not record its resolution; pass the floor explicitly")
    m_angles = len(mesh.charts[0].angles)
    fine = build_gamma(params, 2 * m_angles - 1, 2 * mesh.m_arc - 1, jobs=jobs, **trace_kw)
    return float(np.max(mesh_index(mesh).query(fine.vertices)))


# ---------------------------------------------------------------- stability


@dataclass
class TrialResult:
    trial: int
    start_vertex: int
    start_point: np.ndarray
    start_distance: float
    passages: list = field(default_factory=list)
    enter_saddles: list = field(default_factory=list)
    enter_distances: list = field(default_factory=list)
    itinerary: Itinerary | None = None
    lap_entry: list = field(default_factory=list)
    lap_exit: list = field(default_factory=list)
    lap_ok: list = field(default_factory=list)
    lap_floor_limited: list = field(default_factory=list)
    max_distance: float = 0.0
    alarm: bool = False
    alarm_time: float | None = None
    timeout: bool = False
    violation: str | None = None
    final_distance: float = math.nan
    t_end: float = 0.0

    @property
    def completed(self):
        return not (self.timeout or self.violation)

    def to_dict(self):
        return {
            "trial": self.trial,
            "start_vertex": self.start_vertex,
            "start_point": self.start_point.tolist(),
            "start_distance": self.start_distance,
            "itinerary": self.itinerary.to_dict() if self.itinerary else None,
            "enter_saddles": list(self.enter_saddles),
            "enter_distances": list(self.enter_distances),
            "laps": [
                {"entry": a, "exit": b, "ok": c, "floor_limited": d}
                for a, b, c, d in zip(self.lap_entry, self.lap_exit, self.lap_ok,
                                      self.lap_floor_limited)
            ],
            "passages": [r.to_dict() for r in self.passages],
            "max_distance": self.max_distance,
            "alarm": self.alarm,
            "alarm_time": self.alarm_time,
            "timeout": self.timeout,
            "violation": self.violation,
            "final_distance": self.final_distance,
            "t_end": self.t_end,
        }


@dataclass
class StabilityReport:
    p: int
    eps0: float
    laps: int
    seed: int
    delta: float
    floor: float
    trials: list

    @property
    def alarms(self):
        return sum(t.alarm for t in self.trials)

    @property
    def timeouts(self):
        return sum(t.timeout for t in self.trials)

    @property
    def violations(self):
        return sum(t.violation is not None for t in self.trials)

    @property
    def label_counts(self):
        c = {1: 0, 2: 0}
        for t in self.trials:
            if t.itinerary:
                for key, v in t.itinerary.counts().items():
                    c[key] += v
        return c

    @property
    def laps_ok(self):
        done = [t for t in self.trials if t.completed]
        return bool(done) and all(len(t.lap_ok) == self.laps and all(t.lap_ok) for t in done)

    @property
    def passed(self):
        c = self.label_counts
        return (self.alarms == 0 and self.violations == 0 and self.laps_ok
                and c[1] > 0 and c[2] > 0)

    def to_dict(self):
        c = self.label_counts
        return {
            "p": self.p,
            "eps0": self.eps0,
            "laps": self.laps,
            "seed": self.seed,
            "delta": self.delta,
            "floor": self.floor,
            "passed": self.passed,
            "summary": {
                "trials": len(self.trials),
                "alarms": self.alarms,
                "timeouts": self.timeouts,
                "violations": self.violations,
                "laps_ok": self.laps_ok,
                "max_distance": max(t.max_distance for t in self.trials),
                "labels": {"+1": c[1], "+2": c[2]},
            },
            "trials": [t.to_dict() for t in self.trials],
        }


def trial_rng(seed, trial):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def perturbed_start(mesh, eps0, rng):
    """Random non-saddle vertex pushed by eps0 along a uniform direction,
    negative components reflected back into the orthant."""
    cand = np.flatnonzero(mesh.tags[:, 1] != 0)
    vi = int(cand[rng.integers(cand.size)])
    v = mesh.vertices[vi]
    d = rng.standard_normal(v.size)
    d /= np.linalg.norm(d)
    x = v + eps0 * d
    neg = x < 0
    x[neg] = v[neg] - eps0 * d[neg]
    return vi, np.maximum(x, 0.0)


def _eta(params, k, x):
    p = params.p
    return float(max(x[wrap(k + 1, p) - 1], x[wrap(k + 2, p) - 1]))


def _unstable_floor(params):
    rates = []
    for k in range(1, params.p + 1):
        lam = eigenvalues_at(params, k)
        rates += [lam[wrap(k + i, params.p) - 1] for i in (1, 2)]
    return min(r for r in rates if r > 0)


def run_trial(params, mesh, eps0, laps, seed, trial, *, delta, floor, rtol=1e-10, atol=1e-10,
              sample_gap=None):
    p = params.p
    rng = trial_rng(seed, trial)
    vi, x0 = perturbed_start(mesh, eps0, rng)
    index = mesh_index(mesh)
    res = TrialResult(trial, vi, x0, float(index.query(x0)))
    alarm_at = 10 * max(eps0, floor)
    gap = sample_gap or max(eps0, floor, 1e-3 * float(np.min(params.sigma)))
    opts = IntegrationOptions(rtol=rtol, atol=atol, neighborhoods=neighborhoods(params, delta))
    flow = LogFlow(params, x0, opts)
    t_base = 10 * (math.log(1 / max(eps0, 1e-16)) + 10) / _unstable_floor(params)
    durations = []
    need = laps * p + 1
    open_entry = None
    res.max_distance = res.start_distance

    def is_entry(ev):
        return ev.kind == EventKind.ENTER_V

    while len(res.enter_saddles) < need:
        # a stall is no entry for ten times the longest completed segment
        limit = 10 * max(durations + [t_base])
        t0 = flow.t
        traj = flow.run(t0 + limit, stop=is_entry)
        ts, xs = traj.refined(gap)
        states = [e.state for e in traj.events]
        dd = index.query(np.vstack([xs] + states)) if states else index.query(xs)
        dpath, dev = dd[: len(xs)], dd[len(xs):]
        res.max_distance = max(res.max_distance, float(dpath.max()))
        res.final_distance = float(dpath[-1])
        res.t_end = flow.t
        hit = np.flatnonzero(dpath > alarm_at)
        if hit.size and not res.alarm:
            # the trial still runs to completion so its laps are reported
            res.alarm, res.alarm_time = True, float(ts[hit[0]])
        for ev, de in zip(traj.events, dev):
            if ev.kind == EventKind.ENTER_V:
                res.enter_saddles.append(ev.k)
                res.enter_distances.append(float(de))
                open_entry = (ev.k, ev.time, float(de), _eta(params, ev.k, ev.state))
            elif ev.kind == EventKind.EXIT_V and open_entry and open_entry[0] == ev.k:
                k, t_in, d_in, eta_in = open_entry
                xi = float(np.max(ev.state[off_triple(params, k)], initial=0.0))
                res.passages.append(PassageRecord(k, d_in, float(de), eta_in, xi,
                                                  ev.time - t_in, t_in))
                open_entry = None
        if not (traj.events and is_entry(traj.events[-1])):
            res.timeout = True
            break
        durations.append(flow.t - t0)
    try:
        res.itinerary = Itinerary(tuple(res.enter_saddles),
                                  transition_labels(res.enter_saddles, p))
    except ChannelViolationError as exc:
        res.violation = str(exc)
    D = res.enter_distances
    for j in range(laps):
        if (j + 1) * p >= len(D):
            break
        a, b = D[j * p], D[(j + 1) * p]
        at_floor = a <= 2 * floor
        ok = b <= 0.5 * a or (at_floor and b <= 2 * floor)
        res.lap_entry.append(a)
        res.lap_exit.append(b)
        res.lap_ok.append(bool(ok))
        res.lap_floor_limited.append(bool(ok and not b <= 0.5 * a))
    return res


def stability_experiment(params, mesh, eps0=1e-3, laps=3, trials=50, *, seed=0, delta=None,
                         floor=None, jobs=1, rtol=1e-10, atol=1e-10, sample_gap=None):
    """Perturb random mesh points by eps0 and follow them for ``laps`` laps.

    A lap is p consecutive neighbourhood entries; it contracts when the
    distance to the mesh at its last entry is at most half that at its
    first, or, once the first is within twice the mesh floor, when both
    stay within that band.  Distances above 10 max(eps0, floor) anywhere
    along the sampled path raise the instability alarm of the trial.
    """
    rep = check_all(params)
    if not rep.all_ok:
        raise PreconditionError("parameters fail the conditions: "
                                + ", ".join(f"{v.family}@{v.k}" for v in rep.violations))
    if mesh.p != params.p or mesh.n != params.n:
        raise InvalidInputError("mesh and parameters describe different systems")
    if not eps0 >= 0 or laps < 1 or trials < 1:
        raise InvalidInputError("need eps0 >= 0, laps >= 1 and trials >= 1")
    delta = default_delta(params) if delta is None else float(delta)
    if floor is None:
        floor = mesh_floor(params, mesh, jobs=jobs)
    fn = partial(run_trial, params, mesh, eps0, laps, seed, delta=delta, floor=floor,
                 rtol=rtol, atol=atol, sample_gap=sample_gap)
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(fn, range(trials)))
    else:
        results = [fn(i) for i in range(trials)]
    return StabilityReport(params.p, float(eps0), laps, seed, delta, float(floor), results)
