"""Forward integration of the Lotka-Volterra flow with saddle events.

Two schemes are available.  ``rk45`` is an adaptive Dormand-Prince 5(4)
pair run in logarithmic coordinates on the support of the state (the
coordinates that are non-zero), which keeps the orthant invariant exactly
and resolves the exponentially small components near the saddles.  ``rk4``
is the classical fixed-step scheme on x itself, with clamping of roundoff
below zero.

Events are detected by a sign change of the neighbourhood functions across
a step and refined by bisection on the dense output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels as K
from .errors import (
    DivergenceError,
    IntegratorFailure,
    InvalidInputError,
    PassageFailure,
    PreconditionError,
)
from .model import wrap


class EventKind(str, Enum):
    ENTER_V = "enter_V"
    EXIT_V = "exit_V"
    CROSS_S0 = "cross_S0"
    CROSS_S1 = "cross_S1"


@dataclass(frozen=True)
class SaddleNeighborhood:
    """Sup-norm box of radius delta around O_k with entry half-width epsilon."""

    k: int
    delta: float
    epsilon: float

    def __post_init__(self):
        if not (self.delta > 0 and self.epsilon > 0):
            raise InvalidInputError("delta and epsilon must be positive")
        if not self.epsilon < self.delta:
            raise InvalidInputError("epsilon must be smaller than delta")


def default_delta(params):
    return 0.1 * float(np.min(params.sigma))


def neighborhoods(params, delta=None, epsilon=None, ks=None):
    """One neighbourhood per cycle saddle with the default radii."""
    delta = default_delta(params) if delta is None else delta
    epsilon = delta / 10 if epsilon is None else epsilon
    ks = range(1, params.p + 1) if ks is None else ks
    return tuple(SaddleNeighborhood(k, delta, epsilon) for k in ks)


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    k: int
    state: np.ndarray
    delta: float

    def to_dict(self):
        return {"time": self.time, "kind": self.kind.value, "k": self.k}


@dataclass(frozen=True)
class IntegrationOptions:
    method: str = "rk45"
    rtol: float = 1e-10
    atol: float = 1e-10
    h: float = 1e-3
    max_step: float = math.inf
    neighborhoods: tuple = ()
    event_tol: float = 1e-12
    clamp_tol: float = 1e-13
    # called on each event in time order; returning True ends the run there
    stop: Callable[[Event], bool] | None = None

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise InvalidInputError(f"unknown method {self.method!r}")
        for name in ("rtol", "atol", "h", "max_step", "event_tol", "clamp_tol"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")


def straightening(sigma, rho, k):
    """Coefficients c_j of the eigenvectors e_j + c_j e_k of DF(O_k).

    X_k = x_k - sigma_k - sum_j c_j x_j is the k-th coordinate in the
    eigenbasis; it vanishes to first order on the local invariant manifolds.
    """
    sigma = np.asarray(sigma)
    rho = np.asarray(rho)
    i = k - 1
    sk = sigma[i]
    lam = sigma - rho[:, i] * sk
    den = lam + sk
    c = np.zeros(sigma.shape[0])
    ok = np.abs(den) > 1e-12 * sk
    c[ok] = -sk * rho[i, ok] / den[ok]
    c[i] = 0.0
    return c


class _NbhdSet:
    """Flat arrays describing a list of neighbourhoods for the kernels."""

    def __init__(self, params, nbhds):
        self.nbhds = tuple(nbhds)
        m = len(self.nbhds)
        n = params.n
        self.ks = np.empty(m, dtype=np.int64)
        self.k1s = np.empty(m, dtype=np.int64)
        self.k2s = np.empty(m, dtype=np.int64)
        self.deltas = np.empty(m)
        self.coef = np.zeros((m, n))
        for a, nb in enumerate(self.nbhds):
            p = params.p
            if not 1 <= nb.k <= p:
                raise InvalidInputError(f"neighbourhood index {nb.k} outside 1..{p}")
            self.ks[a] = nb.k - 1
            self.k1s[a] = wrap(nb.k + 1, p) - 1
            self.k2s[a] = wrap(nb.k + 2, p) - 1
            self.deltas[a] = nb.delta
            self.coef[a] = straightening(params.sigma, params.rho, nb.k)
        self.sigma = np.ascontiguousarray(params.sigma, dtype=float)

    def __len__(self):
        return len(self.nbhds)

    def values(self, x):
        out = np.empty(3 * len(self.nbhds))
        if len(self.nbhds):
            K.nbhd_values(np.ascontiguousarray(x, dtype=float), self.sigma, self.ks,
                          self.k1s, self.k2s, self.deltas, self.coef, out)
        return out

    def values_many(self, X):
        out = np.empty((X.shape[0], 3 * len(self.nbhds)))
        for a in range(len(self.nbhds)):
            k, k1, k2 = self.ks[a], self.k1s[a], self.k2s[a]
            xk = X[:, k] - self.sigma[k] - X @ self.coef[a]
            mask = np.ones(X.shape[1], dtype=bool)
            mask[[k, k1, k2]] = False
            xi = np.abs(xk)
            if mask.any():
                xi = np.maximum(xi, np.abs(X[:, mask]).max(axis=1))
            eta = np.maximum(np.abs(X[:, k1]), np.abs(X[:, k2]))
            d = self.deltas[a]
            out[:, 3 * a] = np.maximum(xi, eta) - d
            out[:, 3 * a + 1] = xi - d
            out[:, 3 * a + 2] = eta - d
        return out

    def classify(self, a, up, x):
        """Event kind for a crossing of function ``a``, or None."""
        nb = self.nbhds[a // 3]
        which = a % 3
        if which == 0:
            return EventKind.EXIT_V if up else EventKind.ENTER_V
        g = self.values(x)[3 * (a // 3): 3 * (a // 3) + 3]
        if which == 1 and not up and g[2] + nb.delta <= nb.epsilon:
            return EventKind.CROSS_S0
        if which == 2 and up and g[1] <= 0.0:
            return EventKind.CROSS_S1
        return None


class _LogDense:
    """Piecewise quartic dense output of the log-coordinate scheme."""

    def __init__(self, n, supp, t0, h, y0, Q, t_final, y_final):
        self.n = n
        self.supp = supp
        self.t0 = t0
        self.h = h
        self.y0 = y0
        self.Q = Q
        self.t_final = t_final
        self.y_final = y_final

    def y_at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.t0.size == 0:
            return np.broadcast_to(self.y_final, (t.size, self.y_final.size)).copy()
        seg = np.clip(np.searchsorted(self.t0, t, side="right") - 1, 0, self.t0.size - 1)
        return self.y_seg(seg, (t - self.t0[seg]) / self.h[seg])

    def y_seg(self, seg, theta):
        theta = np.clip(theta, 0.0, 1.0)[:, None]
        Q = self.Q[seg]
        poly = Q[:, 0] * theta + Q[:, 1] * theta**2 + Q[:, 2] * theta**3 + Q[:, 3] * theta**4
        return self.y0[seg] + self.h[seg, None] * poly

    def to_x(self, y):
        x = np.zeros((y.shape[0], self.n))
        x[:, self.supp] = np.exp(y)
        return x

    def x_at(self, t):
        return self.to_x(self.y_at(t))

    def refine(self, max_gap):
        """Times and states with consecutive sup-distance about <= max_gap."""
        if self.t0.size == 0:
            return np.array([self.t_final]), self.to_x(self.y_final[None, :])
        nodes_y = np.vstack([self.y0, self.y_final[None, :]])
        nodes_x = self.to_x(nodes_y)
        jump = np.abs(np.diff(nodes_x, axis=0)).max(axis=1)
        seg_end = np.append(self.t0[1:], self.t_final)
        frac_end = (seg_end - self.t0) / self.h
        nsub = np.maximum(1, np.ceil(jump / max_gap).astype(np.int64))
        seg = np.repeat(np.arange(self.t0.size), nsub)
        start = np.repeat(np.cumsum(nsub) - nsub, nsub)
        j = np.arange(seg.size) - start
        theta = j / nsub[seg] * frac_end[seg]
        ts = self.t0[seg] + theta * self.h[seg]
        xs = self.to_x(self.y_seg(seg, theta))
        return np.append(ts, self.t_final), np.vstack([xs, nodes_x[-1:]])


class _HermiteDense:
    """Cubic Hermite interpolation between fixed steps."""

    def __init__(self, times, states, derivs):
        self.times = times
        self.states = states
        self.derivs = derivs

    def x_at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ts = self.times
        if ts.size == 1:
            return np.broadcast_to(self.states[0], (t.size, self.states.shape[1])).copy()
        i = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2)
        h = (ts[i + 1] - ts[i])[:, None]
        s = ((t - ts[i])[:, None]) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return (h00 * self.states[i] + h10 * h * self.derivs[i]
                + h01 * self.states[i + 1] + h11 * h * self.derivs[i + 1])

    def refine(self, max_gap):
        return self.times, self.states


class Trajectory:
    """Time-stamped states (one per accepted step) plus events and dense output."""

    def __init__(self, times, states, events, dense):
        self.times = times
        self.states = states
        self.events = list(events)
        self._dense = dense

    def __len__(self):
        return self.times.size

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def final(self):
        return self.states[-1]

    def at(self, t):
        """Dense-output states at the requested times (inside the run)."""
        scalar = np.ndim(t) == 0
        x = self._dense.x_at(t)
        return x[0] if scalar else x

    def refined(self, max_gap):
        """(times, states) resampled so consecutive states move by <= max_gap."""
        return self._dense.refine(max_gap)

    def events_of(self, kind):
        kind = EventKind(kind)
        return [e for e in self.events if e.kind == kind]


def _check_x0(params, x0):
    x0 = np.array(x0, dtype=float)
    if x0.shape != (params.n,):
        raise InvalidInputError(f"x0 has shape {x0.shape}, expected ({params.n},)")
    if not np.all(np.isfinite(x0)):
        raise InvalidInputError("x0 has non-finite components")
    if np.any(x0 < 0):
        raise InvalidInputError("x0 must lie in the closed positive orthant")
    return x0


class LogFlow:
    """Resumable adaptive integrator in log coordinates.

    ``run`` advances to ``t_end`` or to the first event accepted by
    ``stop``; a later ``run`` continues from there.  Resuming from the
    stored log state rather than from x keeps components far below the
    double-precision range meaningful.
    """

    _CHUNK = 2048

    def __init__(self, params, x0, opts=None, t0=0.0):
        opts = opts or IntegrationOptions()
        x0 = _check_x0(params, x0)
        self.params = params
        self.opts = opts
        self.n = params.n
        self.supp = np.flatnonzero(x0 > 0).astype(np.int64)
        self.sig = np.ascontiguousarray(params.sigma[self.supp], dtype=float)
        self.rho = np.ascontiguousarray(params.rho[np.ix_(self.supp, self.supp)], dtype=float)
        self.nb = _NbhdSet(params, opts.neighborhoods)
        self.t = float(t0)
        self.h = min(1e-3, opts.max_step)
        self._set_y(np.log(x0[self.supp]))

    def _set_y(self, y):
        m = self.supp.size
        self.y = np.ascontiguousarray(y, dtype=float)
        self.K = np.zeros((7, m))
        if m:
            K.rhs_log(self.y, self.sig, self.rho, self.K[0])
        self.g = self.nb.values(self.x)

    @property
    def x(self):
        x = np.zeros(self.n)
        x[self.supp] = np.exp(self.y)
        return x

    def _eval_g(self, y0, hs, Q, theta, ybuf, xbuf, gbuf):
        K.dense_eval(y0, hs, Q, theta, ybuf)
        K.embed(ybuf, self.supp, self.n, xbuf)
        nb = self.nb
        K.nbhd_values(xbuf, nb.sigma, nb.ks, nb.k1s, nb.k2s, nb.deltas, nb.coef, gbuf)
        return gbuf

    def _bisect(self, a, up, y0, hs, Q):
        m = y0.size
        ybuf, xbuf, gbuf = np.empty(m), np.empty(self.n), np.empty(3 * len(self.nb))
        lo, hi = 0.0, 1.0
        tol = self.opts.event_tol
        for _ in range(200):
            if (hi - lo) * hs <= tol:
                break
            mid = 0.5 * (lo + hi)
            g = self._eval_g(y0, hs, Q, mid, ybuf, xbuf, gbuf)[a]
            if (g > 0.0) == up:
                hi = mid
            else:
                lo = mid
        K.dense_eval(y0, hs, Q, hi, ybuf)
        return hi, ybuf.copy()

    def run(self, t_end, stop=None):
        stop = stop if stop is not None else self.opts.stop
        opts = self.opts
        m = self.supp.size
        cap = self._CHUNK
        buf_t, buf_h = np.empty(cap), np.empty(cap)
        buf_y, buf_Q = np.empty((cap, m)), np.empty((cap, 4, m))
        t_parts, h_parts, y_parts, Q_parts = [], [], [], []
        events = []
        t_final, y_final = None, None
        if m == 0 or t_end <= self.t:
            self.t = max(self.t, float(t_end))
        while m and self.t < t_end:
            hmin = 1e-14 * max(1.0, abs(self.t))
            status, cnt, t, h = K.dp45_advance(
                self.t, float(t_end), self.y, self.K, self.h, self.sig, self.rho,
                opts.rtol, opts.atol, opts.max_step, self.supp, self.n, self.nb.sigma,
                self.nb.ks, self.nb.k1s, self.nb.k2s, self.nb.deltas, self.nb.coef,
                self.g, buf_t, buf_h, buf_y, buf_Q, hmin)
            t_parts.append(buf_t[:cnt].copy())
            h_parts.append(buf_h[:cnt].copy())
            y_parts.append(buf_y[:cnt].copy())
            Q_parts.append(buf_Q[:cnt].copy())
            self.t, self.h = t, h
            if status == K.STATUS_NONFINITE:
                raise DivergenceError(f"state blew up near t = {t:.6g}", last_time=t)
            if status == K.STATUS_UNDERFLOW:
                raise IntegratorFailure(f"step size underflow at t = {t:.6g}")
            if status != K.STATUS_EVENT:
                continue
            i = cnt - 1
            t0, hs, y0, Q = buf_t[i], buf_h[i], buf_y[i].copy(), buf_Q[i].copy()
            x0 = np.zeros(self.n)
            K.embed(y0, self.supp, self.n, x0)
            g0 = self.nb.values(x0)
            found = []
            for a in np.flatnonzero((g0 > 0) != (self.g > 0)):
                up = bool(self.g[a] > 0)
                theta, yc = self._bisect(a, up, y0, hs, Q)
                xc = np.zeros(self.n)
                K.embed(yc, self.supp, self.n, xc)
                kind = self.nb.classify(a, up, xc)
                if kind is not None:
                    found.append((t0 + theta * hs, a, kind, xc, yc))
            found.sort(key=lambda e: (e[0], e[1]))
            for te, a, kind, xc, yc in found:
                nb = self.nb.nbhds[a // 3]
                ev = Event(float(te), kind, nb.k, xc, nb.delta)
                events.append(ev)
                if stop is not None and stop(ev):
                    t_final, y_final = ev.time, yc
                    break
            if t_final is not None:
                self.t = t_final
                self._set_y(y_final)
                break
        if y_final is None:
            y_final = self.y.copy()
            t_final = self.t
        t0s = np.concatenate(t_parts) if t_parts else np.empty(0)
        dense = _LogDense(
            self.n, self.supp, t0s,
            np.concatenate(h_parts) if h_parts else np.empty(0),
            np.concatenate(y_parts) if y_parts else np.empty((0, m)),
            np.concatenate(Q_parts) if Q_parts else np.empty((0, 4, m)),
            t_final, y_final,
        )
        times = np.append(t0s, t_final)
        states = dense.to_x(np.vstack([dense.y0, y_final[None, :]]))
        return Trajectory(times, states, events, dense)


def _integrate_rk4(params, x0, t_end, opts):
    n = params.n
    nsteps = max(1, int(math.ceil(t_end / opts.h - 1e-9)))
    h = t_end / nsteps
    out = np.empty((nsteps + 1, n))
    sig = np.ascontiguousarray(params.sigma, dtype=float)
    rho = np.ascontiguousarray(params.rho, dtype=float)
    status, s = K.rk4_run(x0, h, nsteps, sig, rho, opts.clamp_tol, out)
    if status == K.STATUS_NEGATIVE:
        raise IntegratorFailure(f"component below -{opts.clamp_tol:g} at t = {(s + 1) * h:.6g}")
    if status == K.STATUS_NONFINITE:
        raise DivergenceError(f"state blew up near t = {s * h:.6g}", last_time=s * h)
    times = np.arange(nsteps + 1) * h
    times[-1] = t_end
    derivs = out * (sig - out @ rho.T)
    dense = _HermiteDense(times, out, derivs)
    events = []
    nb = _NbhdSet(params, opts.neighborhoods)
    cut = None
    if len(nb):
        G = nb.values_many(out)
        cand = []
        for i, a in zip(*np.nonzero((G[:-1] > 0) != (G[1:] > 0))):
            up = bool(G[i + 1, a] > 0)
            lo, hi = times[i], times[i + 1]
            while hi - lo > opts.event_tol:
                mid = 0.5 * (lo + hi)
                if (nb.values(dense.x_at(mid)[0])[a] > 0) == up:
                    hi = mid
                else:
                    lo = mid
                if mid in (lo, hi) and hi - lo <= 4 * np.spacing(hi):
                    break
            xc = dense.x_at(hi)[0]
            kind = nb.classify(a, up, xc)
            if kind is not None:
                cand.append((hi, a, kind, xc, i))
        cand.sort(key=lambda e: (e[0], e[1]))
        for te, a, kind, xc, i in cand:
            nbh = nb.nbhds[a // 3]
            ev = Event(float(te), kind, nbh.k, xc, nbh.delta)
            events.append(ev)
            if opts.stop is not None and opts.stop(ev):
                cut = (te, xc, i)
                break
    if cut is not None:
        te, xc, i = cut
        times = np.append(times[: i + 1], te)
        out = np.vstack([out[: i + 1], xc[None, :]])
        derivs = out * (sig - out @ rho.T)
        dense = _HermiteDense(times, out, derivs)
    return Trajectory(times, out, events, dense)


def integrate(params, x0, t_end, options=None):
    """Integrate forward from x0 on [0, t_end].

    ``params`` only needs ``n``, ``sigma`` and ``rho`` (and ``p`` when
    neighbourhoods are requested), so restricted subsystems work too.
    """
    opts = options or IntegrationOptions()
    x0 = _check_x0(params, x0)
    if not t_end > 0:
        raise InvalidInputError("t_end must be positive")
    if opts.method == "rk4":
        return _integrate_rk4(params, x0, float(t_end), opts)
    return LogFlow(params, x0, opts).run(float(t_end))


class PassageResult(NamedTuple):
    T: float
    xi_T: np.ndarray
    eta_T: np.ndarray


def off_triple(params, k):
    """0-based coordinates outside the triple (k, k+1, k+2)."""
    trip = {k - 1, wrap(k + 1, params.p) - 1, wrap(k + 2, params.p) - 1}
    return np.array([j for j in range(params.n) if j not in trip], dtype=np.int64)


def passage_start(params, k, xi0, eta0):
    """Point with stable coordinates xi0 and unstable coordinates eta0 at O_k.

    The k-th coordinate is placed on the linearized invariant manifolds
    (X_k = 0 in the eigenbasis).
    """
    p = params.p
    k1, k2 = wrap(k + 1, p) - 1, wrap(k + 2, p) - 1
    off = off_triple(params, k)
    xi0 = np.broadcast_to(np.asarray(xi0, dtype=float), off.shape).copy()
    eta0 = np.broadcast_to(np.asarray(eta0, dtype=float), (2,)).copy()
    if np.any(xi0 < 0) or np.any(eta0 < 0):
        raise PreconditionError("passage coordinates must be non-negative")
    x = np.zeros(params.n)
    x[off] = xi0
    x[k1], x[k2] = eta0
    c = straightening(params.sigma, params.rho, k)
    x[k - 1] = params.sigma[k - 1] + c @ x
    if x[k - 1] <= 0:
        raise PreconditionError("delta too large: start point leaves the orthant")
    return x


def passage_map(params, k, xi0, eta0, delta, *, epsilon=None, rtol=1e-10, atol=1e-10,
                t_max=None):
    """Transit time and exit coordinates of one passage near O_k.

    Starts on S_0 = {|xi| = delta, |eta| <= epsilon} and integrates to the
    first crossing of S_1 = {|eta| = delta}.  ``xi`` are the coordinates
    outside the triple (k, k+1, k+2) and ``eta = (x_{k+1}, x_{k+2})``.
    """
    epsilon = delta / 10 if epsilon is None else epsilon
    off = off_triple(params, k)
    xi0 = np.broadcast_to(np.asarray(xi0, dtype=float), off.shape)
    eta0 = np.broadcast_to(np.asarray(eta0, dtype=float), (2,))
    if off.size and abs(np.max(np.abs(xi0)) - delta) > 1e-12 * delta:
        raise PreconditionError("|xi(0)| must equal delta")
    if np.max(eta0) > epsilon:
        raise PreconditionError(f"|eta(0)| = {np.max(eta0):g} exceeds epsilon = {epsilon:g}")
    if not np.max(eta0) > 0:
        raise PreconditionError("eta(0) = 0 lies on the stable manifold; no exit")
    x0 = passage_start(params, k, xi0, eta0)
    lam = params.sigma - params.rho[:, k - 1] * params.sigma[k - 1]
    p = params.p
    lu = max(lam[wrap(k + 1, p) - 1], lam[wrap(k + 2, p) - 1])
    if lu <= 0:
        raise PreconditionError(f"O_{k} has no unstable direction in its triple")
    if t_max is None:
        lmin = min(v for v in (lam[wrap(k + 1, p) - 1], lam[wrap(k + 2, p) - 1]) if v > 0)
        t_max = 20 * (math.log(delta / np.max(eta0)) + 10) / lmin
    nbs = (SaddleNeighborhood(k, delta, epsilon), SaddleNeighborhood(k, 2 * delta, epsilon))

    def stop(ev):
        return (ev.kind == EventKind.CROSS_S1 and ev.delta == delta) or (
            ev.kind == EventKind.EXIT_V and ev.delta == 2 * delta)

    opts = IntegrationOptions(rtol=rtol, atol=atol, neighborhoods=nbs, stop=stop)
    traj = LogFlow(params, x0, opts).run(t_max)
    last = traj.events[-1] if traj.events else None
    if last is None or not stop(last):
        raise PassageFailure(f"no exit from V_{k} before t = {t_max:g}")
    if last.kind == EventKind.EXIT_V:
        raise PassageFailure(f"orbit left V_{k} through the stable coordinates (|xi| > 2 delta)")
    x = traj.final
    return PassageResult(last.time, x[off].copy(),
                         np.array([x[wrap(k + 1, p) - 1], x[wrap(k + 2, p) - 1]]))
