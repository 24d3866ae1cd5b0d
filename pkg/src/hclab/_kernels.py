"""Compiled inner loops for the integrator.

The adaptive scheme works in logarithmic coordinates y_i = log x_i on the
support of the state, where the field becomes

    dy_i/dt = sigma_i - sum_j rho_ij exp(y_j).

Coordinates outside the support stay exactly zero, so positivity holds by
construction.  The fixed-step scheme works on x directly and clamps.
"""

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau
_A = np.zeros((7, 6))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension: y(t0 + th*h) = y0 + h * sum_r Q[r] th^(r+1)
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

STATUS_DONE = 0
STATUS_EVENT = 1
STATUS_FULL = 2
STATUS_NONFINITE = 3
STATUS_UNDERFLOW = 4
STATUS_NEGATIVE = 5


@njit(cache=True)
def rhs_log(y, sig, rho, out):
    m = y.shape[0]
    x = np.exp(y)
    for i in range(m):
        s = sig[i]
        for j in range(m):
            s -= rho[i, j] * x[j]
        out[i] = s


@njit(cache=True)
def rhs_x(x, sig, rho, out):
    n = x.shape[0]
    for i in range(n):
        s = sig[i]
        for j in range(n):
            s -= rho[i, j] * x[j]
        out[i] = x[i] * s


@njit(cache=True)
def dp45_step(y, h, sig, rho, rtol, atol, K, ynew):
    """One trial step; K[0] must hold f(y).  Returns the RMS error norm."""
    m = y.shape[0]
    tmp = np.empty(m)
    for s in range(1, 6):
        for i in range(m):
            acc = 0.0
            for r in range(s):
                acc += _A[s, r] * K[r, i]
            tmp[i] = y[i] + h * acc
        rhs_log(tmp, sig, rho, K[s])
    for i in range(m):
        acc = 0.0
        for r in range(6):
            acc += _B[r] * K[r, i]
        ynew[i] = y[i] + h * acc
    rhs_log(ynew, sig, rho, K[6])
    e = 0.0
    for i in range(m):
        acc = 0.0
        for r in range(7):
            acc += _E[r] * K[r, i]
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        e += (h * acc / sc) ** 2
    return np.sqrt(e / m)


@njit(cache=True)
def dense_coeffs(K, Q):
    m = K.shape[1]
    for r in range(4):
        for i in range(m):
            acc = 0.0
            for s in range(7):
                acc += K[s, i] * _P[s, r]
            Q[r, i] = acc


@njit(cache=True)
def dense_eval(y0, h, Q, theta, out):
    m = y0.shape[0]
    th2 = theta * theta
    th3 = th2 * theta
    th4 = th3 * theta
    for i in range(m):
        out[i] = y0[i] + h * (Q[0, i] * theta + Q[1, i] * th2 + Q[2, i] * th3 + Q[3, i] * th4)


@njit(cache=True)
def embed(y, supp, n, x):
    for i in range(n):
        x[i] = 0.0
    for i in range(supp.shape[0]):
        x[supp[i]] = np.exp(y[i])


@njit(cache=True)
def nbhd_values(x, sigma, ks, k1s, k2s, deltas, coef, out):
    """Per neighbourhood: (V-norm - delta, xi-norm - delta, eta-norm - delta).

    The k-th coordinate is measured along the linearized eigenbasis,
    X_k = x_k - sigma_k - sum_j coef[a, j] x_j, so that the local unstable
    manifold is flat to first order.  xi-norm is the sup of |X_k| and the
    coordinates outside the triple (k, k+1, k+2); eta-norm is
    max(x_{k+1}, x_{k+2}).
    """
    n = x.shape[0]
    for a in range(ks.shape[0]):
        k = ks[a]
        k1 = k1s[a]
        k2 = k2s[a]
        xk = x[k] - sigma[k]
        for j in range(n):
            xk -= coef[a, j] * x[j]
        xi = abs(xk)
        for j in range(n):
            if j != k and j != k1 and j != k2:
                v = abs(x[j])
                if v > xi:
                    xi = v
        eta = max(abs(x[k1]), abs(x[k2]))
        d = deltas[a]
        out[3 * a] = max(xi, eta) - d
        out[3 * a + 1] = xi - d
        out[3 * a + 2] = eta - d


@njit(cache=True)
def dp45_advance(t, t_end, y, K, h, sig, rho, rtol, atol, max_step,
                 supp, n, sigma_full, ks, k1s, k2s, deltas, coef, g,
                 buf_t, buf_h, buf_y, buf_Q, hmin):
    """Advance until t_end, a sign change in g, or a full buffer.

    On entry K[0] = f(y) and g holds the event values at y.  Accepted steps
    are written to the buffers: start time, step size, start state and dense
    coefficients.  y, K[0], g are updated in place.  Returns
    (status, count, t, h).
    """
    m = y.shape[0]
    cap = buf_t.shape[0]
    ynew = np.empty(m)
    x = np.empty(n)
    gnew = np.empty(g.shape[0])
    count = 0
    while True:
        if t >= t_end:
            return STATUS_DONE, count, t, h
        if count >= cap:
            return STATUS_FULL, count, t, h
        hs = min(h, max_step)
        last = False
        if t + hs >= t_end:
            hs = t_end - t
            last = True
        if hs < hmin:
            return STATUS_UNDERFLOW, count, t, h
        en = dp45_step(y, hs, sig, rho, rtol, atol, K, ynew)
        if not np.isfinite(en):
            # retry smaller; persistent non-finite values mean blow-up
            h = hs * 0.2
            if h < hmin:
                return STATUS_NONFINITE, count, t, h
            continue
        if en > 1.0:
            h = hs * max(0.2, 0.9 * en ** -0.2)
            continue
        ok = True
        for i in range(m):
            if not np.isfinite(ynew[i]) or ynew[i] > 700.0:
                ok = False
        if not ok:
            return STATUS_NONFINITE, count, t, h
        buf_t[count] = t
        buf_h[count] = hs
        for i in range(m):
            buf_y[count, i] = y[i]
        dense_coeffs(K, buf_Q[count])
        count += 1
        t = t_end if last else t + hs
        for i in range(m):
            y[i] = ynew[i]
            K[0, i] = K[6, i]
        fac = 10.0 if en == 0.0 else min(10.0, max(0.2, 0.9 * en ** -0.2))
        if not last or fac < 1.0:
            h = hs * fac
        crossed = False
        if ks.shape[0] > 0:
            embed(y, supp, n, x)
            nbhd_values(x, sigma_full, ks, k1s, k2s, deltas, coef, gnew)
            for a in range(g.shape[0]):
                if (g[a] > 0.0) != (gnew[a] > 0.0):
                    crossed = True
                g[a] = gnew[a]
        if crossed:
            return STATUS_EVENT, count, t, h


@njit(cache=True)
def rk4_run(x0, h, nsteps, sig, rho, clamp_tol, out):
    """Classical RK4 with clamping.  out[0] = x0; returns (status, steps)."""
    n = x0.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    x = x0.copy()
    for i in range(n):
        out[0, i] = x[i]
    for s in range(nsteps):
        rhs_x(x, sig, rho, k1)
        for i in range(n):
            tmp[i] = x[i] + 0.5 * h * k1[i]
        rhs_x(tmp, sig, rho, k2)
        for i in range(n):
            tmp[i] = x[i] + 0.5 * h * k2[i]
        rhs_x(tmp, sig, rho, k3)
        for i in range(n):
            tmp[i] = x[i] + h * k3[i]
        rhs_x(tmp, sig, rho, k4)
        for i in range(n):
            v = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(v):
                return STATUS_NONFINITE, s
            if v < 0.0:
                if v > -clamp_tol:
                    v = 0.0
                else:
                    return STATUS_NEGATIVE, s
            x[i] = v
            out[s + 1, i] = v
    return STATUS_DONE, nsteps
