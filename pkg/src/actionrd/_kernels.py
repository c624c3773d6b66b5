"""Compiled inner loops for the action-marginal fixed point and its dual."""
import numpy as np
from numba import njit

LOG2_FLOOR = np.log2(1e-300)
LOG2_BLOWUP = np.log2(1e30)

# status codes returned by dual_loop
CONVERGED = 0
DUAL_CAP = 1
FP_CAP = 2
DIVERGED = 3


@njit(cache=True)
def log_map(q, mu, log_alpha, px, channel, beta, out):
    """One application of the damped log-domain map G.

    ``q`` and ``log_alpha`` are ``[a, x]`` arrays of log2 values; -inf marks
    an action that is dead for that x. Writes G(q) into ``out`` and returns
    the sup-norm of the step over live entries.
    """
    na, nx, ny = channel.shape
    pya = np.zeros((na, ny))
    for a in range(na):
        for x in range(nx):
            if q[a, x] > -np.inf:
                w = px[x] * 2.0 ** q[a, x]
                for y in range(ny):
                    pya[a, y] += w * channel[a, x, y]
    step = 0.0
    for a in range(na):
        for y in range(ny):
            if pya[a, y] < 1e-300:
                pya[a, y] = 1e-300
            pya[a, y] = np.log2(pya[a, y])
        for x in range(nx):
            if log_alpha[a, x] == -np.inf:
                out[a, x] = -np.inf
                continue
            den = 0.0
            for y in range(ny):
                c = channel[a, x, y]
                if c > 0.0:
                    den += c * pya[a, y]
            h = mu[x] + log_alpha[a, x] - den
            g = beta * q[a, x] + (1.0 - beta) * h
            if g < LOG2_FLOOR:
                g = LOG2_FLOOR
            d = abs(g - q[a, x])
            if d > step:
                step = d
            out[a, x] = g
    return step


@njit(cache=True)
def dual_loop(q, mu, log_alpha, px, channel, beta, fp_tol, inner_tol,
              max_fp, max_dual, subgradient):
    """Fixed-point iterations nested inside the dual update on mu.

    ``subgradient`` selects mu += theta_i (1 - S) / P(x) with theta_i = 1/i;
    otherwise mu -= log2 S, the normalized step. Updates ``q`` and ``mu`` in
    place and returns (status, dual_iters, fp_iters, worst row-sum error).
    """
    na, nx = q.shape
    buf = np.empty_like(q)
    fp_total = 0
    worst = np.inf
    for i in range(1, max_dual + 1):
        converged = False
        for _ in range(max_fp):
            step = log_map(q, mu, log_alpha, px, channel, beta, buf)
            q[:, :] = buf
            fp_total += 1
            if step < fp_tol:
                converged = True
                break
        for a in range(na):
            for x in range(nx):
                if q[a, x] > LOG2_BLOWUP:
                    return DIVERGED, i, fp_total, worst
        if not converged:
            return FP_CAP, i, fp_total, worst
        worst = 0.0
        sums = np.zeros(nx)
        for x in range(nx):
            for a in range(na):
                if q[a, x] > -np.inf:
                    sums[x] += 2.0 ** q[a, x]
            err = abs(1.0 - sums[x])
            if err > worst:
                worst = err
        if worst <= inner_tol:
            return CONVERGED, i, fp_total, worst
        for x in range(nx):
            if subgradient:
                mu[x] += (1.0 / i) / px[x] * (1.0 - sums[x])
            else:
                mu[x] -= np.log2(sums[x])
    return DUAL_CAP, max_dual, fp_total, worst


@njit(cache=True)
def prepare(ptx, px, W, actions, starts, stops, cost, dexp, s, m, qa, qty, wlogq, la_t, la_a):
    """Auxiliary marginals and log weights for one outer iteration.

    Fills ``qa[a]``, ``qty[t, y]``, ``wlogq[t, x]``, ``la_t[t, x]`` and
    ``la_a[a, x]`` in place from ``ptx[x, t]``.
    """
    nt, nx, ny = W.shape
    na = len(qa)
    qa[:] = 0.0
    qty[:, :] = 0.0
    for t in range(nt):
        for x in range(nx):
            w = px[x] * ptx[x, t]
            if w > 0.0:
                qa[actions[t]] += w
                for y in range(ny):
                    qty[t, y] += w * W[t, x, y]
    for t in range(nt):
        a = actions[t]
        base = -np.inf
        if qa[a] > 0.0:
            base = np.log2(qa[a]) + m * cost[a]
        for x in range(nx):
            acc = 0.0
            for y in range(ny):
                c = W[t, x, y]
                if c > 0.0:
                    if qty[t, y] <= 0.0:
                        acc = -np.inf
                        break
                    acc += c * np.log2(qty[t, y])
            wlogq[t, x] = acc
            if acc == -np.inf or base == -np.inf:
                la_t[t, x] = -np.inf
            else:
                la_t[t, x] = base + s * dexp[t, x] + acc
    for a in range(na):
        for x in range(nx):
            top = -np.inf
            for t in range(starts[a], stops[a]):
                if la_t[t, x] > top:
                    top = la_t[t, x]
            if top == -np.inf:
                la_a[a, x] = -np.inf
                continue
            acc = 0.0
            for t in range(starts[a], stops[a]):
                if la_t[t, x] > -np.inf:
                    acc += 2.0 ** (la_t[t, x] - top)
            la_a[a, x] = top + np.log2(acc)


@njit(cache=True)
def finish(la_t, la_a, q, px, channel, actions, qa, wlogq, dexp, cost, s, m, ptx):
    """Recover ``ptx[x, t]`` from the action conditional and evaluate it.

    Returns (F, D, C) where F is evaluated against the auxiliaries that
    produced ``la_t`` (through ``qa`` and ``wlogq``).
    """
    nt, nx = la_t.shape
    na, _, ny = channel.shape
    for x in range(nx):
        tot = 0.0
        for t in range(nt):
            a = actions[t]
            v = 0.0
            if la_t[t, x] > -np.inf and la_a[a, x] > -np.inf and q[a, x] > -np.inf:
                v = 2.0 ** (la_t[t, x] - la_a[a, x] + q[a, x])
            ptx[x, t] = v
            tot += v
        if tot <= 0.0:
            for t in range(nt):
                ptx[x, t] = 1.0 / nt
        else:
            for t in range(nt):
                ptx[x, t] /= tot
    pax = np.zeros((na, nx))
    D = 0.0
    C = 0.0
    t2 = 0.0
    t3 = 0.0
    for x in range(nx):
        for t in range(nt):
            p = ptx[x, t]
            if p > 0.0:
                w = px[x] * p
                pax[actions[t], x] += p
                D += w * dexp[t, x]
                C += w * cost[actions[t]]
                if w > 0.0:
                    t2 += w * np.log2(p)
                    t3 -= w * wlogq[t, x]
    t1 = 0.0
    for a in range(na):
        pa = 0.0
        for y in range(ny):
            v = 0.0
            for x in range(nx):
                v += px[x] * pax[a, x] * channel[a, x, y]
            if v > 0.0:
                t1 += v * np.log2(v)
            pa += v
        if pa > 0.0:
            t1 -= pa * np.log2(qa[a])
    return t1 + t2 + t3 - s * D - m * C, D, C
