"""Compiled kernels for rate-distortion problems on small alphabets.

All kernels work in nats.  Conditional problems are laid out as
``pxcu[u, x] = p(x|u)`` with weights ``pu[u]``; a plain RD problem is the
special case of a single ``u``.  Channels are ``W[u, x, xh] = p(xh|x,u)`` and
output pmfs are ``q[u, xh]``.

At a fixed slope ``beta`` the channel is determined by the output pmf through
``W ∝ q * exp(-beta * d)``, and the best output pmf for each u minimizes the
convex function ``F(q) = -sum_x p(x|u) log sum_xh q(xh) A(xh, x)`` with
``A = exp(-beta * d)``.  A few Blahut-Arimoto steps get close; an active-set
Newton method then finishes, which matters near slopes where the optimal
output support changes and BA alone crawls.
"""
import math

import numpy as np
from numba import njit

Q_FLOOR = 1e-6  # warm starts keep every output symbol alive
KKT_TOL = 1e-13


@njit(cache=True)
def ba_fixed_slope(pxcu, A, q, max_iter, tol):
    """Run BA iterations for every u at a fixed kernel ``A[xh, x]``.

    ``q[u, xh]`` is updated in place.  Stops when the Blahut optimality gap
    ``max_xh log c(xh)`` drops below ``tol`` for every u.  Returns the number of
    iterations and the final gap.
    """
    U, X = pxcu.shape
    Xh = A.shape[0]
    Z = np.empty(X)
    c = np.empty(Xh)
    gap = np.inf
    it = 0
    while it < max_iter:
        it += 1
        gap = 0.0
        for u in range(U):
            for x in range(X):
                s = 0.0
                for xh in range(Xh):
                    s += q[u, xh] * A[xh, x]
                Z[x] = s if s > 0.0 else 1e-300
            cmax = 0.0
            for xh in range(Xh):
                s = 0.0
                for x in range(X):
                    p = pxcu[u, x]
                    if p > 0.0:
                        s += p * A[xh, x] / Z[x]
                c[xh] = s
                if s > cmax:
                    cmax = s
            tot = 0.0
            for xh in range(Xh):
                q[u, xh] *= c[xh]
                tot += q[u, xh]
            for xh in range(Xh):
                q[u, xh] /= tot
            if cmax > 0.0:
                g = math.log(cmax)
                if g > gap:
                    gap = g
        if gap < tol:
            break
    return it, gap


@njit(cache=True)
def _objective(px, A, q):
    X = px.size
    Xh = A.shape[0]
    f = 0.0
    for x in range(X):
        if px[x] > 0.0:
            s = 0.0
            for xh in range(Xh):
                s += q[xh] * A[xh, x]
            if s <= 0.0:
                return np.inf
            f -= px[x] * math.log(s)
    return f


@njit(cache=True)
def _solve_small(M, b, n, out):
    """Solve the leading n-by-n block of M against b into ``out`` (both destroyed).

    Gaussian elimination with partial pivoting.  Returns False when singular.
    """
    for k in range(n):
        piv = k
        for i in range(k + 1, n):
            if abs(M[i, k]) > abs(M[piv, k]):
                piv = i
        if M[piv, k] == 0.0:
            return False
        if piv != k:
            for j in range(n):
                tmp = M[k, j]
                M[k, j] = M[piv, j]
                M[piv, j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, n):
            f = M[i, k] / M[k, k]
            for j in range(k, n):
                M[i, j] -= f * M[k, j]
            b[i] -= f * b[k]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for j in range(i + 1, n):
            s -= M[i, j] * out[j]
        out[i] = s / M[i, i]
    return True


@njit(cache=True)
def _scores(px, A, q, c, Z):
    """Fill the KKT multipliers c(xh) = sum_x p(x) A(xh, x) / Z(x) and normalizers Z."""
    X = px.size
    Xh = A.shape[0]
    for x in range(X):
        s = 0.0
        for xh in range(Xh):
            s += q[xh] * A[xh, x]
        Z[x] = s
    for xh in range(Xh):
        s = 0.0
        for x in range(X):
            if px[x] > 0.0 and Z[x] > 0.0:
                s += px[x] * A[xh, x] / Z[x]
        c[xh] = s


@njit(cache=True)
def _workspace(X, Xh):
    return (np.empty(X), np.empty(Xh), np.empty((Xh + 1, Xh + 1)), np.empty(Xh + 1),
            np.empty(Xh + 1), np.empty(Xh), np.empty(Xh, np.int64))


@njit(cache=True)
def newton_output_pmf(px, A, q, max_newton, ws):
    """Minimize F over the simplex for one u, updating ``q`` in place.

    ``ws`` is a buffer tuple from ``_workspace``.  Returns (steps, gap) with
    ``gap = log max_xh c(xh)``, which bounds F(q) - min F.
    """
    Z, c, M, rhs, sol, qn, sup = ws
    X = px.size
    Xh = A.shape[0]
    steps = 0
    while steps < max_newton:
        steps += 1
        _scores(px, A, q, c, Z)
        in_viol = 0.0
        out_best = -1
        out_val = 1.0 + KKT_TOL
        ns = 0
        for xh in range(Xh):
            if q[xh] > 0.0:
                sup[ns] = xh
                ns += 1
                v = abs(c[xh] - 1.0)
                if v > in_viol:
                    in_viol = v
            elif c[xh] > out_val:
                out_val = c[xh]
                out_best = xh
        if in_viol <= KKT_TOL and out_best < 0:
            break
        if out_best >= 0 and (in_viol <= 1e-6 or ns == 0):
            # bring back the most profitable dead symbol
            q[out_best] = 1e-3
            tot = 0.0
            for xh in range(Xh):
                tot += q[xh]
            for xh in range(Xh):
                q[xh] /= tot
            continue
        # Newton step on the support under the simplex constraint
        hmax = 0.0
        for a in range(ns):
            ia = sup[a]
            for b in range(a, ns):
                ib = sup[b]
                s = 0.0
                for x in range(X):
                    if px[x] > 0.0 and Z[x] > 0.0:
                        s += px[x] * A[ia, x] * A[ib, x] / (Z[x] * Z[x])
                M[a, b] = s
                M[b, a] = s
            if M[a, a] > hmax:
                hmax = M[a, a]
            M[a, ns] = 1.0
            M[ns, a] = 1.0
            rhs[a] = c[ia]
        M[ns, ns] = 0.0
        rhs[ns] = 0.0
        for a in range(ns):
            M[a, a] += 1e-12 * hmax
        if not _solve_small(M, rhs, ns + 1, sol):
            break
        # largest feasible step, then backtrack on F
        tmax = 1.0
        hit = -1
        for a in range(ns):
            da = sol[a]
            if da < 0.0 and q[sup[a]] + da < 0.0:
                t = -q[sup[a]] / da
                if t < tmax:
                    tmax = t
                    hit = sup[a]
        # near the optimum the decrease is below rounding; take the full step
        close = in_viol < 1e-7 and hit < 0
        f0 = _objective(px, A, q)
        t = tmax
        accepted = False
        for _ in range(60):
            for xh in range(Xh):
                qn[xh] = q[xh]
            for a in range(ns):
                v = q[sup[a]] + t * sol[a]
                qn[sup[a]] = v if v > 0.0 else 0.0
            if hit >= 0 and t == tmax:
                qn[hit] = 0.0
            if close or _objective(px, A, qn) <= f0 + 1e-15 * abs(f0):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        tot = 0.0
        for xh in range(Xh):
            tot += qn[xh]
        for xh in range(Xh):
            q[xh] = qn[xh] / tot
    _scores(px, A, q, c, Z)
    cmax = 0.0
    for xh in range(Xh):
        if c[xh] > cmax:
            cmax = c[xh]
    gap = math.log(cmax) if cmax > 0.0 else np.inf
    if gap < 0.0:
        gap = 0.0
    return steps, gap


@njit(cache=True)
def channel_from_q(pxcu, A, q):
    U, X = pxcu.shape
    Xh = A.shape[0]
    W = np.zeros((U, X, Xh))
    for u in range(U):
        for x in range(X):
            s = 0.0
            for xh in range(Xh):
                s += q[u, xh] * A[xh, x]
            if s > 0.0:
                for xh in range(Xh):
                    W[u, x, xh] = q[u, xh] * A[xh, x] / s
            else:
                best = 0
                for xh in range(Xh):
                    if A[xh, x] > A[best, x]:
                        best = xh
                W[u, x, best] = 1.0
    return W


@njit(cache=True)
def channel_stats(pxcu, pu, W, d):
    """Return (I in nats, expected distortion) of a conditional channel."""
    U, X = pxcu.shape
    Xh = W.shape[2]
    info = 0.0
    dist = 0.0
    m = np.empty(Xh)
    for u in range(U):
        if pu[u] <= 0.0:
            continue
        for xh in range(Xh):
            s = 0.0
            for x in range(X):
                s += pxcu[u, x] * W[u, x, xh]
            m[xh] = s
        iu = 0.0
        du = 0.0
        for x in range(X):
            p = pxcu[u, x]
            if p <= 0.0:
                continue
            for xh in range(Xh):
                w = W[u, x, xh]
                if w > 0.0:
                    if m[xh] > 0.0:  # m can underflow when p * w does
                        iu += p * w * math.log(w / m[xh])
                    du += p * w * d[xh, x]
        info += pu[u] * iu
        dist += pu[u] * du
    if info < 0.0:
        info = 0.0
    return info, dist


@njit(cache=True)
def solve_kernel(pxcu, pu, d, A, q, ba_iter, max_newton):
    """Best output pmfs for kernel ``A``, updating ``q`` in place.

    Returns (W, info, dist, steps, gap) where ``gap`` is the worst per-u
    optimality gap of the output pmfs.
    """
    U, X = pxcu.shape
    steps, gap = ba_fixed_slope(pxcu, A, q, ba_iter, KKT_TOL)
    worst = 0.0
    if gap > KKT_TOL:
        ws = _workspace(X, A.shape[0])
        for u in range(U):
            s, g = newton_output_pmf(pxcu[u], A, q[u], max_newton, ws)
            steps += s
            if g > worst:
                worst = g
    W = channel_from_q(pxcu, A, q)
    info, dist = channel_stats(pxcu, pu, W, d)
    return W, info, dist, steps, worst


@njit(cache=True)
def slope_kernel(d, beta):
    Xh, X = d.shape
    A = np.empty((Xh, X))
    for xh in range(Xh):
        for x in range(X):
            A[xh, x] = math.exp(-beta * d[xh, x])
    return A


@njit(cache=True)
def zero_mask(d):
    Xh, X = d.shape
    A = np.zeros((Xh, X))
    for xh in range(Xh):
        for x in range(X):
            if d[xh, x] == 0.0:
                A[xh, x] = 1.0
    return A


@njit(cache=True)
def _floored(q):
    U, Xh = q.shape
    out = np.empty((U, Xh))
    for u in range(U):
        tot = 0.0
        for xh in range(Xh):
            out[u, xh] = q[u, xh] + Q_FLOOR
            tot += out[u, xh]
        for xh in range(Xh):
            out[u, xh] /= tot
    return out


@njit(cache=True)
def zero_rate_channel(pxcu, pu, d):
    """Deterministic per-u reconstruction minimizing expected distortion (lowest index on ties)."""
    U, X = pxcu.shape
    Xh = d.shape[0]
    W = np.zeros((U, X, Xh))
    dist = 0.0
    for u in range(U):
        best = 0
        best_val = np.inf
        for xh in range(Xh):
            s = 0.0
            for x in range(X):
                s += pxcu[u, x] * d[xh, x]
            if s < best_val - 1e-15:
                best_val = s
                best = xh
        for x in range(X):
            W[u, x, best] = 1.0
        dist += pu[u] * best_val
    return W, dist


@njit(cache=True)
def kl_cost(pxcu, W, d, beta):
    """Per-(u, x) cost ``D(W(.|x,u) || m(.|u)) + beta * E[d | x, u]`` in nats.

    This is the derivative of the Lagrangian of a conditional RD problem with
    respect to the joint mass p(x, u).  ``beta`` may be 0 (masked problems).
    """
    U, X = pxcu.shape
    Xh = W.shape[2]
    out = np.zeros((U, X))
    m = np.empty(Xh)
    for u in range(U):
        for xh in range(Xh):
            s = 0.0
            for x in range(X):
                s += pxcu[u, x] * W[u, x, xh]
            m[xh] = s
        for x in range(X):
            v = 0.0
            for xh in range(Xh):
                w = W[u, x, xh]
                if w > 0.0:
                    if m[xh] > 0.0:
                        v += w * math.log(w / m[xh])
                    v += beta * w * d[xh, x]
            out[u, x] = v
    return out


@njit(cache=True)
def masked_rd(pxcu, pu, d, max_newton):
    """Least conditional rate at zero distortion.  Returns (W, info_nats, steps, gap).

    Channels are restricted to zero-distortion pairs; when every source symbol
    has exactly one such reconstruction the answer is deterministic.
    """
    U = pxcu.shape[0]
    Xh = d.shape[0]
    A = zero_mask(d)
    q = np.full((U, Xh), 1.0 / Xh)
    W, info, dist, steps, gap = solve_kernel(pxcu, pu, d, A, q, 50, max_newton)
    return W, info, steps, gap


@njit(cache=True)
def dual_value(pxcu, pu, d, beta, q, target):
    """Blahut lower bound (nats) on the conditional RD value from any slope and output pmfs."""
    U, X = pxcu.shape
    Xh = d.shape[0]
    A = slope_kernel(d, beta)
    val = -beta * target
    c = np.empty(Xh)
    Z = np.empty(X)
    for u in range(U):
        if pu[u] <= 0.0:
            continue
        _scores(pxcu[u], A, q[u], c, Z)
        cmax = 0.0
        for xh in range(Xh):
            if c[xh] > cmax:
                cmax = c[xh]
        acc = 0.0
        for x in range(X):
            p = pxcu[u, x]
            if p > 0.0:
                if Z[x] <= 0.0:
                    return -np.inf
                acc -= p * math.log(Z[x])
        val += pu[u] * (acc - math.log(cmax))
    return val


@njit(cache=True)
def _envelope_pick(infos, dists, n, target):
    """Best pair of stored points whose chord passes over ``target``.

    Returns (i, j, lam, value): the mixture ``(1-lam) W_i + lam W_j`` has
    distortion ``target`` and rate ``value`` or less.
    """
    best = np.inf
    bi, bj, blam = -1, -1, 0.0
    for i in range(n):
        if dists[i] <= target and infos[i] < best:
            best, bi, bj, blam = infos[i], i, i, 0.0
    for i in range(n):
        if dists[i] <= target:
            continue
        for j in range(n):
            if dists[j] > target:
                continue
            lam = (dists[i] - target) / (dists[i] - dists[j])
            v = (1.0 - lam) * infos[i] + lam * infos[j]
            if v < best:
                best, bi, bj, blam = v, i, j, lam
    return bi, bj, blam, best


@njit(cache=True)
def cond_rd_core(pxcu, pu, d, target, beta_guess, ba_iter, max_newton, dtol, max_eval):
    """Conditional RD at one distortion target via a common-slope search.

    Each slope evaluation solves the per-u output-pmf problems to KKT
    precision, giving a point on the RD curve.  The answer is the lower
    convex envelope of the points seen, read off at ``target`` and realized
    by mixing two channels; this also covers linear stretches where the
    distortion jumps as a function of the slope.  The best Blahut dual value
    over the evaluations certifies the result.

    Returns (W, info_nats, dist, beta, gap, steps) where ``gap`` is the
    certified distance (nats) between the returned rate and the true value.
    ``beta`` is +inf for a zero target and 0 when the zero-rate channel
    already suffices.
    """
    U, X = pxcu.shape
    Xh = d.shape[0]
    W0, dist0 = zero_rate_channel(pxcu, pu, d)
    if dist0 <= target:
        return W0, 0.0, dist0, 0.0, 0.0, 0
    if target <= 0.0:
        W, info, steps, gap = masked_rd(pxcu, pu, d, max_newton)
        return W, info, 0.0, np.inf, gap, steps

    cap = max_eval + 2
    Ws = np.empty((cap, U, X, Xh))
    qs = np.empty((cap, U, Xh))
    infos = np.empty(cap)
    dists = np.empty(cap)
    betas = np.empty(cap)
    Ws[0] = W0
    for u in range(U):
        for xh in range(Xh):
            qs[0, u, xh] = W0[u, 0, xh]
    infos[0] = 0.0
    dists[0] = dist0
    betas[0] = 0.0
    n = 1
    total = 0
    lb = 0.0

    i_lo = 0  # distortion above target
    i_hi = -1  # distortion at or below target
    beta = beta_guess if beta_guess > 0.0 and np.isfinite(beta_guess) else 1.0
    q = np.full((U, Xh), 1.0 / Xh)
    e_lo = dist0 - target
    e_hi = 0.0
    side = 0
    since = 0
    w_ref = np.inf
    bracketing = True
    while n < max_eval:
        if not bracketing:
            b_lo = betas[i_lo]
            b_hi = betas[i_hi]
            width = b_hi - b_lo
            if e_lo <= dtol or -e_hi <= dtol or width <= 1e-14 * b_hi:
                break
            # the chord over the bracket lies within width * (d_lo - d_hi) of the curve
            if width * (dists[i_lo] - dists[i_hi]) <= 1e-13:
                break
            # Illinois false position, with a bisection whenever three steps
            # fail to halve the bracket
            beta = b_lo + width * e_lo / (e_lo - e_hi)
            since += 1
            if since > 3 and width > 0.5 * w_ref:
                since = 0
                w_ref = width
                beta = 0.5 * (b_lo + b_hi)
            elif width <= 0.5 * w_ref:
                since = 0
                w_ref = width
            if not (b_lo + 1e-9 * width < beta < b_hi - 1e-9 * width):
                beta = 0.5 * (b_lo + b_hi)
            q = _floored(0.5 * (qs[i_lo] + qs[i_hi]))
        A = slope_kernel(d, beta)
        W, info, dist, steps, gap = solve_kernel(pxcu, pu, d, A, q, ba_iter, max_newton)
        total += steps
        v = dual_value(pxcu, pu, d, beta, q, target)
        if v > lb:
            lb = v
        k = n
        Ws[k] = W
        qs[k] = q
        infos[k] = info
        dists[k] = dist
        betas[k] = beta
        n += 1
        e = dist - target
        if bracketing:
            if e > 0.0:
                i_lo, e_lo = k, e
                if i_hi >= 0:
                    bracketing = False
                elif beta > 1e300:
                    break
                else:
                    beta *= 2.0
            else:
                i_hi, e_hi = k, e
                if -e <= dtol:
                    break
                if i_lo > 0 or beta < 1e-12:
                    bracketing = False
                else:
                    beta *= 0.5
            q = _floored(q)
        elif e > 0.0:
            i_lo, e_lo = k, e
            if side == 1:
                e_hi *= 0.5
            side = 1
        else:
            i_hi, e_hi = k, e
            if side == -1:
                e_lo *= 0.5
            side = -1

    if i_hi < 0:
        # the zero-distortion channel always meets the target
        Wz, iz, sz, gz = masked_rd(pxcu, pu, d, max_newton)
        total += sz
        Ws[n] = Wz
        infos[n] = iz
        dists[n] = 0.0
        betas[n] = np.inf
        n += 1
    i, j, lam, val = _envelope_pick(infos, dists, n, target)
    Wm = (1.0 - lam) * Ws[i] + lam * Ws[j]
    info, dist = channel_stats(pxcu, pu, Wm, d)
    cert = info - lb
    if cert < 0.0:
        cert = 0.0
    beta = betas[j] if lam > 0.5 else betas[i]
    return Wm, info, dist, beta, cert, total


@njit(cache=True)
def _h_nats(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log(1.0 - p)


@njit(cache=True)
def binary_hamming_cond_rd(pxcu, pu, target):
    """Exact conditional RD of a binary source under Hamming distortion.

    Each u contributes h(theta_u) - h(D_u) with D_u = min(lam, m_u), where
    m_u = min(theta_u, 1 - theta_u); ``lam`` solves the average-distortion
    constraint.  Returns (W, info_nats, dist, beta).
    """
    U = pxcu.shape[0]
    m = np.empty(U)
    zr = 0.0
    for u in range(U):
        t = pxcu[u, 1]
        m[u] = t if t < 0.5 else 1.0 - t
        zr += pu[u] * m[u]
    lam = 0.0
    if target >= zr:
        lam = 0.5
    elif target > 0.0:
        order = np.argsort(m)
        # f(lam) = sum_{m_u < lam} pu m_u + lam * sum_{m_u >= lam} pu
        below = 0.0
        above = 0.0
        for u in range(U):
            above += pu[u]
        lam = target
        for k in range(U):
            u = order[k]
            cand = (target - below) / above if above > 0.0 else 0.5
            if cand <= m[u]:
                lam = cand
                break
            below += pu[u] * m[u]
            above -= pu[u]
            lam = 0.5
    W = np.zeros((U, 2, 2))
    info = 0.0
    dist = 0.0
    for u in range(U):
        t = pxcu[u, 1]
        if lam >= m[u]:
            maj = 1 if t > 0.5 else 0
            W[u, 0, maj] = 1.0
            W[u, 1, maj] = 1.0
            dist += pu[u] * m[u]
            continue
        # backward BSC(lam): P(xh=1) = r, P(x != xh) = lam
        r = (t - lam) / (1.0 - 2.0 * lam)
        for x in range(2):
            px = t if x == 1 else 1.0 - t
            if px <= 0.0:
                W[u, x, x] = 1.0
                continue
            for xh in range(2):
                pxh = r if xh == 1 else 1.0 - r
                pxgxh = 1.0 - lam if xh == x else lam
                W[u, x, xh] = pxh * pxgxh / px
        info += pu[u] * (_h_nats(t) - _h_nats(lam))
        dist += pu[u] * lam
    if lam <= 0.0:
        beta = np.inf
    elif lam >= 0.5 or target >= zr:
        beta = 0.0
    else:
        beta = math.log((1.0 - lam) / lam)
    if info < 0.0:
        info = 0.0
    return W, info, dist, beta


@njit(cache=True)
def aux_eval(P, ps, sym, dpad, xsizes, xhsizes, targets, binary, want_grad, ba_iter, max_newton):
    """Evaluate an auxiliary channel ``P[k, u]`` on the positive-mass joint symbols.

    Returns (info, rates, grads, gap) in nats: I(X̄;U), the conditional RD
    value of each source given U, the derivative of each value with respect
    to ``P`` (zero-mass labels get 0), and the worst solver certificate.
    """
    ns, L = sym.shape
    K = P.shape[1]
    pu = np.zeros(K)
    for k in range(ns):
        for u in range(K):
            pu[u] += ps[k] * P[k, u]
    info = 0.0
    for k in range(ns):
        for u in range(K):
            if P[k, u] > 0.0 and pu[u] > 0.0:
                info += ps[k] * P[k, u] * math.log(P[k, u] / pu[u])
    if info < 0.0:
        info = 0.0
    nk = 0
    for u in range(K):
        if pu[u] > 0.0:
            nk += 1
    kept = np.empty(nk, np.int64)
    j = 0
    for u in range(K):
        if pu[u] > 0.0:
            kept[j] = u
            j += 1
    rates = np.zeros(L)
    grads = np.zeros((L, ns, K)) if want_grad else np.zeros((L, 0, 0))
    gap = 0.0
    for l in range(L):
        X = xsizes[l]
        pxcu = np.zeros((nk, X))
        puk = np.empty(nk)
        for j in range(nk):
            u = kept[j]
            puk[j] = pu[u]
            for k in range(ns):
                pxcu[j, sym[k, l]] += ps[k] * P[k, u]
            tot = 0.0
            for x in range(X):
                tot += pxcu[j, x]
            for x in range(X):
                pxcu[j, x] /= tot
        d = dpad[l, : xhsizes[l], :X]
        if binary[l]:
            W, rate, dist, beta = binary_hamming_cond_rd(pxcu, puk, targets[l])
            g = 0.0
        else:
            W, rate, dist, beta, g, steps = cond_rd_core(
                pxcu, puk, d, targets[l], 0.0, ba_iter, max_newton, 1e-12, 100
            )
        rates[l] = rate
        if g > gap:
            gap = g
        if want_grad:
            b = beta if np.isfinite(beta) else 0.0
            cost = kl_cost(pxcu, W, d, b)
            for j in range(nk):
                u = kept[j]
                for k in range(ns):
                    grads[l, k, u] = ps[k] * cost[j, sym[k, l]]
    return info, rates, grads, gap


@njit(cache=True)
def aux_grid_cloud(ps, sym, dpad, xsizes, xhsizes, targets, binary, rows, first, ba_iter, max_newton):
    """Evaluate every auxiliary channel on a simplex grid.

    Rows of the channel for the ``ns`` positive-mass joint symbols are drawn
    from ``rows`` (m candidate pmfs over the auxiliary alphabet); the first row
    only from ``first`` (indices into ``rows``), which removes relabelings.
    Returns (info, worst) arrays in nats: I(X̄;U) and max over sources of the
    conditional RD value.  Grid point t decodes as a mixed-radix number with
    the first row as its most significant digit.
    """
    ns, L = sym.shape
    m, K = rows.shape
    total = first.size * m ** (ns - 1)
    out_info = np.empty(total)
    out_val = np.empty(total)
    idx = np.zeros(ns, np.int64)
    P = np.empty((ns, K))
    for t in range(total):
        r = t
        for k in range(ns - 1, 0, -1):
            idx[k] = r % m
            r //= m
        idx[0] = first[r]
        for k in range(ns):
            for u in range(K):
                P[k, u] = rows[idx[k], u]
        info, rates, grads, gap = aux_eval(
            P, ps, sym, dpad, xsizes, xhsizes, targets, binary, False, ba_iter, max_newton
        )
        out_info[t] = info
        out_val[t] = rates.max()
    return out_info, out_val
