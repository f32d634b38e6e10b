"""Information measures and rate-distortion primitives.

Rates are in bits.  The solvers run in nats internally and convert on output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _kernels as K
from .errors import InfeasibleTarget, InvalidPmf, NoConvergence
from .source_model import SourceLibrary, as_distortions

LN2 = math.log(2.0)

BA_WARMUP = 30  # BA steps before the Newton finish
MAX_NEWTON = 200
LOOSE_GAP = 1e-5  # nats; a run certified above this gap is reported as not converged
DIST_TOL = 1e-12
MAX_EVAL = 100


def _check_pmf(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidPmf("pmf must be finite and nonnegative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InvalidPmf(f"pmf sums to {p.sum()!r}")
    return p


def _h(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def entropy(pmf) -> float:
    """Shannon entropy in bits of a pmf of any shape."""
    return max(0.0, _h(_check_pmf(pmf).ravel()))


def mutual_information(joint, split: int = 1) -> float:
    """I(A;B) in bits, where A is the first ``split`` axes of ``joint``."""
    p = _check_pmf(joint)
    if p.ndim < 2:
        raise InvalidPmf("joint pmf needs at least two axes")
    na = int(np.prod(p.shape[:split]))
    p = p.reshape(na, -1)
    val = _h(p.sum(1)) + _h(p.sum(0)) - _h(p.ravel())
    return max(0.0, val)


def conditional_mutual_information(joint) -> float:
    """I(A;B|U) in bits for a 3-axis pmf ordered (A, B, U)."""
    p = _check_pmf(joint)
    if p.ndim != 3:
        raise InvalidPmf("expected a pmf over (A, B, U)")
    val = _h(p.sum(1).ravel()) + _h(p.sum(0).ravel()) - _h(p.ravel()) - _h(p.sum((0, 1)))
    return max(0.0, val)


@dataclass
class TestChannel:
    """Conditional pmf of the reconstruction given a context.

    ``context`` is ``"x"`` (shape (|X|, |Xh|)), ``"xu"`` (shape (|X|, |U|, |Xh|))
    or ``"xbar"`` (shape (|X̄|, |X̂̄|)).
    """

    __test__ = False  # not a pytest class

    matrix: np.ndarray
    context: str = "x"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if np.any(m < -1e-15) or not np.allclose(m.sum(-1), 1.0, atol=1e-9):
            raise InvalidPmf("test channel rows must be pmfs")
        self.matrix = m


@dataclass
class RDResult:
    rate: float
    achieving_channel: TestChannel
    achieved_distortions: list
    iterations: int = 0
    converged: bool = True
    slope: float = 0.0  # -dR/dD in bits per unit distortion (inf at D = 0)
    slopes: list = field(default_factory=list)  # per-source slopes for joint RD


def _cond_arrays(joint_xu: np.ndarray):
    """Split p(x,u) into (pxcu, pu, keep) dropping zero-mass u values."""
    pu_full = joint_xu.sum(0)
    keep = np.flatnonzero(pu_full > 0)
    pu = pu_full[keep]
    pxcu = np.ascontiguousarray((joint_xu[:, keep] / pu).T)
    return pxcu, pu, keep


def is_binary_hamming(d: np.ndarray) -> bool:
    return d.shape == (2, 2) and d[0, 0] == 0 and d[1, 1] == 0 and d[0, 1] == 1 and d[1, 0] == 1


def cond_rd_arrays(pxcu, pu, d, D, beta_guess=0.0):
    """Array-level conditional RD used by the solvers.

    Returns (rate_bits, W, dist, beta_nats, gap, iterations) with
    ``W[u, x, xh]``.  Binary Hamming sources use the exact water-filling form.
    """
    if is_binary_hamming(d):
        W, info, dist, beta = K.binary_hamming_cond_rd(pxcu, pu, float(D))
        return info / LN2, W, dist, beta, 0.0, 0
    W, info, dist, beta, gap, it = K.cond_rd_core(
        pxcu, pu, d, float(D), float(beta_guess), BA_WARMUP, MAX_NEWTON, DIST_TOL, MAX_EVAL
    )
    return info / LN2, W, dist, beta, gap, it


def cond_rd_gradient(pxcu, W, d, beta) -> np.ndarray:
    """Derivative (bits) of the conditional RD value w.r.t. the joint mass p(x, u), shape (U, X)."""
    b = 0.0 if not np.isfinite(beta) else beta
    return K.kl_cost(pxcu, W, d, b) / LN2


def _finish(rate, W, dists, it, gap, beta, context, strict, slopes=None):
    converged = bool(gap <= LOOSE_GAP)
    if strict and not converged:
        raise NoConvergence(f"solver stopped with certified gap {gap:.3g} nats after {it} iterations")
    slope = float(beta / LN2) if np.isfinite(beta) else math.inf
    return RDResult(
        rate=max(0.0, float(rate)),
        achieving_channel=TestChannel(W, context),
        achieved_distortions=[float(x) for x in dists],
        iterations=int(it),
        converged=converged,
        slope=slope,
        slopes=slopes or [slope],
    )


def _check_target(D):
    D = float(D)
    if not np.isfinite(D) or D < 0:
        raise InfeasibleTarget(f"distortion target must be finite and >= 0, got {D}")
    return D


def conditional_rd_function(joint_xu, distortion_matrix, D, strict: bool = True) -> RDResult:
    """R_{X|U}(D) in bits for a joint pmf of shape (|X|, |U|).

    The achieving channel has context ``"xu"`` and shape (|X|, |U|, |Xh|); rows
    for zero-mass u repeat the zero-rate reconstruction.
    """
    p = _check_pmf(joint_xu)
    if p.ndim != 2:
        raise InvalidPmf("expected a pmf over (X, U)")
    d = np.asarray(distortion_matrix, dtype=float)
    D = _check_target(D)
    pxcu, pu, keep = _cond_arrays(p)
    rate, W, dist, beta, gap, it = cond_rd_arrays(pxcu, pu, d, D)
    full = np.zeros((p.shape[1], p.shape[0], d.shape[0]))
    full[:, :, int(np.argmin(d @ p.sum(1)))] = 1.0
    full[keep] = W
    return _finish(rate, full.transpose(1, 0, 2), [dist], it, gap, beta, "xu", strict)


def rd_function(pmf_x, distortion_matrix, D, strict: bool = True) -> RDResult:
    """R_X(D) in bits; the achieving channel has shape (|X|, |Xh|)."""
    p = _check_pmf(pmf_x).ravel()
    res = conditional_rd_function(p[:, None], distortion_matrix, D, strict)
    res.achieving_channel = TestChannel(res.achieving_channel.matrix[:, 0, :], "x")
    return res


def marginal_rd(lib: SourceLibrary, ell: int, D) -> RDResult:
    from .source_model import marginal

    return rd_function(marginal(lib, [ell]), lib.distortion[ell], D)


# joint RD --------------------------------------------------------------------------


def _product_distortions(lib: SourceLibrary, coords):
    """Composite matrices E[k][xh_idx, xbar_idx] over the product of the ``coords`` recon alphabets."""
    sym = lib.symbols()
    sizes = [lib.recon_alphabet_sizes[l] for l in coords]
    rec = np.indices(sizes).reshape(len(coords), -1).T if coords else np.zeros((1, 0), int)
    mats = []
    for k, l in enumerate(coords):
        mats.append(np.ascontiguousarray(lib.distortion[l][rec[:, k]][:, sym[:, l]]))
    return mats, rec


def _joint_ba(px, A, q, mats):
    pxcu = px[None, :]
    q[:] = K._floored(q)
    W, _, _, it, gap = K.solve_kernel(pxcu, np.ones(1), A, A, q, BA_WARMUP, MAX_NEWTON)
    if gap > 1e-12:
        # warm starts on a degenerate face can stall Newton; a uniform start does not
        fresh = np.full_like(q, 1.0 / q.shape[1])
        W2, _, _, it2, gap2 = K.solve_kernel(pxcu, np.ones(1), A, A, fresh, BA_WARMUP, MAX_NEWTON)
        it += it2
        if gap2 < gap:
            W, gap = W2, gap2
            q[:] = fresh
    W = W[0]
    dists = np.array([float(px @ (W * E.T).sum(1)) for E in mats])
    return W, dists, it, gap


def _kkt_met(excess, betas):
    """Targets met, with slack only where the slope is zero."""
    tight = np.abs(excess) <= 1e-9
    return bool(np.all(tight) or np.all(excess <= 1e-9) and np.all(tight | (betas <= 1e-9)))


def _refine_slopes(px, kernel, q, mats, offset, targets, states, betas, max_iter=100):
    """Column generation on the slope vector once coordinate search stalls.

    ``states`` holds Lagrangian minimizers ``(slopes, W, dists, gap)``.  A small
    LP mixes them (plus a zero-distortion channel, so it is always feasible)
    to meet the targets; its duals give the next slope vector.  Mixing keeps
    distortions linear and mutual information is convex, so the mixture's
    rate is an upper bound.  Each minimizer's Lagrangian value is a lower bound.
    Returns (W, dists, lower bound in nats, certified gap, slopes, iterations).
    """
    pxcu = px[None, :]
    n, m = mats[0].shape[1], mats[0].shape[0]
    zero = np.ones((m, n))
    for E in mats:
        zero *= E == 0
    W0 = zero.T * (np.arange(m)[None, :] == zero.T.argmax(1)[:, None])

    def rate(W):
        return K.channel_stats(pxcu, np.ones(1), W[None], np.zeros((m, n)))[0]

    def dists_of(W):
        return np.array([float(px @ (W * E.T).sum(1)) for E in mats])

    cols = [(W0, dists_of(W0), rate(W0))]
    b = betas
    lower, its = -np.inf, 0
    for slopes, W, d, g in states:
        cols.append((W, d, rate(W)))
        lower = max(lower, cols[-1][2] + float(slopes @ (d[offset:] - targets)) - g)
    for _ in range(max_iter):
        res = linprog(
            [c[2] for c in cols],
            A_ub=np.array([c[1][offset:] for c in cols]).T,
            b_ub=targets,
            A_eq=np.ones((1, len(cols))),
            b_eq=[1.0],
            bounds=(0, None),
            method="highs",
        )
        lam = np.clip(res.x, 0.0, None)
        lam /= lam.sum()
        W = sum(w * c[0] for w, c in zip(lam, cols))
        b = np.maximum(-res.ineqlin.marginals, 0.0)
        if rate(W) - lower <= 1e-11:
            break
        qq = q.copy()
        Wn, dn, it, g = _joint_ba(px, kernel(b), qq, mats)
        its += it
        cols.append((Wn, dn, rate(Wn)))
        lower = max(lower, cols[-1][2] + float(b @ (dn[offset:] - targets)) - g)
    return W, dists_of(W), lower, max(rate(W) - lower, 0.0), b, its


def joint_rd_function(lib: SourceLibrary, D, strict: bool = True, rounds: int = 50) -> RDResult:
    """Joint RD R_X̄(D) in bits with one average-distortion constraint per source.

    Sources whose target is met by a constant reconstruction are pinned to that
    constant (this never costs rate).  Sources with a zero target are handled
    by a zero-distortion mask.  The remaining slopes are tuned by cyclic
    per-coordinate bisection around an exact inner solve at a fixed slope vector;
    if that stalls on a kink of the dual, column generation finishes the job.
    """
    Dt = as_distortions(D, lib.L).values
    px = lib.pmf
    n = lib.size
    const_sym = []
    zr = []
    for l in range(lib.L):
        pl = lib.joint.sum(tuple(i for i in range(lib.L) if i != l))
        e = lib.distortion[l] @ pl
        const_sym.append(int(np.argmin(e)))
        zr.append(float(e.min()))
    pinned = [l for l in range(lib.L) if Dt[l] >= zr[l]]
    masked = [l for l in range(lib.L) if Dt[l] <= 0 and l not in pinned]
    active = [l for l in range(lib.L) if l not in pinned and l not in masked]
    coords = masked + active
    mats, rec = _product_distortions(lib, coords)
    m = rec.shape[0]

    mask = np.ones((m, n))
    for k in range(len(masked)):
        mask *= mats[k] == 0
    betas = np.zeros(len(active))
    total_it = 0
    gap = 0.0

    def kernel(b):
        s = np.zeros((m, n))
        for j in range(len(active)):
            s += b[j] * mats[len(masked) + j]
        # per-column shifts leave the optimal channel unchanged and avoid underflow
        s -= np.where(mask > 0, s, np.inf).min(axis=0)
        return mask * np.exp(-s)

    q = np.full((1, m), 1.0 / m)
    if active:
        betas[:] = 1.0
        W, dists, it, gap = _joint_ba(px, kernel(betas), q, mats)
        total_it += it
        targets = np.array([Dt[l] for l in active])
        settled = False
        for _ in range(rounds):
            previous = betas.copy()
            states = []  # Lagrangian minimizers seen this round: (slopes, W, dists, gap)
            for j in range(len(active)):
                k = len(masked) + j

                def run(bj):
                    b = betas.copy()
                    b[j] = bj
                    qq = q.copy()
                    W_, d_, it_, g_ = _joint_ba(px, kernel(b), qq, mats)
                    return qq, W_, d_, it_, g_, b

                # bracket on beta_j: lo has d > target, hi has d <= target
                lo, hi = 0.0, None
                lo_state = hi_state = None
                bj = max(betas[j], 1e-6)
                for _ in range(200):
                    st = run(bj)
                    total_it += st[3]
                    if st[2][k] > targets[j]:
                        lo, lo_state = bj, st
                        if hi is not None:
                            break
                        bj *= 2.0
                    else:
                        hi, hi_state = bj, st
                        if lo > 0 or bj < 1e-9:
                            break
                        bj *= 0.5
                if hi is None:
                    raise InfeasibleTarget(f"source {active[j]} cannot reach D={targets[j]}")
                for _ in range(100):
                    if hi - lo <= 1e-12 * hi or targets[j] - hi_state[2][k] <= 1e-11:
                        break
                    mid = 0.5 * (lo + hi)
                    st = run(mid)
                    total_it += st[3]
                    if st[2][k] > targets[j]:
                        lo, lo_state = mid, st
                    else:
                        hi, hi_state = mid, st
                betas[j] = hi
                q, W, dists, _, gap, _ = hi_state
                for state in (lo_state, hi_state):
                    if state is not None:
                        states.append((state[5], state[1], state[2], state[4]))
            settled = _kkt_met(dists[len(masked):] - targets, betas)
            if settled or np.max(np.abs(betas - previous)) <= 1e-10 * (1.0 + np.max(betas)):
                break
        if not settled:
            # coordinate search stalled on a kink of the dual
            W, dists, _, gap, betas, it = _refine_slopes(px, kernel, q, mats, len(masked), targets, states, betas)
            total_it += it
    else:
        W, dists, it, gap = _joint_ba(px, kernel(betas), q, mats)
        total_it += it

    info = K.channel_stats(px[None, :], np.ones(1), W[None], np.zeros((m, n)))[0]
    # expand to the full reconstruction alphabet, pinned sources on their constant symbol
    full_sizes = lib.recon_alphabet_sizes
    full = np.zeros((n, int(np.prod(full_sizes))))
    for r in range(m):
        idx = [0] * lib.L
        for k, l in enumerate(coords):
            idx[l] = rec[r, k]
        for l in pinned:
            idx[l] = const_sym[l]
        full[:, np.ravel_multi_index(idx, full_sizes)] += W[:, r]
    all_d = []
    sym = lib.symbols()
    rsym = np.indices(full_sizes).reshape(lib.L, -1).T
    for l in range(lib.L):
        E = lib.distortion[l][rsym[:, l]][:, sym[:, l]]
        all_d.append(float(px @ (full * E.T).sum(1)))
    excess = max(a - b for a, b in zip(all_d, Dt))
    bad_gap = gap if excess <= 1e-6 else max(gap, 1.0)
    slopes = [0.0] * lib.L
    for j, l in enumerate(active):
        slopes[l] = betas[j] / LN2
    for l in masked:
        slopes[l] = math.inf
    res = _finish(info / LN2, full, all_d, total_it, bad_gap, 0.0, "xbar", strict, slopes)
    res.slope = max(slopes) if slopes else 0.0
    return res
