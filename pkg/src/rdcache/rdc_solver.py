"""Rate-distortion-cache tradeoff: solver, grid oracle, bounds and critical capacities.

The tradeoff function is

    R(D, C) = min over p(u|x̄) with I(X̄;U) <= C of max_l R_{X_l|U}(D_l).

It is convex and non-increasing in C.  The minimization is nonconvex, so
``rdc_value`` is a multistart local search whose every candidate is a feasible
auxiliary channel; ``rdc_brute_force`` is an exhaustive grid oracle for tiny
instances.  All rates are in bits.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog, minimize

from . import _kernels as K
from .errors import InstanceTooLarge, InvalidCache, InvalidPmf
from .it_core import (
    BA_WARMUP,
    LN2,
    MAX_NEWTON,
    is_binary_hamming,
    joint_rd_function,
    rd_function,
)
from .source_model import DistortionTuple, SourceLibrary, as_distortions, marginal, sub_library

RATE_TOL = 1e-4  # agreement tolerance for critical capacities and monotonicity warnings
BRUTE_MAX_SYMBOLS = 4
BRUTE_MAX_AUX = 3
BRUTE_MAX_POINTS = 2_000_000


@dataclass
class AuxChannel:
    """Auxiliary channel p(u|x̄); rows follow the row-major joint alphabet."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or np.any(m < -1e-15) or not np.allclose(m.sum(1), 1.0, atol=1e-9):
            raise InvalidPmf("auxiliary channel rows must be pmfs")
        self.matrix = np.clip(m, 0.0, None)

    @property
    def aux_size(self) -> int:
        return int(self.matrix.shape[1])


@dataclass
class TradeoffPoint:
    cache: float
    distortions: DistortionTuple
    rate: float
    witness: AuxChannel | None = None
    method: str = "solver"
    mutual_info: float | None = None
    source_rates: list | None = None
    converged: bool = True


@dataclass
class TradeoffCurve:
    distortions: DistortionTuple
    caches: np.ndarray
    raw: np.ndarray
    envelope: np.ndarray
    genie: np.ndarray
    superuser: np.ndarray
    super_genie: np.ndarray
    points: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def rows(self) -> list:
        out = []
        for i, c in enumerate(self.caches):
            pt = self.points[i] if self.points else None
            out.append(
                {
                    "C": float(c),
                    "R_solver": float(self.raw[i]),
                    "R_genie": float(self.genie[i]),
                    "R_superuser": float(self.superuser[i]),
                    "R_supergenie": float(self.super_genie[i]),
                    "R_envelope": float(self.envelope[i]),
                    "witness_aux_size": pt.witness.aux_size if pt is not None and pt.witness is not None else 0,
                    "converged": bool(pt.converged) if pt is not None else True,
                }
            )
        return out


def default_aux_cap(lib: SourceLibrary, D) -> int:
    """Cardinality cap |X̄| + 2L, or |X̄| + L for Hamming distortions at zero distortion."""
    Dt = as_distortions(D, lib.L)
    if lib.is_hamming() and all(v == 0 for v in Dt):
        return lib.size + lib.L
    return lib.size + 2 * lib.L


def _check_cache(C) -> float:
    C = float(C)
    if not np.isfinite(C) or C < 0:
        raise InvalidCache(f"cache capacity must be finite and >= 0, got {C}")
    return C


# objective evaluation ----------------------------------------------------------------


class AuxProblem:
    """Evaluates I(X̄;U) and the per-source conditional RD values of an auxiliary channel.

    Channels are handled on the positive-mass joint symbols only, as arrays of
    shape (n_support, aux_size).
    """

    def __init__(self, lib: SourceLibrary, D):
        self.lib = lib
        self.D = as_distortions(D, lib.L)
        self.support = np.flatnonzero(lib.pmf > 0)
        self.ps = lib.pmf[self.support].copy()
        self.sym = np.ascontiguousarray(lib.symbols()[self.support], dtype=np.int64)
        self.onehots = [np.eye(lib.alphabet_sizes[l])[self.sym[:, l]] for l in range(lib.L)]
        mX = max(lib.alphabet_sizes)
        mXh = max(lib.recon_alphabet_sizes)
        self.dpad = np.zeros((lib.L, mXh, mX))
        for l, d in enumerate(lib.distortion):
            self.dpad[l, : d.shape[0], : d.shape[1]] = d
        self.xsizes = np.array(lib.alphabet_sizes, dtype=np.int64)
        self.xhsizes = np.array(lib.recon_alphabet_sizes, dtype=np.int64)
        self.targets = np.array(self.D.values, dtype=float)
        self.binary = np.array([is_binary_hamming(d) for d in lib.distortion])
        self.evaluations = 0
        self._memo_key = None
        self._memo = None
        self.corners = []  # (I, rates) of every evaluated channel, in bits

    def info(self, P) -> float:
        pu = self.ps @ P
        mask = P > 0
        ratio = np.ones_like(P)
        ratio[mask] = P[mask] / np.broadcast_to(pu, P.shape)[mask]
        joint = self.ps[:, None] * P
        return max(0.0, float((joint[mask] * np.log2(ratio[mask])).sum()))

    def kernel_args(self):
        return (self.ps, self.sym, self.dpad, self.xsizes, self.xhsizes, self.targets, self.binary)

    def evaluate(self, P, grad: bool = False):
        """Return (I bits, rates bits, rate gradients or None, worst certificate gap)."""
        key = (P.tobytes(), grad)
        if self._memo_key == key:
            return self._memo
        self.evaluations += 1
        info, rates, grads, gap = K.aux_eval(
            np.ascontiguousarray(P, dtype=float), *self.kernel_args(), grad, BA_WARMUP, MAX_NEWTON
        )
        info /= LN2
        rates = rates / LN2
        grads = grads / LN2 if grad else None
        self.corners.append((info, rates.copy()))
        out = (info, rates, grads, gap)
        self._memo_key = key
        self._memo = out
        return out

    def info_gradient(self, P) -> np.ndarray:
        pu = self.ps @ P
        Pc = np.clip(P, 1e-12, None)
        return self.ps[:, None] * np.log2(Pc / np.clip(pu, 1e-300, None))

    def full_matrix(self, P) -> np.ndarray:
        """Expand a support-row channel to all joint symbols (zero-mass rows on label 0)."""
        out = np.zeros((self.lib.size, P.shape[1]))
        out[:, 0] = 1.0
        out[self.support] = P
        return out

    def repair(self, P, C):
        """Mix toward the independent channel until I(X̄;U) <= C.

        Along the segment to the channel whose rows all equal p(u), the
        information is convex and reaches 0, hence non-increasing.
        """
        P = _normalize(P)
        if self.info(P) <= C:
            return P
        Q = np.broadcast_to(self.ps @ P, P.shape)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.info((1 - mid) * P + mid * Q) <= C:
                hi = mid
            else:
                lo = mid
        return (1 - hi) * P + hi * Q


def _normalize(P):
    P = np.clip(P, 0.0, None)
    s = P.sum(1, keepdims=True)
    bad = s[:, 0] <= 0
    if np.any(bad):
        P[bad] = 1.0 / P.shape[1]
        s[bad] = 1.0
    return P / s


def aux_objective(lib: SourceLibrary, D, aux: AuxChannel):
    """Return (I(X̄;U), [R_{X_l|U}(D_l) for each l]) in bits for an auxiliary channel."""
    prob = AuxProblem(lib, D)
    info, rates, _, _ = prob.evaluate(np.ascontiguousarray(aux.matrix[prob.support]))
    return info, [float(r) for r in rates]


# bounds ------------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _marginal_rd(lib, ell, D_ell):
    return rd_function(marginal(lib, [ell]).ravel(), lib.distortion[ell], D_ell).rate


@lru_cache(maxsize=4096)
def _subset_rd(lib, S, D_S):
    if len(S) == 1:
        return _marginal_rd(lib, S[0], D_S[0])
    return joint_rd_function(sub_library(lib, S), D_S).rate


def marginal_rates(lib: SourceLibrary, D) -> list:
    Dt = as_distortions(D, lib.L)
    return [_marginal_rd(lib, l, Dt[l]) for l in range(lib.L)]


def joint_rate(lib: SourceLibrary, D) -> float:
    Dt = as_distortions(D, lib.L)
    return _subset_rd(lib, tuple(range(lib.L)), tuple(Dt.values))


def genie_bound(lib: SourceLibrary, D, C) -> float:
    C = _check_cache(C)
    return max(0.0, max(marginal_rates(lib, D)) - C)


def superuser_bound(lib: SourceLibrary, D, C) -> float:
    C = _check_cache(C)
    return max(0.0, (joint_rate(lib, D) - C) / lib.L)


def super_genie_bound(lib: SourceLibrary, D, C, return_subset: bool = False):
    """max over nonempty S of [(R_{X_S}(D_S) - C)/|S|]^+."""
    C = _check_cache(C)
    if lib.L > 8:
        raise InstanceTooLarge("super-genie bound enumerates 2^L subsets; L <= 8 supported")
    Dt = as_distortions(D, lib.L)
    best, arg = 0.0, None
    for k in range(1, lib.L + 1):
        for S in itertools.combinations(range(lib.L), k):
            val = (_subset_rd(lib, S, tuple(Dt[i] for i in S)) - C) / k
            if arg is None or val > best:
                best, arg = max(val, 0.0), S
    return (best, arg) if return_subset else best


# structured starts ---------------------------------------------------------------


def _labels_to_channel(labels, ns, K):
    P = np.zeros((ns, K))
    P[np.arange(ns), np.asarray(labels) % K] = 1.0
    return P


def _fit_columns(M, K):
    """Reduce a channel with many output columns to K by merging the lightest ones."""
    M = M[:, M.sum(0) > 0]
    if M.shape[1] <= K:
        out = np.zeros((M.shape[0], K))
        out[:, : M.shape[1]] = M
        return out
    order = np.argsort(-M.sum(0), kind="stable")
    out = M[:, order[:K]].copy()
    out[:, K - 1] += M[:, order[K:]].sum(1)
    return out


def _structured_starts(prob: AuxProblem, K: int):
    lib = prob.lib
    ns = prob.ps.size
    starts = [("constant", _labels_to_channel(np.zeros(ns, int), ns, K))]
    starts.append(("identity", _fit_columns(np.eye(ns), K)))
    for l in range(lib.L):
        starts.append((f"source{l}", _fit_columns(prob.onehots[l], K)))
        res = rd_function(marginal(lib, [l]).ravel(), lib.distortion[l], prob.D[l], strict=False)
        starts.append((f"marginal_code{l}", _fit_columns(prob.onehots[l] @ res.achieving_channel.matrix, K)))
    jr = joint_rd_function(lib, prob.D, strict=False)
    starts.append(("joint_code", _fit_columns(jr.achieving_channel.matrix[prob.support], K)))
    from .common_info import gacs_korner_zero

    gk = gacs_korner_zero(lib)
    starts.append(("common_part", _fit_columns(np.eye(gk.n_components)[gk.joint_labels[prob.support]], K)))
    return starts


# local search ---------------------------------------------------------------------


def _slsqp(prob: AuxProblem, P0, C, maxiter):
    ns, K = P0.shape
    nv = ns * K
    L = prob.lib.L

    def unpack(x):
        return _normalize(x[:nv].reshape(ns, K).copy())

    def rates(x):
        return prob.evaluate(unpack(x), grad=True)

    def con_rates(x):
        return x[-1] - rates(x)[1]

    def con_rates_jac(x):
        g = rates(x)[2]
        J = np.zeros((L, nv + 1))
        for l in range(L):
            J[l, :nv] = -g[l].ravel()
        J[:, -1] = 1.0
        return J

    def con_info(x):
        return np.array([C - prob.info(unpack(x))])

    def con_info_jac(x):
        J = np.zeros((1, nv + 1))
        J[0, :nv] = -prob.info_gradient(unpack(x)).ravel()
        return J

    Aeq = np.zeros((ns, nv + 1))
    for k in range(ns):
        Aeq[k, k * K : (k + 1) * K] = 1.0

    c = np.zeros(nv + 1)
    c[-1] = 1.0
    x0 = np.concatenate([P0.ravel(), [float(np.max(prob.evaluate(P0)[1]))]])
    cons = [
        {"type": "ineq", "fun": con_rates, "jac": con_rates_jac},
        {"type": "ineq", "fun": con_info, "jac": con_info_jac},
        {"type": "eq", "fun": lambda x: Aeq @ x - 1.0, "jac": lambda x: Aeq},
    ]
    bounds = [(0.0, 1.0)] * nv + [(0.0, None)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(
            lambda x: x[-1],
            x0,
            jac=lambda x: c,
            method="SLSQP",
            bounds=bounds,
            constraints=cons,
            options={"maxiter": maxiter, "ftol": 1e-12},
        )
    return prob.repair(unpack(res.x), C)


def _perturb(prob: AuxProblem, P, C, best, rng, trials):
    """Random two-label mass transfers, keeping only feasible improvements."""
    ns, K = P.shape
    step = 0.1
    for t in range(trials):
        k = rng.integers(ns)
        a, b = rng.choice(K, 2, replace=False)
        if P[k, a] <= 0:
            continue
        Q = P.copy()
        move = min(P[k, a], step)
        Q[k, a] -= move
        Q[k, b] += move
        if prob.info(Q) > C:
            continue
        val = float(np.max(prob.evaluate(Q)[1]))
        if val < best - 1e-13:
            P, best = Q, val
        elif t % 20 == 19:
            step *= 0.5
    return P, best


def _mixture_from_cloud(prob: AuxProblem, pool, C, cap):
    """Time-share two evaluated channels when their chord beats the best single point.

    Returns (P, value) or None.  U' = (Q, U_Q) uses the union of both alphabets.
    """
    pts = [(prob.info(P), v, P) for P, v in pool]
    best = None
    for (ia, va, Pa), (ib, vb, Pb) in itertools.combinations(pts, 2):
        if ia > ib:
            ia, va, Pa, ib, vb, Pb = ib, vb, Pb, ia, va, Pa
        if not ia <= C < ib:
            continue
        lam = (C - ia) / (ib - ia)
        val = (1 - lam) * va + lam * vb
        if best is None or val < best[0]:
            best = (val, lam, Pa, Pb)
    if best is None:
        return None
    _, lam, Pa, Pb = best
    Pa = Pa[:, Pa.sum(0) > 0]
    Pb = Pb[:, Pb.sum(0) > 0]
    if Pa.shape[1] + Pb.shape[1] > cap:
        return None
    P = np.hstack([(1 - lam) * Pa, lam * Pb])
    P = prob.repair(P, C)
    return P, float(np.max(prob.evaluate(P)[1]))


def rdc_value(
    lib: SourceLibrary,
    D,
    C,
    seed: int = 0,
    restarts: int = 20,
    aux_cap: int | None = None,
    maxiter: int = 40,
    polish_iter: int = 300,
    perturb_trials: int = 200,
    certify_tol: float = 1e-7,
    record: bool = False,
) -> TradeoffPoint:
    """Multistart search for R(D, C).

    Every candidate is a feasible auxiliary channel (rejection plus a repair
    that mixes toward independence), so the returned rate is achievable with
    the returned witness.  Starts: structured channels (constant, identity,
    each source, marginal and joint RD codes, the common part) and
    ``restarts`` Dirichlet draws seeded from ``seed``.  Each start gets a
    short SLSQP run on the epigraph form; the best point is then polished
    with a long run, a time-sharing step over the evaluated points and random
    two-label perturbations.  The search stops early once the best value is
    within ``certify_tol`` of the super-genie lower bound.
    """
    C = _check_cache(C)
    Dt = as_distortions(D, lib.L)
    prob = AuxProblem(lib, Dt)
    ns = prob.ps.size
    cap = default_aux_cap(lib, Dt) if aux_cap is None else int(aux_cap)
    if cap < 1:
        raise InvalidCache("aux cap must be >= 1")
    lower = super_genie_bound(lib, Dt, C)

    def finish(P):
        info, rates, _, gap = prob.evaluate(P)
        pt = TradeoffPoint(
            cache=C,
            distortions=Dt,
            rate=max(0.0, float(np.max(rates))),
            witness=AuxChannel(prob.full_matrix(P)),
            method="solver",
            mutual_info=info,
            source_rates=[float(r) for r in rates],
            converged=bool(gap <= 1e-5),
        )
        if record:
            pt.corners = list(prob.corners)
        return pt

    if C == 0 or cap == 1:
        return finish(_labels_to_channel(np.zeros(ns, int), ns, cap))

    def value(P):
        return float(np.max(prob.evaluate(P)[1]))

    rng = np.random.default_rng(seed)
    starts = [P for _, P in _structured_starts(prob, cap)]
    for r in range(restarts):
        alpha = 0.3 if r % 2 else 1.0
        starts.append(rng.dirichlet(np.full(cap, alpha), size=ns))

    pool = []
    best_P, best = None, np.inf
    for P0 in starts:
        for P in (prob.repair(P0, C),):
            v = value(P)
            if v < best:
                best_P, best = P, v
            if best <= lower + certify_tol:
                return finish(best_P)
            P1 = _slsqp(prob, P, C, maxiter)
            v1 = value(P1)
            pool.append((P1, v1))
            if v1 < best:
                best_P, best = P1, v1
            if best <= lower + certify_tol:
                return finish(best_P)

    def improve(P, v):
        P1 = _slsqp(prob, P, C, polish_iter)
        v1 = value(P1)
        return (P1, v1) if v1 < v else (P, v)

    best_P, best = improve(best_P, best)
    mixed = _mixture_from_cloud(prob, pool + [(best_P, best)], C, cap)
    if mixed is not None and mixed[1] < best:
        best_P, best = improve(*mixed)
    if best > lower + certify_tol and perturb_trials > 0:
        best_P, best = _perturb(prob, best_P, C, best, rng, perturb_trials)
    return finish(best_P)


# grid oracle ---------------------------------------------------------------------


def _simplex_grid(K, steps):
    """All pmfs on K labels with entries in multiples of 1/steps."""
    rows = [c for c in itertools.product(range(steps + 1), repeat=K) if sum(c) == steps]
    return np.array(rows, dtype=float) / steps


def grid_gap(grid_steps: int) -> float:
    """Documented slack between the grid oracle and the continuous optimum (bits)."""
    return 1.0 / grid_steps


class GridCloud:
    """Every (I(X̄;U), max_l R_{X_l|U}) pair on an auxiliary-channel grid.

    ``value(C)`` reads the lower convex envelope of the cloud at C: a pair of
    grid channels time-shared with an independent flag achieves every point
    on a chord, using the union of their alphabets.
    """

    def __init__(self, lib: SourceLibrary, D, grid_steps: int = 16, aux_size: int = 2):
        if lib.size > BRUTE_MAX_SYMBOLS or aux_size > BRUTE_MAX_AUX:
            raise InstanceTooLarge(
                f"grid oracle needs |X̄| <= {BRUTE_MAX_SYMBOLS} and aux <= {BRUTE_MAX_AUX}"
            )
        if grid_steps < 1 or aux_size < 1:
            raise InstanceTooLarge("grid needs steps >= 1 and aux >= 1")
        self.lib = lib
        self.D = as_distortions(D, lib.L)
        self.grid_steps = grid_steps
        self.aux_size = aux_size
        prob = AuxProblem(lib, self.D)
        self.prob = prob
        rows = _simplex_grid(aux_size, grid_steps)
        first = np.array([i for i, r in enumerate(rows) if np.all(np.diff(r) <= 0)], dtype=np.int64)
        ns = prob.ps.size
        total = first.size * rows.shape[0] ** (ns - 1)
        if total > BRUTE_MAX_POINTS:
            raise InstanceTooLarge(f"grid has {total} points, cap is {BRUTE_MAX_POINTS}")
        self.rows, self.first = rows, first
        info, val = K.aux_grid_cloud(*prob.kernel_args(), rows, first, BA_WARMUP, MAX_NEWTON)
        self.info = info / LN2
        self.val = val / LN2
        self._hull = _lower_hull(self.info, self.val)

    def channel(self, t: int) -> np.ndarray:
        ns = self.prob.ps.size
        m = self.rows.shape[0]
        idx = np.zeros(ns, dtype=int)
        r = int(t)
        for k in range(ns - 1, 0, -1):
            idx[k] = r % m
            r //= m
        idx[0] = self.first[r]
        return self.rows[idx]

    def best_single(self, C):
        ok = np.flatnonzero(self.info <= C + 1e-12)
        t = ok[np.argmin(self.val[ok])]
        return float(self.val[t]), int(t)

    def value(self, C):
        """Return (rate, (t_a, t_b, lam)) on the lower convex envelope at C."""
        C = _check_cache(C)
        h = self._hull
        xs = self.info[h]
        if C >= xs[-1]:
            j = h[int(np.argmin(self.val[h][xs <= C + 1e-12]))] if np.any(xs <= C) else h[-1]
            return float(self.val[j]), (j, j, 0.0)
        k = int(np.searchsorted(xs, C, side="right"))
        if k == 0:
            # below every grid point's information; only I = 0 points exist there
            return float(self.val[h[0]]), (h[0], h[0], 0.0)
        a, b = h[k - 1], h[k]
        lam = (C - self.info[a]) / (self.info[b] - self.info[a])
        return float((1 - lam) * self.val[a] + lam * self.val[b]), (a, b, lam)

    def witness(self, C) -> AuxChannel:
        _, (a, b, lam) = self.value(C)
        Pa, Pb = self.channel(a), self.channel(b)
        P = Pa if a == b else np.hstack([(1 - lam) * Pa, lam * Pb])
        return AuxChannel(self.prob.full_matrix(P))


def _lower_hull(x, y):
    """Indices of the lower convex hull of the points, by increasing x."""
    order = np.lexsort((y, x))
    hull = []
    for i in order:
        if hull and x[hull[-1]] == x[i]:
            continue
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    hull = np.array(hull, dtype=int)
    # the envelope of a non-increasing function: drop the rising tail
    ymin = np.argmin(y[hull])
    return hull[: ymin + 1]


@lru_cache(maxsize=64)
def _cached_cloud(lib, D_vals, grid_steps, aux_size):
    return GridCloud(lib, D_vals, grid_steps, aux_size)


def rdc_brute_force(lib: SourceLibrary, D, C, grid_steps: int = 16, aux_size: int = 2) -> TradeoffPoint:
    """Grid oracle for R(D, C) on tiny instances (|X̄| <= 4, aux <= 3).

    Every auxiliary channel whose rows are multiples of 1/grid_steps is
    evaluated; the result is the lower convex envelope of the resulting
    (I, rate) cloud at C, realized by time-sharing two grid channels.
    """
    C = _check_cache(C)
    Dt = as_distortions(D, lib.L)
    cloud = _cached_cloud(lib, Dt.values, int(grid_steps), int(aux_size))
    rate, _ = cloud.value(C)
    wit = cloud.witness(C)
    return TradeoffPoint(cache=C, distortions=Dt, rate=max(0.0, rate), witness=wit, method="oracle")


# curves and critical capacities ------------------------------------------------------


def monotone_envelope(caches, rates) -> np.ndarray:
    """Running minimum along increasing cache, the tightest non-increasing majorant-free fix."""
    order = np.argsort(caches, kind="stable")
    out = np.array(rates, dtype=float)
    out[order] = np.minimum.accumulate(out[order])
    return out


def rdc_curve(lib: SourceLibrary, D, C_grid, **opts) -> TradeoffCurve:
    """Solver value and all bounds on a cache grid."""
    Dt = as_distortions(D, lib.L)
    caches = np.array([_check_cache(c) for c in C_grid], dtype=float)
    if caches.size == 0:
        raise InvalidCache("cache grid is empty")
    points = [rdc_value(lib, Dt, c, **opts) for c in caches]
    raw = np.array([p.rate for p in points])
    env = monotone_envelope(caches, raw)
    curve = TradeoffCurve(
        distortions=Dt,
        caches=caches,
        raw=raw,
        envelope=env,
        genie=np.array([genie_bound(lib, Dt, c) for c in caches]),
        superuser=np.array([superuser_bound(lib, Dt, c) for c in caches]),
        super_genie=np.array([super_genie_bound(lib, Dt, c) for c in caches]),
        points=points,
    )
    worst = float(np.max(raw - env))
    if worst > RATE_TOL:
        msg = f"solver output rose with cache by {worst:.3g} bits; envelope applied"
        curve.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return curve


def _bisect_boundary(inside, c_in, c_out, steps):
    """Shrink [c_in, c_out] (either order) toward the switch of the predicate ``inside``."""
    for _ in range(steps):
        mid = 0.5 * (c_in + c_out)
        if inside(mid):
            c_in = mid
        else:
            c_out = mid
    return c_in


def critical_capacity_genie(lib: SourceLibrary, D, curve: TradeoffCurve, refine: int = 8, **opts) -> float:
    """Largest cache on which the solver meets the genie bound within RATE_TOL.

    Both functions vanish once C reaches R_X̄(D), so only caches up to the
    largest marginal rate (where the genie bound hits zero) are considered.
    Starts from the largest agreeing grid point and bisects toward the next
    grid point with fresh solver runs.
    """
    top = max(marginal_rates(lib, D))
    ok = np.abs(curve.envelope - curve.genie) <= RATE_TOL
    order = np.argsort(curve.caches)
    cs = curve.caches[order]
    ok = ok[order]
    keep = cs <= top + 1e-12
    cs, ok = cs[keep], ok[keep]
    if cs.size == 0:
        return 0.0
    if not ok.any():
        return 0.0
    i = int(np.flatnonzero(ok)[-1])
    if i == cs.size - 1:
        return float(cs[i])

    def inside(c):
        return abs(rdc_value(lib, D, c, **opts).rate - genie_bound(lib, D, c)) <= RATE_TOL

    return float(_bisect_boundary(inside, cs[i], cs[i + 1], refine))


def critical_capacity_superuser(lib: SourceLibrary, D, curve: TradeoffCurve, refine: int = 8, **opts) -> float:
    """Smallest cache on which the solver meets the superuser bound within RATE_TOL."""
    ok = np.abs(curve.envelope - curve.superuser) <= RATE_TOL
    order = np.argsort(curve.caches)
    cs = curve.caches[order]
    ok = ok[order]
    if not ok.any():
        return float(joint_rate(lib, D))
    i = int(np.flatnonzero(ok)[0])
    if i == 0:
        return float(cs[0])

    def inside(c):
        return abs(rdc_value(lib, D, c, **opts).rate - superuser_bound(lib, D, c)) <= RATE_TOL

    return float(_bisect_boundary(inside, cs[i], cs[i - 1], refine))


def gray_wyner_min_max(lib: SourceLibrary, D, C, **opts) -> float:
    """min over the Gray-Wyner region with common rate <= C of the largest private rate.

    Every auxiliary channel evaluated by the search gives a corner point
    (I(X̄;U), R_{X_1|U}(D_1), ..., R_{X_L|U}(D_L)) of the region; the region
    is approximated by the convex hull of these corners plus the search's
    endpoints, and the min-max over it is a linear program.
    """
    C = _check_cache(C)
    Dt = as_distortions(D, lib.L)
    pt = rdc_value(lib, Dt, C, record=True, **opts)
    corners = pt.corners + [(0.0, np.array(marginal_rates(lib, Dt)))]
    info = np.array([c[0] for c in corners])
    R = np.array([c[1] for c in corners])
    n = info.size
    # variables: weights w (n) and t; minimize t
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    A_ub = np.zeros((lib.L + 1, n + 1))
    A_ub[: lib.L, :n] = R.T
    A_ub[: lib.L, -1] = -1.0
    A_ub[lib.L, :n] = info
    b_ub = np.zeros(lib.L + 1)
    b_ub[lib.L] = C
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=[(0, None)] * (n + 1), method="highs")
    if not res.success:
        return pt.rate
    return max(0.0, float(res.x[-1]))
