"""Two-user caching bounds.

User 1 has a cache of C bits and asks for a source in ``demands1``; user 2
has no cache and asks for a source in ``demands2``.  One common message serves
both.  This module brackets the optimal delivery rate:

* ``two_user_upper``: an achievable rate, minimized by grid search over a
  family of auxiliary channels (any feasible choice gives a valid bound);
* ``two_user_lower_genie``: the lower bound obtained when both demands are
  known before caching, solved exactly as a convex program;
* ``two_user_avg_lower``: the lower bound for a lossless user 2 that averages
  user 2's demand over a pmf;
* ``two_user_dsbs_bounds``: closed forms for the doubly symmetric binary source.

Source indices are 0-based.  Rates are in bits.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy.special import entr

from .closed_forms import binary_entropy
from .errors import ConfigError, InstanceTooLarge, InvalidCache, MissingZeroDistortionSymbol, NoConvergence
from .it_core import entropy, rd_function
from .source_model import SourceLibrary, as_distortions, marginal

LN2 = math.log(2.0)
GRID_MAX_SYMBOLS = 4
GRID_MAX_AUX = 3
GRID_MAX_RECON = 3
GRID_MAX_POINTS = 2_000_000
GRID_CHUNK = 4096
CONVEX_MAX_ENTRIES = 50_000
CLARABEL_OPTS = {"tol_gap_abs": 1e-11, "tol_gap_rel": 1e-11, "tol_feas": 1e-11, "max_iter": 500}


@dataclass
class TwoUserInstance:
    """A library, the two demand sets, both users' distortions and targets, and the cache.

    ``D`` and ``Delta`` hold one target per source; only entries indexed by
    ``demands1`` (for ``D``) and ``demands2`` (for ``Delta``) are used.
    ``distortion1`` and ``distortion2`` default to the library's matrices.
    """

    lib: SourceLibrary
    demands1: tuple
    demands2: tuple
    D: tuple
    Delta: tuple
    C: float = 0.0
    distortion1: tuple | None = None
    distortion2: tuple | None = None

    def __post_init__(self):
        L = self.lib.L
        for name in ("demands1", "demands2"):
            S = tuple(sorted(set(int(v) for v in getattr(self, name))))
            if not S:
                raise ConfigError(f"{name} must be nonempty")
            if S[0] < 0 or S[-1] >= L:
                raise ConfigError(f"{name} {S} not within 0..{L - 1}")
            setattr(self, name, S)
        self.D = as_distortions(self.D, L).values
        self.Delta = as_distortions(self.Delta, L).values
        self.C = float(self.C)
        if not math.isfinite(self.C) or self.C < 0:
            raise InvalidCache(f"cache capacity must be finite and >= 0, got {self.C}")
        for name in ("distortion1", "distortion2"):
            mats = getattr(self, name)
            mats = self.lib.distortion if mats is None else tuple(np.asarray(m, dtype=float) for m in mats)
            if len(mats) != L:
                raise ConfigError(f"{name} needs one matrix per source")
            for ell, d in enumerate(mats):
                if d.ndim != 2 or d.shape[1] != self.lib.alphabet_sizes[ell]:
                    raise ConfigError(f"{name}[{ell}] has shape {d.shape}")
                if not np.all(np.isfinite(d)) or np.any(d < 0):
                    raise ConfigError(f"{name}[{ell}] must be finite and nonnegative")
                if not np.all((d == 0).any(axis=0)):
                    raise MissingZeroDistortionSymbol(f"{name}[{ell}] has a column without a zero")
            setattr(self, name, tuple(mats))

    def pairs(self):
        return [(a, b) for a in self.demands1 for b in self.demands2]


@dataclass
class TwoUserBound:
    value: float
    kind: str  # "upper" or "lower"
    method: str  # "grid", "convex" or "closed-form"
    exact: bool = True  # False when the value comes from a relaxation or a restricted search
    slack: float = 0.0  # resolution-dependent distance to the searched optimum
    witness: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


# convex programs --------------------------------------------------------------------


def _onehot(idx, n):
    out = np.zeros((idx.size, n))
    out[np.arange(idx.size), idx] = 1.0
    return out


def _mi_bits(M, p):
    """I(X̄; Y) in bits for the joint p(x̄, y) = M (affine in the variables), x̄-marginal p."""
    q = cp.sum(M, axis=0)
    return cp.sum(cp.rel_entr(M, p[:, None] @ cp.reshape(q, (1, M.shape[1]), order="C"))) / LN2


def _solve(problem, what):
    """Return (optimal value, solver status); CLARABEL first, SCS as fallback.

    Lossless targets put optimal laws on the cone boundary, where CLARABEL
    often stops at "optimal_inaccurate" with errors around 1e-7 bits; that
    status is accepted and reported instead of warned about.
    """
    for solver, opts in (("CLARABEL", CLARABEL_OPTS), ("SCS", {"eps": 1e-9})):
        try:
            with warnings.catch_warnings():
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                problem.solve(solver=solver, **opts)
        except cp.error.SolverError:
            continue
        if problem.status in ("optimal", "optimal_inaccurate"):
            return float(problem.value), problem.status
    raise NoConvergence(f"{what}: convex solver status {problem.status}")


def _cost(sym, d, idx_recon, ell):
    """Matrix G[x̄, y] = d(x̂ of outcome y, x_ell of x̄)."""
    return d[idx_recon][:, sym[:, ell]].T


def two_user_lower_genie(inst: TwoUserInstance) -> TwoUserBound:
    """min over reconstructions of max over demand pairs of max{I(X̄;X̃), I(X̄;X̂,X̃) - C}.

    The minimum runs over the joint law of every user-1 reconstruction
    (one per source in ``demands1``) and every user-2 reconstruction given
    X̄.  Each mutual information is a convex function of that law, so the
    min-max is solved as an exponential-cone program.
    """
    lib = inst.lib
    p = lib.pmf
    sym = lib.symbols()
    variables = [(inst.distortion1[l], inst.D[l], l) for l in inst.demands1]
    variables += [(inst.distortion2[l], inst.Delta[l], l) for l in inst.demands2]
    sizes = [v[0].shape[0] for v in variables]
    n_out = int(np.prod(sizes))
    if n_out * lib.size > CONVEX_MAX_ENTRIES:
        raise InstanceTooLarge(f"joint reconstruction law has {n_out * lib.size} entries")
    outcomes = np.indices(sizes).reshape(len(sizes), -1).T
    J = cp.Variable((lib.size, n_out), nonneg=True)
    t = cp.Variable()
    cons = [cp.sum(J, axis=1) == p]
    for k, (d, target, ell) in enumerate(variables):
        cons.append(cp.sum(cp.multiply(_cost(sym, d, outcomes[:, k], ell), J)) <= target)
    n1 = len(inst.demands1)
    for j2 in range(len(inst.demands2)):
        k2 = n1 + j2
        M = J @ _onehot(outcomes[:, k2], sizes[k2])
        cons.append(t >= _mi_bits(M, p))
        for k1 in range(n1):
            pair = outcomes[:, k1] * sizes[k2] + outcomes[:, k2]
            M = J @ _onehot(pair, sizes[k1] * sizes[k2])
            cons.append(t + inst.C >= _mi_bits(M, p))
    value, status = _solve(cp.Problem(cp.Minimize(t), cons), "genie lower bound")
    witness = {"joint": np.clip(J.value, 0, None), "status": status}
    return TwoUserBound(max(0.0, value), "lower", "convex", witness=witness)


def _check_lossless_user2(inst):
    for ell in inst.demands2:
        if inst.Delta[ell] != 0:
            raise ConfigError("the average-demand bound needs Delta = 0 for every user-2 demand")


def two_user_avg_lower(inst: TwoUserInstance, p_I) -> TwoUserBound:
    """Average-demand lower bound for a lossless user 2, demand index I ~ p_I over ``demands2``.

    With the auxiliary allowed to depend on I, both terms of the bound are
    minimized for a fixed user-1 reconstruction by letting the auxiliary
    reveal that reconstruction, which leaves

        max{ avg_I H(X_I),  avg_I H(X_I) + min max_l1 avg_I I(X̄; X̂_l1 | X_I) - C }.

    This is exact for a single user-1 demand.  For several user-1 demands the
    auxiliary cannot reveal every reconstruction for free, so the same
    expression is a relaxation: still a lower bound on the delivery rate,
    flagged ``exact=False``.
    """
    _check_lossless_user2(inst)
    lib = inst.lib
    p_I = np.asarray(p_I, dtype=float).ravel()
    if p_I.size != len(inst.demands2) or np.any(p_I < 0) or abs(p_I.sum() - 1) > 1e-9:
        raise ConfigError("p_I must be a pmf over demands2")
    p = lib.pmf
    sym = lib.symbols()
    h_avg = float(sum(w * entropy(marginal(lib, [l])) for w, l in zip(p_I, inst.demands2)))
    # B_i maps p(x̄, x̂) to p(x̄) p(x̂ | x_i(x̄))
    blocks = []
    for w, ell in zip(p_I, inst.demands2):
        if w == 0:
            continue
        S = _onehot(sym[:, ell], lib.alphabet_sizes[ell]).T
        px_i = S @ p
        scale = np.divide(p, px_i[sym[:, ell]], out=np.zeros_like(p), where=px_i[sym[:, ell]] > 0)
        blocks.append((w, scale[:, None] * (S.T @ S)))
    s = cp.Variable()
    cons = []
    for ell in inst.demands1:
        d = inst.distortion1[ell]
        J = cp.Variable((lib.size, d.shape[0]), nonneg=True)
        cons += [cp.sum(J, axis=1) == p, cp.sum(cp.multiply(d[:, sym[:, ell]].T, J)) <= inst.D[ell]]
        avg = sum(w * cp.sum(cp.rel_entr(J, B @ J)) for w, B in blocks) / LN2
        cons.append(s >= avg)
    excess, status = _solve(cp.Problem(cp.Minimize(s), cons), "average-demand bound")
    value = max(h_avg, h_avg + max(0.0, excess) - inst.C)
    return TwoUserBound(value, "lower", "convex", exact=len(inst.demands1) == 1, witness={"p_I": p_I, "status": status})


def two_user_lossless_lower(inst: TwoUserInstance) -> float:
    """Entropic form of the genie bound when both users need their sources losslessly."""
    lib = inst.lib
    best = 0.0
    for a, b in inst.pairs():
        best = max(best, entropy(marginal(lib, [b])), entropy(marginal(lib, sorted({a, b}))) - inst.C)
    return best


# grid search for the achievable bound ------------------------------------------------


def _simplex_rows(K, steps):
    grid = np.indices((steps + 1,) * K).reshape(K, -1).T
    return grid[grid.sum(1) == steps].astype(float) / steps


def _entropy_of(T, keep):
    """Entropy in bits of the marginal of T (axis 0 is the batch) on the axes in ``keep``."""
    drop = tuple(a for a in range(1, T.ndim) if a not in keep)
    M = T.sum(axis=drop) if drop else T
    return entr(M.reshape(M.shape[0], -1)).sum(1) / LN2


def _terms(T, x, u, h, t, C):
    """Both achievable-rate terms for a batch of joints with the given axis sets."""
    H = lambda *sets: _entropy_of(T, set().union(*sets))  # noqa: E731
    first = H(x) + H(u, h, t) - H(x, u, h, t) - C
    second = H(t) + H(u, x) - H(u, x, t) + H(x, u, t) + H(h, u, t) - H(x, h, u, t) - H(u, t)
    return np.maximum(first, second)


def _recon_channels(inst):
    lib = inst.lib
    hat = {l: rd_function(marginal(lib, [l]), inst.distortion1[l], inst.D[l]).achieving_channel.matrix for l in inst.demands1}
    tilde = {l: rd_function(marginal(lib, [l]), inst.distortion2[l], inst.Delta[l]).achieving_channel.matrix for l in inst.demands2}
    return hat, tilde


def _batch_values(inst, P, hat, tilde, reveal):
    """Largest term over demand pairs for each auxiliary channel in the batch P (B, |X̄|, K)."""
    p = inst.lib.pmf
    sym = inst.lib.symbols()
    base = p[None, :, None] * P  # (B, x̄, u)
    worst = np.full(P.shape[0], -np.inf)
    L1 = list(inst.demands1)
    for a, b in inst.pairs():
        Wt = tilde[b][sym[:, b]]  # (x̄, t)
        if not reveal:
            Wh = hat[a][sym[:, a]]
            T = base[:, :, :, None, None] * Wh[None, :, None, :, None] * Wt[None, :, None, None, :]
            val = _terms(T, {1}, {2}, {3}, {4}, inst.C)
        else:
            # the auxiliary carries every user-1 reconstruction along with the grid label
            T = base
            for l in L1:
                Wl = hat[l][sym[:, l]]
                T = T[..., None] * Wl.reshape((1, Wl.shape[0]) + (1,) * (T.ndim - 2) + (Wl.shape[1],))
            T = T[..., None] * Wt.reshape((1, Wt.shape[0]) + (1,) * (T.ndim - 2) + (Wt.shape[1],))
            aux = set(range(2, 3 + len(L1)))
            h_axis = {3 + L1.index(a)}
            val = _terms(T, {1}, aux, h_axis, {T.ndim - 1}, inst.C)
        worst = np.maximum(worst, val)
    return worst


def two_user_upper(inst: TwoUserInstance, grid_steps: int = 16, aux_size: int = 2) -> TwoUserBound:
    """Achievable rate: min over a grid of auxiliary channels of the worst-pair rate.

    The auxiliary U is drawn from X̄ by a channel whose rows are multiples of
    1/grid_steps.  Each reconstruction is the rate-distortion optimal test
    channel of its own source at its target, and either stays independent
    of U given X̄ or is carried inside U.  Every searched point is feasible,
    so the result is a valid upper bound; ``slack`` records the grid
    resolution.
    """
    lib = inst.lib
    if lib.size > GRID_MAX_SYMBOLS or aux_size > GRID_MAX_AUX or aux_size < 1:
        raise InstanceTooLarge(f"grid search needs |X̄| <= {GRID_MAX_SYMBOLS} and 1 <= aux <= {GRID_MAX_AUX}")
    recon = [inst.distortion1[l].shape[0] for l in inst.demands1] + [inst.distortion2[l].shape[0] for l in inst.demands2]
    if max(recon) > GRID_MAX_RECON or grid_steps < 1:
        raise InstanceTooLarge(f"grid search needs reconstruction alphabets <= {GRID_MAX_RECON}")
    rows = _simplex_rows(aux_size, grid_steps)
    # relabeling U leaves every term unchanged, so the first row is taken sorted
    first = rows[np.all(np.diff(rows, axis=1) <= 0, axis=1)]
    ns, m = lib.size, rows.shape[0]
    total = first.shape[0] * m ** (ns - 1)
    if total > GRID_MAX_POINTS:
        raise InstanceTooLarge(f"grid has {total} points, cap is {GRID_MAX_POINTS}")
    hat, tilde = _recon_channels(inst)
    best, best_P, best_reveal = np.inf, None, False
    radix = m ** np.arange(ns - 2, -1, -1) if ns > 1 else np.zeros(0, int)
    for start in range(0, total, GRID_CHUNK):
        idx = np.arange(start, min(total, start + GRID_CHUNK))
        P = np.empty((idx.size, ns, aux_size))
        P[:, 0] = first[idx // m ** (ns - 1)]
        rest = idx % m ** (ns - 1)
        for k in range(1, ns):
            P[:, k] = rows[(rest // radix[k - 1]) % m]
        for reveal in (False, True):
            vals = _batch_values(inst, P, hat, tilde, reveal)
            j = int(np.argmin(vals))
            if vals[j] < best - 1e-15:
                best, best_P, best_reveal = float(vals[j]), P[j].copy(), reveal
    witness = {"aux_channel": best_P, "reconstructions_in_aux": best_reveal}
    return TwoUserBound(max(0.0, best), "upper", "grid", exact=False, slack=1.0 / grid_steps, witness=witness)


# doubly symmetric binary source -------------------------------------------------------


def dsbs_critical_distortion(rho: float) -> float:
    return 0.5 * (1.0 - math.sqrt(1.0 - 2.0 * rho))


def two_user_dsbs_bounds(rho: float, D: float, C: float) -> tuple:
    """(lower, upper) for the DSBS with both users demanding either source.

    User 1 has Hamming target D and cache C; user 2 is lossless.  Targets
    above 1/2 behave like 1/2, where user 1 needs nothing beyond user 2's
    message.
    """
    from .errors import RhoOutOfRange

    if not 0.0 <= rho <= 0.5:
        raise RhoOutOfRange(f"rho must lie in [0, 0.5], got {rho}")
    if D < 0:
        raise ConfigError(f"distortion must be >= 0, got {D}")
    if C < 0:
        raise InvalidCache(f"cache capacity must be >= 0, got {C}")
    D = min(float(D), 0.5)
    lower = 1.0 + max(0.0, binary_entropy(rho) - binary_entropy(D) - C)
    if D <= dsbs_critical_distortion(rho):
        return lower, lower
    inner = binary_entropy(D) - rho - (1.0 - rho) * binary_entropy((2.0 * D - rho) / (2.0 * (1.0 - rho)))
    return lower, 1.0 + max(0.0, inner - C)
