"""Common information: Gács-Körner via connected components, Wyner closed forms.

The zero-distortion Gács-Körner common information of X_1..X_L is the
entropy of the finest variable that every source determines on its own.  It
is read off the multipartite graph whose vertices are source symbols and
whose edges join symbols that co-occur with positive probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditionViolated
from .it_core import entropy, mutual_information, rd_function
from .source_model import SourceLibrary, as_distortions

EDGE_THRESHOLD = 1e-12  # pmf mass needed to join two symbols
CHECK_TOL = 1e-6


@dataclass
class CommonPartGraph:
    vertices: list  # (source index, symbol) pairs in source-major order
    edges: set  # pairs of vertex indices
    components: np.ndarray  # component label per vertex, contiguous from 0

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1 if self.components.size else 0


@dataclass
class CommonInfoResult:
    value: float
    witness: object = None  # per-source symbol -> component maps, or a closed-form tag
    n_components: int = 0
    joint_labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def common_part_graph(lib: SourceLibrary) -> CommonPartGraph:
    """Union-find over source symbols joined by positive-mass joint symbols."""
    offsets = np.concatenate([[0], np.cumsum(lib.alphabet_sizes)])
    vertices = [(l, x) for l in range(lib.L) for x in range(lib.alphabet_sizes[l])]
    parent = list(range(len(vertices)))
    edges = set()
    sym = lib.symbols()
    for k in np.flatnonzero(lib.pmf > EDGE_THRESHOLD):
        vs = [int(offsets[l] + sym[k, l]) for l in range(lib.L)]
        for i in range(lib.L):
            for j in range(i + 1, lib.L):
                edges.add((vs[i], vs[j]))
        root = _find(parent, vs[0])
        for v in vs[1:]:
            r = _find(parent, v)
            if r != root:
                parent[r] = root
    labels = {}
    comp = np.empty(len(vertices), dtype=int)
    for v in range(len(vertices)):
        r = _find(parent, v)
        comp[v] = labels.setdefault(r, len(labels))
    return CommonPartGraph(vertices, edges, comp)


def gacs_korner_zero(lib: SourceLibrary) -> CommonInfoResult:
    """K_GK(X̄) = H(c(X_1)) where c maps a symbol to its graph component."""
    g = common_part_graph(lib)
    offsets = np.concatenate([[0], np.cumsum(lib.alphabet_sizes)])
    maps = [g.components[offsets[l] : offsets[l + 1]].copy() for l in range(lib.L)]
    sym = lib.symbols()
    joint_labels = maps[0][sym[:, 0]]
    mass = np.bincount(joint_labels, weights=lib.pmf, minlength=g.n_components)
    return CommonInfoResult(
        value=entropy(mass / mass.sum()),
        witness=maps,
        n_components=g.n_components,
        joint_labels=joint_labels,
    )


def gacs_korner_brute_force(lib: SourceLibrary) -> float:
    """Exhaustive oracle: max H(label) over per-source labelings that agree almost surely.

    Each source alphabet is labeled by a set partition (restricted growth
    string) into at most |X̄| classes; labelings of different sources must
    coincide on every positive-mass joint symbol after matching class names,
    so only the first source's partition is enumerated and the others are
    checked for consistency.
    """
    sym = lib.symbols()
    pos = np.flatnonzero(lib.pmf > EDGE_THRESHOLD)
    best = 0.0
    for labels in _set_partitions(lib.alphabet_sizes[0]):
        # every other source's label is forced by co-occurrence
        ok = True
        for l in range(1, lib.L):
            forced = {}
            for k in pos:
                x, lab = sym[k, l], labels[sym[k, 0]]
                if forced.setdefault(x, lab) != lab:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        mass = np.zeros(max(labels) + 1)
        for k in pos:
            mass[labels[sym[k, 0]]] += lib.pmf[k]
        best = max(best, entropy(mass / mass.sum()))
    return best


def _set_partitions(n):
    """Restricted growth strings of length n."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for v in range(top + 2):
            yield from rec(prefix + [v], max(top, v))

    if n == 0:
        yield ()
        return
    yield from rec([0], 0)


@dataclass
class LossyCheckReport:
    feasible: bool
    mutual_info: float
    violations: list


def gacs_korner_lossy_check(lib: SourceLibrary, D, aux, recon_channels, raise_on_violation: bool = True):
    """Check the lossy Gács-Körner conditions for a candidate (U, X̂_1..X̂_L).

    ``aux`` is p(u|x̄) with shape (|X̄|, |U|).  ``recon_channels[l]`` is a
    TestChannel or array of shape (|X_l|, |U|, |X̂_l|) giving p(x̂_l|x_l, u), or
    shape (|X_l|, |X̂_l|) for a reconstruction that ignores u.  Conditions:
    U - X_l - (other sources); U - X̂_l - X_l; E d_l <= D_l; and
    I(X_l; X̂_l) = R_{X_l}(D_l).  Markov chains are tested by total variation
    to the factorized law.  Returns a report with I(X̄;U).
    """
    Dt = as_distortions(D, lib.L)
    A = np.asarray(getattr(aux, "matrix", aux), dtype=float)
    sym = lib.symbols()
    p = lib.pmf
    pxu = p[:, None] * A
    violations = []
    for l in range(lib.L):
        W = np.asarray(getattr(recon_channels[l], "matrix", recon_channels[l]), dtype=float)
        nx = lib.alphabet_sizes[l]
        if W.ndim == 2:
            W = np.repeat(W[:, None, :], A.shape[1], axis=1)
        onehot = np.eye(nx)[sym[:, l]]
        p_xl_u = onehot.T @ pxu  # (X_l, U)
        p_xl = p_xl_u.sum(1)
        # (i) p(x̄, u) = p(x̄) p(u | x_l)
        cond = np.divide(p_xl_u, p_xl[:, None], out=np.zeros_like(p_xl_u), where=p_xl[:, None] > 0)
        tv1 = 0.5 * np.abs(pxu - p[:, None] * cond[sym[:, l]]).sum()
        if tv1 > CHECK_TOL:
            violations.append(f"source {l}: U - X_l - others fails (TV {tv1:.3g})")
        # (ii) p(x, u, x̂) = p(x̂) p(x|x̂) p(u|x̂)
        pj = p_xl_u[:, :, None] * W  # (X, U, Xh)
        pxh = pj.sum((0, 1))
        p_x_xh = pj.sum(1)
        p_u_xh = pj.sum(0)
        fact = np.divide(
            p_x_xh[:, None, :] * p_u_xh[None, :, :],
            pxh[None, None, :],
            out=np.zeros_like(pj),
            where=pxh[None, None, :] > 0,
        )
        tv2 = 0.5 * np.abs(pj - fact).sum()
        if tv2 > CHECK_TOL:
            violations.append(f"source {l}: U - X̂_l - X_l fails (TV {tv2:.3g})")
        # (iii) distortion
        dist = float((p_x_xh * lib.distortion[l].T).sum())
        if dist > Dt[l] + CHECK_TOL:
            violations.append(f"source {l}: distortion {dist:.6g} exceeds {Dt[l]:.6g}")
        # (iv) the reconstruction is RD-optimal
        info = mutual_information(p_x_xh)
        target = rd_function(p_xl, lib.distortion[l], Dt[l]).rate
        if abs(info - target) > CHECK_TOL:
            violations.append(f"source {l}: I(X;X̂) = {info:.6g} but R(D) = {target:.6g}")
    value = mutual_information(pxu)
    if violations and raise_on_violation:
        raise ConditionViolated(violations)
    return LossyCheckReport(not violations, value, violations)


def _h(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def dsbs_rho_star(rho: float) -> float:
    return 0.5 - 0.5 * math.sqrt(max(0.0, 1.0 - 2.0 * rho))


def wyner_ci_dsbs(rho: float) -> float:
    """Wyner common information of a DSBS: 1 + h(rho) - 2 h(rho*)."""
    from .errors import RhoOutOfRange

    if not 0.0 <= rho <= 0.5:
        raise RhoOutOfRange(f"rho must lie in [0, 0.5], got {rho}")
    return max(0.0, 1.0 + _h(rho) - 2.0 * _h(dsbs_rho_star(rho)))


def wyner_ci_gaussian(rho: float) -> float:
    """Wyner common information of a unit-variance Gaussian pair, in bits."""
    from .errors import RhoOutOfRange

    rho = abs(float(rho))
    if rho > 1.0:
        raise RhoOutOfRange(f"|rho| must be <= 1, got {rho}")
    if rho >= 1.0 - 1e-12:
        return math.inf
    return 0.5 * math.log2((1.0 + rho) / (1.0 - rho))


@dataclass
class KgkReport:
    kgk: float | None
    cg: float | None
    holds: bool | None
    equality_expected: bool
    equality_observed: bool | None
    note: str = ""


def kgk_vs_cg_check(lib: SourceLibrary, D, C_points: int = 9, tol: float = 1e-2, **opts) -> KgkReport:
    """Compare the genie critical capacity with the Gács-Körner common information.

    The common information is only computed on the zero-distortion Hamming
    path, where the lossy and lossless quantities coincide.  The critical
    capacity comes from a solver curve on [0, max_l R_l(D_l)] with
    bisection refinement, so comparisons use ``tol``.
    """
    from .rdc_solver import critical_capacity_genie, marginal_rates, rdc_curve

    Dt = as_distortions(D, lib.L)
    rates = marginal_rates(lib, Dt)
    equal = max(rates) - min(rates) <= 1e-9
    if not (lib.is_hamming() and all(v == 0 for v in Dt)):
        return KgkReport(None, None, None, equal, None, "lossy common information is not computed")
    kgk = gacs_korner_zero(lib).value
    grid = np.linspace(0.0, max(rates), C_points)
    curve = rdc_curve(lib, Dt, grid, **opts)
    cg = critical_capacity_genie(lib, Dt, curve, **opts)
    holds = cg >= kgk - tol
    return KgkReport(kgk, cg, holds, equal, abs(cg - kgk) <= tol if equal else None)
