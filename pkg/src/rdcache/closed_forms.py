"""Closed-form evaluators: binary entropy, iid libraries, Gaussian pairs, DSBS bounds.

Every rate is in bits.  Gaussian quantities assume unit variances with
correlation ``rho`` and squared-error distortion; discrete quantities assume
Hamming distortion.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .common_info import dsbs_rho_star, wyner_ci_dsbs, wyner_ci_gaussian
from .errors import InvalidCache, RDCacheError, RhoOutOfRange
from .it_core import rd_function

INVERSE_TOL = 1e-14


def _check_cache(C) -> float:
    C = float(C)
    if not math.isfinite(C) or C < 0:
        raise InvalidCache(f"cache capacity must be finite and >= 0, got {C}")
    return C


def binary_entropy(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise RDCacheError(f"binary entropy needs p in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def binary_entropy_inverse(y: float) -> float:
    """The p in [0, 1/2] with h(p) = y."""
    y = float(y)
    if not 0.0 <= y <= 1.0:
        raise RDCacheError(f"inverse binary entropy needs y in [0, 1], got {y}")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    return brentq(lambda p: binary_entropy(p) - y, 0.0, 0.5, xtol=INVERSE_TOL, rtol=4 * np.finfo(float).eps)


def iid_identical_rdc(pmf, d, D: float, C: float, L: int) -> float:
    """[R_X(D) - C/L]^+ for L iid copies of one source: cache C/L bits of each."""
    C = _check_cache(C)
    if L < 1:
        raise RDCacheError("L must be >= 1")
    return max(0.0, rd_function(pmf, d, D).rate - C / L)


# bivariate Gaussian ----------------------------------------------------------------


def _check_rho_open(rho):
    rho = float(rho)
    if not 0.0 < rho < 1.0:
        raise RhoOutOfRange(f"rho must lie in (0, 1), got {rho}")
    return rho


def _check_distortion(D):
    D = float(D)
    if not D > 0:
        raise RDCacheError(f"Gaussian distortion must be > 0, got {D}")
    return D


def gaussian_joint_rd(rho: float, D: float) -> float:
    """Joint RD function of the unit-variance Gaussian pair at distortions (D, D)."""
    rho, D = _check_rho_open(rho), _check_distortion(D)
    if D > 1.0:
        return 0.0
    if D <= 1.0 - rho:
        return 0.5 * math.log2((1.0 - rho**2) / D**2)
    return 0.5 * math.log2((1.0 + rho) / (2.0 * D - (1.0 - rho)))


@dataclass(frozen=True)
class RegionTag:
    tag: str  # one of S1, S2, S3, S4
    exact: bool


def classify_gaussian_region(rho: float, D: float, C: float) -> RegionTag:
    """Region of (D, C); on shared boundaries the region with the exact result wins."""
    rho, D, C = _check_rho_open(rho), _check_distortion(D), _check_cache(C)
    joint = gaussian_joint_rd(rho, D)
    if C >= joint:
        return RegionTag("S1", True)
    if wyner_ci_gaussian(rho) <= C:
        return RegionTag("S2", True)
    if D <= 1.0 - rho:
        return RegionTag("S3", False)
    return RegionTag("S4", False)


def bivariate_gaussian_rdc(rho: float, D: float, C: float) -> tuple:
    """(rate, region): exact in S1 and S2, an achievable upper bound in S3 and S4."""
    region = classify_gaussian_region(rho, D, C)
    if region.tag == "S1":
        return 0.0, region
    if region.tag == "S2":
        return 0.25 * math.log2((1.0 - rho**2) / D**2) - C / 2.0, region
    remaining = 1.0 - 0.5 * (1.0 + rho) * (1.0 - 2.0 ** (-2.0 * C))
    return 0.5 * math.log2(remaining / D), region


@dataclass
class GaussianLowerBound:
    value: float  # raw maximum over subsets, possibly negative
    clamped: float  # max(value, 0)
    subset: tuple  # maximizing subset, 0-based
    terms: dict  # subset -> term
    note: str = ""


def gaussian_superuser_lower(cov, D: float, C: float) -> GaussianLowerBound:
    """max over nonempty S of log2(det K_S / D^|S|) / (2|S|) - C/|S| at symmetric D."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
        raise RDCacheError("covariance must be a symmetric square matrix")
    L = cov.shape[0]
    if L > 8:
        raise RDCacheError("subset enumeration is limited to L <= 8")
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise RDCacheError("covariance must be positive definite")
    D, C = _check_distortion(D), _check_cache(C)
    terms = {}
    for size in range(1, L + 1):
        for S in itertools.combinations(range(L), size):
            _, logdet = np.linalg.slogdet(cov[np.ix_(S, S)])
            terms[S] = float(logdet / math.log(2.0) - size * math.log2(D)) / (2 * size) - C / size
    best = max(terms, key=lambda S: (terms[S], -len(S)))
    value = terms[best]
    note = "" if value >= 0 else "every subset term is negative; the bound is vacuous"
    return GaussianLowerBound(value, max(0.0, value), best, terms, note)


# doubly symmetric binary source -----------------------------------------------------


@dataclass(frozen=True)
class DsbsBounds:
    lower: float
    upper: float
    exact: bool


def _check_rho_dsbs(rho):
    rho = float(rho)
    if not 0.0 <= rho <= 0.5:
        raise RhoOutOfRange(f"rho must lie in [0, 0.5], got {rho}")
    return rho


def dsbs_rdc_bounds(rho: float, C: float) -> DsbsBounds:
    """Bounds on R(0, C) for the DSBS with Hamming distortion.

    Exact at C = 0 (rate 1) and on [K_W, 1 + h(rho)] (half the residual joint
    entropy).  Between them the lower bound is the larger of the superuser
    and genie bounds and the upper bound comes from a binary-symmetric
    auxiliary of crossover alpha.
    """
    rho, C = _check_rho_dsbs(rho), _check_cache(C)
    h_rho = binary_entropy(rho)
    joint = 1.0 + h_rho
    if C == 0.0:
        return DsbsBounds(1.0, 1.0, True)
    if C >= joint:
        return DsbsBounds(0.0, 0.0, True)
    half = (joint - C) / 2.0
    if C >= wyner_ci_dsbs(rho):
        return DsbsBounds(half, half, True)
    lower = max(half, max(0.0, 1.0 - C))
    alpha = binary_entropy_inverse((1.0 - rho - C) / (1.0 - rho))
    upper = binary_entropy((1.0 - rho) * alpha + rho / 2.0)
    return DsbsBounds(lower, upper, False)


__all__ = [
    "binary_entropy",
    "binary_entropy_inverse",
    "iid_identical_rdc",
    "gaussian_joint_rd",
    "RegionTag",
    "classify_gaussian_region",
    "bivariate_gaussian_rdc",
    "GaussianLowerBound",
    "gaussian_superuser_lower",
    "DsbsBounds",
    "dsbs_rdc_bounds",
    "dsbs_rho_star",
]
