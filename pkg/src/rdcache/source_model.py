"""Discrete memoryless source libraries.

A library holds the joint pmf of L finite-alphabet sources together with one
single-symbol distortion matrix per source.  Matrices are indexed
``d[xhat, x]``.  Source indices are 0-based throughout the package.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptySubset,
    IndexOutOfRange,
    InfiniteDistortion,
    MissingZeroDistortionSymbol,
    NegativeMass,
    NotNormalized,
    RDCacheError,
    RhoOutOfRange,
)

NORMALIZATION_TOL = 1e-9


def hamming(n: int, m: int | None = None) -> np.ndarray:
    """Hamming distortion matrix with ``m`` reconstruction rows (default ``n``)."""
    m = n if m is None else m
    d = np.ones((m, n))
    for i in range(min(n, m)):
        d[i, i] = 0.0
    return d


@dataclass(frozen=True, eq=False)
class SourceLibrary:
    alphabet_sizes: tuple
    pmf: np.ndarray  # flattened row-major over X_1 x ... x X_L
    recon_alphabet_sizes: tuple
    distortion: tuple  # one (|Xhat_l|, |X_l|) matrix per source
    d_max: float
    strides: tuple = field(init=False)

    def __post_init__(self):
        strides = []
        acc = 1
        for n in reversed(self.alphabet_sizes):
            strides.append(acc)
            acc *= n
        object.__setattr__(self, "strides", tuple(reversed(strides)))
        self.pmf.setflags(write=False)
        for d in self.distortion:
            d.setflags(write=False)

    @property
    def L(self) -> int:
        return len(self.alphabet_sizes)

    @property
    def size(self) -> int:
        """|X̄|, the size of the joint source alphabet."""
        return int(self.pmf.size)

    @property
    def joint(self) -> np.ndarray:
        return self.pmf.reshape(self.alphabet_sizes)

    def symbols(self) -> np.ndarray:
        """Integer array of shape (|X̄|, L); row k lists the coordinates of joint symbol k."""
        grids = np.indices(self.alphabet_sizes).reshape(self.L, -1)
        return grids.T.copy()

    def is_hamming(self) -> bool:
        return all(
            d.shape[0] == d.shape[1] and np.array_equal(d, hamming(d.shape[1]))
            for d in self.distortion
        )

    def to_dict(self) -> dict:
        return {
            "alphabet_sizes": list(self.alphabet_sizes),
            "pmf": self.pmf.tolist(),
            "recon_alphabet_sizes": list(self.recon_alphabet_sizes),
            "distortions": [d.tolist() for d in self.distortion],
        }


@dataclass(frozen=True)
class DistortionTuple:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise RDCacheError(f"distortion targets must be finite and >= 0, got {vals}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]


def as_distortions(D, L: int) -> DistortionTuple:
    """Coerce a scalar or sequence into a length-L DistortionTuple."""
    if isinstance(D, DistortionTuple):
        vals = D.values
    elif np.isscalar(D):
        vals = (float(D),) * L
    else:
        vals = tuple(D)
    if len(vals) != L:
        raise RDCacheError(f"expected {L} distortion targets, got {len(vals)}")
    return DistortionTuple(vals)


def _as_matrix(entry, n: int, m: int) -> np.ndarray:
    if isinstance(entry, str):
        if entry.lower() != "hamming":
            raise RDCacheError(f"unknown distortion keyword {entry!r}")
        return hamming(n, m)
    d = np.asarray(entry, dtype=float)
    if d.ndim == 1:
        d = d.reshape(m, n)
    if d.shape != (m, n):
        raise RDCacheError(f"distortion matrix has shape {d.shape}, expected {(m, n)}")
    return d


def validate_library(raw) -> SourceLibrary:
    """Build a validated, normalized library from a mapping or an existing library.

    Accepted keys: ``alphabet_sizes``, ``pmf`` (flat row-major or nested),
    optional ``recon_alphabet_sizes``, ``distortions`` (matrices or ``"hamming"``;
    defaults to Hamming), optional ``d_max``.
    """
    if isinstance(raw, SourceLibrary):
        raw = {
            "alphabet_sizes": raw.alphabet_sizes,
            "pmf": raw.pmf,
            "recon_alphabet_sizes": raw.recon_alphabet_sizes,
            "distortions": list(raw.distortion),
            "d_max": raw.d_max,
        }
    try:
        sizes = tuple(int(n) for n in raw["alphabet_sizes"])
        pmf = np.asarray(raw["pmf"], dtype=float).ravel()
    except KeyError as exc:
        raise RDCacheError(f"missing key {exc}") from None
    if not sizes or any(n < 1 for n in sizes):
        raise RDCacheError(f"alphabet sizes must be positive, got {sizes}")
    if pmf.size != int(np.prod(sizes)):
        raise RDCacheError(f"pmf has {pmf.size} entries, expected {int(np.prod(sizes))}")
    if not np.all(np.isfinite(pmf)):
        raise NotNormalized("pmf contains non-finite entries")
    if np.any(pmf < 0):
        raise NegativeMass(f"pmf has negative entries (min {pmf.min():g})")
    total = pmf.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"pmf sums to {total!r}")
    # rescale only beyond rounding so validation is idempotent
    if abs(total - 1.0) > 8 * np.finfo(float).eps * pmf.size:
        pmf = pmf / total

    recon = raw.get("recon_alphabet_sizes") or sizes
    recon = tuple(int(m) for m in recon)
    if len(recon) != len(sizes):
        raise RDCacheError("recon_alphabet_sizes must have one entry per source")
    entries = raw.get("distortions")
    if entries is None or isinstance(entries, str):
        entries = [entries or "hamming"] * len(sizes)
    if len(entries) != len(sizes):
        raise RDCacheError("need one distortion matrix per source")
    mats = []
    for ell, (entry, n, m) in enumerate(zip(entries, sizes, recon)):
        d = _as_matrix(entry, n, m).astype(float, copy=True)
        if not np.all(np.isfinite(d)):
            raise InfiniteDistortion(f"source {ell}: distortion matrix is not finite")
        if np.any(d < 0):
            raise RDCacheError(f"source {ell}: distortion entries must be >= 0")
        if not np.all((d == 0).any(axis=0)):
            missing = np.flatnonzero(~(d == 0).any(axis=0)).tolist()
            raise MissingZeroDistortionSymbol(
                f"source {ell}: symbols {missing} have no zero-distortion reconstruction"
            )
        mats.append(d)
    largest = max(float(d.max()) for d in mats)
    d_max = raw.get("d_max")
    d_max = largest if d_max is None else float(d_max)
    if not np.isfinite(d_max) or largest > d_max:
        raise InfiniteDistortion(f"distortion entries exceed declared d_max={d_max}")
    return SourceLibrary(sizes, pmf.copy(), recon, tuple(mats), d_max)


def _check_subset(lib: SourceLibrary, subset: Sequence[int]) -> tuple:
    S = tuple(sorted(set(int(s) for s in subset)))
    if not S:
        raise EmptySubset("subset must be nonempty")
    if S[0] < 0 or S[-1] >= lib.L:
        raise IndexOutOfRange(f"subset {S} not within 0..{lib.L - 1}")
    return S


def marginal(lib: SourceLibrary, subset: Sequence[int]) -> np.ndarray:
    """Joint pmf of the sources in ``subset`` (axes in increasing index order)."""
    S = _check_subset(lib, subset)
    drop = tuple(i for i in range(lib.L) if i not in S)
    return lib.joint.sum(axis=drop) if drop else lib.joint.copy()


def sub_library(lib: SourceLibrary, subset: Sequence[int]) -> SourceLibrary:
    S = _check_subset(lib, subset)
    p = marginal(lib, S)
    return SourceLibrary(
        tuple(lib.alphabet_sizes[i] for i in S),
        p.ravel().copy(),
        tuple(lib.recon_alphabet_sizes[i] for i in S),
        tuple(lib.distortion[i].copy() for i in S),
        lib.d_max,
    )


def library_from_joint(joint, distortions=None, recon_alphabet_sizes=None) -> SourceLibrary:
    joint = np.asarray(joint, dtype=float)
    raw = {"alphabet_sizes": joint.shape, "pmf": joint.ravel()}
    if distortions is not None:
        raw["distortions"] = distortions
    if recon_alphabet_sizes is not None:
        raw["recon_alphabet_sizes"] = recon_alphabet_sizes
    return validate_library(raw)


def dsbs_library(rho: float) -> SourceLibrary:
    """Doubly symmetric binary source with crossover ``rho`` and Hamming distortions."""
    if not 0.0 <= rho <= 0.5:
        raise RhoOutOfRange(f"rho must lie in [0, 0.5], got {rho}")
    joint = np.array([[1 - rho, rho], [rho, 1 - rho]]) / 2.0
    return library_from_joint(joint)


def load_spec(path) -> tuple:
    """Read a JSON source spec. Returns ``(library, transforms_or_None)``."""
    raw = json.loads(Path(path).read_text())
    return spec_from_dict(raw)


def spec_from_dict(raw: dict) -> tuple:
    lib = validate_library(raw)
    transforms = None
    if raw.get("f") is not None:
        from .f_separable import transform_from_dict

        fs = raw["f"]
        if isinstance(fs, dict):
            fs = [fs] * lib.L
        if len(fs) != lib.L:
            raise RDCacheError("need one f entry per source")
        transforms = [transform_from_dict(f) for f in fs]
    return lib, transforms
