"""f-separable distortions and their reduction to ordinary single-letter distortions.

An f-separable distortion measures a block by f^{-1}(mean_i f(d(x̂_i, x_i)))
for a continuous strictly increasing f.  The tradeoff at targets D under f
equals the ordinary tradeoff with per-symbol distortion f(d) at targets f(D).
Transformed matrices are shifted by -f(0) so every source symbol keeps a
zero-distortion reconstruction; the targets are shifted by the same amount.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MissingZeroDistortionSymbol, RDCacheError
from .source_model import SourceLibrary, as_distortions

KINDS = ("identity", "power", "exp", "table")


@dataclass(frozen=True)
class DistortionTransform:
    """A strictly increasing map f on [0, inf) (tables: on their sampled range).

    kinds: ``identity``; ``power`` with ``exponent`` > 0, f(t) = t**exponent;
    ``exp`` with ``scale`` != 0, f(t) = (exp(scale*t) - 1)/scale; ``table`` with
    strictly increasing samples ``xs``, ``ys`` and piecewise-linear interpolation.
    """

    kind: str = "identity"
    exponent: float = 1.0
    scale: float = 1.0
    xs: tuple = ()
    ys: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown transform kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "power" and not self.exponent > 0:
            raise ConfigError("power transform needs exponent > 0")
        if self.kind == "exp" and (self.scale == 0 or not np.isfinite(self.scale)):
            raise ConfigError("exp transform needs a finite nonzero scale")
        if self.kind == "table":
            xs, ys = np.asarray(self.xs, float), np.asarray(self.ys, float)
            if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
                raise ConfigError("table transform needs two equal-length sample lists of size >= 2")
            if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
                raise ConfigError("table transform must be strictly increasing in both columns")
            if xs[0] > 0:
                raise ConfigError("table transform must cover t = 0")

    def _check_domain(self, t):
        if np.any(t < 0):
            raise RDCacheError("transforms are defined for nonnegative distortions")
        if self.kind == "table" and np.any(t > self.xs[-1]):
            raise RDCacheError(f"table transform covers t <= {self.xs[-1]}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        if self.kind == "identity":
            return t.copy()
        if self.kind == "power":
            return t**self.exponent
        if self.kind == "exp":
            return np.expm1(self.scale * t) / self.scale
        return np.interp(t, self.xs, self.ys)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "identity":
            return y.copy()
        if self.kind == "power":
            return y ** (1.0 / self.exponent)
        if self.kind == "exp":
            return np.log1p(self.scale * y) / self.scale
        if np.any(y < self.ys[0]) or np.any(y > self.ys[-1]):
            raise RDCacheError("value outside the range of the table transform")
        return np.interp(y, self.ys, self.xs)

    @property
    def offset(self) -> float:
        """f(0), subtracted from transformed matrices and targets."""
        return float(self(0.0))


def transform_from_dict(raw) -> DistortionTransform:
    """Parse ``{"kind": ..., "params": ...}`` from a source spec."""
    if raw is None:
        return DistortionTransform()
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(f"transform entry needs a 'kind' key, got {raw!r}")
    kind = raw["kind"]
    params = raw.get("params") or {}
    if kind == "power":
        value = params if np.isscalar(params) else params.get("exponent")
        return DistortionTransform("power", exponent=float(value))
    if kind == "exp":
        value = params if np.isscalar(params) else params.get("scale", 1.0)
        return DistortionTransform("exp", scale=float(value))
    if kind == "table":
        return DistortionTransform(
            "table", xs=tuple(float(v) for v in params["x"]), ys=tuple(float(v) for v in params["y"])
        )
    return DistortionTransform(kind)


def transform_distortion_matrix(d, f: DistortionTransform) -> np.ndarray:
    """d*(x̂, x) = f(d(x̂, x)) - f(0)."""
    d = np.asarray(d, dtype=float)
    out = f(d) - f.offset
    # f is strictly increasing, so exact zeros stay zero after the shift
    out[d == 0] = 0.0
    return out


def f_separable_eval(xhat_seq, x_seq, d, f: DistortionTransform) -> float:
    """Block distortion f^{-1}(mean_i f(d(x̂_i, x_i)))."""
    xhat_seq = np.asarray(xhat_seq, dtype=int)
    x_seq = np.asarray(x_seq, dtype=int)
    if xhat_seq.shape != x_seq.shape or xhat_seq.ndim != 1 or xhat_seq.size == 0:
        raise RDCacheError("sequences must be nonempty and of equal length")
    d = np.asarray(d, dtype=float)
    per_symbol = d[xhat_seq, x_seq]
    return float(f.inverse(np.mean(f(per_symbol))))


def transformed_library(lib: SourceLibrary, transforms) -> SourceLibrary:
    """Library with d*_l in place of d_l; the pmf is shared untouched."""
    transforms = _check_transforms(lib, transforms)
    mats = tuple(transform_distortion_matrix(d, f) for d, f in zip(lib.distortion, transforms))
    for ell, d in enumerate(mats):
        if not np.all((d == 0).any(axis=0)):
            raise MissingZeroDistortionSymbol(f"source {ell}: transformed matrix lost a zero entry")
    d_max = max(float(d.max()) for d in mats)
    return SourceLibrary(lib.alphabet_sizes, lib.pmf.copy(), lib.recon_alphabet_sizes, mats, d_max)


def transformed_targets(transforms, D) -> tuple:
    return tuple(float(f(v)) - f.offset for f, v in zip(transforms, D))


def _check_transforms(lib, transforms):
    if transforms is None:
        transforms = [DistortionTransform()] * lib.L
    if isinstance(transforms, DistortionTransform):
        transforms = [transforms] * lib.L
    transforms = list(transforms)
    if len(transforms) != lib.L:
        raise ConfigError(f"need {lib.L} transforms, got {len(transforms)}")
    return transforms


def f_separable_rdc(lib: SourceLibrary, transforms, D, C, **opts):
    """R_f(D, C) computed as the ordinary tradeoff of the transformed library at f(D)."""
    from .rdc_solver import rdc_value

    transforms = _check_transforms(lib, transforms)
    Dt = as_distortions(D, lib.L)
    star = transformed_library(lib, transforms)
    pt = rdc_value(star, transformed_targets(transforms, Dt), C, **opts)
    pt.distortions = Dt
    return pt
