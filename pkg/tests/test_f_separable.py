import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdcache.errors import ConfigError, RDCacheError
from rdcache.f_separable import (
    DistortionTransform,
    f_separable_eval,
    f_separable_rdc,
    transform_distortion_matrix,
    transform_from_dict,
    transformed_library,
    transformed_targets,
)
from rdcache.rdc_solver import rdc_value
from rdcache.source_model import dsbs_library, library_from_joint

FAST = {"restarts": 6}

TRANSFORMS = [
    DistortionTransform(),
    DistortionTransform("power", exponent=2.0),
    DistortionTransform("power", exponent=0.5),
    DistortionTransform("exp", scale=1.0),
    DistortionTransform("exp", scale=-0.7),
    DistortionTransform("table", xs=(0.0, 1.0, 2.0, 4.0), ys=(0.5, 1.0, 3.0, 3.5)),
]


def block_mean(values, f):
    """f-mean of arbitrary nonnegative values through f_separable_eval."""
    values = np.asarray(values, dtype=float)
    d = values[:, None]  # row i holds value i for the single source symbol 0
    idx = np.arange(values.size)
    return f_separable_eval(idx, np.zeros_like(idx), d, f)


values_lists = st.lists(st.floats(0.0, 4.0), min_size=2, max_size=8)
transforms = st.sampled_from(TRANSFORMS)


# oracles -------------------------------------------------------------------------


def test_exp_transform_values():
    f = DistortionTransform("exp", scale=2.0)
    assert f(0.0) == 0.0
    assert f(1.0) == pytest.approx((np.exp(2.0) - 1) / 2, abs=1e-15)
    assert f.inverse(f(0.7)) == pytest.approx(0.7, abs=1e-15)


def test_table_shift_is_recorded():
    f = TRANSFORMS[-1]
    assert f.offset == 0.5
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert transform_distortion_matrix(d, f).tolist() == [[0.0, 0.5], [0.5, 0.0]]
    assert transformed_targets([f], [2.0]) == (2.5,)
    with pytest.raises(RDCacheError):
        f(5.0)
    with pytest.raises(RDCacheError):
        f.inverse(0.1)


def test_transform_validation():
    with pytest.raises(ConfigError):
        DistortionTransform("cubic")
    with pytest.raises(ConfigError):
        DistortionTransform("power", exponent=0.0)
    with pytest.raises(ConfigError):
        DistortionTransform("exp", scale=0.0)
    with pytest.raises(ConfigError):
        DistortionTransform("table", xs=(0.0, 1.0), ys=(1.0, 0.5))
    with pytest.raises(ConfigError):
        DistortionTransform("table", xs=(0.5, 1.0), ys=(0.0, 1.0))
    with pytest.raises(RDCacheError):
        DistortionTransform()(-1.0)


def test_transform_from_dict():
    assert transform_from_dict(None).kind == "identity"
    assert transform_from_dict({"kind": "power", "params": 3}).exponent == 3.0
    assert transform_from_dict({"kind": "exp", "params": {"scale": 0.5}}).scale == 0.5
    table = transform_from_dict({"kind": "table", "params": {"x": [0, 1], "y": [0, 2]}})
    assert table(0.5) == 1.0
    with pytest.raises(ConfigError):
        transform_from_dict({"params": 2})


def test_identity_reproduces_baseline_bit_for_bit():
    lib = library_from_joint([[0.3, 0.1], [0.2, 0.4]])
    base = rdc_value(lib, (0.05, 0.1), 0.4, **FAST)
    pt = f_separable_rdc(lib, DistortionTransform(), (0.05, 0.1), 0.4, **FAST)
    assert pt.rate == base.rate
    assert np.array_equal(pt.witness.matrix, base.witness.matrix)


def test_square_on_hamming_squares_the_targets():
    lib = dsbs_library(0.1)
    f = DistortionTransform("power", exponent=2.0)
    pt = f_separable_rdc(lib, f, 0.2, 0.5, **FAST)
    assert pt.rate == pytest.approx(rdc_value(lib, 0.04, 0.5, **FAST).rate, abs=1e-12)
    assert pt.distortions.values == (0.2, 0.2)


def test_transformed_library_shares_pmf():
    lib = library_from_joint([[0.3, 0.1], [0.2, 0.4]], distortions=[[[0, 2], [2, 0]]] * 2)
    star = transformed_library(lib, DistortionTransform("power", exponent=2.0))
    assert np.array_equal(star.pmf, lib.pmf)
    assert star.distortion[0].tolist() == [[0.0, 4.0], [4.0, 0.0]]
    with pytest.raises(ConfigError):
        transformed_library(lib, [DistortionTransform()])


# properties: the f-mean is a mean ---------------------------------------------------


@given(values_lists, transforms)
def test_mean_is_symmetric(values, f):
    assert block_mean(values, f) == pytest.approx(block_mean(values[::-1], f), rel=1e-12, abs=1e-12)


@given(st.floats(0.0, 4.0), st.integers(1, 6), transforms)
def test_mean_is_idempotent(t, n, f):
    assert block_mean([t] * n, f) == pytest.approx(t, rel=1e-12, abs=1e-12)


@given(values_lists, st.integers(0, 7), st.floats(0.01, 1.0), transforms)
def test_mean_is_increasing_in_each_argument(values, i, step, f):
    i %= len(values)
    bumped = list(values)
    bumped[i] = min(4.0, bumped[i] + step)
    if bumped[i] - values[i] < 1e-9:
        return  # clipped to an ulp-sized bump that doubles cannot resolve
    assert block_mean(bumped, f) > block_mean(values, f)
    # continuity: the change shrinks with the bump (not Lipschitz for sqrt at 0)
    base = block_mean(values, f)
    moves = []
    for eps in (1e-4, 1e-8, 1e-12):
        nudged = list(values)
        nudged[i] = nudged[i] - eps if nudged[i] >= 4.0 else nudged[i] + eps
        moves.append(abs(block_mean(nudged, f) - base))
    assert moves[2] <= moves[1] + 1e-15 <= moves[0] + 2e-15
    assert moves[2] <= 1e-5


@given(values_lists, st.integers(1, 7), transforms)
def test_partial_mean_replacement(values, k, f):
    k = min(k, len(values))
    head = block_mean(values[:k], f)
    replaced = [head] * k + list(values[k:])
    assert block_mean(replaced, f) == pytest.approx(block_mean(values, f), rel=1e-10, abs=1e-10)


entries = st.one_of(st.just(0.0), st.floats(1e-6, 4.0))


@given(transforms, st.lists(entries, min_size=4, max_size=4))
def test_zero_entries_survive_the_transform(f, vals):
    d = np.array([[0.0, vals[0]], [vals[1], 0.0], [vals[2], vals[3]]])
    out = transform_distortion_matrix(d, f)
    assert np.array_equal(out == 0, d == 0)
    assert np.all(out >= 0)


@settings(max_examples=6)
@given(st.sampled_from(TRANSFORMS[1:5]), st.floats(0.0, 0.3), st.floats(0.01, 0.2), st.floats(0.0, 0.6))
def test_rate_non_increasing_in_distortion(f, D, step, C):
    lib = library_from_joint(
        [[0.35, 0.15], [0.1, 0.4]], distortions=[[[0, 1], [1, 0], [0.5, 0.5]]] * 2, recon_alphabet_sizes=[3, 3]
    )
    lo = f_separable_rdc(lib, f, D, C, **FAST).rate
    hi = f_separable_rdc(lib, f, D + step, C, **FAST).rate
    assert hi <= lo + 1e-5
