import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from strategies import SPECS, pmfs, small_libraries

from rdcache.errors import (
    EmptySubset,
    IndexOutOfRange,
    InfiniteDistortion,
    MissingZeroDistortionSymbol,
    NegativeMass,
    NotNormalized,
    RDCacheError,
    RhoOutOfRange,
)
from rdcache.source_model import (
    as_distortions,
    dsbs_library,
    hamming,
    library_from_joint,
    load_spec,
    marginal,
    sub_library,
    validate_library,
)


def test_hamming_matrix():
    assert np.array_equal(hamming(3), 1 - np.eye(3))
    assert hamming(2, 3).shape == (3, 2)


def test_dsbs_layout():
    lib = dsbs_library(0.2)
    assert np.allclose(lib.joint, [[0.4, 0.1], [0.1, 0.4]])
    assert lib.is_hamming()
    assert lib.size == 4 and lib.L == 2


def test_row_major_symbols():
    lib = library_from_joint(np.arange(1, 7, dtype=float).reshape(2, 3) / 21)
    sym = lib.symbols()
    assert sym.shape == (6, 2)
    assert sym[4].tolist() == [1, 1]
    assert lib.pmf[4] == pytest.approx(5 / 21)


def test_validation_errors():
    base = {"alphabet_sizes": [2], "pmf": [0.5, 0.5]}
    with pytest.raises(NegativeMass):
        validate_library({**base, "pmf": [1.2, -0.2]})
    with pytest.raises(NotNormalized):
        validate_library({**base, "pmf": [0.5, 0.6]})
    with pytest.raises(MissingZeroDistortionSymbol):
        validate_library({**base, "distortions": [[[0, 1], [0, 1]]]})
    with pytest.raises(InfiniteDistortion):
        validate_library({**base, "distortions": [[[0, np.inf], [np.inf, 0]]]})
    with pytest.raises(InfiniteDistortion):
        validate_library({**base, "d_max": 0.5})
    with pytest.raises(RDCacheError):
        validate_library({"alphabet_sizes": [2, 2], "pmf": [0.5, 0.5]})
    with pytest.raises(RDCacheError):
        validate_library({"pmf": [1.0]})


def test_tiny_normalization_drift_is_absorbed():
    lib = validate_library({"alphabet_sizes": [2], "pmf": [0.5, 0.5 + 1e-12]})
    assert lib.pmf.sum() == pytest.approx(1.0, abs=1e-15)


def test_subset_errors():
    lib = dsbs_library(0.1)
    with pytest.raises(EmptySubset):
        marginal(lib, [])
    with pytest.raises(IndexOutOfRange):
        marginal(lib, [2])


def test_distortion_targets():
    assert as_distortions(0.1, 3).values == (0.1, 0.1, 0.1)
    with pytest.raises(RDCacheError):
        as_distortions([0.1], 2)
    with pytest.raises(RDCacheError):
        as_distortions(-0.1, 1)


def test_rho_range():
    with pytest.raises(RhoOutOfRange):
        dsbs_library(0.6)


def test_load_spec_files():
    lib, fs = load_spec(str(SPECS / "dsbs_rho0.1.json"))
    assert fs is None and np.allclose(lib.pmf, dsbs_library(0.1).pmf)
    lib, fs = load_spec(str(SPECS / "three_level_exp.json"))
    assert lib.recon_alphabet_sizes == (3, 3)
    assert [f.kind for f in fs] == ["exp", "exp"]


def test_to_dict_round_trip(tmp_path):
    lib = library_from_joint([[0.1, 0.2], [0.3, 0.4]])
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(lib.to_dict()))
    again, _ = load_spec(path)
    assert np.array_equal(again.pmf, lib.pmf)


@given(small_libraries(shapes=((2, 2), (2, 3), (3, 2))))
def test_validate_is_idempotent(lib):
    again = validate_library(lib)
    assert np.array_equal(again.pmf, lib.pmf)
    assert all(np.array_equal(a, b) for a, b in zip(again.distortion, lib.distortion))
    assert again.d_max == lib.d_max


@given(pmfs(12), st.sampled_from([(0, 1), (0, 2), (1, 2)]), st.sampled_from([0, 1]))
def test_marginal_composes(p, S, pick):
    lib = library_from_joint(p.reshape(2, 3, 2))
    inner = sub_library(lib, S)
    assert np.allclose(marginal(inner, [pick]), marginal(lib, [S[pick]]), atol=1e-15)


@given(st.floats(0.0, 0.5))
def test_dsbs_marginals_uniform(rho):
    lib = dsbs_library(rho)
    for ell in (0, 1):
        assert np.allclose(marginal(lib, [ell]), [0.5, 0.5], atol=1e-15)
