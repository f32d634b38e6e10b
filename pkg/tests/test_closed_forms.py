import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import entropy as scipy_entropy

from rdcache.closed_forms import (
    binary_entropy,
    binary_entropy_inverse,
    bivariate_gaussian_rdc,
    classify_gaussian_region,
    dsbs_rdc_bounds,
    gaussian_joint_rd,
    gaussian_superuser_lower,
    iid_identical_rdc,
)
from rdcache.common_info import wyner_ci_dsbs, wyner_ci_gaussian
from rdcache.errors import InvalidCache, RDCacheError, RhoOutOfRange
from rdcache.source_model import hamming

COV = np.array([[1.0, 0.8], [0.8, 1.0]])


# oracles -------------------------------------------------------------------------


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(scipy_entropy([0.11, 0.89], base=2), abs=1e-15)
    assert binary_entropy_inverse(binary_entropy(0.11)) == pytest.approx(0.11, abs=1e-12)
    with pytest.raises(RDCacheError):
        binary_entropy(1.5)
    with pytest.raises(RDCacheError):
        binary_entropy_inverse(1.5)


def test_iid_identical():
    # Bernoulli(1/2), D = 0.1: R = 1 - h(0.1)
    r = 1 - binary_entropy(0.1)
    assert iid_identical_rdc([0.5, 0.5], hamming(2), 0.1, 0.5, 2) == pytest.approx(r - 0.25, abs=1e-9)
    assert iid_identical_rdc([0.5, 0.5], hamming(2), 0.1, 5.0, 2) == 0.0
    with pytest.raises(InvalidCache):
        iid_identical_rdc([0.5, 0.5], hamming(2), 0.1, -1.0, 2)


def test_gaussian_regions():
    rho, D = 0.8, 0.1
    kw = wyner_ci_gaussian(rho)
    assert classify_gaussian_region(rho, D, 10.0).tag == "S1"
    assert classify_gaussian_region(rho, D, kw + 0.01).tag == "S2"
    assert classify_gaussian_region(rho, D, kw / 2).tag == "S3"
    assert classify_gaussian_region(rho, 0.5, 0.1).tag == "S4"
    assert bivariate_gaussian_rdc(rho, D, 10.0)[0] == 0.0
    with pytest.raises(RhoOutOfRange):
        classify_gaussian_region(1.0, D, 1.0)
    with pytest.raises(RDCacheError):
        gaussian_joint_rd(0.5, 0.0)


def test_gaussian_s2_value_at_two_bits():
    rate, region = bivariate_gaussian_rdc(0.8, 0.1, 2.0)
    assert region.tag == "S2" and region.exact
    assert rate == pytest.approx(0.29248, abs=1e-5)


def test_gaussian_s3_value_at_half_wyner():
    rate, region = bivariate_gaussian_rdc(0.8, 0.1, wyner_ci_gaussian(0.8) / 2)
    assert region.tag == "S3" and not region.exact
    assert rate == pytest.approx(1.0, abs=1e-9)


def test_superuser_lower_reports_vacuous_bound():
    low = gaussian_superuser_lower(COV, 0.1, 50.0)
    assert low.value < 0 and low.clamped == 0.0 and low.note
    with pytest.raises(RDCacheError):
        gaussian_superuser_lower(np.array([[1.0, 2.0], [2.0, 1.0]]), 0.1, 1.0)


def test_dsbs_bounds_endpoints():
    b = dsbs_rdc_bounds(0.1, 0.0)
    assert (b.lower, b.upper, b.exact) == (1.0, 1.0, True)
    assert dsbs_rdc_bounds(0.1, 2.0).upper == 0.0
    with pytest.raises(RhoOutOfRange):
        dsbs_rdc_bounds(0.6, 0.1)


# properties ----------------------------------------------------------------------


@given(st.floats(0.05, 0.95), st.floats(0.0, 3.0))
def test_s2_matches_pair_superuser_term(rho, C):
    D = 0.5 * (1 - rho)
    region = classify_gaussian_region(rho, D, C)
    if region.tag != "S2":
        return
    rate, _ = bivariate_gaussian_rdc(rho, D, C)
    cov = np.array([[1.0, rho], [rho, 1.0]])
    assert rate == pytest.approx(gaussian_superuser_lower(cov, D, C).terms[(0, 1)], abs=1e-10)


@given(st.floats(0.01, 0.49), st.floats(0.0, 1.6))
def test_dsbs_lower_below_upper(rho, C):
    b = dsbs_rdc_bounds(rho, C)
    assert b.lower <= b.upper + 1e-12
    if wyner_ci_dsbs(rho) <= C <= 1 + binary_entropy(rho):
        assert b.exact and abs(b.upper - b.lower) <= 1e-9


@given(st.floats(0.01, 0.49))
def test_dsbs_upper_continuous_at_zero_cache(rho):
    assert dsbs_rdc_bounds(rho, 1e-6).upper == pytest.approx(1.0, abs=1e-6)


@given(st.floats(0.05, 0.95))
def test_gaussian_joint_rd_continuous(rho):
    for edge in (1 - rho, 1.0):
        assert gaussian_joint_rd(rho, edge - 1e-12) == pytest.approx(gaussian_joint_rd(rho, edge + 1e-12), abs=1e-10)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_binary_entropy_inverse_monotone(a, b):
    lo, hi = sorted((a, b))
    assert binary_entropy_inverse(lo) <= binary_entropy_inverse(hi)


@given(st.floats(0.0, 0.5))
def test_binary_entropy_inverse_round_trip(p):
    assert binary_entropy_inverse(binary_entropy(p)) == pytest.approx(p, abs=1e-7)


@given(st.floats(0.05, 0.95), st.floats(0.01, 1.0), st.floats(0.0, 3.0))
def test_gaussian_upper_not_below_superuser_lower(rho, D, C):
    rate, _ = bivariate_gaussian_rdc(rho, D, C)
    cov = np.array([[1.0, rho], [rho, 1.0]])
    assert gaussian_superuser_lower(cov, D, C).clamped <= rate + 1e-10
