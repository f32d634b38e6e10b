import numpy as np
import pytest
from hypothesis import given, strategies as st
from strategies import SPECS

from rdcache.common_info import (
    common_part_graph,
    dsbs_rho_star,
    gacs_korner_brute_force,
    gacs_korner_lossy_check,
    gacs_korner_zero,
    kgk_vs_cg_check,
    wyner_ci_dsbs,
    wyner_ci_gaussian,
)
from rdcache.closed_forms import binary_entropy
from rdcache.errors import ConditionViolated, RhoOutOfRange
from rdcache.it_core import entropy
from rdcache.source_model import dsbs_library, library_from_joint, load_spec, marginal


def block_library():
    """X_1 = X_2 = 0 w.p. 1/2, otherwise both uniform on {1, 2} independently."""
    joint = np.zeros((3, 3))
    joint[0, 0] = 0.5
    joint[1:, 1:] = 0.125
    return library_from_joint(joint)


# oracles -------------------------------------------------------------------------


def test_block_library_common_part():
    res = gacs_korner_zero(block_library())
    assert res.value == pytest.approx(1.0, abs=1e-15)
    assert res.n_components == 2
    assert res.witness[0].tolist() == res.witness[1].tolist()


def test_common_part_spec():
    lib, _ = load_spec(str(SPECS / "common_part.json"))
    res = gacs_korner_zero(lib)
    assert res.value == pytest.approx(1.0, abs=1e-12)
    assert res.value == pytest.approx(gacs_korner_brute_force(lib), abs=1e-12)


def test_dsbs_has_no_common_part():
    assert gacs_korner_zero(dsbs_library(0.1)).value == 0.0


def test_identical_sources_share_everything():
    p = np.array([0.2, 0.3, 0.5])
    lib = library_from_joint(np.diag(p))
    assert gacs_korner_zero(lib).value == pytest.approx(entropy(p), abs=1e-14)


def test_three_sources():
    joint = np.zeros((2, 2, 2))
    joint[0, 0, 0] = joint[1, 1, 1] = 0.4
    joint[0, 0, 1] = 0.2  # joins the two halves through X_3
    lib = library_from_joint(joint)
    assert gacs_korner_zero(lib).value == 0.0
    assert gacs_korner_brute_force(lib) == 0.0


def test_graph_edges():
    g = common_part_graph(block_library())
    assert len(g.vertices) == 6
    assert (0, 3) in g.edges and (1, 4) in g.edges and (0, 4) not in g.edges


def test_wyner_closed_forms():
    rho = 0.1
    star = dsbs_rho_star(rho)
    # rho* solves 2 rho*(1 - rho*) = rho
    assert 2 * star * (1 - star) == pytest.approx(rho, abs=1e-15)
    assert wyner_ci_dsbs(rho) == pytest.approx(1 + binary_entropy(rho) - 2 * binary_entropy(star), abs=1e-15)
    assert wyner_ci_dsbs(0.5) == pytest.approx(0.0, abs=1e-15)
    assert wyner_ci_gaussian(0.8) == pytest.approx(0.5 * np.log2(9.0), abs=1e-15)
    assert wyner_ci_gaussian(1.0) == np.inf
    with pytest.raises(RhoOutOfRange):
        wyner_ci_dsbs(0.7)
    with pytest.raises(RhoOutOfRange):
        wyner_ci_gaussian(1.5)


def test_lossy_check_accepts_common_component_at_zero_distortion():
    lib = block_library()
    res = gacs_korner_zero(lib)
    aux = np.eye(2)[res.joint_labels]
    identity = np.eye(3)
    report = gacs_korner_lossy_check(lib, 0.0, aux, [identity, identity])
    assert report.feasible
    assert report.mutual_info == pytest.approx(res.value, abs=1e-12)


def test_lossy_check_reports_violations():
    lib = dsbs_library(0.1)
    aux = np.eye(4)  # U = X̄ is not a function of either source alone
    identity = np.eye(2)
    with pytest.raises(ConditionViolated):
        gacs_korner_lossy_check(lib, 0.0, aux, [identity, identity])
    report = gacs_korner_lossy_check(lib, 0.0, aux, [identity, identity], raise_on_violation=False)
    assert not report.feasible and report.violations


def test_kgk_report_skips_lossy_case():
    report = kgk_vs_cg_check(dsbs_library(0.1), 0.1)
    assert report.kgk is None and report.holds is None


# properties ----------------------------------------------------------------------


@st.composite
def sparse_libraries(draw):
    L = draw(st.sampled_from([2, 3]))
    sizes = tuple(draw(st.integers(1, 4 if L == 2 else 2)) for _ in range(L))
    n = int(np.prod(sizes))
    weights = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
    mask = np.array(draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    if not mask.any():
        mask[0] = True
    p = np.where(mask, weights, 0.0)
    return library_from_joint((p / p.sum()).reshape(sizes), distortions=[np.zeros((1, k)) for k in sizes],
                              recon_alphabet_sizes=[1] * L)


@given(sparse_libraries())
def test_graph_matches_labeling_oracle(lib):
    assert gacs_korner_zero(lib).value == pytest.approx(gacs_korner_brute_force(lib), abs=1e-12)


@given(sparse_libraries())
def test_component_map_is_a_function_of_each_source(lib):
    res = gacs_korner_zero(lib)
    sym = lib.symbols()
    support = lib.pmf > 0
    for ell, m in enumerate(res.witness):
        # every positive-mass joint symbol carries the label its own x_ell maps to
        assert np.array_equal(m[sym[support, ell]], res.joint_labels[support])


@given(sparse_libraries())
def test_common_information_below_each_entropy(lib):
    value = gacs_korner_zero(lib).value
    for ell in range(lib.L):
        assert value <= entropy(marginal(lib, [ell])) + 1e-12


@given(st.floats(0.001, 0.499))
def test_wyner_dominates_gacs_korner_on_dsbs(rho):
    assert wyner_ci_dsbs(rho) >= gacs_korner_zero(dsbs_library(rho)).value
