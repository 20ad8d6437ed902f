import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from kramerscsf.detalg import apply_kplus_det
from kramerscsf.trgen import (
    CapacityError,
    build_k,
    build_kplus,
    build_kplus2,
    enumerate_basis,
    expm,
    fock_space,
    operator_matrix,
    verify_exp_map,
)

n_open_st = st.integers(1, 6)
closed_st = st.lists(st.integers(0, 5), unique=True, max_size=2)


def test_basis_order_and_counts():
    assert enumerate_basis(3, "even").labels("machine") == ["1 2 3", "~1 ~2 3", "~1 2 ~3", "1 ~2 ~3"]
    assert enumerate_basis(2, "odd").labels("machine") == ["~1 2", "1 ~2"]
    full = enumerate_basis(4, None)
    assert len(full) == 16
    assert [d.open_barred_count % 2 for d in full.dets] == [0] * 8 + [1] * 8
    assert len(enumerate_basis(0, "even")) == 1
    with pytest.raises(ValueError):
        enumerate_basis(0, "odd")
    with pytest.raises(CapacityError):
        enumerate_basis(11)
    with pytest.raises(ValueError):
        enumerate_basis(2, "both")


def test_closed_pairs_shift_open_shells():
    b = enumerate_basis(2, "even", closed_pairs=[0])
    assert b.open_pairs == (1, 2)
    assert b.labels("machine")[0] == "1 ~1 2 3"
    assert b.n_electrons == 4


def test_fock_space():
    dets = fock_space(2, 2)
    assert len(dets) == 6
    assert dets[0].slots() == [0, 1]
    with pytest.raises(CapacityError):
        fock_space(10, 10)
    with pytest.raises(ValueError):
        fock_space(1, 3)


def test_operator_matrix_rejects_escaping_targets():
    dets = enumerate_basis(2, "even").dets
    with pytest.raises(RuntimeError):
        operator_matrix(dets, apply_kplus_det)  # K+ flips parity


@pytest.mark.parametrize("scale", [0.1, 3.0, 40.0])
def test_expm_against_scipy(scale):
    rng = np.random.default_rng(5)
    a = scale * rng.normal(size=(6, 6))
    assert np.allclose(expm(a), scipy.linalg.expm(a), rtol=1e-11, atol=1e-11 * np.abs(scipy.linalg.expm(a)).max())


def test_expm_rotation_series():
    # exp(t J) for the 2x2 generator is a rotation by t
    j = np.array([[0.0, -1.0], [1.0, 0.0]])
    t = 2.5
    assert np.allclose(expm(t * j), [[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]], atol=1e-14)


@pytest.mark.parametrize("n_open", range(0, 7))
def test_exp_map(n_open):
    rep = verify_exp_map(enumerate_basis(n_open, None))
    assert rep.passed, rep.offending[:5]


def test_exp_map_with_closed_pair():
    assert verify_exp_map(enumerate_basis(3, None, closed_pairs=[1])).passed


def test_exp_map_reports_offenders():
    rep = verify_exp_map(enumerate_basis(2, None), tol=0.0)
    # tolerance 0 is unattainable in floating point; offending entries must be listed
    assert not rep.passed and rep.offending


@settings(max_examples=25, deadline=None)
@given(n_open_st, closed_st)
def test_generator_matrix_invariants(n_open, closed):
    full = enumerate_basis(n_open, None, closed)
    kp = build_kplus(full).mat
    h = len(full) // 2
    assert np.array_equal(kp.T, -kp)
    assert set(np.unique(kp)) <= {-1.0, 0.0, 1.0}
    k2 = kp @ kp
    assert not k2[:h, h:].any() and not k2[h:, :h].any()
    assert np.all(np.diag(k2) == -n_open)
    assert np.trace(k2) == -n_open * 2**n_open
    km = build_k(full).mat
    assert set(np.unique(km)) <= {-1.0, 0.0, 1.0}
    assert np.array_equal(km @ km, (-1) ** full.n_electrons * np.eye(len(full)))


@settings(max_examples=25, deadline=None)
@given(n_open_st, closed_st)
def test_closed_pairs_leave_matrices_unchanged(n_open, closed):
    for parity in ("even", "odd"):
        bare = build_kplus2(enumerate_basis(n_open, parity))
        dressed = build_kplus2(enumerate_basis(n_open, parity, closed))
        assert np.array_equal(bare, dressed)


@pytest.mark.parametrize("n_open", [1, 3, 5, 7])
def test_odd_n_blocks_agree_in_k_image_order(n_open):
    full = enumerate_basis(n_open, None)
    h = len(full) // 2
    k2 = build_kplus2(full)
    img = build_k(full).mat[h:, :h]  # signed permutation even -> odd
    assert np.array_equal(img.T @ k2[h:, h:] @ img, k2[:h, :h])


def test_odd_n_blocks_differ_entrywise_in_lex_order():
    # documented: the plain lexicographic odd block is a signed relabelling, not a copy
    full = enumerate_basis(3, None)
    k2 = build_kplus2(full)
    assert not np.array_equal(k2[:4, :4], k2[4:, 4:])
    assert np.array_equal(np.abs(k2[:4, :4]).sum(), np.abs(k2[4:, 4:]).sum())


def test_flipped_phase_convention_gives_same_kplus2():
    # K phi_pbar = +phi_p, K phi_p = -phi_pbar negates every K_i, hence K+ -> -K+
    full = enumerate_basis(4, None)

    def flipped(d):
        return apply_kplus_det(d).scaled(-1)

    kf = operator_matrix(full.dets, flipped)
    assert np.array_equal(kf @ kf, build_kplus2(full))


def test_antilinear_application():
    full = enumerate_basis(1, None)
    kp = build_kplus(full)
    v = np.array([1j, 0.0])
    # K+ phi_1 = phi_1bar, antilinear: K+(i phi_1) = -i phi_1bar
    assert np.allclose(kp(v), [0, -1j])
