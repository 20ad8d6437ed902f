import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kramerscsf import modelham as mh
from kramerscsf.detalg import Determinant
from kramerscsf.trgen import CapacityError


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.sampled_from([0.0, 0.3, 1.0, 2.5]), st.integers(0, 10_000))
def test_generated_integrals_are_time_reversal_symmetric(m, so, seed):
    ints = mh.gen_integrals(m, so, seed)
    assert max(ints.residuals().values()) <= 1e-12
    u = ints.u
    assert np.allclose(u.conj().T @ u, np.eye(2 * m), atol=1e-12)
    assert np.allclose(mh.tr_image(u), u, atol=1e-12)


def test_spin_orbit_knob():
    assert np.abs(mh.gen_integrals(3, 0.0, 1).h.imag).max() < 1e-14
    assert np.abs(mh.gen_integrals(3, 1.0, 1).h.imag).max() > 1e-3


def test_generation_is_deterministic():
    a, b = mh.gen_integrals(3, 1.0, 4), mh.gen_integrals(3, 1.0, 4)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.g, b.g)


def test_tr_projection():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    even, odd = mh.tr_project(x, 1), mh.tr_project(x, -1)
    assert np.allclose(even + odd, x)
    assert np.allclose(mh.tr_image(even), even)
    assert np.allclose(mh.tr_image(odd), -odd)
    assert np.allclose(mh.tr_image(mh.sigma_z(2)), -mh.sigma_z(2))


@pytest.mark.parametrize("m,n,so", [(2, 1, 1.0), (2, 2, 1.0), (2, 3, 0.5), (3, 2, 1.0), (3, 3, 1.0), (3, 4, 0.0)])
def test_slater_condon_against_first_quantized(m, n, so):
    ints = mh.gen_integrals(m, so, seed=n)
    ham, dets = mh.build_hamiltonian(ints, n)
    ref, rdets = mh.first_quantized_hamiltonian(ints, n)
    assert dets == rdets
    assert np.abs(ham - ref).max() <= 1e-12
    assert np.abs(ham - ham.conj().T).max() <= 1e-12


def test_one_electron_hamiltonian_is_h():
    ints = mh.gen_integrals(3, 1.0, 0)
    ham, dets = mh.build_hamiltonian(ints, 1)
    assert [d.slots() for d in dets] == [[s] for s in range(6)]
    assert np.allclose(ham, ints.h)


def test_integral_json_round_trip(tmp_path):
    ints = mh.gen_integrals(2, 1.0, 3)
    text = json.dumps(ints.to_json())
    back = mh.SpinorIntegrals.from_json(text)
    assert np.array_equal(back.h, ints.h) and np.array_equal(back.g, ints.g)
    bad = json.loads(text)
    bad["schema"] = "other"
    with pytest.raises(ValueError):
        mh.SpinorIntegrals.from_json(bad)
    bad = json.loads(text)
    bad["h"] = bad["h"][:1]
    with pytest.raises(ValueError):
        mh.SpinorIntegrals.from_json(bad)


def test_capacity_and_validation():
    with pytest.raises(CapacityError):
        mh.gen_integrals(7)
    ints = mh.gen_integrals(2)
    with pytest.raises(ValueError):
        mh.build_hamiltonian(ints, 5)


def test_broken_integrals_fail_check():
    bad = mh.break_time_reversal(mh.gen_integrals(3, 1.0, 0))
    with pytest.raises(mh.SymmetryError):
        bad.check()


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("n", [2, 3])
def test_commutation_without_spin_orbit(seed, n):
    ints = mh.gen_integrals(3, 0.0, seed)
    ham, dets = mh.build_hamiltonian(ints, n)
    rep = mh.verify_commutation(ham, dets)
    assert rep.passed and rep.k_norm <= 1e-10


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("n", [2, 3])
def test_one_body_kplus2_commutator_tracks_imaginary_part(seed, n):
    # diagnostic with g = 0: K+^2 = (sum_i theta_i)^2 commutes with sum_i h(i)
    # iff h commutes with the linear theta, i.e. iff Im h = 0 for TR-even h
    ints = mh.gen_integrals(3, 1.0, seed)
    zero = np.zeros_like(ints.g)
    cplx = mh.SpinorIntegrals(3, ints.h, zero)
    real = mh.SpinorIntegrals(3, ints.h.real.astype(complex), zero)
    t = mh.theta(3)
    assert np.abs(ints.h @ t - t @ ints.h).max() == pytest.approx(2 * np.abs(t @ ints.h.imag).max())
    for obj, broken in ((cplx, True), (real, False)):
        ham, dets = mh.build_hamiltonian(obj, n)
        norm = mh.verify_commutation(ham, dets).kplus2_norm
        assert (norm > 1e-6) if broken else (norm <= 1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_complex_integrals_break_kplus2_but_not_k(n):
    ints = mh.gen_integrals(3, 1.0, 0)
    ham, dets = mh.build_hamiltonian(ints, n)
    rep = mh.verify_commutation(ham, dets)
    assert rep.k_norm <= 1e-10
    assert rep.kplus2_norm > 1e-3  # see the decisions ledger


def test_single_electron_commutes_at_any_spin_orbit():
    ints = mh.gen_integrals(3, 1.0, 0)
    ham, dets = mh.build_hamiltonian(ints, 1)
    assert mh.verify_commutation(ham, dets).kplus2_norm <= 1e-10


def test_negative_control():
    ints = mh.break_time_reversal(mh.gen_integrals(3, 0.0, 0))
    ham, dets = mh.build_hamiltonian(ints, 2)
    rep = mh.verify_commutation(ham, dets)
    assert not rep.passed and rep.k_norm > 1e-3


@pytest.mark.parametrize("n", [2, 3])
def test_spin_free_levels_follow_spin_multiplets(n):
    # at so=0, K+^2 = -4 S_y^2 inside each level, so a spin-S level carries k = 2|m_y|
    ints = mh.gen_integrals(3, 0.0, 1)
    ham, dets = mh.build_hamiltonian(ints, n)
    lv = mh.level_analysis(ham, dets)
    s2 = mh.fock_spin_squared(dets)
    for level in lv.levels:
        v = lv.vectors[:, list(level.indices)]
        ss = np.real(np.trace(v.conj().T @ s2 @ v)) / level.dim
        two_s = round(np.sqrt(1 + 4 * ss) - 1)
        assert level.dim == two_s + 1
        want = sorted(-((two_s - 2 * j) ** 2) for j in range(two_s + 1))
        assert np.allclose(sorted(level.kplus2_values), want, atol=1e-8)


def test_kplus_maps_levels_into_themselves_without_spin_orbit():
    ints = mh.gen_integrals(3, 0.0, 2)
    ham, dets = mh.build_hamiltonian(ints, 2)
    lv = mh.level_analysis(ham, dets)
    kp = mh.fock_kplus(dets)
    for level in lv.levels:
        for i in level.indices:
            w = kp @ np.conj(lv.vectors[:, i])
            assert np.abs(ham @ w - level.energy * w).max() <= 1e-8


@pytest.mark.parametrize("so", [0.0, 1.0])
@pytest.mark.parametrize("n", [2, 3])
def test_magnetic_rules_on_model_levels(so, n):
    ints = mh.gen_integrals(3, so, 3)
    ham, dets = mh.build_hamiltonian(ints, n)
    lv = mh.level_analysis(ham, dets)
    vecs, doublets = mh.tr_adapted_level_basis(lv, dets)
    assert np.allclose(vecs.conj().T @ vecs, np.eye(len(dets)), atol=1e-10)
    op = mh.one_body_matrix(mh.tr_odd_operator(ints), dets)
    rep = mh.magnetic_operator_checks(op, vecs, mh.fock_k(dets), n, doublets)
    assert rep.passed
    if n % 2:
        assert rep.diagonal_max is None and len(rep.doublets) == len(dets) // 2


def test_odd_electron_levels_are_kramers_degenerate():
    for so in (0.0, 1.0):
        ints = mh.gen_integrals(3, so, 4)
        ham, dets = mh.build_hamiltonian(ints, 3)
        lv = mh.level_analysis(ham, dets)
        assert all(d % 2 == 0 for d in lv.dims)


def test_pauli_decomposition():
    sx = np.array([[0, 1], [1, 0]])
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1.0, -1.0])
    o = 0.3 * np.eye(2) + 0.1 * sx + 0.2 * sy + 0.4 * sz
    c = mh.pauli_decompose(o)
    assert np.allclose([c["c0"], c["cx"], c["cy"], c["cz"]], [0.3, 0.1, 0.2, 0.4])


def test_non_kramers_doublet_only_couples_through_pauli_y():
    # a purely imaginary Hermitian 2x2 block between K-real vectors
    vecs = np.eye(2, dtype=complex)
    op = np.array([[0, -0.5j], [0.5j, 0]])
    kmat = np.eye(2)
    rep = mh.magnetic_operator_checks(op, vecs, kmat, 2, [(0, 1)])
    assert rep.passed and rep.doublets[0]["kind"] == "non-Kramers"
    bad = mh.magnetic_operator_checks(op + np.diag([0.1, -0.1]), vecs, kmat, 2, [(0, 1)])
    assert not bad.passed


def test_one_body_matrix_projects():
    dets = [Determinant.from_slots([0], 1)]
    op = np.array([[2.0, 1.0], [1.0, -2.0]])
    assert np.allclose(mh.one_body_matrix(op, dets), [[2.0]])
