import numpy as np
import pytest

import published as pf
from kramerscsf import kcsf as kc
from kramerscsf.spincmp import (
    build_spin_ops,
    compare_to_kcsf,
    excite_closed_shell,
    kramers_excitations,
    spin_csf,
    spin_from_s2,
    spin_ladder,
    sz_diagonal,
    triplet_excitations,
)
from kramerscsf.trgen import build_kplus, build_kplus2, enumerate_basis


def unit_overlap(a, b):
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return abs(np.vdot(a, b))


def test_s2_fixtures():
    ops = build_spin_ops(2, None)
    assert np.array_equal(ops.s2, pf.in_basis_order(pf.S2_2["matrix"], pf.S2_2["labels"], ops.basis))
    ops3 = build_spin_ops(3, "even")
    assert np.array_equal(ops3.s2, pf.in_basis_order(pf.S2_3_EVEN["matrix"], pf.S2_3_EVEN["labels"], ops3.basis))


def test_spin_labels_and_order():
    sp = spin_csf(2, None)
    assert sp.labels == ((1.0, 1.0), (1.0, 0.0), (1.0, -1.0), (0.0, 0.0))
    sp3 = spin_csf(3, "even")
    # the even branch holds M_S = 3/2 and -1/2 determinants
    assert sorted({m for _, m in sp3.labels}) == [-0.5, 1.5]
    assert sorted(s for s, _ in sp3.labels) == [0.5, 0.5, 1.5, 1.5]


def test_published_spin_vectors():
    sp = spin_csf(2, None)
    r = 1 / np.sqrt(2)
    want = {
        (1.0, 1.0): {"1 2": 1},
        (1.0, -1.0): {"~1 ~2": 1},
        (1.0, 0.0): {"1 ~2": r, "~1 2": r},
        (0.0, 0.0): {"1 ~2": r, "~1 2": -r},
    }
    labels = sp.basis.labels("machine")
    for j, lab in enumerate(sp.labels):
        ref = np.array([want[lab].get(l, 0.0) for l in labels])
        assert unit_overlap(ref, sp.vectors[:, j]) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n_open", range(1, 7))
def test_kplus_is_difference_of_ladders(n_open):
    # with unbarred = alpha: K+ = S- - S+ on real coefficients, so K+^2 = -4 S_y^2
    full = enumerate_basis(n_open, None)
    sp, sm = spin_ladder(full.dets, full.n_pairs)
    assert np.array_equal(build_kplus(full).mat, sm - sp)


@pytest.mark.parametrize("n_open", range(1, 7))
def test_s2_commutes_with_kplus2(n_open):
    ops = build_spin_ops(n_open, None)
    k2 = build_kplus2(ops.basis)
    assert np.abs(ops.s2 @ k2 - k2 @ ops.s2).max() <= 1e-12


@pytest.mark.parametrize("n_open", range(1, 8))
def test_multiplicity_matches_spin_projection_count(n_open):
    full = enumerate_basis(n_open, None)
    vals = np.linalg.eigvalsh(build_kplus2(full))
    two_m = np.abs(2 * sz_diagonal(full.dets)).round().astype(int)
    for k in range(n_open % 2, n_open + 1, 2):
        assert np.sum(np.abs(vals + k * k) < 1e-8) == np.sum(two_m == k)


def test_overlap_statements():
    rep = compare_to_kcsf(spin_csf(2, None), kc.make_kcsf(2, None))
    assert rep.exact == {1: 1, 3: 3}
    assert rep.mixed == {0: [0, 2], 2: [0, 2]}
    rep3 = compare_to_kcsf(spin_csf(3, "even"), kc.make_kcsf(3, "even"))
    assert sorted(rep3.exact) == [2, 3]


def test_basis_mismatch():
    with pytest.raises(kc.BasisMismatchError):
        compare_to_kcsf(spin_csf(2, None), kc.make_kcsf(2, "even"))


def test_kramers_excitations_create_kcsfs():
    basis = enumerate_basis(2, None)
    kset = kc.make_kcsf(2, None)
    ops = kramers_excitations(1, 0)
    expect = {"E-(pbar,q)": 0, "E+(pbar,q)": 2, "E-(p,q)": 1, "E+(p,q)": 3}
    for name, col in expect.items():
        v = excite_closed_shell(ops[name], basis)
        assert unit_overlap(v, kset.vectors[:, col]) == pytest.approx(1, abs=1e-12), name


def test_triplet_excitations():
    basis = enumerate_basis(2, None)
    sp = spin_csf(2, None)
    kset = kc.make_kcsf(2, None)
    ops = triplet_excitations(1, 0)
    spin_target = {"T(1,1)": 0, "T(1,0)": 1, "T(1,-1)": 2, "S(0,0)": 3}
    for name, col in spin_target.items():
        v = excite_closed_shell(ops[name], basis)
        assert unit_overlap(v, sp.vectors[:, col]) == pytest.approx(1, abs=1e-12), name
    # Cartesian components land on KCSFs
    for name, col in {"Tx": 0, "Ty": 2, "Tz": 1}.items():
        v = excite_closed_shell(ops[name], basis)
        assert unit_overlap(v, kset.vectors[:, col]) == pytest.approx(1, abs=1e-12), name


def test_spin_rounding_guard():
    assert spin_from_s2(15 / 4) == 1.5
    with pytest.raises(ArithmeticError):
        spin_from_s2(1.0)
