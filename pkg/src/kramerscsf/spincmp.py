"""Spin operators over the same determinant bases, with unbarred = alpha and barred = beta.

Used to compare spin-adapted CSFs with KCSFs in the one-component limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detalg import Determinant, SignedDetSum, apply_string
from .eig import group_degenerate, sym_eig
from .kcsf import BasisMismatchError, KcsfSet, _orient_group
from .trgen import OpenShellBasis, build_k, enumerate_basis, operator_matrix

S_ROUND_TOL = 1e-8
OVERLAP_TOL = 1e-10


@dataclass(frozen=True)
class SpinMatrices:
    sz: np.ndarray
    s2: np.ndarray
    basis: OpenShellBasis


def _one_body(pairs: list[tuple[int, int]]):
    # sum of a+_P a_Q over the given (P, Q) slot pairs
    def action(d: Determinant) -> SignedDetSum:
        out = SignedDetSum()
        for p, q in pairs:
            res = apply_string(d, [("+", p), ("-", q)])
            if res is not None:
                out.add(*res)
        return out

    return action


def spin_ladder(dets, n_pairs: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of ``S+`` and ``S-`` over ``dets`` (which must be closed under them)."""
    up = _one_body([(2 * p, 2 * p + 1) for p in range(n_pairs)])
    down = _one_body([(2 * p + 1, 2 * p) for p in range(n_pairs)])
    return operator_matrix(dets, up), operator_matrix(dets, down)


def sz_diagonal(dets) -> np.ndarray:
    return np.array([(d.n_electrons - 2 * _barred_total(d)) / 2 for d in dets])


def _barred_total(d: Determinant) -> int:
    return sum(d.occ >> (2 * p + 1) & 1 for p in range(d.n_pairs))


def build_spin_ops(n_open: int, parity: str | None = None, closed_pairs=()) -> SpinMatrices:
    """``S_z`` and ``S^2 = S_z^2 + S_z + S- S+`` on an open-shell basis.

    ``S+`` changes the barred count by one, so the ladder product is formed
    on the two-branch space and then restricted.
    """
    basis = enumerate_basis(n_open, parity, closed_pairs)
    full = basis.full()
    sp, sm = spin_ladder(full.dets, full.n_pairs)
    sz_full = np.diag(sz_diagonal(full.dets))
    s2_full = sz_full @ sz_full + sz_full + sm @ sp
    if parity is None:
        return SpinMatrices(sz_full, s2_full, basis)
    pos = basis.positions_in_full()
    sel = np.ix_(pos, pos)
    return SpinMatrices(sz_full[sel], s2_full[sel], basis)


def spin_from_s2(value: float, tol: float = S_ROUND_TOL) -> float:
    """``S`` (a multiple of 1/2) from an eigenvalue ``S(S+1)``."""
    two_s = round(math.sqrt(1 + 4 * max(value, 0.0)) - 1)
    s = two_s / 2
    if abs(s * (s + 1) - value) > tol:
        raise ArithmeticError(f"S^2 eigenvalue {value!r} is not of the form S(S+1)")
    return s


_R2, _R3, _R6 = math.sqrt(2), math.sqrt(3), math.sqrt(6)

_SPIN_SEED_2 = np.array(
    [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 1 / _R2, 1 / _R2],
        [0, 0, -1 / _R2, 1 / _R2],
    ]
).T

_SPIN_SEED_3_EVEN = np.array(
    [
        [1, 0, 0, 0],
        [0, 1 / _R3, 0, _R6 / 3],
        [0, 1 / _R3, _R2 / 2, -_R6 / 6],
        [0, 1 / _R3, -_R2 / 2, -_R6 / 6],
    ]
)


def spin_seeds(n_open: int) -> np.ndarray | None:
    if n_open == 2:
        return _SPIN_SEED_2
    if n_open == 3:
        k = build_k(enumerate_basis(3, None)).mat
        even = np.vstack([_SPIN_SEED_3_EVEN, np.zeros((4, 4))])
        return np.hstack([even, k @ even])
    return None


@dataclass(frozen=True)
class SpinCsfSet:
    basis: OpenShellBasis
    values: np.ndarray  # S(S+1)
    labels: tuple[tuple[float, float], ...]  # (S, M_S)
    vectors: np.ndarray


def spin_csf(n_open: int, parity: str | None = None, closed_pairs=()) -> SpinCsfSet:
    """Simultaneous eigenvectors of ``S^2`` and ``S_z``.

    ``S^2`` is diagonalized inside each ``S_z`` sector. Columns are ordered by
    descending ``S``, then descending ``M_S``.
    """
    ops = build_spin_ops(n_open, parity, closed_pairs)
    basis = ops.basis
    seeds = spin_seeds(n_open)
    if seeds is not None:
        pos = basis.positions_in_full()
        seeds = seeds[pos]
        seeds = seeds[:, np.linalg.norm(seeds, axis=0) > 0.5]
    mz = np.diag(ops.sz)
    entries = []
    for m in sorted(set(mz.tolist()), reverse=True):
        idx = np.flatnonzero(mz == m)
        dec = sym_eig(ops.s2[np.ix_(idx, idx)])
        for val, grp in group_degenerate(dec.values):
            sub = np.zeros((len(basis), len(grp)))
            sub[idx] = dec.vectors[:, list(grp)]
            sub = _orient_group(sub, seeds)
            s = spin_from_s2(val)
            for col in sub.T:
                entries.append((s, m, col))
    entries.sort(key=lambda e: (-e[0], -e[1]))
    labels = tuple((s, m) for s, m, _ in entries)
    vecs = np.array([c for _, _, c in entries]).T
    vals = np.array([s * (s + 1) for s, _ in labels])
    return SpinCsfSet(basis, vals, labels, vecs)


@dataclass
class OverlapReport:
    overlaps: np.ndarray  # rows: spin CSFs, columns: KCSFs
    exact: dict[int, int]  # spin CSF index -> KCSF index with |overlap| = 1
    mixed: dict[int, list[int]]  # spin CSF index -> KCSFs it spreads over
    tol: float


def compare_to_kcsf(spin: SpinCsfSet, kset: KcsfSet, tol: float = OVERLAP_TOL) -> OverlapReport:
    if spin.basis.dets != kset.basis.dets:
        raise BasisMismatchError("spin CSFs and KCSFs use different determinant orderings")
    ov = spin.vectors.conj().T @ kset.vectors
    exact, mixed = {}, {}
    for i, row in enumerate(np.abs(ov)):
        j = int(np.argmax(row))
        if abs(row[j] - 1.0) <= tol:
            exact[i] = j
        else:
            mixed[i] = [int(c) for c in np.flatnonzero(row > tol)]
    return OverlapReport(ov, exact, mixed, tol)


def excitation(terms: list[tuple[complex, int, int]]):
    """One-body operator ``sum c a+_P a_Q`` from ``(c, P, Q)`` slot triples."""

    def apply(coeffs: np.ndarray, dets, target_index: dict) -> np.ndarray:
        out = np.zeros(len(target_index), dtype=complex)
        for c, p, q in terms:
            for d, x in zip(dets, coeffs):
                if x == 0:
                    continue
                res = apply_string(d, [("+", p), ("-", q)])
                if res is None:
                    continue
                t, ph = res
                if t not in target_index:
                    raise BasisMismatchError(f"excitation leaves the target basis at {t!r}")
                out[target_index[t]] += c * ph * x
        return out

    return apply


def _u(p):
    return 2 * p


def _b(p):
    return 2 * p + 1


def kramers_excitations(p: int, q: int) -> dict[str, list[tuple[complex, int, int]]]:
    """Kramers-adapted single excitations ``E-/E+`` (barred and unbarred targets)."""
    return {
        "E-(pbar,q)": [(1, _b(p), _u(q)), (1, _u(p), _b(q))],
        "E+(pbar,q)": [(1, _b(p), _u(q)), (-1, _u(p), _b(q))],
        "E-(p,q)": [(1, _u(p), _u(q)), (-1, _b(p), _b(q))],
        "E+(p,q)": [(1, _u(p), _u(q)), (1, _b(p), _b(q))],
    }


def triplet_excitations(p: int, q: int) -> dict[str, list[tuple[complex, int, int]]]:
    """Spherical triplet/singlet excitations and Cartesian triplet components."""
    r = 1 / math.sqrt(2)
    return {
        "T(1,1)": [(-1, _u(p), _b(q))],
        "T(1,-1)": [(1, _b(p), _u(q))],
        "T(1,0)": [(r, _u(p), _u(q)), (-r, _b(p), _b(q))],
        "S(0,0)": [(r, _u(p), _u(q)), (r, _b(p), _b(q))],
        "Tx": [(r, _b(p), _u(q)), (r, _u(p), _b(q))],
        "Ty": [(1j * r, _b(p), _u(q)), (-1j * r, _u(p), _b(q))],
        "Tz": [(r, _u(p), _u(q)), (-r, _b(p), _b(q))],
    }


def excite_closed_shell(terms, basis: OpenShellBasis, occupied_pair: int = 0) -> np.ndarray:
    """Apply an excitation to the doubly occupied ``occupied_pair`` of ``basis.n_pairs`` pairs."""
    ref = Determinant(3 << (2 * occupied_pair), basis.n_pairs)
    apply = excitation(terms)
    return apply(np.array([1.0]), [ref], basis.index)
