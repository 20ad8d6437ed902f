"""Kramers configuration state functions: eigenvectors of ``K+^2`` labelled by ``k``.

Every eigenvalue of ``K+^2`` on an open-shell block is ``-k^2`` with ``k`` of
the same parity as the electron count. Partners are defined by
``K+ psi = k psi~``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detalg import StateVector
from .eig import group_degenerate, sym_eig
from .trgen import (
    OpenShellBasis,
    build_k,
    build_kplus,
    build_kplus2,
    enumerate_basis,
)

K_ROUND_TOL = 1e-8
PAIR_TOL = 1e-10
ROTATION_TOL = 1e-9
NORM_TOL = 1e-10


class InternalConsistencyError(AssertionError):
    pass


class UndefinedPartnerError(ValueError):
    pass


class BasisMismatchError(ValueError):
    pass


class NotNormalizedError(ValueError):
    pass


_S2, _S3, _S6 = math.sqrt(2), math.sqrt(3), math.sqrt(6)

# Reference orientations inside degenerate groups, as full-space columns
# (even block first, then odd, both in enumerate_basis order).
_SEED_2 = np.array(
    [
        [1, -1, 0, 0],
        [0, 0, 1, 1],
        [1, 1, 0, 0],
        [0, 0, -1, 1],
    ],
    dtype=float,
).T / _S2

_SEED_3_EVEN = np.array(
    [
        [1 / 2, _S3 / 2, 0, 0],
        [-1 / 2, _S3 / 6, 0, _S6 / 3],
        [-1 / 2, _S3 / 6, _S2 / 2, -_S6 / 6],
        [-1 / 2, _S3 / 6, -_S2 / 2, -_S6 / 6],
    ]
)

_SEED_4_EVEN = np.array(
    [
        [-0.35355339, 0.60199155, 0.00000000, -0.05524348, 0.36681649, 0.06127536, 0.60927828, 0.00503067],
        [0.35355339, 0.36496952, 0.05988493, -0.02197086, -0.60226931, -0.24113491, 0.23364026, -0.51211931],
        [0.35355339, -0.06618721, 0.28381790, -0.64415204, 0.01161054, -0.29172449, 0.23048191, 0.48659522],
        [0.35355339, 0.00476227, -0.64487300, -0.28554088, -0.05081864, 0.59413476, 0.14515612, 0.03055476],
        [0.35355339, -0.00476227, 0.64487300, 0.28554088, 0.05081864, 0.59413476, 0.14515612, 0.03055476],
        [0.35355339, 0.06618721, -0.28381790, 0.64415204, -0.01161054, -0.29172449, 0.23048191, 0.48659522],
        [0.35355339, -0.36496952, -0.05988493, 0.02197086, 0.60226931, -0.24113491, 0.23364026, -0.51211931],
        [-0.35355339, -0.60199155, 0.00000000, 0.05524348, -0.36681648, 0.06127536, 0.60927828, 0.00503067],
    ]
)

_SEED_4_ODD = np.array(
    [
        [0.35355339, -0.60199155, 0.00000000, 0.05524348, 0.36681649, -0.06127536, -0.60927828, -0.00503067],
        [0.35355339, 0.36496952, -0.05988493, -0.02197086, 0.60226931, -0.24113491, 0.23364026, -0.51211931],
        [0.35355339, -0.06618721, -0.28381790, -0.64415204, -0.01161054, -0.29172449, 0.23048191, 0.48659522],
        [0.35355339, 0.00476227, 0.64487300, -0.28554088, 0.05081864, 0.59413476, 0.14515612, 0.03055476],
        [-0.35355339, 0.00476227, 0.64487300, -0.28554088, 0.05081864, -0.59413476, -0.14515612, -0.03055476],
        [-0.35355339, -0.06618721, -0.28381790, -0.64415204, -0.01161054, 0.29172449, -0.23048191, -0.48659522],
        [-0.35355339, 0.36496952, -0.05988493, -0.02197086, 0.60226931, 0.24113491, -0.23364026, 0.51211931],
        [-0.35355339, -0.60199155, 0.00000000, 0.05524348, 0.36681648, 0.06127536, 0.60927828, 0.00503067],
    ]
)


def _seed_3():
    k = build_k(enumerate_basis(3, None)).mat
    even = np.vstack([_SEED_3_EVEN, np.zeros((4, 4))])
    return np.hstack([even, k @ even])


def _seed_4():
    z = np.zeros((8, 8))
    return np.hstack([np.vstack([_SEED_4_EVEN, z]), np.vstack([z, _SEED_4_ODD])])


def reference_seeds(n_open: int) -> np.ndarray | None:
    """Full-space seed columns used to orient degenerate groups, if any exist."""
    if n_open == 2:
        return _SEED_2
    if n_open == 3:
        return _seed_3()
    if n_open == 4:
        return _seed_4()
    return None


def expected_multiplicity(n_open: int, k: int) -> int:
    """Degeneracy of ``-k^2`` inside one parity block."""
    if n_open == 0:
        return int(k == 0)
    if k < 0 or k > n_open or (n_open - k) % 2:
        return 0
    if k == 0:
        return math.comb(n_open, n_open // 2) // 2
    return math.comb(n_open, (n_open + k) // 2)


def k_from_eigenvalue(lam: float, tol: float = K_ROUND_TOL) -> int:
    k = round(math.sqrt(max(-lam, 0.0)))
    if abs(lam + k * k) > tol:
        raise InternalConsistencyError(f"eigenvalue {lam!r} is not -k^2 (nearest k={k})")
    return k


@dataclass(frozen=True)
class KcsfSet:
    """Orthonormal ``K+^2`` eigenvectors (columns) over ``basis``.

    ``pairing`` maps a column ``i`` with ``k > 0`` to the column ``j`` holding
    ``K+ v_i / k``; it is only populated when both parity branches are present.
    """

    basis: OpenShellBasis
    values: np.ndarray
    k_labels: tuple[int, ...]
    vectors: np.ndarray
    pairing: dict[int, int] = field(default_factory=dict)
    kplus2: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.k_labels)

    @property
    def n_open(self) -> int:
        return self.basis.n_open

    def full_vector(self, i: int) -> np.ndarray:
        """Column ``i`` embedded in the full even+odd space."""
        if self.basis.parity is None:
            return self.vectors[:, i]
        full = np.zeros(2 ** self.n_open if self.n_open else 1, dtype=self.vectors.dtype)
        full[self.basis.positions_in_full()] = self.vectors[:, i]
        return full

    def multiplicities(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for k in self.k_labels:
            out[k] = out.get(k, 0) + 1
        return dict(sorted(out.items(), reverse=True))


def _greedy_unit_fill(proj, basis_vecs, need):
    # Pivoted Gram-Schmidt on projected unit vectors: always take the
    # coordinate axis with the largest remaining component.
    out = list(basis_vecs)
    if len(out) >= need:
        return out
    resid = proj.copy()
    for b in out:
        resid -= np.outer(b, b @ resid)
    while len(out) < need:
        norms = np.linalg.norm(resid, axis=0)
        best = int(np.flatnonzero(norms >= norms.max() - 1e-9)[0])
        b = resid[:, best] / norms[best]
        out.append(b)
        resid -= np.outer(b, b @ resid)
    return out


def _orient_group(vecs: np.ndarray, seeds: np.ndarray | None) -> np.ndarray:
    """Deterministic orthonormal basis of ``span(vecs)``."""
    need = vecs.shape[1]
    proj = vecs @ vecs.T
    out = []
    if seeds is not None:
        for s in seeds.T:
            c = proj @ s
            for b in out:
                c = c - b * (b @ c)
            nrm = np.linalg.norm(c)
            if nrm > 0.5:
                out.append(c / nrm)
            if len(out) == need:
                break
    seeded = len(out)
    out = _greedy_unit_fill(proj, out, need)
    arr = np.array(out).T
    if seeded == 0 and need == 1:
        arr = vecs[:, :1]  # keep the eigensolver's canonical sign
    return arr


def _block_kcsf(basis: OpenShellBasis, seeds_full: np.ndarray | None):
    k2 = build_kplus2(basis)
    dec = sym_eig(k2)
    seeds = None
    if seeds_full is not None:
        seeds = seeds_full[basis.positions_in_full()]
        seeds = seeds[:, np.linalg.norm(seeds, axis=0) > 0.5]
    cols, ks, vals = [], [], []
    for lam, idx in group_degenerate(dec.values):
        k = k_from_eigenvalue(lam)
        block = _orient_group(dec.vectors[:, list(idx)], seeds)
        cols.append(block)
        ks += [k] * block.shape[1]
        vals += [-float(k * k)] * block.shape[1]
    return np.hstack(cols), ks, vals, k2


def _check_labels(n_open: int, ks) -> None:
    allowed = set(range(n_open % 2, n_open + 1, 2))
    bad = sorted(set(ks) - allowed)
    if bad:
        raise InternalConsistencyError(f"k values {bad} violate parity/range for N_O={n_open}")


def make_kcsf(
    n_open: int,
    parity: str | None = "even",
    closed_pairs=(),
    use_reference_seeds: bool = True,
) -> KcsfSet:
    """Diagonalize ``K+^2`` on one parity block, or on both when ``parity`` is None.

    In the two-branch case every ``k > 0`` vector of the even branch is
    followed by its partner ``K+ v / k``; ``k = 0`` vectors come from each
    branch separately.
    """
    basis = enumerate_basis(n_open, parity, closed_pairs)
    seeds = reference_seeds(n_open) if use_reference_seeds else None
    if parity is not None or n_open == 0:
        vecs, ks, vals, k2 = _block_kcsf(basis, seeds)
        _check_labels(n_open, ks)
        return KcsfSet(basis, np.array(vals), tuple(ks), vecs, {}, k2)

    even = enumerate_basis(n_open, "even", closed_pairs)
    odd = enumerate_basis(n_open, "odd", closed_pairs)
    ev, eks, _, _ = _block_kcsf(even, seeds)
    ov, oks, _, _ = _block_kcsf(odd, seeds)
    kp = build_kplus(basis)
    h = len(even)
    dim = len(basis)
    cols, ks, pairing = [], [], {}
    for k in sorted(set(eks) | set(oks), reverse=True):
        for i in (i for i, kk in enumerate(eks) if kk == k):
            v = np.zeros(dim)
            v[:h] = ev[:, i]
            cols.append(v)
            ks.append(k)
            if k > 0:
                pairing[len(cols) - 1] = len(cols)
                cols.append(kp(v).real / k)
                ks.append(k)
        if k == 0:
            for i in (i for i, kk in enumerate(oks) if kk == 0):
                v = np.zeros(dim)
                v[h:] = ov[:, i]
                cols.append(v)
                ks.append(0)
    vecs = np.array(cols).T
    _check_labels(n_open, ks)
    k2 = build_kplus2(basis)
    return KcsfSet(basis, -np.array(ks, dtype=float) ** 2, tuple(ks), vecs, pairing, k2)


@dataclass
class PairReport:
    k: int
    norm_dev: float
    overlap: float
    eigen_dev: float
    back_dev: float  # |K+ psi~ + k psi|
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.norm_dev, self.overlap, self.eigen_dev, self.back_dev) <= self.tol


def make_pair(kset: KcsfSet, i: int, tol: float = PAIR_TOL) -> tuple[np.ndarray, PairReport]:
    """Partner ``psi~ = K+ psi / k`` of column ``i`` as a full-space vector."""
    k = kset.k_labels[i]
    if k == 0:
        raise UndefinedPartnerError("k = 0 vectors are annihilated by K+; no partner defined")
    kp = build_kplus(kset.basis)
    k2 = kp.mat @ kp.mat
    v = kset.full_vector(i)
    partner = kp(v) / k
    report = PairReport(
        k,
        abs(float(np.linalg.norm(partner)) - 1.0),
        float(abs(np.vdot(v, partner))),
        float(np.abs(k2 @ partner + k * k * partner).max()),
        float(np.abs(kp(partner) + k * v).max()),
        tol,
    )
    return partner, report


@dataclass
class RotationReport:
    k: int
    deviation: float
    tilde_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tol and self.tilde_deviation <= self.tol


def kramers_rotation_check(kset: KcsfSet, i: int, tol: float = ROTATION_TOL) -> RotationReport:
    """Check ``K psi = cos(pi k/2) psi + sin(pi k/2) psi~`` and the companion for ``psi~``."""
    k = kset.k_labels[i]
    kop = build_k(kset.basis)
    v = kset.full_vector(i)
    c, s = round(math.cos(math.pi * k / 2)), round(math.sin(math.pi * k / 2))
    if k == 0:
        return RotationReport(0, float(np.abs(kop(v) - v).max()), 0.0, tol)
    partner, _ = make_pair(kset, i)
    dev = np.abs(kop(v) - (c * v + s * partner)).max()
    tdev = np.abs(kop(partner) - (c * partner - s * v)).max()
    return RotationReport(k, float(dev), float(tdev), tol)


@dataclass
class ContaminationReport:
    target_k_squared: int
    expectation: float
    contamination: float
    n_open: int
    renormalized: bool = False


def match_basis(dets) -> OpenShellBasis:
    """Find the enumerated basis whose ordered determinants equal ``dets``."""
    dets = tuple(dets)
    if not dets:
        raise BasisMismatchError("empty basis")
    d0 = dets[0]
    closed = d0.closed_pairs()
    n_open = d0.n_open
    for parity in ("even", "odd", None):
        try:
            cand = enumerate_basis(n_open, parity, closed)
        except ValueError:
            continue
        if cand.dets == dets:
            return cand
    raise BasisMismatchError("determinants do not form an enumerated open-shell basis")


def kplus2_expectation(state: StateVector, basis: OpenShellBasis | None = None) -> float:
    basis = basis or match_basis(state.basis)
    k2 = build_kplus2(basis)
    val = np.vdot(state.coeffs, k2 @ state.coeffs)
    if abs(val.imag) > 1e-12:
        raise InternalConsistencyError(f"<K+^2> has imaginary part {val.imag:.3e}")
    return float(val.real)


def contamination(
    state: StateVector, target_k: int, renormalize: bool = False, tol: float = NORM_TOL
) -> ContaminationReport:
    """Kramers contamination ``-k^2 - <psi|K+^2|psi>``."""
    basis = match_basis(state.basis)
    renormed = False
    if abs(state.norm - 1.0) > tol:
        if not renormalize:
            raise NotNormalizedError(f"state norm {state.norm!r} differs from 1")
        state = state.normalized()
        renormed = True
    exp = kplus2_expectation(state, basis)
    ksq = int(target_k) ** 2
    return ContaminationReport(ksq, exp, -ksq - exp, basis.n_open, renormed)


def infer_k(expectation: float, n_open: int) -> int:
    """Allowed ``k`` whose ``-k^2`` lies nearest to ``expectation``."""
    allowed = range(n_open % 2, n_open + 1, 2)
    return min(allowed, key=lambda k: (abs(-k * k - expectation), k))
