"""Open-shell determinant bases and dense matrices of the time-reversal generator.

All generator matrices hold small integers in float storage. ``K+`` and the
many-electron time reversal ``K`` are antilinear; they are stored as a real
matrix plus a conjugation flag and act as ``mat @ conj(c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .detalg import (
    Determinant,
    SignedDetSum,
    apply_k_det,
    apply_kplus_det,
)

MAX_OPEN = 10
EXP_TOL = 1e-12
TAYLOR_ORDER = 18

PARITIES = ("even", "odd")


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class OpenShellBasis:
    """Determinants with ``n_open`` singly occupied pairs.

    ``parity`` selects the branch with an even or odd number of barred open
    spinors; ``None`` means both branches concatenated, even first.
    """

    n_open: int
    parity: str | None
    dets: tuple[Determinant, ...]
    closed_pairs: frozenset[int] = frozenset()
    open_pairs: tuple[int, ...] = ()

    @property
    def n_pairs(self) -> int:
        return self.dets[0].n_pairs

    @property
    def n_electrons(self) -> int:
        return self.n_open + 2 * len(self.closed_pairs)

    @property
    def size(self) -> int:
        return len(self.dets)

    def __len__(self):
        return len(self.dets)

    @cached_property
    def index(self) -> dict[Determinant, int]:
        return {d: i for i, d in enumerate(self.dets)}

    def labels(self, fmt: str = "text") -> list[str]:
        return [d.label(fmt) for d in self.dets]

    def full(self) -> "OpenShellBasis":
        if self.parity is None:
            return self
        return enumerate_basis(self.n_open, None, self.closed_pairs)

    def block(self, parity: str) -> "OpenShellBasis":
        return enumerate_basis(self.n_open, parity, self.closed_pairs)

    def positions_in_full(self) -> np.ndarray:
        """Indices of this basis' determinants inside :meth:`full`."""
        full = self.full()
        return np.array([full.index[d] for d in self.dets], dtype=int)


@dataclass(frozen=True)
class AntilinearOp:
    mat: np.ndarray
    conjugates: bool
    basis: OpenShellBasis | None = field(default=None, compare=False)

    def __call__(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c)
        return self.mat @ (np.conj(c) if self.conjugates else c)


def _barred_subsets(n_open: int, parity: str | None) -> list[tuple[int, ...]]:
    counts = range(n_open + 1)
    if parity is not None:
        want = PARITIES.index(parity)
        counts = [c for c in counts if c % 2 == want]
    return [s for c in counts for s in combinations(range(n_open), c)]


def enumerate_basis(
    n_open: int,
    parity: str | None = "even",
    closed_pairs: Iterable[int] = (),
    max_open: int = MAX_OPEN,
) -> OpenShellBasis:
    """Ordered open-shell basis.

    Order: ascending number of barred open spinors, then lexicographically
    ascending set of barred positions. With ``parity=None`` the even branch
    precedes the odd one. Open shells occupy the lowest pair indices not
    claimed by ``closed_pairs``.
    """
    if n_open < 0:
        raise ValueError("n_open must be non-negative")
    if n_open > max_open:
        raise CapacityError(f"n_open={n_open} exceeds cap {max_open}")
    if parity not in (None, *PARITIES):
        raise ValueError(f"parity must be 'even', 'odd' or None, not {parity!r}")
    closed = frozenset(int(p) for p in closed_pairs)
    if any(p < 0 for p in closed):
        raise ValueError("negative closed pair index")
    open_pairs = []
    p = 0
    while len(open_pairs) < n_open:
        if p not in closed:
            open_pairs.append(p)
        p += 1
    n_pairs = max([*open_pairs, *closed, -1]) + 1
    core = sum(3 << (2 * c) for c in closed)

    if parity is None:
        subsets = _barred_subsets(n_open, "even") + _barred_subsets(n_open, "odd")
    else:
        subsets = _barred_subsets(n_open, parity)
    if not subsets:
        raise ValueError(f"no {parity} determinants with {n_open} open shells")

    dets = []
    for barred in subsets:
        occ = core
        for i, pair in enumerate(open_pairs):
            occ |= 1 << (2 * pair + (1 if i in barred else 0))
        dets.append(Determinant(occ, n_pairs))
    return OpenShellBasis(n_open, parity, tuple(dets), closed, tuple(open_pairs))


def fock_space(n_pairs: int, n_electrons: int, max_dim: int = 5000) -> list[Determinant]:
    """All determinants of ``n_electrons`` in ``2 * n_pairs`` slots (lexicographic slot sets)."""
    n_slots = 2 * n_pairs
    if not 0 <= n_electrons <= n_slots:
        raise ValueError(f"cannot place {n_electrons} electrons in {n_slots} slots")
    dim = math.comb(n_slots, n_electrons)
    if dim > max_dim:
        raise CapacityError(f"Fock space dimension {dim} exceeds cap {max_dim}")
    return [Determinant.from_slots(c, n_pairs) for c in combinations(range(n_slots), n_electrons)]


def operator_matrix(
    dets: Sequence[Determinant],
    action: Callable[[Determinant], SignedDetSum | tuple[Determinant, int] | None],
) -> np.ndarray:
    """Dense matrix whose column ``j`` is ``action(dets[j])`` expanded in ``dets``."""
    index = {d: i for i, d in enumerate(dets)}
    mat = np.zeros((len(dets), len(dets)))
    for j, d in enumerate(dets):
        res = action(d)
        if res is None:
            continue
        terms = res if isinstance(res, SignedDetSum) else [res]
        for target, c in terms:
            try:
                mat[index[target], j] += c
            except KeyError:
                raise RuntimeError(
                    f"{target!r} produced from {d!r} lies outside the basis"
                ) from None
    return mat


def build_kplus(basis: OpenShellBasis) -> AntilinearOp:
    """``K+`` over the full even+odd space of ``basis`` (it flips the parity)."""
    full = basis.full()
    return AntilinearOp(operator_matrix(full.dets, apply_kplus_det), True, full)


def build_k(basis: OpenShellBasis) -> AntilinearOp:
    full = basis.full()
    return AntilinearOp(operator_matrix(full.dets, apply_k_det), True, full)


def build_kplus2(basis: OpenShellBasis) -> np.ndarray:
    """Matrix of ``K+^2`` on the requested parity block (or the full space)."""
    kp = build_kplus(basis).mat
    k2 = kp @ kp
    if basis.parity is None:
        return k2
    pos = basis.positions_in_full()
    return k2[np.ix_(pos, pos)]


def expm(a: np.ndarray, order: int = TAYLOR_ORDER) -> np.ndarray:
    """Matrix exponential by scaling and squaring a fixed-order Taylor polynomial."""
    a = np.asarray(a)
    n = a.shape[0]
    norm = float(np.abs(a).sum(axis=0).max()) if n else 0.0
    squarings = max(0, math.ceil(math.log2(norm))) if norm > 1 else 0
    x = a / 2.0**squarings
    eye = np.eye(n, dtype=np.result_type(a, float))
    out = eye.copy()
    for k in range(order, 0, -1):
        out = eye + (x @ out) / k
    for _ in range(squarings):
        out = out @ out
    return out


@dataclass
class ExpMapReport:
    n_open: int
    n_electrons: int
    tol: float
    half_turn_dev: float  # |expm(pi/2 K+) - K|
    full_turn_dev: float  # |expm(pi K+) - (-1)^N|
    offending: list[tuple[str, int, int, float, float]]

    @property
    def passed(self) -> bool:
        return self.half_turn_dev <= self.tol and self.full_turn_dev <= self.tol


def verify_exp_map(basis: OpenShellBasis, tol: float = EXP_TOL) -> ExpMapReport:
    """Check ``K = exp(pi/2 K+)`` and ``exp(pi K+) = (-1)^N`` on real coefficient vectors."""
    kp = build_kplus(basis).mat
    k = build_k(basis).mat
    sign = (-1) ** basis.n_electrons
    half = expm(0.5 * np.pi * kp)
    full = expm(np.pi * kp)
    target_full = sign * np.eye(len(kp))
    offending = []
    for name, got, want in (("half", half, k), ("full", full, target_full)):
        bad = np.argwhere(np.abs(got - want) > tol)
        offending += [(name, int(i), int(j), float(got[i, j]), float(want[i, j])) for i, j in bad]
    return ExpMapReport(
        basis.n_open,
        basis.n_electrons,
        tol,
        float(np.abs(half - k).max()),
        float(np.abs(full - target_full).max()),
        offending,
    )
