"""Dense symmetric / Hermitian eigensolver (cyclic Jacobi) and degeneracy helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

MAX_SWEEPS = 60
OFF_TOL = 1e-14
HERMITIAN_TOL = 1e-13
GAP_TOL = 1e-7


class NotHermitianError(ValueError):
    pass


class ConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray
    residual: float
    sweeps: int


@dataclass(frozen=True)
class DegenerateGrouping:
    groups: tuple[tuple[float, range], ...]
    gap_tol: float

    def __iter__(self):
        return iter(self.groups)

    def __len__(self):
        return len(self.groups)

    @property
    def multiplicities(self) -> list[tuple[float, int]]:
        return [(v, len(r)) for v, r in self.groups]


@numba.njit(cache=True)
def _off_norm(a):
    n = a.shape[0]
    acc = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += a[i, j] * a[i, j]
    return math.sqrt(acc)


@numba.njit(cache=True)
def _jacobi(a, tol, max_sweeps):
    # Round-robin ordering: each round rotates n/2 disjoint (p, q) pairs, so
    # row and column updates can both be done as contiguous row passes.
    n = a.shape[0]
    m = n + (n % 2)
    vt = np.eye(n)
    fro = math.sqrt((a * a).sum())
    ring = np.arange(m)
    ps = np.empty(m // 2, np.int64)
    qs = np.empty(m // 2, np.int64)
    cs = np.empty(m // 2)
    ss = np.empty(m // 2)
    for sweep in range(max_sweeps + 1):
        if _off_norm(a) <= tol * fro:
            return vt, sweep, True
        if sweep == max_sweeps:
            break
        for _ in range(m - 1):
            npair = 0
            for i in range(m // 2):
                p = ring[i]
                q = ring[m - 1 - i]
                if p > q:
                    p, q = q, p
                if q >= n:
                    continue
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                ps[npair] = p
                qs[npair] = q
                cs[npair] = c
                ss[npair] = t * c
                npair += 1
            last = ring[m - 1]
            for i in range(m - 1, 1, -1):
                ring[i] = ring[i - 1]
            ring[1] = last
            if npair == 0:
                continue
            for r in range(npair):
                p = ps[r]
                q = qs[r]
                c = cs[r]
                s = ss[r]
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = c * x - s * y
                    a[q, k] = s * x + c * y
                for k in range(n):
                    x = vt[p, k]
                    y = vt[q, k]
                    vt[p, k] = c * x - s * y
                    vt[q, k] = s * x + c * y
            for k in range(n):
                for r in range(npair):
                    p = ps[r]
                    q = qs[r]
                    c = cs[r]
                    s = ss[r]
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = c * x - s * y
                    a[k, q] = s * x + c * y
            for r in range(npair):
                a[ps[r], qs[r]] = 0.0
                a[qs[r], ps[r]] = 0.0
    return vt, max_sweeps, False


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> float:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {a.shape}")
    dev = float(np.abs(a - a.conj().T).max()) if a.size else 0.0
    if dev > tol * max(1.0, float(np.abs(a).max())):
        raise NotHermitianError(f"matrix deviates from its adjoint by {dev:.3e}")
    return dev


def canonical_sign(v: np.ndarray, tie_tol: float = 1e-9) -> np.ndarray:
    """Rotate the phase so the largest-magnitude component is positive real.

    Ties are broken by the lowest index.
    """
    mag = np.abs(v)
    i = int(np.flatnonzero(mag >= mag.max() - tie_tol)[0])
    return v * (np.conj(v[i]) / mag[i])


def _real_sym_eig(a, tol, max_sweeps):
    work = np.array(0.5 * (a + a.T), dtype=float, order="C")
    vt, sweeps, ok = _jacobi(work, tol, max_sweeps)
    if not ok:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diag(work).copy(), vt.T.copy(), sweeps


def _dedup_complex(values, vectors, n, gap_tol):
    # Embedded spectrum carries each eigenvalue twice; within every cluster
    # keep an orthonormal complex basis, preferring candidates with the
    # largest single component.
    z = vectors[:n] + 1j * vectors[n:]
    out = []
    for _, idx in group_degenerate(values, gap_tol):
        cand = sorted((z[:, j] for j in idx), key=lambda c: -np.abs(c).max())
        basis = []
        for c in cand:
            for b in basis:
                c = c - b * np.vdot(b, c)
            nrm = np.linalg.norm(c)
            if nrm > 0.5:
                basis.append(c / nrm)
            if 2 * len(basis) == len(idx):
                break
        if 2 * len(basis) != len(idx):
            raise ConvergenceError("complex de-duplication lost a vector")
        out.extend(basis)
    return np.array(out).T


def sym_eig(
    a: np.ndarray,
    tol: float = OFF_TOL,
    max_sweeps: int = MAX_SWEEPS,
    herm_tol: float = HERMITIAN_TOL,
) -> EigenDecomposition:
    """Eigen-decomposition of a real symmetric or complex Hermitian matrix.

    Eigenvalues ascend; eigenvectors are orthonormal columns whose
    largest-magnitude component is made positive real.
    """
    a = np.asarray(a)
    check_hermitian(a, herm_tol)
    n = a.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    complex_input = np.iscomplexobj(a) and np.abs(a.imag).max() > 0
    if not complex_input:
        vals, vecs, sweeps = _real_sym_eig(np.real(a), tol, max_sweeps)
    else:
        emb = np.block([[a.real, -a.imag], [a.imag, a.real]])
        ev, evec, sweeps = _real_sym_eig(emb, tol, max_sweeps)
        order = np.argsort(ev, kind="stable")
        ev, evec = ev[order], evec[:, order]
        vecs = _dedup_complex(ev, evec, n, GAP_TOL)
        vals = np.real(np.einsum("ij,ik,kj->j", vecs.conj(), a, vecs))
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    vecs = np.column_stack([canonical_sign(vecs[:, j]) for j in range(n)])
    if not complex_input:
        vecs = vecs.real
    resid = float(np.abs(a @ vecs - vecs * vals).max())
    return EigenDecomposition(vals, vecs, resid, int(sweeps))


def group_degenerate(values, gap_tol: float = GAP_TOL) -> DegenerateGrouping:
    """Split ascending ``values`` into maximal runs whose neighbours differ by <= gap_tol."""
    values = np.asarray(values, dtype=float)
    groups = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > gap_tol:
            if i > start:
                groups.append((float(values[start:i].mean()), range(start, i)))
            start = i
    return DegenerateGrouping(tuple(groups), gap_tol)


def subspace_projector(vectors: np.ndarray, indices=None) -> np.ndarray:
    v = np.asarray(vectors)
    if indices is not None:
        v = v[:, list(indices)]
    return v @ v.conj().T
