"""Random time-reversal-symmetric model Hamiltonians in a Fock subspace F(M, N).

Spinor ``2p`` is ``phi_p`` and ``2p + 1`` is ``K phi_p``. Time reversal acts
on expansion coefficients through ``theta``: ``K phi_P = sum_A phi_A theta[A, P]``.
A one-electron operator ``X`` commutes with time reversal iff
``theta @ conj(X) @ theta.T == X``.

The two-electron tensor uses charge-cloud order: ``g[P, Q, R, S] = (PQ|RS)`` and
``H = sum h_PQ a+_P a_Q + 1/2 sum g_PQRS a+_P a+_R a_S a_Q``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .detalg import Determinant, apply_kplus_det, apply_k_det, apply_string
from .eig import group_degenerate, sym_eig
from .spincmp import spin_ladder, sz_diagonal
from .trgen import CapacityError, expm, fock_space, operator_matrix

MAX_PAIRS = 6
MAX_DIM = 5000
GEN_TOL = 1e-12
COMM_TOL = 1e-10
SUBSPACE_TOL = 1e-8
LEVEL_GAP = 1e-7
K_SPREAD_TOL = 1e-7
INTEGRAL_SCHEMA = "spinor-integrals-1"


class SymmetryError(AssertionError):
    pass


def theta(n_pairs: int) -> np.ndarray:
    t = np.zeros((2 * n_pairs, 2 * n_pairs))
    for p in range(n_pairs):
        t[2 * p + 1, 2 * p] = 1.0
        t[2 * p, 2 * p + 1] = -1.0
    return t


def tr_image(x: np.ndarray) -> np.ndarray:
    """Time-reversed one-electron matrix ``theta conj(x) theta^T``."""
    t = theta(x.shape[0] // 2)
    return t @ np.conj(x) @ t.T


def tr_project(x: np.ndarray, sign: int = 1) -> np.ndarray:
    """Projection onto time-reversal even (``sign=1``) or odd (``sign=-1``) matrices."""
    return 0.5 * (x + sign * tr_image(x))


def spin_scalar_part(x: np.ndarray) -> np.ndarray:
    """``kron(Re x[2p, 2q], I2)``: the spin-free component of a TR-even matrix."""
    return np.kron(np.real(x[0::2, 0::2]), np.eye(2))


def sigma_z(n_pairs: int) -> np.ndarray:
    return np.kron(np.eye(n_pairs), np.diag([1.0, -1.0]))


def two_electron_tr_image(g: np.ndarray) -> np.ndarray:
    """Time reversal applied to electron 1 only: ``sum_AB theta_AP theta_BQ g_ABRS``."""
    t = theta(g.shape[0] // 2)
    return np.einsum("ap,bq,abrs->pqrs", t, t, g)


@dataclass
class SpinorIntegrals:
    n_pairs: int
    h: np.ndarray
    g: np.ndarray
    seed: int | None = None
    so_strength: float = 0.0
    u: np.ndarray | None = field(default=None, repr=False)

    def residuals(self) -> dict[str, float]:
        h, g = self.h, self.g
        t = theta(self.n_pairs)
        full = np.einsum("ap,bq,cr,ds,abcd->pqrs", t, t, t, t, g)
        out = {
            "h_hermitian": np.abs(h - h.conj().T).max(),
            "h_time_reversal": np.abs(tr_image(h) - h).max(),
            "g_hermitian": np.abs(g - np.conj(g.transpose(1, 0, 3, 2))).max(),
            "g_exchange": np.abs(g - g.transpose(2, 3, 0, 1)).max(),
            "g_time_reversal": np.abs(two_electron_tr_image(g) - g.transpose(1, 0, 2, 3)).max(),
            "g_time_reversal_both": np.abs(full - np.conj(g)).max(),
        }
        return {k: float(v) for k, v in out.items()}

    def check(self, tol: float = GEN_TOL) -> dict[str, float]:
        res = self.residuals()
        bad = {k: v for k, v in res.items() if v > tol}
        if bad:
            raise SymmetryError(f"integral symmetries violated: {bad}")
        return res

    def to_json(self) -> dict:
        def cx(a):
            if np.ndim(a) == 0:
                return [float(np.real(a)), float(np.imag(a))]
            return [cx(x) for x in a]

        return {
            "schema": INTEGRAL_SCHEMA,
            "nPairs": self.n_pairs,
            "seed": self.seed,
            "soStrength": self.so_strength,
            "h": cx(self.h),
            "g": cx(self.g),
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "SpinorIntegrals":
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("schema") != INTEGRAL_SCHEMA:
            raise ValueError(f"unsupported integral schema {data.get('schema')!r}")
        m = int(data["nPairs"])

        def arr(x, shape):
            a = np.asarray(x, dtype=float)
            if a.shape != (*shape, 2):
                raise ValueError(f"expected shape {(*shape, 2)}, got {a.shape}")
            return a[..., 0] + 1j * a[..., 1]

        n = 2 * m
        return cls(
            m,
            arr(data["h"], (n, n)),
            arr(data["g"], (n, n, n, n)),
            data.get("seed"),
            float(data.get("soStrength", 0.0)),
        )


def _random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def _spectral_norm(x: np.ndarray) -> float:
    return math.sqrt(max(sym_eig(x.conj().T @ x).values.max(), 0.0))


def random_tr_unitary(rng, n_pairs: int, so_strength: float) -> np.ndarray:
    """Unitary commuting with time reversal: ``expm`` of a TR-even anti-Hermitian matrix."""
    n = 2 * n_pairs
    a = rng.normal(size=(n_pairs, n_pairs))
    x = np.kron(a - a.T, np.eye(2)).astype(complex)
    if so_strength:
        y = 1j * _random_hermitian(rng, n)
        y = tr_project(y)
        y = y - spin_scalar_part(y)
        x = x + so_strength * y
    nrm = _spectral_norm(x)
    if nrm > 1.0:
        x = x / nrm
    return expm(x)


def gen_integrals(n_pairs: int, so_strength: float = 0.0, seed: int = 0, n_aux: int | None = None) -> SpinorIntegrals:
    """Random integrals with time-reversal symmetry and a spin-orbit knob."""
    if not 1 <= n_pairs <= MAX_PAIRS:
        raise CapacityError(f"n_pairs must lie in [1, {MAX_PAIRS}]")
    rng = np.random.default_rng(seed)
    m, n = n_pairs, 2 * n_pairs
    h0 = rng.normal(size=(m, m))
    h = np.kron(0.5 * (h0 + h0.T), np.eye(2)).astype(complex)
    if so_strength:
        s = tr_project(_random_hermitian(rng, n))
        h = h + so_strength * (s - spin_scalar_part(s))

    naux = n_aux or m + 1
    b = rng.normal(size=(naux, m, m)) * 0.3
    b = 0.5 * (b + b.transpose(0, 2, 1))
    gs = np.einsum("lpq,lrs->pqrs", b, b)
    g = np.zeros((n, n, n, n), dtype=complex)
    for s1 in range(2):
        for s2 in range(2):
            g[s1::2, s1::2, s2::2, s2::2] = gs

    u = random_tr_unitary(rng, m, so_strength)
    ud = u.conj().T
    h = ud @ h @ u
    g = np.einsum("Pp,Qq,Rr,Ss,PQRS->pqrs", u.conj(), u, u.conj(), u, g, optimize=True)
    h = 0.5 * (h + h.conj().T)
    ints = SpinorIntegrals(m, h, g, seed, float(so_strength), u)
    ints.check()
    return ints


def tr_odd_operator(ints: SpinorIntegrals) -> np.ndarray:
    """Zeeman-like ``U^+ Sigma_z U``: Hermitian and odd under time reversal."""
    u = ints.u if ints.u is not None else np.eye(2 * ints.n_pairs)
    return u.conj().T @ sigma_z(ints.n_pairs) @ u


def break_time_reversal(ints: SpinorIntegrals, strength: float = 0.1) -> SpinorIntegrals:
    """Copy with a TR-odd term added to ``h`` (negative control; not re-checked)."""
    h = ints.h + strength * tr_odd_operator(ints)
    return SpinorIntegrals(ints.n_pairs, h, ints.g.copy(), ints.seed, ints.so_strength, ints.u)


def one_body_matrix(op: np.ndarray, dets) -> np.ndarray:
    """Matrix of ``sum op_PQ a+_P a_Q`` projected onto ``dets``."""
    index = {d: i for i, d in enumerate(dets)}
    out = np.zeros((len(dets), len(dets)), dtype=complex)
    for j, d in enumerate(dets):
        occ = d.slots()
        for q in occ:
            for p in range(d.n_slots):
                if op[p, q] == 0:
                    continue
                res = apply_string(d, [("+", p), ("-", q)])
                if res is None:
                    continue
                t, ph = res
                i = index.get(t)
                if i is not None:
                    out[i, j] += ph * op[p, q]
    return out


def _antisym_g(g):
    # <PR||QS> with the bra/ket pair symmetrized: 1/2 (g_PQRS + g_RSPQ - g_PSRQ - g_RQPS)
    sym = 0.5 * (g + g.transpose(2, 3, 0, 1))
    return sym - sym.transpose(0, 3, 2, 1)


def build_hamiltonian(ints: SpinorIntegrals, n_electrons: int, dets=None) -> tuple[np.ndarray, list[Determinant]]:
    """Slater-Condon assembly over ``dets`` (default: all of F(M, N))."""
    m = ints.n_pairs
    if not 0 < n_electrons <= 2 * m:
        raise ValueError(f"N={n_electrons} outside (0, {2 * m}]")
    if dets is None:
        dets = fock_space(m, n_electrons, MAX_DIM)
    if len(dets) > MAX_DIM:
        raise CapacityError(f"dimension {len(dets)} exceeds {MAX_DIM}")
    h, ga = ints.h, _antisym_g(ints.g)
    n = 2 * m
    index = {d: i for i, d in enumerate(dets)}
    mat = np.zeros((len(dets), len(dets)), dtype=complex)
    for j, d in enumerate(dets):
        occ = d.slots()
        virt = [s for s in range(n) if s not in occ]
        diag = sum(h[p, p] for p in occ)
        diag += 0.5 * sum(ga[p, p, r, r] for p in occ for r in occ)
        mat[j, j] += diag
        for q in occ:
            for p in virt:
                res = apply_string(d, [("+", p), ("-", q)])
                i = index.get(res[0])
                if i is None:
                    continue
                val = h[p, q] + sum(ga[p, q, r, r] for r in occ if r != q)
                mat[i, j] += res[1] * val
        for q, s in combinations(occ, 2):
            for p, r in combinations(virt, 2):
                res = apply_string(d, [("+", p), ("+", r), ("-", s), ("-", q)])
                i = index.get(res[0])
                if i is None:
                    continue
                mat[i, j] += res[1] * ga[p, q, r, s]
    return mat, list(dets)


def first_quantized_hamiltonian(ints: SpinorIntegrals, n_electrons: int) -> tuple[np.ndarray, list[Determinant]]:
    """Independent reference: antisymmetrized tensor products with explicit operators."""
    from itertools import permutations

    from .detalg import permutation_parity

    m, n = ints.n_pairs, 2 * ints.n_pairs
    nel = n_electrons
    dets = fock_space(m, nel)
    dim = n**nel
    eye = np.eye(n)

    def embed1(op, i):
        mats = [eye] * nel
        mats[i] = op
        out = mats[0]
        for x in mats[1:]:
            out = np.kron(out, x)
        return out

    ham = sum(embed1(ints.h, i) for i in range(nel))
    v = ints.g.transpose(0, 2, 1, 3).reshape(n * n, n * n)  # <PR|V|QS>
    for i in range(nel):
        for j in range(nel):
            if i == j:
                continue
            # permute tensor factors so electrons i, j sit first, apply v, permute back
            order = [i, j] + [k for k in range(nel) if k not in (i, j)]
            shape = [n] * nel
            perm = np.arange(dim).reshape(shape).transpose(order).reshape(-1)
            rest = np.eye(n ** (nel - 2))
            vij = np.kron(v, rest)
            op = np.zeros((dim, dim), dtype=complex)
            op[np.ix_(perm, perm)] = vij
            ham = ham + 0.5 * op

    vecs = np.zeros((dim, len(dets)))
    for c, d in enumerate(dets):
        slots = d.slots()
        for p in permutations(range(nel)):
            idx = 0
            for k in p:
                idx = idx * n + slots[k]
            vecs[idx, c] += permutation_parity(list(p))
    vecs /= math.sqrt(math.factorial(nel))
    return vecs.T @ ham @ vecs, dets


def fock_kplus(dets) -> np.ndarray:
    return operator_matrix(dets, apply_kplus_det)


def fock_k(dets) -> np.ndarray:
    return operator_matrix(dets, apply_k_det)


@dataclass
class CommutationReport:
    kplus2_norm: float  # |[H, K+^2]|_max
    kplus_norm: float  # |H Kp - Kp conj(H)|_max, K+ antilinear
    k_norm: float  # same for the antiunitary K; a positive control
    imag_norm: float  # largest imaginary part of H in the determinant basis
    tol: float

    @property
    def passed(self) -> bool:
        return self.kplus2_norm <= self.tol and self.kplus_norm <= self.tol


def verify_commutation(ham: np.ndarray, dets, tol: float = COMM_TOL) -> CommutationReport:
    kp = fock_kplus(dets)
    k2 = kp @ kp
    c2 = np.abs(ham @ k2 - k2 @ ham).max()
    c1 = np.abs(ham @ kp - kp @ np.conj(ham)).max()
    km = fock_k(dets)
    c0 = np.abs(ham @ km - km @ np.conj(ham)).max()
    return CommutationReport(float(c2), float(c1), float(c0), float(np.abs(ham.imag).max()), tol)


@dataclass
class Level:
    energy: float
    indices: range
    k: int | None  # None when K+^2 is not single-valued in the level
    kplus2_values: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.indices)


@dataclass
class LevelStructure:
    energies: np.ndarray
    vectors: np.ndarray
    levels: list[Level]
    n_electrons: int
    violations: list[str]

    @property
    def dims(self) -> list[int]:
        return [lv.dim for lv in self.levels]

    @property
    def k_per_level(self) -> list[int | None]:
        return [lv.k for lv in self.levels]

    @property
    def mixed_levels(self) -> list[int]:
        return [i for i, lv in enumerate(self.levels) if lv.k is None]

    @property
    def passed(self) -> bool:
        return not self.violations


def level_analysis(ham: np.ndarray, dets, gap_tol: float = LEVEL_GAP, k_tol: float = K_SPREAD_TOL) -> LevelStructure:
    """Group eigenlevels of ``ham`` and label each by the ``K+^2`` value inside it."""
    dec = sym_eig(ham)
    kp = fock_kplus(dets)
    k2 = kp @ kp
    nel = dets[0].n_electrons
    levels, violations = [], []
    for e, idx in group_degenerate(dec.values, gap_tol):
        v = dec.vectors[:, list(idx)]
        sub = v.conj().T @ k2 @ v
        vals = sym_eig(0.5 * (sub + sub.conj().T)).values
        k = None
        if vals.max() - vals.min() <= k_tol:
            kk = round(math.sqrt(max(-vals.mean(), 0.0)))
            if abs(vals.mean() + kk * kk) <= k_tol:
                k = kk
        lv = Level(e, idx, k, vals)
        levels.append(lv)
        tag = f"level E={e:.10f} dim={lv.dim}"
        if k is None:
            violations.append(f"{tag}: mixed K+^2 values {np.round(vals, 9).tolist()}")
        elif k % 2 != nel % 2:
            violations.append(f"{tag}: k={k} has wrong parity for N={nel}")
        if nel % 2 and lv.dim % 2:
            violations.append(f"{tag}: odd dimension with odd N")
        if lv.dim == 1 and (k != 0 or nel % 2):
            violations.append(f"{tag}: nondegenerate level with k={k}, N={nel}")
    return LevelStructure(dec.values, dec.vectors, levels, nel, violations)


def paired_level_residuals(ham: np.ndarray, dets, levels: LevelStructure) -> list[float]:
    """For ``k > 0`` levels: residual of ``H psi~ = E psi~`` with ``psi~ = K+ psi / k``."""
    kp = fock_kplus(dets)
    out = []
    for lv in levels.levels:
        if not lv.k:
            continue
        for i in lv.indices:
            v = levels.vectors[:, i]
            t = kp @ np.conj(v) / lv.k
            out.append(float(np.abs(ham @ t - lv.energy * t).max()))
    return out


def fock_spin_squared(dets) -> np.ndarray:
    m = dets[0].n_pairs
    sp, sm = spin_ladder(dets, m)
    sz = np.diag(sz_diagonal(dets))
    return sz @ sz + sz + sm @ sp


def tr_adapted_level_basis(levels: LevelStructure, dets) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Re-express each level in vectors adapted to the antiunitary ``K``.

    Even N (``K^2 = +1``): every vector satisfies ``K v = v``; two-dimensional
    levels are reported as doublets. Odd N: columns come as (v, K v).
    """
    km = fock_k(dets)
    even = levels.n_electrons % 2 == 0
    cols, doublets = [], []
    for lv in levels.levels:
        span = levels.vectors[:, list(lv.indices)]
        chosen: list[np.ndarray] = []
        cands = [x for i in range(span.shape[1]) for x in (span[:, i], 1j * span[:, i])]
        for w in cands:
            group = [0.5 * (w + km @ np.conj(w))] if even else [w]
            fixed = []
            for x in group:
                for c in chosen:
                    x = x - c * np.vdot(c, x)
                nrm = np.linalg.norm(x)
                if nrm < 1e-6:
                    break
                x = x / nrm
                if even:
                    # restore exact K-reality lost to rounding
                    x = 0.5 * (x + km @ np.conj(x))
                    x = x / np.linalg.norm(x)
                    fixed.append(x)
                else:
                    fixed += [x, km @ np.conj(x)]
            else:
                if fixed:
                    chosen.extend(fixed)
            if len(chosen) >= lv.dim:
                break
        if len(chosen) != lv.dim:
            raise ArithmeticError(f"could not build a K-adapted basis for level E={lv.energy}")
        base = len(cols)
        if lv.dim == 2 or not even:
            doublets += [(base + i, base + i + 1) for i in range(0, lv.dim, 2)]
        cols.extend(chosen)
    return np.array(cols).T, doublets


@dataclass
class MagneticReport:
    diagonal_max: float | None  # even N only
    purity: list[tuple[int, int, str, float]]  # (i, j, expected, offending component)
    doublets: list[dict]
    tol: float

    @property
    def purity_max(self) -> float:
        return max((x[3] for x in self.purity), default=0.0)

    @property
    def passed(self) -> bool:
        ok = self.purity_max <= self.tol
        if self.diagonal_max is not None:
            ok = ok and self.diagonal_max <= self.tol
        return ok and all(d["passed"] for d in self.doublets)


def pauli_decompose(o2: np.ndarray) -> dict[str, complex]:
    return {
        "c0": (o2[0, 0] + o2[1, 1]) / 2,
        "cx": (o2[0, 1] + o2[1, 0]) / 2,
        "cy": (1j * (o2[0, 1] - o2[1, 0])) / 2,
        "cz": (o2[0, 0] - o2[1, 1]) / 2,
    }


def magnetic_operator_checks(
    op_many: np.ndarray,
    vectors: np.ndarray,
    kmat: np.ndarray,
    n_electrons: int,
    doublets: list[tuple[int, int]] = (),
    tol: float = 1e-10,
) -> MagneticReport:
    """Selection rules for a TR-odd Hermitian operator in a time-reversal-adapted basis.

    ``kmat`` is the matrix of the antilinear ``K`` over the determinant basis.
    """
    om = vectors.conj().T @ op_many @ vectors
    n = om.shape[0]
    even = n_electrons % 2 == 0
    diag_max = None
    purity = []
    if even:
        diag_max = float(np.abs(np.diag(om)).max())
        signs = []
        for j in range(n):
            v = vectors[:, j]
            kv = kmat @ np.conj(v)
            s = float(np.real(np.vdot(v, kv)))
            if abs(abs(s) - 1) > 1e-8:
                raise ValueError(f"vector {j} is not a K eigenvector (overlap {s})")
            signs.append(1 if s > 0 else -1)
        for i in range(n):
            for j in range(i + 1, n):
                if signs[i] == signs[j]:
                    purity.append((i, j, "imaginary", float(abs(om[i, j].real))))
                else:
                    purity.append((i, j, "real", float(abs(om[i, j].imag))))
    dres = []
    for i, j in doublets:
        o2 = om[np.ix_([i, j], [i, j])]
        coef = pauli_decompose(o2)
        if even:
            kind = "non-Kramers"
            vanish = ["c0", "cx", "cz"]
        else:
            kind = "Kramers"
            vanish = ["c0"]
        worst = max(abs(coef[c]) for c in vanish)
        dres.append(
            {
                "pair": (i, j),
                "kind": kind,
                "coefficients": coef,
                "must_vanish": vanish,
                "max_vanishing": float(worst),
                "passed": bool(worst <= tol),
            }
        )
    return MagneticReport(diag_max, purity, dres, tol)
