"""Occupation-bitstring algebra for Kramers-restricted Slater determinants.

Spinor slots are interleaved: pair ``p`` owns slot ``2p`` (unbarred, ``phi_p``)
and slot ``2p + 1`` (barred, ``phi_pbar = K phi_p``). A determinant is the
ordered product ``a+_{s1} a+_{s2} ... |vac>`` with ``s1 < s2 < ...``; every
phase below is relative to that ordering.

The one-electron time-reversal operator acts as ``K phi_p = phi_pbar`` and
``K phi_pbar = -phi_p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_PAIRS = 32
BAR = "̄"  # combining macron


class MalformedIndexError(ValueError):
    """Spinor slot outside the ``2M`` slots of a determinant."""


@dataclass(frozen=True, order=True)
class SpinorIndex:
    pair: int
    barred: bool = False

    def __post_init__(self):
        if self.pair < 0:
            raise MalformedIndexError(f"negative pair index {self.pair}")

    @property
    def slot(self) -> int:
        return 2 * self.pair + int(self.barred)

    @classmethod
    def from_slot(cls, slot: int) -> "SpinorIndex":
        if slot < 0:
            raise MalformedIndexError(f"negative slot {slot}")
        return cls(slot // 2, bool(slot & 1))


def _slot_of(s: SpinorIndex | int) -> int:
    return s.slot if isinstance(s, SpinorIndex) else int(s)


@dataclass(frozen=True)
class Determinant:
    """Occupation bitmask over ``2 * n_pairs`` spinor slots."""

    occ: int
    n_pairs: int

    def __post_init__(self):
        if not 0 <= self.n_pairs <= MAX_PAIRS:
            raise MalformedIndexError(
                f"n_pairs={self.n_pairs} outside [0, {MAX_PAIRS}]"
            )
        if self.occ < 0 or self.occ >> (2 * self.n_pairs):
            raise MalformedIndexError(
                f"occupation {self.occ:#x} does not fit {2 * self.n_pairs} slots"
            )

    @classmethod
    def from_slots(cls, slots: Iterable[int], n_pairs: int) -> "Determinant":
        occ = 0
        for s in slots:
            if not 0 <= s < 2 * n_pairs:
                raise MalformedIndexError(f"slot {s} outside [0, {2 * n_pairs})")
            if occ >> s & 1:
                raise ValueError(f"slot {s} listed twice")
            occ |= 1 << s
        return cls(occ, n_pairs)

    @classmethod
    def from_spinors(
        cls, spinors: Sequence[SpinorIndex | int], n_pairs: int
    ) -> tuple["Determinant", int]:
        """Build from an unordered spinor list.

        Returns the canonical determinant together with the parity of the
        permutation that sorts ``spinors`` into ascending slot order.
        """
        slots = [_slot_of(s) for s in spinors]
        det = cls.from_slots(slots, n_pairs)
        return det, permutation_parity(slots)

    @classmethod
    def from_label(cls, label: str, n_pairs: int) -> tuple["Determinant", int]:
        """Parse a label such as ``"1 ~2 3"`` or ``"1 2̄ 3"`` (1-based pairs)."""
        spinors = []
        for tok in label.split():
            barred = tok.startswith("~") or tok.endswith(BAR)
            num = tok.strip("~").replace(BAR, "")
            if not num.isdigit() or int(num) < 1:
                raise MalformedIndexError(f"bad spinor token {tok!r}")
            spinors.append(SpinorIndex(int(num) - 1, barred))
        return cls.from_spinors(spinors, n_pairs)

    @property
    def n_slots(self) -> int:
        return 2 * self.n_pairs

    @property
    def n_electrons(self) -> int:
        return self.occ.bit_count()

    def slots(self) -> list[int]:
        return [s for s in range(self.n_slots) if self.occ >> s & 1]

    def pair_occupation(self, pair: int) -> int:
        """Two-bit code: bit 0 unbarred occupied, bit 1 barred occupied."""
        return self.occ >> (2 * pair) & 3

    def open_pairs(self) -> list[int]:
        return [p for p in range(self.n_pairs) if self.pair_occupation(p) in (1, 2)]

    def closed_pairs(self) -> list[int]:
        return [p for p in range(self.n_pairs) if self.pair_occupation(p) == 3]

    @property
    def n_open(self) -> int:
        return len(self.open_pairs())

    @property
    def open_barred_count(self) -> int:
        return sum(1 for p in range(self.n_pairs) if self.pair_occupation(p) == 2)

    def label(self, fmt: str = "text") -> str:
        """Paper-style label, e.g. ``1 2̄ 3`` (text) or ``1 ~2 3`` (machine)."""
        toks = []
        for s in self.slots():
            p = str(s // 2 + 1)
            if s & 1:
                p = "~" + p if fmt == "machine" else p + BAR
            toks.append(p)
        return " ".join(toks)

    def __repr__(self):
        return f"Determinant({self.label('machine')!r}, M={self.n_pairs})"


class SignedDetSum:
    """Sparse real linear combination of determinants sharing ``M`` and ``N``."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[Determinant, float] | None = None):
        self.terms: dict[Determinant, float] = {}
        for d, c in (terms or {}).items():
            self.add(d, c)

    def add(self, det: Determinant, coeff: float) -> None:
        if coeff == 0:
            return
        if self.terms:
            ref = next(iter(self.terms))
            if ref.n_pairs != det.n_pairs or ref.n_electrons != det.n_electrons:
                raise ValueError("determinants in a sum must share M and N")
        c = self.terms.get(det, 0) + coeff
        if c == 0:
            self.terms.pop(det, None)
        else:
            self.terms[det] = c

    def __getitem__(self, det: Determinant) -> float:
        return self.terms.get(det, 0)

    def __iter__(self) -> Iterator[tuple[Determinant, float]]:
        return iter(self.terms.items())

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if not isinstance(other, SignedDetSum):
            return NotImplemented
        return self.terms == other.terms

    def __add__(self, other: "SignedDetSum") -> "SignedDetSum":
        out = SignedDetSum(self.terms)
        for d, c in other:
            out.add(d, c)
        return out

    def scaled(self, factor: float) -> "SignedDetSum":
        return SignedDetSum({d: factor * c for d, c in self})

    def __repr__(self):
        body = " ".join(f"{c:+g}|{d.label('machine')}>" for d, c in self)
        return f"SignedDetSum({body or '0'})"


@dataclass(frozen=True)
class StateVector:
    """Complex coefficients over an explicitly ordered determinant basis."""

    basis: tuple[Determinant, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (len(self.basis),):
            raise ValueError("coefficient count does not match basis size")
        object.__setattr__(self, "basis", tuple(self.basis))
        object.__setattr__(self, "coeffs", c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "StateVector":
        return StateVector(self.basis, self.coeffs / self.norm)

    def coeff(self, det: Determinant) -> complex:
        return self.coeffs[self.basis.index(det)]


def permutation_parity(seq: Sequence[int]) -> int:
    """Sign of the permutation that sorts ``seq`` (distinct entries)."""
    sign = 1
    items = list(seq)
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i] > items[j]:
                sign = -sign
    return sign


def _check_slot(d: Determinant, slot: int) -> None:
    if not 0 <= slot < d.n_slots:
        raise MalformedIndexError(f"slot {slot} outside [0, {d.n_slots})")


def _crossing_sign(occ: int, slot: int) -> int:
    return -1 if (occ & ((1 << slot) - 1)).bit_count() & 1 else 1


def annihilate(d: Determinant, s: SpinorIndex | int) -> tuple[Determinant, int] | None:
    slot = _slot_of(s)
    _check_slot(d, slot)
    if not d.occ >> slot & 1:
        return None
    return Determinant(d.occ ^ (1 << slot), d.n_pairs), _crossing_sign(d.occ, slot)


def create(d: Determinant, s: SpinorIndex | int) -> tuple[Determinant, int] | None:
    slot = _slot_of(s)
    _check_slot(d, slot)
    if d.occ >> slot & 1:
        return None
    return Determinant(d.occ | (1 << slot), d.n_pairs), _crossing_sign(d.occ, slot)


def apply_string(
    d: Determinant, ops: Sequence[tuple[str, SpinorIndex | int]]
) -> tuple[Determinant, int] | None:
    """Apply operators right-to-left, e.g. ``[("+", p), ("-", q)]`` is ``a+_p a_q``."""
    phase = 1
    for kind, s in reversed(ops):
        res = create(d, s) if kind == "+" else annihilate(d, s)
        if res is None:
            return None
        d, ph = res
        phase *= ph
    return d, phase


def apply_k1(d: Determinant, pair: int) -> tuple[Determinant, int] | None:
    """Single-pair term ``a+_pbar a_p - a+_p a_pbar`` of the generator.

    Zero (``None``) unless ``pair`` is an open shell.
    """
    if not 0 <= pair < d.n_pairs:
        raise MalformedIndexError(f"pair {pair} outside [0, {d.n_pairs})")
    code = d.pair_occupation(pair)
    if code == 1:
        res = apply_string(d, [("+", 2 * pair + 1), ("-", 2 * pair)])
        return res[0], res[1]
    if code == 2:
        res = apply_string(d, [("+", 2 * pair), ("-", 2 * pair + 1)])
        return res[0], -res[1]
    return None


def apply_kplus_det(d: Determinant) -> SignedDetSum:
    out = SignedDetSum()
    for p in d.open_pairs():
        det, phase = apply_k1(d, p)
        out.add(det, phase)
    return out


def apply_k_det(d: Determinant) -> tuple[Determinant, int]:
    """Many-electron time reversal: substitute every occupied spinor, then reorder."""
    images = []
    sign = 1
    for s in d.slots():
        if s & 1:
            images.append(s - 1)
            sign = -sign
        else:
            images.append(s + 1)
    det, parity = Determinant.from_spinors(images, d.n_pairs)
    return det, sign * parity
