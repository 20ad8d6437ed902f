"""Time-reversal-adapted configuration state functions for open-shell determinants."""

from .detalg import Determinant, SignedDetSum, SpinorIndex, StateVector
from .trgen import OpenShellBasis, build_k, build_kplus, build_kplus2, enumerate_basis

__all__ = [
    "Determinant",
    "SignedDetSum",
    "SpinorIndex",
    "StateVector",
    "OpenShellBasis",
    "build_k",
    "build_kplus",
    "build_kplus2",
    "enumerate_basis",
]
