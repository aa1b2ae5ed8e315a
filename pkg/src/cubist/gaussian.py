"""Gaussian unitaries in Fock-matrix form and symplectic form.

Beam-splitter sign convention (pinned throughout the package): the first
output carries the minus sign on the reflected second input,

    x_a' = sqrt(T) x_a - sqrt(R) x_b,   x_b' = sqrt(R) x_a + sqrt(T) x_b,

identically for p.  Matrix exponentials use scipy's scaling-and-squaring
Pade implementation; generators are built from crop-exact quadrature
products so each unitary is exactly unitary on its truncated space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, TruncationRiskWarning
from .fock import OperatorMatrix, _readonly, ladder_ops, quadrature_ops, quadrature_product

__all__ = [
    "SymplecticMap",
    "displacement_op",
    "squeeze_op",
    "phase_shift_op",
    "beam_splitter_op",
    "symplectic_of_circuit",
]


def _symplectic_form(n_modes: int) -> np.ndarray:
    j2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((2 * n_modes, 2 * n_modes))
    for m in range(n_modes):
        out[2 * m : 2 * m + 2, 2 * m : 2 * m + 2] = j2
    return out


@dataclass(frozen=True)
class SymplecticMap:
    """Affine quadrature map on ordering (x1, p1, ..., xm, pm)."""

    matrix: np.ndarray
    displacement: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=np.float64)
        d = np.asarray(self.displacement, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise DimensionError("matrix must be square 2m x 2m")
        if d.shape != (s.shape[0],):
            raise DimensionError("displacement length must match matrix")
        j = _symplectic_form(s.shape[0] // 2)
        res = float(np.max(np.abs(s @ j @ s.T - j)))
        if res > 1e-12:
            raise DimensionError(f"S J S^T = J violated: residual {res:.3e}")
        object.__setattr__(self, "matrix", _readonly(s))
        object.__setattr__(self, "displacement", _readonly(d))

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def apply(self, point: np.ndarray) -> np.ndarray:
        """Push classical quadrature points through the map (last axis 2m)."""
        pt = np.asarray(point, dtype=np.float64)
        return pt @ self.matrix.T + self.displacement


def displacement_op(alpha: complex, dim: int) -> OperatorMatrix:
    """D(alpha) = exp(i sqrt(2) x Im(alpha) - i sqrt(2) p Re(alpha)).

    Sends <X> -> <X> + sqrt(2) Re(alpha) and <P> -> <P> + sqrt(2) Im(alpha)
    on coherent states.  Emits :class:`TruncationRiskWarning` when
    |alpha|^2 > dim/4.
    """
    alpha = complex(alpha)
    x, p = quadrature_ops(dim)
    if abs(alpha) ** 2 > dim / 4.0:
        warnings.warn(
            f"displacement |alpha|^2 = {abs(alpha) ** 2:.2f} is large for dim {dim}",
            TruncationRiskWarning,
            stacklevel=2,
        )
    gen = 1j * np.sqrt(2.0) * (alpha.imag * x.entries - alpha.real * p.entries)
    return OperatorMatrix(dim, expm(gen), unitary=True)


def squeeze_op(s: float, dim: int) -> OperatorMatrix:
    """S(s) with S^dag X S = s X and S^dag P S = P/s (s > 0)."""
    s = float(s)
    if s <= 0.0:
        raise ValueError(f"squeeze scale must be positive, got {s}")
    xp = quadrature_product(dim, "xp").entries
    px = quadrature_product(dim, "px").entries
    h = (xp + px) / 2.0
    return OperatorMatrix(dim, expm(-1j * np.log(s) * h), unitary=True)


def phase_shift_op(theta: float, dim: int) -> OperatorMatrix:
    """diag(exp(-i n theta)); rotates (X, P) by theta."""
    n = np.arange(int(dim))
    return OperatorMatrix(dim, np.diag(np.exp(-1j * float(theta) * n)), unitary=True)


def beam_splitter_op(T: float, dim_a: int, dim_b: int) -> OperatorMatrix:
    """Two-mode beam splitter on the Kronecker product space (mode a first)."""
    T = float(T)
    if not 0.0 < T < 1.0:
        raise ValueError(f"transmittance must lie in (0, 1), got {T}")
    a, ad = ladder_ops(dim_a)
    b, bd = ladder_ops(dim_b)
    ia, ib = np.eye(dim_a), np.eye(dim_b)
    k = np.kron(ad.entries, b.entries) - np.kron(a.entries, bd.entries)
    omega = -np.arcsin(np.sqrt(1.0 - T))
    return OperatorMatrix(dim_a * dim_b, expm(omega * k), unitary=True)


def beam_splitter_symplectic(T: float) -> np.ndarray:
    """4x4 quadrature map of one beam splitter on ordering (xa, pa, xb, pb)."""
    t, r = np.sqrt(T), np.sqrt(1.0 - T)
    s = np.array(
        [
            [t, 0.0, -r, 0.0],
            [0.0, t, 0.0, -r],
            [r, 0.0, t, 0.0],
            [0.0, r, 0.0, t],
        ]
    )
    return s


def symplectic_of_circuit(T1: float, T2: float) -> SymplecticMap:
    """6x6 quadrature map of BS(T1) on modes (0,1) then BS(T2) on modes (1,2)."""
    for t in (T1, T2):
        if not 0.0 < float(t) < 1.0:
            raise ValueError(f"transmittance must lie in (0, 1), got {t}")
    s1 = np.eye(6)
    s1[0:4, 0:4] = beam_splitter_symplectic(T1)
    s2 = np.eye(6)
    s2[2:6, 2:6] = beam_splitter_symplectic(T2)
    return SymplecticMap(s2 @ s1, np.zeros(6))
