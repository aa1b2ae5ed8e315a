"""Truncated Fock-space foundation.

States are complex amplitude tensors over one or more truncated modes
(``dim = n_max + 1`` per mode).  Quadrature conventions: hbar = 1,
x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)), so [x, p] = i and the
vacuum has variance 1/2 in both quadratures.

Operators built from products of x and p are exact on a cropped block when
computed with enough headroom: a product of k quadrature factors consumed at
indices <= N is computed at dimension >= N + k + 1 and then cropped (x and p
couple n -> n +/- 1 only, so intermediate excitations are bounded).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    CoverageError,
    DimensionError,
    OverflowGuardError,
    PreconditionError,
)

__all__ = [
    "StateVector",
    "OperatorMatrix",
    "GridSpec",
    "ladder_ops",
    "quadrature_ops",
    "quadrature_product",
    "hermite_wavefunction",
    "fock_state",
    "vacuum",
    "tensor",
    "homodyne_pdf",
    "project_quadrature",
    "sample_homodyne",
    "rotated_quadrature_moments",
]

_NORM_TOL = 1e-10
_HERMITE_N_MAX = 400


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class StateVector:
    """Pure state on a tensor product of truncated Fock modes.

    ``amplitudes`` has shape ``mode_dims`` (row-major when flattened).
    ``normalized`` records whether the amplitudes are unit-norm; conditional
    states produced by projections carry ``normalized=False`` together with
    their squared norm as the measurement density.
    """

    mode_dims: tuple[int, ...]
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        dims = tuple(int(d) for d in self.mode_dims)
        if len(dims) < 1:
            raise DimensionError("state needs at least one mode")
        # dim-1 modes are only legal as the scalar left over by projecting
        # out the last mode of a single-mode state
        if any(d < 1 for d in dims) or (any(d < 2 for d in dims) and dims != (1,)):
            raise DimensionError(f"every mode dimension must be >= 2, got {dims}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(dims)
        if self.normalized:
            nrm = np.linalg.norm(amps.ravel())
            if abs(nrm - 1.0) > _NORM_TOL:
                raise PreconditionError(
                    f"state flagged normalized but |psi| = {nrm!r}"
                )
        object.__setattr__(self, "mode_dims", dims)
        object.__setattr__(self, "amplitudes", _readonly(amps))

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes.ravel()))

    def normalize(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise PreconditionError("cannot normalize the zero state")
        return StateVector(self.mode_dims, self.amplitudes / n, normalized=True)

    def overlap(self, other: "StateVector") -> complex:
        if self.mode_dims != other.mode_dims:
            raise DimensionError("overlap requires identical mode dimensions")
        return complex(np.vdot(self.amplitudes.ravel(), other.amplitudes.ravel()))

    def fidelity(self, other: "StateVector") -> float:
        """|<self|other>|^2; global-phase invariant."""
        return float(np.abs(self.overlap(other)) ** 2)

    def pad(self, mode_dims: Sequence[int]) -> "StateVector":
        """Embed into a larger truncation (zero-pad every mode)."""
        dims = tuple(int(d) for d in mode_dims)
        if len(dims) != self.n_modes or any(
            d < s for d, s in zip(dims, self.mode_dims)
        ):
            raise DimensionError("pad target must enlarge every mode")
        out = np.zeros(dims, dtype=np.complex128)
        out[tuple(slice(0, s) for s in self.mode_dims)] = self.amplitudes
        return StateVector(dims, out, normalized=self.normalized)

    def crop(self, mode_dims: Sequence[int], max_loss: float | None = None) -> "StateVector":
        """Crop to a smaller truncation; optionally bound the discarded mass."""
        dims = tuple(int(d) for d in mode_dims)
        out = self.amplitudes[tuple(slice(0, d) for d in dims)]
        if max_loss is not None:
            loss = float(self.norm() ** 2 - np.linalg.norm(out.ravel()) ** 2)
            if loss > max_loss:
                from .errors import TruncationError

                raise TruncationError(
                    f"cropping to {dims} discards {loss:.3e} probability mass"
                )
        return StateVector(dims, out, normalized=False)

    def to_json_dict(self) -> dict:
        flat = self.amplitudes.ravel()
        return {
            "mode_dims": list(self.mode_dims),
            "amplitudes": [[float(z.real), float(z.imag)] for z in flat],
            "normalized": bool(self.normalized),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "StateVector":
        amps = np.array([complex(re, im) for re, im in d["amplitudes"]])
        return cls(tuple(d["mode_dims"]), amps, normalized=bool(d["normalized"]))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, s: str) -> "StateVector":
        return cls.from_json_dict(json.loads(s))


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex matrix on a truncated single- or multi-mode space.

    ``hermitian`` / ``unitary`` tags are verified at construction time
    (residuals 1e-12 and 1e-10 respectively).
    """

    dim: int
    entries: np.ndarray
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.complex128)
        if m.shape != (self.dim, self.dim):
            raise DimensionError(f"entries must be {self.dim}x{self.dim}")
        if self.hermitian:
            res = float(np.max(np.abs(m - m.conj().T)))
            if res > 1e-12:
                raise PreconditionError(f"hermitian tag violated: residual {res:.3e}")
        if self.unitary:
            res = float(np.max(np.abs(m.conj().T @ m - np.eye(self.dim))))
            if res > 1e-10:
                raise PreconditionError(f"unitary tag violated: residual {res:.3e}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "entries", _readonly(m))

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(
            self.dim, self.entries.conj().T, hermitian=self.hermitian, unitary=self.unitary
        )

    def expectation(self, state: StateVector) -> complex:
        v = state.amplitudes.ravel()
        if v.size != self.dim:
            raise DimensionError("operator/state dimension mismatch")
        return complex(np.vdot(v, self.entries @ v))

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.dim != other.dim:
            raise DimensionError("operator dimension mismatch")
        return OperatorMatrix(self.dim, self.entries @ other.entries)


def _check_dim(dim: int) -> int:
    dim = int(dim)
    if dim < 2:
        raise DimensionError(f"dimension must be >= 2, got {dim}")
    return dim


def ladder_ops(dim: int) -> tuple[OperatorMatrix, OperatorMatrix]:
    """Lowering and raising operators: a|n> = sqrt(n)|n-1>."""
    dim = _check_dim(dim)
    a = np.zeros((dim, dim), dtype=np.complex128)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return OperatorMatrix(dim, a), OperatorMatrix(dim, a.conj().T)


def quadrature_ops(dim: int) -> tuple[OperatorMatrix, OperatorMatrix]:
    """X and P with [X, P] = i and vacuum variance 1/2."""
    dim = _check_dim(dim)
    a, ad = ladder_ops(dim)
    x = (a.entries + ad.entries) / np.sqrt(2.0)
    p = (a.entries - ad.entries) / (1j * np.sqrt(2.0))
    return (
        OperatorMatrix(dim, x, hermitian=True),
        OperatorMatrix(dim, p, hermitian=True),
    )


def quadrature_product(dim: int, factors: str) -> OperatorMatrix:
    """Exact cropped product of quadrature operators.

    ``factors`` is a string over {'x', 'p'}; the product is evaluated at
    dimension ``dim + len(factors) + 1`` and cropped, which makes every
    retained element exact.
    """
    dim = _check_dim(dim)
    if not factors or any(c not in "xp" for c in factors):
        raise ValueError("factors must be a nonempty string over 'x'/'p'")
    big = dim + len(factors) + 1
    x, p = quadrature_ops(big)
    m = np.eye(big, dtype=np.complex128)
    for c in factors:
        m = m @ (x.entries if c == "x" else p.entries)
    return OperatorMatrix(dim, m[:dim, :dim])


def hermite_wavefunction(n: int, x: float | np.ndarray) -> float | np.ndarray:
    """Normalized harmonic-oscillator eigenfunction psi_n(x).

    psi_n(x) = pi^(-1/4) (2^n n!)^(-1/2) H_n(x) exp(-x^2/2), evaluated with
    the stable three-term recurrence on the normalized functions.
    """
    n = int(n)
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > _HERMITE_N_MAX:
        raise OverflowGuardError(
            f"n = {n} exceeds the recurrence domain bound {_HERMITE_N_MAX}"
        )
    scalar = np.isscalar(x)
    v = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(v)):
        raise ValueError("x must be finite")
    prev = np.pi ** -0.25 * np.exp(-v * v / 2.0)
    if n == 0:
        return float(prev[0]) if scalar else prev
    cur = np.sqrt(2.0) * v * prev
    for k in range(2, n + 1):
        prev, cur = cur, np.sqrt(2.0 / k) * v * cur - np.sqrt((k - 1) / k) * prev
    return float(cur[0]) if scalar else cur


def hermite_basis(dim: int, x: np.ndarray) -> np.ndarray:
    """Matrix psi_n(x_j), shape (dim, len(x)); one recurrence pass."""
    dim = _check_dim(dim)
    if dim - 1 > _HERMITE_N_MAX:
        raise OverflowGuardError(
            f"dim-1 = {dim - 1} exceeds the recurrence domain bound {_HERMITE_N_MAX}"
        )
    v = np.asarray(x, dtype=np.float64)
    out = np.empty((dim, v.size), dtype=np.float64)
    out[0] = np.pi ** -0.25 * np.exp(-v * v / 2.0)
    if dim > 1:
        out[1] = np.sqrt(2.0) * v * out[0]
    for k in range(2, dim):
        out[k] = np.sqrt(2.0 / k) * v * out[k - 1] - np.sqrt((k - 1) / k) * out[k - 2]
    return out


def fock_state(n: int, dim: int) -> StateVector:
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise DimensionError(f"|{n}> does not fit in dimension {dim}")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[n] = 1.0
    return StateVector((dim,), amps)


def vacuum(dim: int) -> StateVector:
    return fock_state(0, dim)


def tensor(states: Sequence[StateVector]) -> StateVector:
    """Kronecker-ordered product state; mode_dims concatenate."""
    if not states:
        raise ValueError("tensor of an empty state list")
    dims: tuple[int, ...] = ()
    amps = np.ones((), dtype=np.complex128)
    normalized = True
    for s in states:
        dims = dims + s.mode_dims
        amps = np.multiply.outer(amps, s.amplitudes)
        normalized = normalized and s.normalized
    return StateVector(dims, amps, normalized=normalized)


def _measurement_row(dim: int, angle: float, values: np.ndarray) -> np.ndarray:
    """<x_angle = v | n> = exp(-i*angle*n) psi_n(v), shape (dim, len(values))."""
    h = hermite_basis(dim, values)
    phases = np.exp(-1j * float(angle) * np.arange(dim))
    return h * phases[:, None]


def _mode_front(state: StateVector, mode: int) -> np.ndarray:
    if not 0 <= mode < state.n_modes:
        raise IndexError(f"mode {mode} out of range for {state.n_modes} modes")
    t = np.moveaxis(state.amplitudes, mode, 0)
    return t.reshape(state.mode_dims[mode], -1)


def homodyne_pdf(
    state: StateVector, mode: int, angle: float, grid: np.ndarray
) -> np.ndarray:
    """Marginal probability density of x*cos(angle) + p*sin(angle) on one mode."""
    if not state.normalized:
        raise PreconditionError("homodyne_pdf requires a normalized state")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be 1-D and strictly increasing")
    t = _mode_front(state, mode)
    m = _measurement_row(state.mode_dims[mode], angle, grid)
    d, rest = t.shape
    n_grid = grid.size
    # identical marginals either way; the reduced-density route wins when the
    # unmeasured sector is large
    if d * d * (rest + n_grid) < d * rest * n_grid:
        rho = t @ t.conj().T
        a = rho @ np.conj(m)
        return np.maximum(np.real(np.sum(m * a, axis=0)), 0.0)
    amp = m.T @ t  # (n_grid, rest)
    return np.sum(np.abs(amp) ** 2, axis=1)


def project_quadrature(
    state: StateVector, mode: int, angle: float, value: float
) -> tuple[StateVector, float]:
    """Contract one mode against <x_angle = value|.

    Returns the unnormalized conditional state on the remaining modes and its
    squared norm, which equals the marginal density at ``value``.  Projecting
    the only mode of a single-mode state leaves a scalar, returned as a
    dim-1 "state" holding the complex amplitude (degenerate case).
    """
    if not state.normalized:
        raise PreconditionError("project_quadrature requires a normalized state")
    t = _mode_front(state, mode)
    m = _measurement_row(state.mode_dims[mode], angle, np.array([float(value)]))
    reduced = (m[:, 0] @ t).ravel()
    density = float(np.real(np.vdot(reduced, reduced)))
    rest = tuple(d for k, d in enumerate(state.mode_dims) if k != mode)
    if not rest:
        rest = (1,)
    return StateVector(rest, reduced.reshape(rest), normalized=False), density


def rotated_quadrature_moments(
    state: StateVector, mode: int, angle: float
) -> tuple[float, float]:
    """(<X_angle>, <X_angle^2>) of one mode; second moment crop-exact."""
    dm = state.mode_dims[mode]
    x, p = quadrature_ops(dm)
    xa = np.cos(angle) * x.entries + np.sin(angle) * p.entries
    xa2 = _rotated_sq(dm, angle)
    t = _mode_front(state, mode)
    m1 = float(np.real(np.sum(np.conj(t) * (xa @ t))))
    m2 = float(np.real(np.sum(np.conj(t) * (xa2 @ t))))
    return m1, m2


def _rotated_sq(dim: int, angle: float) -> np.ndarray:
    big = dim + 3
    x, p = quadrature_ops(big)
    xa = np.cos(angle) * x.entries + np.sin(angle) * p.entries
    return (xa @ xa)[:dim, :dim]


@dataclass(frozen=True)
class GridSpec:
    """Tabulation window for homodyne sampling: [lo, hi] with ``bins`` bins."""

    lo: float
    hi: float
    bins: int = 4096

    def edges(self) -> np.ndarray:
        if not self.hi > self.lo:
            raise ValueError("grid upper edge must exceed lower edge")
        return np.linspace(self.lo, self.hi, self.bins + 1)


def default_grid_spec(state: StateVector, mode: int, angle: float, bins: int = 4096) -> GridSpec:
    """[-8*sigma_max, +8*sigma_max] with sigma_max^2 = <X_angle^2>."""
    _, m2 = rotated_quadrature_moments(state, mode, angle)
    sigma = np.sqrt(max(m2, 1e-12))
    return GridSpec(-8.0 * sigma, 8.0 * sigma, bins)


def _inverse_cdf_draw(rng: np.random.Generator, edges: np.ndarray, pdf: np.ndarray) -> float:
    """Draw from the piecewise-linear density tabulated at ``edges``."""
    widths = np.diff(edges)
    bin_mass = 0.5 * (pdf[1:] + pdf[:-1]) * widths
    cdf = np.concatenate(([0.0], np.cumsum(bin_mass)))
    total = cdf[-1]
    u = rng.uniform(0.0, total)
    k = int(np.searchsorted(cdf, u, side="right") - 1)
    k = min(max(k, 0), len(widths) - 1)
    r = u - cdf[k]
    f0, f1 = pdf[k], pdf[k + 1]
    h = widths[k]
    slope = (f1 - f0) / h
    if abs(slope) * h < 1e-14 * max(f0, 1e-300):
        t = r / max(f0 * h, 1e-300)
    else:
        t = (-f0 + np.sqrt(max(f0 * f0 + 2.0 * slope * r, 0.0))) / (slope * h)
    return float(edges[k] + min(max(t, 0.0), 1.0) * h)


def _inverse_cdf_draw_batch(
    rng: np.random.Generator, edges: np.ndarray, pdf: np.ndarray, n: int
) -> np.ndarray:
    """Vectorized draws from the piecewise-linear tabulated density."""
    widths = np.diff(edges)
    bin_mass = 0.5 * (pdf[1:] + pdf[:-1]) * widths
    cdf = np.concatenate(([0.0], np.cumsum(bin_mass)))
    u = rng.uniform(0.0, cdf[-1], size=n)
    k = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(widths) - 1)
    r = u - cdf[k]
    f0, f1, h = pdf[k], pdf[k + 1], widths[k]
    slope = (f1 - f0) / h
    flat = np.abs(slope) * h < 1e-14 * np.maximum(f0, 1e-300)
    t = np.empty_like(u)
    t[flat] = r[flat] / np.maximum(f0[flat] * h[flat], 1e-300)
    nz = ~flat
    t[nz] = (
        -f0[nz] + np.sqrt(np.maximum(f0[nz] ** 2 + 2.0 * slope[nz] * r[nz], 0.0))
    ) / (slope[nz] * h[nz])
    return edges[k] + np.clip(t, 0.0, 1.0) * h


def sample_homodyne_batch(
    state: StateVector,
    mode: int,
    angle: float,
    rng: np.random.Generator,
    n: int,
    grid_spec: GridSpec | None = None,
) -> np.ndarray:
    """Draw ``n`` homodyne values at once (no conditional states)."""
    if grid_spec is None:
        grid_spec = default_grid_spec(state, mode, angle)
    edges = grid_spec.edges()
    pdf = homodyne_pdf(state, mode, angle, edges)
    if float(np.trapezoid(pdf, edges)) < 0.999:
        raise CoverageError("sampling grid covers less than 0.999 of the marginal")
    return _inverse_cdf_draw_batch(rng, edges, pdf, n)


def sample_homodyne(
    state: StateVector,
    mode: int,
    angle: float,
    rng: np.random.Generator,
    grid_spec: GridSpec | None = None,
) -> tuple[float, StateVector]:
    """Sample a homodyne outcome by inverse CDF over the tabulated pdf.

    Returns the sampled value and the normalized conditional state.
    Raises :class:`CoverageError` when the tabulated mass is below 0.999.
    """
    if grid_spec is None:
        grid_spec = default_grid_spec(state, mode, angle)
    edges = grid_spec.edges()
    pdf = homodyne_pdf(state, mode, angle, edges)
    mass = float(np.trapezoid(pdf, edges))
    if mass < 0.999:
        raise CoverageError(
            f"sampling grid covers only {mass:.6f} of the marginal mass"
        )
    value = _inverse_cdf_draw(rng, edges, pdf)
    conditional, _ = project_quadrature(state, mode, angle, value)
    return value, conditional.normalize()
