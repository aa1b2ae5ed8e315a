"""Wigner functions, the Airy-form ideal cubic state, and measurement projectors.

Wigner convention: W(x, p) = (1/pi) Int <x+u|rho|x-u> exp(-2ipu) du, so a
normalized state integrates to 1 and the vacuum peaks at 1/pi.

Time reversal is complex conjugation in the position representation,
(x, p) -> (x, -p) on Wigner grids; no operator object exists for it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import (
    CoverageError,
    OverflowGuardError,
    PreconditionError,
    SingularPhaseError,
    TruncationError,
)
from .fock import StateVector, _readonly, hermite_basis
from .gaussian import displacement_op

__all__ = [
    "WignerGrid",
    "ProjectorParams",
    "Axis",
    "wigner_of_state",
    "airy",
    "ideal_cubic_wigner",
    "pure_projection_state",
    "projector_wigner",
    "generalized_projector_wigner",
    "sign_changes_along_p",
]

Axis = tuple[float, float, int]

DEFAULT_AXES: tuple[Axis, Axis] = ((-6.0, 6.0, 301), (-6.0, 6.0, 301))


def _axis_values(axis: Axis) -> np.ndarray:
    lo, hi, n = float(axis[0]), float(axis[1]), int(axis[2])
    if n < 2 or not hi > lo:
        raise ValueError(f"bad axis spec {axis}")
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class WignerGrid:
    """Real phase-space samples on a rectangular grid; values[i, j] = W(x_i, p_j)."""

    x_axis: Axis
    p_axis: Axis
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        nx, npts = int(self.x_axis[2]), int(self.p_axis[2])
        if vals.shape != (nx, npts):
            raise ValueError(f"values shape {vals.shape} != ({nx}, {npts})")
        if not np.all(np.isfinite(vals)):
            raise ValueError("Wigner values must be finite")
        object.__setattr__(
            self, "x_axis", (float(self.x_axis[0]), float(self.x_axis[1]), nx)
        )
        object.__setattr__(
            self, "p_axis", (float(self.p_axis[0]), float(self.p_axis[1]), npts)
        )
        object.__setattr__(self, "values", _readonly(vals))

    def x_values(self) -> np.ndarray:
        return _axis_values(self.x_axis)

    def p_values(self) -> np.ndarray:
        return _axis_values(self.p_axis)

    @property
    def cell_area(self) -> float:
        dx = (self.x_axis[1] - self.x_axis[0]) / (self.x_axis[2] - 1)
        dp = (self.p_axis[1] - self.p_axis[0]) / (self.p_axis[2] - 1)
        return dx * dp

    def integral(self) -> float:
        return float(np.sum(self.values) * self.cell_area)

    def interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(
            (self.x_values(), self.p_values()), self.values, method="linear",
            bounds_error=True,
        )

    # --- serialization: CSV with a grid header, plus a JSON mirror -------

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self._header_line())
            for row in self.values:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def _header_line(self) -> str:
        x0, x1, nx = self.x_axis
        p0, p1, npts = self.p_axis
        return f"# {x0:.17g} {x1:.17g} {nx} {p0:.17g} {p1:.17g} {npts}\n"

    @classmethod
    def from_csv(cls, path) -> "WignerGrid":
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip()]
        header = [ln for ln in lines if ln.startswith("#")]
        grid_header = next(
            ln for ln in header if not ln.lower().startswith("# unit")
        )
        parts = grid_header[1:].split()
        x_axis = (float(parts[0]), float(parts[1]), int(parts[2]))
        p_axis = (float(parts[3]), float(parts[4]), int(parts[5]))
        rows = [ln for ln in lines if not ln.startswith("#")]
        vals = np.array([[float(v) for v in ln.split(",")] for ln in rows])
        return cls(x_axis, p_axis, vals)

    def to_json_dict(self) -> dict:
        return {
            "x_axis": list(self.x_axis),
            "p_axis": list(self.p_axis),
            "values": [[float(v) for v in row] for row in self.values],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, d: dict) -> "WignerGrid":
        return cls(tuple(d["x_axis"]), tuple(d["p_axis"]), np.array(d["values"]))

    @classmethod
    def from_json(cls, path) -> "WignerGrid":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class ProjectorParams:
    """Unbalanced/rotated heterodyne projector parameters.

    q, y are the two homodyne results, T the beam-splitter transmittance and
    theta the second detector's phase.  Derived Gaussian-operation parameters
    z1 = sqrt(T/R) and z2 = tan(theta)/sqrt(RT).
    """

    q: float
    y: float
    T: float
    theta: float

    def __post_init__(self):
        if not 0.0 < self.T < 1.0:
            raise ValueError(f"transmittance must lie in (0, 1), got {self.T}")
        if abs(math.cos(self.theta)) < 1e-12:
            raise SingularPhaseError("cos(theta) = 0 makes the projector singular")

    @property
    def R(self) -> float:
        return 1.0 - self.T

    @property
    def z1(self) -> float:
        return math.sqrt(self.T / self.R)

    @property
    def z2(self) -> float:
        return math.tan(self.theta) / math.sqrt(self.R * self.T)


def _wavefunction_on_grid(coeffs: np.ndarray, v: np.ndarray) -> np.ndarray:
    h = hermite_basis(len(coeffs), v)
    return coeffs @ h


def wigner_of_state(
    state: StateVector, axes: tuple[Axis, Axis] = DEFAULT_AXES
) -> WignerGrid:
    """Wigner function of a normalized single-mode state.

    Evaluated as a u-quadrature of psi(x+u) psi*(x-u) exp(-2ipu) over a
    raster fine enough that the trapezoid rule is converged to roundoff
    (the integrand decays with all derivatives at the window ends).
    """
    if state.n_modes != 1:
        raise ValueError("wigner_of_state takes a single-mode state")
    if not state.normalized:
        raise PreconditionError("state must be normalized")
    x_axis, p_axis = axes
    xs = _axis_values(x_axis)
    ps = _axis_values(p_axis)
    dim = state.mode_dims[0]
    coeffs = state.amplitudes.ravel()

    support = math.sqrt(2.0 * dim + 3.0) + 7.0
    dx = (xs[-1] - xs[0]) / (len(xs) - 1)
    m = max(1, math.ceil(dx / 0.01))
    du = dx / m
    k_half = math.ceil(support / du)
    # master raster covering every x_i +/- u_k
    n_master = (len(xs) - 1) * m + 2 * k_half + 1
    master = xs[0] - k_half * du + du * np.arange(n_master)
    psi = _wavefunction_on_grid(coeffs, master)

    i_idx = m * np.arange(len(xs))[:, None]
    k_idx = np.arange(2 * k_half + 1)[None, :]
    plus = psi[i_idx + k_idx]            # psi(x_i + u_k), u_k = (k - k_half) du
    minus = psi[i_idx + (2 * k_half - k_idx)]  # psi(x_i - u_k)
    g = plus * np.conj(minus)

    u = du * (np.arange(2 * k_half + 1) - k_half)
    weights = np.full(u.size, du)
    weights[0] = weights[-1] = du / 2.0
    kernel = np.exp(-2j * np.outer(u, ps)) * weights[:, None]
    w = np.real(g @ kernel) / np.pi
    return WignerGrid(x_axis, p_axis, w)


# ---------------------------------------------------------------------------
# Airy function


_AI0 = 0.3550280538878172   # 3^(-2/3) / Gamma(2/3)
_AIP0 = -0.2588194037928068  # -3^(-1/3) / Gamma(1/3)
_SERIES_SEAM = 6.0
_DOMAIN_BOUND = 40.0


def _airy_series(x: float) -> float:
    """Maclaurin series Ai = Ai(0) f(x) + Ai'(0) g(x); converged for |x| <~ 8."""
    x3 = x * x * x
    f_term, g_term = 1.0, x
    f_sum, g_sum = f_term, g_term
    for k in range(0, 120):
        f_term *= x3 / ((3 * k + 2) * (3 * k + 3))
        g_term *= x3 / ((3 * k + 3) * (3 * k + 4))
        f_sum += f_term
        g_sum += g_term
        if abs(f_term) < 1e-18 * abs(f_sum) and abs(g_term) < 1e-18 * (abs(g_sum) + 1e-30):
            break
    return _AI0 * f_sum + _AIP0 * g_sum


def _asymptotic_u(k_max: int) -> list[float]:
    u = [1.0]
    for k in range(1, k_max + 1):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    return u


_U_COEF = _asymptotic_u(40)


def _airy_asymptotic_pos(x: float) -> float:
    zeta = (2.0 / 3.0) * x ** 1.5
    total, sign, zk, prev = 0.0, 1.0, 1.0, None
    for k in range(40):
        term = sign * _U_COEF[k] / zk
        if prev is not None and abs(term) > abs(prev):
            break
        total += term
        prev, sign, zk = term, -sign, zk * zeta
    return math.exp(-zeta) / (2.0 * math.sqrt(math.pi) * x ** 0.25) * total


def _airy_asymptotic_neg(x: float) -> float:
    t = -x
    zeta = (2.0 / 3.0) * t ** 1.5
    c_sum = s_sum = 0.0
    prev_c = prev_s = None
    for k in range(20):
        tc = (-1.0) ** k * _U_COEF[2 * k] / zeta ** (2 * k)
        ts = (-1.0) ** k * _U_COEF[2 * k + 1] / zeta ** (2 * k + 1)
        if prev_c is not None and (abs(tc) > prev_c or abs(ts) > prev_s):
            break
        c_sum += tc
        s_sum += ts
        prev_c, prev_s = abs(tc), abs(ts)
    arg = zeta - math.pi / 4.0
    pref = 1.0 / (math.sqrt(math.pi) * t ** 0.25)
    return pref * (math.cos(arg) * c_sum + math.sin(arg) * s_sum)


def airy(x: float) -> float:
    """Ai(x) to absolute error <= 1e-10 on |x| <= 40.

    Maclaurin series inside |x| <= 6, Poincare asymptotic expansions
    (truncated at the smallest term) beyond; the switchover is validated
    against the series at the seam by the test suite.
    """
    x = float(x)
    if not math.isfinite(x) or abs(x) > _DOMAIN_BOUND:
        raise OverflowGuardError(f"Ai evaluation restricted to |x| <= 40, got {x}")
    if x > _SERIES_SEAM:
        return _airy_asymptotic_pos(x)
    if x < -_SERIES_SEAM:
        return _airy_asymptotic_neg(x)
    return _airy_series(x)


def ideal_cubic_wigner(
    gamma: float, axes: tuple[Axis, Axis] = DEFAULT_AXES
) -> WignerGrid:
    """Airy-form Wigner function of the ideal cubic state, grid-normalized.

    W(x, p) = 2 pi N |4/(3 gamma)|^(1/3) Ai(cbrt(4/(3 gamma)) (3 gamma x^2 - p)),
    with N fixed so the displayed-area grid sum integrates to 1 (the ideal
    state is not normalizable globally).
    """
    gamma = float(gamma)
    if gamma == 0.0:
        raise ValueError("gamma = 0 degenerates the cubic state to a p eigenstate")
    x_axis, p_axis = axes
    xs = _axis_values(x_axis)
    if x_axis[0] == -x_axis[1]:
        xs = (xs - xs[::-1]) / 2.0  # bit-exact mirror pairs so W(-x,p) == W(x,p)
    ps = _axis_values(p_axis)
    scale = np.cbrt(4.0 / (3.0 * gamma))
    arg = scale * (3.0 * gamma * xs[:, None] ** 2 - ps[None, :])
    if np.min(arg) < -_DOMAIN_BOUND:
        raise OverflowGuardError(
            "axes push the Airy argument below -40; shrink the grid or raise gamma"
        )
    vals = np.zeros_like(arg)
    inside = arg <= _DOMAIN_BOUND  # Ai(>40) < 1e-70: identically 0 at double precision
    flat = arg[inside]
    vals[inside] = np.fromiter((airy(a) for a in flat), dtype=np.float64, count=flat.size)
    vals *= abs(scale)
    grid = WignerGrid(x_axis, p_axis, vals)
    total = grid.integral()
    if total <= 0.0:
        raise CoverageError("grid captures no net Airy mass; enlarge the axes")
    return WignerGrid(x_axis, p_axis, vals / total)


# ---------------------------------------------------------------------------
# Measurement projectors


def pure_projection_state(ancilla, q: float, y: float):
    """State projected on by the heterodyne with ancilla psi_A and results (q, y).

    For a wavefunction callable psi_A the projection state is returned as the
    callable  phi(u) = psi_A*(u - sqrt(2) q) exp(i sqrt(2) (u - sqrt(2) q) y).
    For a Fock-basis :class:`StateVector` the same state is built algebraically
    as a displacement of the conjugated coefficient vector on a margin-padded
    dimension (equal up to a global phase).
    """
    rt2 = math.sqrt(2.0)
    if callable(ancilla):
        def phi(u):
            shifted = np.asarray(u, dtype=np.float64) - rt2 * q
            return np.conj(ancilla(shifted)) * np.exp(1j * rt2 * shifted * y)

        return phi
    if not isinstance(ancilla, StateVector) or ancilla.n_modes != 1:
        raise ValueError("ancilla must be a single-mode StateVector or a callable")
    if not ancilla.normalized:
        raise PreconditionError("ancilla must be normalized")
    coeffs = np.conj(ancilla.amplitudes.ravel())  # time reversal in Fock basis
    amp2 = 2.0 * (q * q + y * y)
    pad = math.ceil(amp2 + 6.0 * math.sqrt(amp2 + 1.0) + 12.0)
    dim_out = len(coeffs) + pad
    import warnings as _warnings

    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        d = displacement_op(complex(q, y), dim_out)
    padded = np.zeros(dim_out, dtype=np.complex128)
    padded[: len(coeffs)] = coeffs
    out = d.entries @ padded
    nrm = np.linalg.norm(out)
    if abs(nrm - 1.0) > 1e-6:
        raise TruncationError(f"projection state norm drifted to {nrm!r}")
    return StateVector((dim_out,), out / nrm)


def _resample(ancilla: WignerGrid, xa: np.ndarray, pa: np.ndarray) -> np.ndarray:
    interp = ancilla.interpolator()
    pts = np.stack([xa.ravel(), pa.ravel()], axis=-1)
    # forgive roundoff-level excursions beyond the edge
    eps = 1e-9
    lo = np.array([ancilla.x_axis[0], ancilla.p_axis[0]])
    hi = np.array([ancilla.x_axis[1], ancilla.p_axis[1]])
    beyond = np.maximum(lo - pts, 0.0).max() + np.maximum(pts - hi, 0.0).max()
    if beyond > eps:
        raise CoverageError(
            "projector support exceeds the ancilla grid "
            f"(out of bounds by {beyond:.3e})"
        )
    pts = np.clip(pts, lo, hi)
    return interp(pts).reshape(xa.shape)


def projector_wigner(
    ancilla: WignerGrid, q: float, y: float, axes: tuple[Axis, Axis] | None = None
) -> WignerGrid:
    """Balanced-heterodyne projector W_M(x, p | q, y) = 2 W_A(x - sqrt2 q, -p + sqrt2 y)."""
    x_axis, p_axis = axes if axes is not None else (ancilla.x_axis, ancilla.p_axis)
    xs = _axis_values(x_axis)
    ps = _axis_values(p_axis)
    rt2 = math.sqrt(2.0)
    xa = np.broadcast_to((xs - rt2 * q)[:, None], (xs.size, ps.size))
    pa = np.broadcast_to((-ps + rt2 * y)[None, :], (xs.size, ps.size))
    return WignerGrid(x_axis, p_axis, 2.0 * _resample(ancilla, xa, pa))


def generalized_projector_wigner(
    ancilla: WignerGrid,
    params: ProjectorParams,
    axes: tuple[Axis, Axis] | None = None,
) -> WignerGrid:
    """Unbalanced/rotated projector, evaluated literally by coordinate transform.

    W_M(x, p | q, y) = 1/|sqrt(RT) cos(theta)| *
        W_A( sqrt(T/R) x - q/sqrt(R),
             -sqrt(R/T) p - tan(theta)/sqrt(RT) x + q tan(theta)/sqrt(R)
             + y/(sqrt(T) cos(theta)) ).
    """
    T, R = params.T, params.R
    q, y, theta = params.q, params.y, params.theta
    x_axis, p_axis = axes if axes is not None else (ancilla.x_axis, ancilla.p_axis)
    xs = _axis_values(x_axis)
    ps = _axis_values(p_axis)
    tan_t, cos_t = math.tan(theta), math.cos(theta)
    xa = (np.sqrt(T / R) * xs - q / np.sqrt(R))[:, None] + 0.0 * ps[None, :]
    pa = (
        -np.sqrt(R / T) * ps[None, :]
        - (tan_t / np.sqrt(R * T)) * xs[:, None]
        + q * tan_t / np.sqrt(R)
        + y / (np.sqrt(T) * cos_t)
    )
    pref = 1.0 / abs(np.sqrt(R * T) * cos_t)
    return WignerGrid(x_axis, p_axis, pref * _resample(ancilla, xa, pa))


def sign_changes_along_p(grid: WignerGrid, x: float = 0.0, atol: float = 1e-12) -> int:
    """Number of sign changes of p -> W(x, p); the fringe count diagnostic."""
    xs = grid.x_values()
    i = int(np.argmin(np.abs(xs - x)))
    row = grid.values[i]
    signs = np.sign(row[np.abs(row) > atol])
    return int(np.sum(signs[1:] != signs[:-1]))
