"""Optimal finite-photon ancillas for the cubic gate.

The figure of merit is the variance of the rescaled nonlinear quadrature
y(lambda') = lambda' p - 3 (x / lambda')^2.  For fixed (lambda', d) the best
superposition up to N photons is the minimum eigenvector of the quadratic
form Y(lambda', d) = <m|[y(lambda') - d]^2|n>, which turns the state search
into a two-variable optimization: a coarse minimum-search map over
(lambda', d) followed by coordinate descent with golden-section line
searches.  At the optimum d equals <y(lambda')>, so the smallest eigenvalue
is the optimal variance itself.

Phase convention for eigenvectors: even-photon coefficients real, odd ones
purely imaginary (the quadratic form commutes with parity composed with
conjugation), with the overall sign fixed so the lowest even coefficient of
non-negligible modulus is positive.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .fock import OperatorMatrix, StateVector, _readonly, quadrature_ops
from .phasespace import Axis, _axis_values

__all__ = [
    "AncillaOptimum",
    "SearchMap",
    "OptimizerConfig",
    "nlq_operator",
    "y_shifted_squared",
    "min_eigpair",
    "search_map",
    "optimize_ancilla",
    "variance_ratio_table",
    "nlq_moments",
    "gaussian_limit_variance",
]

SHOT_NOISE = 0.5
WORKING_MARGIN = 9  # two factors of a form that raises at most 4 quanta

#: Analytic N = 0 solution: minimizing lam^2/2 + 9/(2 lam^4) over lam.
GAUSSIAN_LIMIT_LAMBDA = 18.0 ** (1.0 / 6.0)
GAUSSIAN_LIMIT_VARIANCE = 0.75 * 18.0 ** (1.0 / 3.0)


def gaussian_limit_variance() -> float:
    """Minimum nonlinear-quadrature variance over Gaussian states (N = 0)."""
    return GAUSSIAN_LIMIT_VARIANCE


def nlq_operator(lambda_prime: float, dim: int) -> OperatorMatrix:
    """y(lambda') = lambda' P - 3 X^2 / lambda'^2, crop-exact for indices <= dim-3."""
    lam = float(lambda_prime)
    if lam == 0.0:
        raise ValueError("lambda' must be nonzero")
    big = dim + 3
    x, p = quadrature_ops(big)
    y = lam * p.entries - 3.0 * (x.entries @ x.entries) / lam**2
    return OperatorMatrix(dim, y[:dim, :dim], hermitian=True)


def _y_and_square(lambda_prime: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """(y, y^2) exact on the leading dim x dim block."""
    big = dim + WORKING_MARGIN
    y = nlq_operator(lambda_prime, big).entries
    y2 = (y @ y)[:dim, :dim]
    return y[:dim, :dim], y2


def y_shifted_squared(lambda_prime: float, d: float, N: int) -> OperatorMatrix:
    """Matrix of [y(lambda') - d]^2 on the (N+1)-photon space, crop-exact."""
    if N < 0:
        raise ValueError("N must be >= 0")
    y, y2 = _y_and_square(lambda_prime, N + 1)
    m = y2 - 2.0 * float(d) * y + float(d) ** 2 * np.eye(N + 1)
    m = (m + m.conj().T) / 2.0  # scrub roundoff asymmetry
    return OperatorMatrix(N + 1, m, hermitian=True)


def _phase_fix(vec: np.ndarray) -> np.ndarray:
    """Rotate to the even-real / odd-imaginary convention, lowest even coeff > 0."""
    n = np.arange(len(vec))
    w = vec * (-1j) ** (n % 4)
    s = np.sum(w * w)
    phi = 0.5 * np.angle(s) if abs(s) > 1e-14 else -np.angle(
        w[np.argmax(np.abs(w))]
    )
    v = vec * np.exp(-1j * phi)
    even = np.arange(0, len(vec), 2)
    big_even = even[np.abs(v[even]) > 1e-6]
    if big_even.size:
        if np.real(v[big_even[0]]) < 0:
            v = -v
    else:
        odd = np.arange(1, len(vec), 2)
        big_odd = odd[np.abs(v[odd]) > 1e-6]
        if big_odd.size and np.imag(v[big_odd[0]]) > 0:
            v = -v  # first odd coefficient -i-positive, as in the N = 3 optimum
    return v


def min_eigpair(Y: OperatorMatrix) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and phase-fixed unit eigenvector of a hermitian matrix.

    Under degeneracy the eigenvector whose largest-modulus component sits at
    the lowest index is chosen, which makes results reproducible bit for bit.
    """
    m = Y.entries
    if np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise ValueError("min_eigpair requires a hermitian matrix")
    w, v = np.linalg.eigh((m + m.conj().T) / 2.0)
    lam0 = w[0]
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    degenerate = np.nonzero(w <= lam0 + 1e-12 * scale)[0]
    best, best_key = None, None
    for k in degenerate:
        key = int(np.argmax(np.abs(v[:, k]) - 1e-12 * np.arange(v.shape[0])))
        if best_key is None or key < best_key:
            best, best_key = k, key
    return float(lam0), _phase_fix(v[:, best])


@dataclass(frozen=True)
class SearchMap:
    """Minimum eigenvalue of Y(lambda', d) on a rectangular (lambda', d) grid."""

    lambda_axis: Axis
    d_axis: Axis
    min_eigenvalues: np.ndarray
    N: int

    def __post_init__(self):
        vals = np.asarray(self.min_eigenvalues, dtype=np.float64)
        nl, nd = int(self.lambda_axis[2]), int(self.d_axis[2])
        if vals.shape != (nl, nd):
            raise ValueError(f"map shape {vals.shape} != ({nl}, {nd})")
        object.__setattr__(self, "min_eigenvalues", _readonly(vals))

    @property
    def db_values(self) -> np.ndarray:
        """Same data as 10 log10(value / shot noise)."""
        return 10.0 * np.log10(np.maximum(self.min_eigenvalues, 1e-300) / SHOT_NOISE)

    def lambda_values(self) -> np.ndarray:
        return _axis_values(self.lambda_axis)

    def d_values(self) -> np.ndarray:
        return _axis_values(self.d_axis)

    def argmin(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmin(self.min_eigenvalues), self.min_eigenvalues.shape)
        return float(self.lambda_values()[i]), float(self.d_values()[j])

    def to_csv(self, path, unit: str = "raw") -> None:
        if unit not in ("raw", "dB"):
            raise ValueError("unit must be 'raw' or 'dB'")
        vals = self.min_eigenvalues if unit == "raw" else self.db_values
        l0, l1, nl = self.lambda_axis
        d0, d1, nd = self.d_axis
        with open(path, "w") as fh:
            fh.write(f"# {l0:.17g} {l1:.17g} {nl} {d0:.17g} {d1:.17g} {nd}\n")
            fh.write(f"# unit: {unit}\n")
            for row in vals:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path, N: int = -1) -> "SearchMap":
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip()]
        grid = next(ln for ln in lines if ln.startswith("#") and "unit" not in ln)
        unit_line = next(ln for ln in lines if ln.startswith("#") and "unit" in ln)
        unit = unit_line.split(":", 1)[1].strip()
        parts = grid[1:].split()
        l_axis = (float(parts[0]), float(parts[1]), int(parts[2]))
        d_axis = (float(parts[3]), float(parts[4]), int(parts[5]))
        rows = [ln for ln in lines if not ln.startswith("#")]
        vals = np.array([[float(v) for v in ln.split(",")] for ln in rows])
        if unit == "dB":
            vals = SHOT_NOISE * 10.0 ** (vals / 10.0)
        return cls(l_axis, d_axis, vals, N=N)


def _column_min_eigs(lambda_prime: float, ds: np.ndarray, N: int) -> np.ndarray:
    y, y2 = _y_and_square(lambda_prime, N + 1)
    eye = np.eye(N + 1)
    out = np.empty(ds.size)
    for j, d in enumerate(ds):
        m = y2 - 2.0 * d * y + d * d * eye
        out[j] = np.linalg.eigvalsh((m + m.conj().T) / 2.0)[0]
    return out


def search_map(
    N: int,
    lambda_range: tuple[float, float] = (0.3, 4.0),
    d_range: tuple[float, float] = (-12.0, 2.0),
    counts: tuple[int, int] = (160, 160),
    workers: int = 1,
) -> SearchMap:
    """Grid of min eigenvalues of Y(lambda', d); the paper-style search map.

    Columns are independent; with ``workers > 1`` they are computed in a
    thread pool and reassembled by index, so the result does not depend on
    scheduling.
    """
    lo, hi = float(lambda_range[0]), float(lambda_range[1])
    if lo <= 0.0 <= hi or lo * hi < 0:
        raise ValueError("lambda' range must exclude zero (split it instead)")
    lams = np.linspace(lo, hi, int(counts[0]))
    ds = np.linspace(float(d_range[0]), float(d_range[1]), int(counts[1]))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(lambda lam: _column_min_eigs(lam, ds, N), lams))
    else:
        cols = [_column_min_eigs(lam, ds, N) for lam in lams]
    vals = np.stack(cols, axis=0)
    return SearchMap((lo, hi, int(counts[0])), (float(d_range[0]), float(d_range[1]), int(counts[1])), vals, N=int(N))


@dataclass(frozen=True)
class OptimizerConfig:
    lambda_range: tuple[float, float] = (0.3, 4.0)
    d_range: tuple[float, float] = (-12.0, 2.0)
    coarse_counts: tuple[int, int] = (160, 160)
    tol: float = 1e-9
    max_iterations: int = 10_000
    workers: int = 1


@dataclass(frozen=True)
class AncillaOptimum:
    """Result of the two-variable ancilla optimization for photon cutoff N.

    ``coefficients`` follow the parity phase convention; ``p0`` is the
    mean-cancelling p displacement in the gamma = 1 frame (scale by
    gamma^(1/3) for other cubic strengths), i.e. p0 = -d_opt.
    """

    N: int
    coefficients: np.ndarray
    lambda_opt: float
    d_opt: float
    variance: float
    ratio: float
    p0: float
    working_dim: int

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.shape != (self.N + 1,):
            raise ValueError("coefficient count must be N + 1")
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise ValueError("coefficients must be normalized")
        object.__setattr__(self, "coefficients", _readonly(c))

    def state(self, dim: int | None = None) -> StateVector:
        dim = dim or self.N + 1
        amps = np.zeros(max(dim, self.N + 1, 2), dtype=np.complex128)
        amps[: self.N + 1] = self.coefficients
        return StateVector((len(amps),), amps)

    def to_json_dict(self) -> dict:
        return {
            "N": self.N,
            "coefficients": [[float(z.real), float(z.imag)] for z in self.coefficients],
            "lambda_opt": self.lambda_opt,
            "d_opt": self.d_opt,
            "variance": self.variance,
            "ratio": self.ratio,
            "p0": self.p0,
            "working_dim": self.working_dim,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AncillaOptimum":
        coeffs = np.array([complex(re, im) for re, im in d["coefficients"]])
        return cls(
            int(d["N"]), coeffs, float(d["lambda_opt"]), float(d["d_opt"]),
            float(d["variance"]), float(d["ratio"]), float(d["p0"]),
            int(d["working_dim"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f, a: float, b: float, tol: float) -> float:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _min_over_d(lambda_prime: float, d_start: float, N: int, tol: float,
                budget: list) -> tuple[float, float]:
    """Exact d coordinate minimization at fixed lambda'.

    The optimal d is the fixed point d = <y(lambda')> of the minimum
    eigenvector (envelope stationarity of min_psi <[y - d]^2>), reached in a
    few contraction steps; this replaces zigzag-prone 1-D searches in d.
    """
    y, y2 = _y_and_square(lambda_prime, N + 1)
    eye = np.eye(N + 1)
    d = d_start
    for _ in range(100):
        budget[0] += 1
        m = y2 - 2.0 * d * y + d * d * eye
        w, v = np.linalg.eigh((m + m.conj().T) / 2.0)
        vec = v[:, 0]
        d_next = float(np.real(np.vdot(vec, y @ vec)))
        if abs(d_next - d) < tol / 10.0:
            return float(w[0]), d_next
        d = d_next
    return float(w[0]), d


def optimize_ancilla(N: int, config: OptimizerConfig = OptimizerConfig()) -> AncillaOptimum:
    """Coarse search-map scan followed by coordinate descent refinement.

    The refinement alternates golden-section line searches in lambda' with
    exact coordinate minimization in d (the fixed point d = <y(lambda')> of
    the current eigenvector) until both moves fall below ``config.tol``; the
    returned optimum therefore satisfies d_opt = <y(lambda_opt)>.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    coarse = search_map(
        N, config.lambda_range, config.d_range, config.coarse_counts,
        workers=config.workers,
    )
    lam, d = coarse.argmin()
    step_l = (config.lambda_range[1] - config.lambda_range[0]) / (config.coarse_counts[0] - 1)

    budget = [0]

    def ridge(lam_: float, d_hint: float) -> tuple[float, float]:
        return _min_over_d(lam_, d_hint, N, config.tol, budget)

    _, d = ridge(lam, d)
    br_l = 1.5 * step_l
    iterations = 0
    while True:
        lam_new = _golden_min(
            lambda L: ridge(L, d)[0], max(lam - br_l, 1e-6), lam + br_l, config.tol / 10
        )
        move_l = abs(lam_new - lam)
        _, d_new = ridge(lam_new, d)
        moved = max(move_l, abs(d_new - d))
        lam, d = lam_new, d_new
        iterations += 1
        if moved < config.tol:
            break
        br_l = max(min(br_l, 8.0 * move_l + 2.0 * config.tol), 64.0 * config.tol)
        if iterations >= config.max_iterations or budget[0] > 10_000_000:
            raise ConvergenceError(
                f"refinement did not converge after {iterations} sweeps",
                best=(lam, d, min_eigpair(y_shifted_squared(lam, d, N))[0]),
            )

    variance, vec = min_eigpair(y_shifted_squared(lam, d, N))
    v0 = GAUSSIAN_LIMIT_VARIANCE
    return AncillaOptimum(
        N=int(N),
        coefficients=vec,
        lambda_opt=float(lam),
        d_opt=float(d),
        variance=float(variance),
        ratio=float(variance / v0) if N > 0 else 1.0,
        p0=float(-d),
        working_dim=int(N + 1 + WORKING_MARGIN),
    )


def variance_ratio_table(
    N_max: int, config: OptimizerConfig = OptimizerConfig()
) -> list[tuple[int, float, float]]:
    """(N, V_N_opt, V_N_opt / V_0_opt) for N = 0..N_max; gamma-independent."""
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    return [
        (n, opt.variance, opt.ratio)
        for n in range(N_max + 1)
        for opt in (optimize_ancilla(n, config),)
    ]


def nlq_moments(
    state: StateVector, lambda_prime: float, gamma: float, p0: float = 0.0
) -> tuple[float, float]:
    """Mean and variance of the physical nonlinear quadrature on a state.

    mean = gamma^(1/3) <y(lambda')> + p0, variance = gamma^(2/3) Var(y(lambda')).
    """
    if state.n_modes != 1:
        raise ValueError("nlq_moments takes a single-mode state")
    if not state.normalized:
        raise ValueError("state must be normalized")
    dim = state.mode_dims[0]
    y, y2 = _y_and_square(lambda_prime, dim)
    v = state.amplitudes.ravel()
    ey = float(np.real(np.vdot(v, y @ v)))
    ey2 = float(np.real(np.vdot(v, y2 @ v)))
    g13 = np.cbrt(float(gamma))
    return g13 * ey + p0, g13 * g13 * (ey2 - ey * ey)
