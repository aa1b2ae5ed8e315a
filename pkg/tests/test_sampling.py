"""Homodyne sampler: moments, goodness of fit, coverage guards."""

import numpy as np
import pytest
from scipy import stats

from cubist import (
    CoverageError,
    GridSpec,
    StateVector,
    fock_state,
    homodyne_pdf,
    sample_homodyne,
    sample_homodyne_batch,
    squeezed_vacuum_state,
    vacuum,
)
from cubist.fock import default_grid_spec

from conftest import random_state

N_SAMPLES = 100_000


def test_vacuum_moments(rng):
    values = sample_homodyne_batch(vacuum(6), 0, 0.0, rng, N_SAMPLES)
    assert abs(values.mean()) < 0.01
    assert abs(values.var() - 0.5) < 0.01


def test_squeezed_vacuum_variance(rng):
    state = squeezed_vacuum_state(10.0, 60)
    values = sample_homodyne_batch(state, 0, 0.0, rng, N_SAMPLES)
    assert abs(values.var() - 0.05) < 0.002


def test_conditional_normalized(rng):
    st = StateVector((4, 5), random_state(rng, (4, 5)))
    value, conditional = sample_homodyne(st, 0, 0.3, rng)
    assert conditional.normalized
    assert abs(conditional.norm() - 1.0) < 1e-10
    assert np.isfinite(value)


def test_sequential_matches_distribution(rng):
    # a handful of scalar draws should land inside the tabulated support
    spec = default_grid_spec(vacuum(6), 0, 0.0)
    for _ in range(5):
        v, _ = sample_homodyne(vacuum(6), 0, 0.0, rng, spec)
        assert spec.lo <= v <= spec.hi


def _chi_square_pvalue(state, angle, rng, n=N_SAMPLES, bins=61):
    values = sample_homodyne_batch(state, 0, angle, rng, n)
    _, m2 = __import__("cubist").fock.rotated_quadrature_moments(state, 0, angle)
    sigma = np.sqrt(m2)
    edges = np.linspace(-5 * sigma, 5 * sigma, bins)
    observed, _ = np.histogram(values, bins=edges)
    fine = np.linspace(edges[0], edges[-1], (bins - 1) * 40 + 1)
    dens = homodyne_pdf(state, 0, angle, fine)
    cdf = np.concatenate(
        ([0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(fine)))
    )
    idx = np.searchsorted(fine, edges)
    probs = np.diff(cdf[idx])
    expected = probs / probs.sum() * observed.sum()
    keep = expected > 5
    obs, exp = observed[keep], expected[keep]
    exp *= obs.sum() / exp.sum()
    _, p = stats.chisquare(obs, exp)
    return p


@pytest.mark.parametrize("label", ["vacuum", "fock1", "random6"])
def test_chi_square_goodness_of_fit(label, rng):
    if label == "vacuum":
        state = vacuum(6)
    elif label == "fock1":
        state = fock_state(1, 6)
    else:
        state = StateVector((6,), random_state(rng, 6))
    p = _chi_square_pvalue(state, 0.0, rng)
    assert p > 0.001, f"chi-square p-value {p} for {label}"


def test_coverage_error_on_small_grid(rng):
    with pytest.raises(CoverageError):
        sample_homodyne(vacuum(6), 0, 0.0, rng, GridSpec(-0.3, 0.3, 64))


def test_default_grid_is_eight_sigma():
    spec = default_grid_spec(vacuum(6), 0, 0.0)
    assert spec.hi == pytest.approx(8.0 * np.sqrt(0.5), rel=1e-12)
    assert spec.lo == -spec.hi
    assert spec.bins == 4096
