"""
Tests for the finite-volume Fokker-Planck solver.
"""

import numpy as np
import pytest

from coupled_mkv.fokker_planck import (
    DensityPair,
    DomainAdequacyError,
    FluxScheme,
    Grid1D,
    StepSizeError,
    assemble_drift_field,
    chang_cooper_delta,
    check_domain,
    fp_evolve,
    fp_residual,
    fp_step,
    grid_moments,
)
from coupled_mkv.invariant import MeanPair, StationaryPair, symmetric_invariant
from coupled_mkv.model import drift_x
from coupled_mkv.util import InvalidArgumentError

# Mark all tests in this file as unit tests
pytestmark = pytest.mark.unit


def gibbs_pair(grid: Grid1D, diffusion: float) -> StationaryPair:
    """exp(-x^2 / (2 D)) at the cell centers for both species."""
    x = grid.centers
    rho = np.exp(-(x**2) / (2.0 * diffusion))
    rho /= grid.h * rho.sum()
    return StationaryPair(grid=x, mu=rho, nu=rho.copy(), means=MeanPair(0.0, 0.0), residual=0.0)


@pytest.mark.parametrize(
    "x_min,x_max,n_cells",
    [(-1.0, 1.0, 8), (1.0, 1.0, 32), (2.0, -2.0, 32)],
    ids=["too-few-cells", "empty", "reversed"],
)
def test_grid_validation(x_min, x_max, n_cells):
    """At least 16 cells on a non-empty interval."""
    with pytest.raises(InvalidArgumentError):
        Grid1D(x_min, x_max, n_cells)


def test_grid_geometry():
    """Centers, interior faces and refinement."""
    grid = Grid1D.symmetric(2.0, 16)
    assert grid.h == 0.25
    assert grid.centers[0] == pytest.approx(-1.875)
    assert grid.interior_faces.size == 15
    assert grid.refined().n_cells == 32


def test_chang_cooper_delta_limits():
    """delta runs from 1 at w -> -inf through 1/2 at 0 to 0 at w -> +inf."""
    delta = chang_cooper_delta(np.array([-800.0, -50.0, 0.0, 1e-7, 50.0, 800.0]))
    assert delta[0] == pytest.approx(1.0, abs=1e-2)
    assert delta[1] == pytest.approx(0.98)
    assert delta[2] == 0.5
    assert delta[3] == pytest.approx(0.5, abs=1e-6)
    assert delta[4] == pytest.approx(0.02)
    assert delta[5] == pytest.approx(1.0 / 800.0)
    assert np.all(np.isfinite(delta))


def test_gaussian_density_pair():
    """Gaussian cell values carry unit mass and the requested means."""
    grid = Grid1D.symmetric(4.0, 128)
    dp = DensityPair.gaussian(grid, 0.5, 0.1, -0.5, 0.2)
    assert dp.masses(grid) == pytest.approx((1.0, 1.0))
    m1, m2 = dp.means(grid)
    assert m1 == pytest.approx(0.5, abs=1e-10)
    assert m2 == pytest.approx(-0.5, abs=1e-10)
    assert dp.l1_distance(dp, grid) == (0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        DensityPair(mu=np.ones(4), nu=np.ones(5))


def test_grid_moments_normalized():
    """m_0 is one regardless of the total mass."""
    grid = Grid1D.symmetric(4.0, 64)
    dp = DensityPair.gaussian(grid, 0.0, 0.5, 0.0, 0.5)
    moments = grid_moments(3.0 * dp.mu, grid, 4)
    assert moments[0] == 1.0
    assert moments[1] == pytest.approx(0.0, abs=1e-12)
    assert moments[2] == pytest.approx(0.5, rel=1e-3)


def test_drift_field_from_point_mass(double_well_config):
    """A density concentrated in one cell gives the point-mass drift at every face."""
    grid = Grid1D.symmetric(3.0, 32)
    mu = np.zeros(grid.n_cells)
    nu = np.zeros(grid.n_cells)
    mu[20] = 1.0 / grid.h
    nu[10] = 1.0 / grid.h
    b_mu, b_nu = assemble_drift_field(DensityPair(mu=mu, nu=nu), double_well_config, grid)
    x1, x2 = grid.centers[20], grid.centers[10]
    mu_m = [x1**k for k in range(5)]
    nu_m = [x2**k for k in range(5)]
    expected = -np.asarray(drift_x(double_well_config, grid.interior_faces, mu_m, nu_m))
    np.testing.assert_allclose(b_mu, expected, rtol=1e-12, atol=1e-12)
    assert b_nu.shape == b_mu.shape


def test_discrete_gibbs_density_has_zero_flux(test_factory):
    """Chang-Cooper weighting makes exp(-x^2 / 2D) exactly stationary for V = x^2/2."""
    cfg = test_factory.create_config(v1=(0.0, 0.0, 0.5), sigma=0.5)
    grid = Grid1D.symmetric(3.0, 64)
    res_mu, res_nu = fp_residual(gibbs_pair(grid, 0.125), cfg, grid)
    assert res_mu < 1e-10
    assert res_nu < 1e-10


def test_residual_requires_cell_centers(quadratic_config):
    """The stationary pair must be sampled at the grid's cell centers."""
    grid = Grid1D.symmetric(3.0, 64)
    with pytest.raises(InvalidArgumentError):
        fp_residual(gibbs_pair(Grid1D.symmetric(3.0, 32), 0.125), quadratic_config, grid)


def test_step_conserves_mass(double_well_config):
    """Zero boundary fluxes and telescoping interior fluxes keep both masses."""
    cfg = double_well_config.with_updates(sigma=0.5)
    grid = Grid1D.symmetric(3.0, 64)
    result = fp_evolve(DensityPair.gaussian(grid, 0.5, 0.1, -0.3, 0.1), cfg, grid, 0.5, 0.001)
    np.testing.assert_allclose(result.masses, 1.0, rtol=0, atol=1e-10)
    assert result.final.mu.min() >= 0.0


def test_evolution_commutes_with_reflection(double_well_config):
    """For even potentials, evolving the mirrored densities gives the mirrored result."""
    cfg = double_well_config.with_updates(sigma=0.5)
    grid = Grid1D.symmetric(3.0, 64)
    dp = DensityPair.gaussian(grid, 0.5, 0.1, -0.3, 0.1)
    mirrored = DensityPair(mu=dp.mu[::-1].copy(), nu=dp.nu[::-1].copy())
    forward = fp_evolve(dp, cfg, grid, 1.0, 0.001).final
    reflected = fp_evolve(mirrored, cfg, grid, 1.0, 0.001).final
    np.testing.assert_allclose(reflected.mu, forward.mu[::-1], rtol=0, atol=1e-10)
    np.testing.assert_allclose(reflected.nu, forward.nu[::-1], rtol=0, atol=1e-10)

    even = fp_evolve(DensityPair.gaussian(grid, 0.0, 0.2, 0.0, 0.2), cfg, grid, 1.0, 0.001).final
    np.testing.assert_allclose(even.mu, even.mu[::-1], rtol=0, atol=1e-10)
    np.testing.assert_allclose(even.mu, even.nu, rtol=0, atol=1e-10)


def test_step_rejects_large_dt(quadratic_config):
    """dt above the stability bound is reported, not subdivided."""
    grid = Grid1D.symmetric(3.0, 64)
    dp = DensityPair.gaussian(grid, 0.0, 0.1, 0.0, 0.1)
    with pytest.raises(StepSizeError):
        fp_step(dp, quadratic_config, grid, 1.0)
    with pytest.raises(StepSizeError):
        fp_step(dp, quadratic_config, grid, 0.0)


def test_pure_diffusion_variance_growth(test_factory):
    """Without drift the discrete variance grows by sigma^2 dt per step."""
    cfg = test_factory.create_config(v1=(0.0,), sigma=0.5)
    grid = Grid1D.symmetric(4.0, 128)
    dp0 = DensityPair.gaussian(grid, 0.0, 0.1, 0.0, 0.1)
    result = fp_evolve(dp0, cfg, grid, 0.1, 0.005)

    def variance(rho: np.ndarray) -> float:
        x = grid.centers
        mean = grid.h * (x * rho).sum()
        return float(grid.h * (x**2 * rho).sum() - mean**2)

    assert variance(result.final.mu) - variance(dp0.mu) == pytest.approx(0.025, abs=1e-10)


def test_ornstein_uhlenbeck_relaxes_to_gibbs(test_factory):
    """Harmonic confinement without interaction relaxes to the discrete Gibbs density."""
    cfg = test_factory.create_config(v1=(0.0, 0.0, 0.5), sigma=0.5)
    grid = Grid1D.symmetric(3.0, 64)
    result = fp_evolve(DensityPair.gaussian(grid, 0.5, 0.05, -0.5, 0.05), cfg, grid, 10.0, 0.01)
    target = gibbs_pair(grid, 0.125)
    l1_mu, l1_nu = result.final.l1_distance(DensityPair(mu=target.mu, nu=target.nu), grid)
    assert l1_mu < 1e-3
    assert l1_nu < 1e-3


def test_residual_second_order_for_central_scheme(double_well_config):
    """The central-flux residual of the continuous invariant density shrinks like h^2."""
    cfg = double_well_config.with_updates(sigma=0.5)
    residuals = []
    for n_cells in (128, 256, 512):
        grid = Grid1D.symmetric(3.0, n_cells)
        sp = symmetric_invariant(cfg, grid.centers)
        residuals.append(sum(fp_residual(sp, cfg, grid, FluxScheme.CENTRAL)))
    orders = [np.log2(a / b) for a, b in zip(residuals, residuals[1:])]
    assert min(orders) >= 1.8


def test_initial_data_must_fit_domain(quadratic_config):
    """Mass at the boundary cells is rejected before evolving."""
    grid = Grid1D.symmetric(3.0, 64)
    dp = DensityPair.gaussian(grid, 2.9, 0.1, 0.0, 0.1)
    with pytest.raises(DomainAdequacyError):
        check_domain(dp)
    with pytest.raises(DomainAdequacyError):
        fp_evolve(dp, quadratic_config, grid, 0.1, 0.005)


def test_evolve_records_and_snapshots(quadratic_config):
    """Records every stride plus the final step; snapshots are optional."""
    grid = Grid1D.symmetric(3.0, 64)
    dp = DensityPair.gaussian(grid, 0.0, 0.1, 0.0, 0.1)
    result = fp_evolve(dp, quadratic_config, grid, 0.1, 0.005, record_stride=5, keep_snapshots=True)
    np.testing.assert_allclose(result.times, [0.0, 0.025, 0.05, 0.075, 0.1])
    assert result.means.shape == (5, 2)
    assert len(result.snapshots) == 5
    assert len(result.snapshot_rows(grid)) == 5 * 64
    with pytest.raises(InvalidArgumentError):
        fp_evolve(dp, quadratic_config, grid, 0.1, 0.03)
    with pytest.raises(InvalidArgumentError):
        fp_evolve(dp, quadratic_config, grid, 0.1, 0.005, record_stride=0)
