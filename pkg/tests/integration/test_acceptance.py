"""
End-to-end numerical acceptance checks.

These tests run the full pipelines on the reference double-well and harmonic
models. They take seconds to minutes and are marked slow.
"""

import json

import numpy as np
import pytest
import yaml
from typer.testing import CliRunner

from coupled_mkv.cli import app
from coupled_mkv.fokker_planck import (
    DensityPair,
    Grid1D,
    assemble_drift_field,
    fp_evolve,
    fp_residual,
    max_stable_dt,
)
from coupled_mkv.invariant import (
    MeanPair,
    QuadratureRule,
    default_starts,
    fixed_points,
    locate_transition,
    stationary_density,
)
from coupled_mkv.model import ModelConfig
from coupled_mkv.picard import MonteCarloParams, picard_solve
from coupled_mkv.poc import rate_fit, run_schedule
from coupled_mkv.sde import Ensemble, InitialLaw, SimParams, simulate

pytestmark = [pytest.mark.integration, pytest.mark.slow]


@pytest.fixture
def double_well_roots(double_well_config):
    """Roots of the self-consistency map at sigma = 0.3 from the 7x7 start grid."""
    rule = QuadratureRule.build(double_well_config, m_box=2.0)
    return fixed_points(double_well_config, rule, default_starts(2.0, 7))


@pytest.mark.timeout(60)
def test_double_well_has_three_invariant_measures(double_well_roots, test_assertions):
    """The symmetric root and a pair of opposite polarized roots coexist at sigma = 0.3."""
    means = double_well_roots.means()
    assert double_well_roots.count >= 3
    test_assertions.assert_contains_mean(means, MeanPair(0.0, 0.0), 1e-6)
    polarized = [m for m in means if m.m1 > 0.5 and m.m2 > 0.5]
    assert polarized
    test_assertions.assert_contains_mean(means, -polarized[0], 1e-6)


@pytest.mark.timeout(300)
def test_pde_holds_invariant_densities(double_well_config, double_well_roots):
    """Each root's density barely moves under the PDE and the residual converges at order 2."""
    grid = Grid1D.symmetric(2.5, 512)
    dt = 2.5e-4
    rule = QuadratureRule.build(double_well_config, m_box=2.0)
    for root in double_well_roots.roots:
        pair = stationary_density(root.mean, double_well_config, grid.centers, rule)
        dp0 = DensityPair.from_stationary(pair, grid)
        b_mu, b_nu = assemble_drift_field(dp0, double_well_config, grid)
        assert dt <= max_stable_dt(b_mu, b_nu, double_well_config, grid)
        evo = fp_evolve(dp0, double_well_config, grid, 5.0, dt, record_stride=1000)
        l1_mu, l1_nu = evo.final.l1_distance(dp0, grid)
        assert l1_mu < 1e-3 and l1_nu < 1e-3, f"root {root.mean} drifts by {l1_mu}, {l1_nu}"

    symmetric = double_well_roots.roots[
        int(np.argmin([r.mean.distance(MeanPair(0.0, 0.0)) for r in double_well_roots.roots]))
    ]
    residuals = []
    for n_cells in (128, 256, 512):
        g = Grid1D.symmetric(2.5, n_cells)
        sp = stationary_density(symmetric.mean, double_well_config, g.centers, rule)
        residuals.append(sum(fp_residual(sp, double_well_config, g)))
    orders = [np.log2(a / b) for a, b in zip(residuals, residuals[1:])]
    assert min(orders) >= 1.8


@pytest.mark.timeout(120)
def test_particle_means_match_pde(quadratic_config):
    """10^4 particles per species track the PDE means at ten checkpoints."""
    mu0 = InitialLaw(kind="gaussian", mean=0.5, var=0.1)
    nu0 = InitialLaw(kind="gaussian", mean=-0.3, var=0.1)
    n = 10_000
    ens = Ensemble.sample(quadratic_config, n, n, 17, mu0, nu0)
    sim = SimParams(dt=0.01, n_steps=100, seed=18, record_stride=10)
    traj = simulate(ens, quadratic_config, sim)

    grid = Grid1D.symmetric(4.0, 256)
    dp0 = DensityPair.gaussian(grid, 0.5, 0.1, -0.3, 0.1)
    evo = fp_evolve(dp0, quadratic_config, grid, 1.0, 0.001, record_stride=100)

    checkpoints = np.arange(10, 101, 10)
    var_x = traj.mu_moments[checkpoints, 2] - traj.mean_x[checkpoints] ** 2
    var_y = traj.nu_moments[checkpoints, 2] - traj.mean_y[checkpoints] ** 2
    tol_x = 3.0 * np.sqrt(var_x / n) + 0.01
    tol_y = 3.0 * np.sqrt(var_y / n) + 0.01
    np.testing.assert_allclose(evo.times[1:], checkpoints * 0.01, atol=1e-9)
    assert np.all(np.abs(traj.mean_x[checkpoints] - evo.means[1:, 0]) < tol_x)
    assert np.all(np.abs(traj.mean_y[checkpoints] - evo.means[1:, 1]) < tol_y)


@pytest.mark.timeout(300)
def test_root_count_transition(double_well_config):
    """Bisection brackets the noise level where extra roots appear."""
    low, high = locate_transition(
        double_well_config, 3.0, 0.3, default_starts(2.0, 7), width=1e-2
    )
    assert 0.3 <= low < high <= 3.0
    assert high - low <= 1e-2


@pytest.mark.timeout(900)
def test_propagation_of_chaos_rate(make_model_document):
    """The squared coupling gap decays like 1/N and the fourth power at least as fast."""
    cfg = ModelConfig.from_document(make_model_document(sigma=0.5))
    horizon, dt = 2.0, 1e-3
    mc = MonteCarloParams(n_particles=4000, dt=dt, seed=101)
    hat = picard_solve(cfg, horizon, mc, tol=1e-3, max_iter=30)
    assert hat.converged

    schedule = run_schedule(
        cfg, [(50, 50), (100, 100), (200, 200), (400, 400)], 50, horizon, dt, 2024, hat.drift
    )
    fits = rate_fit(schedule)
    assert -1.4 <= fits["sup_sq_x"].slope <= -0.6
    assert fits["zeta"].slope <= fits["sup_sq_x"].slope + 0.3


@pytest.mark.timeout(120)
def test_cli_invariant_run(tmp_path, make_model_document):
    """The invariant experiment on the double well reports at least three roots."""
    (tmp_path / "model.yaml").write_text(yaml.safe_dump(make_model_document(sigma=0.3)))
    doc = {"kind": "invariant", "model": "model.yaml", "params": {"start_count": 7}, "seed": 1}
    config = tmp_path / "invariant.yaml"
    config.write_text(yaml.safe_dump(doc))
    out = tmp_path / "out"

    result = CliRunner().invoke(app, ["run", str(config), "-o", str(out)])
    assert result.exit_code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["headline"]["root_count"] >= 3
    assert (out / "densities_root0.csv").exists()
    assert (out / "fp_residuals.csv").exists()
