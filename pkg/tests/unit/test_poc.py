"""
Tests for coupled runs, replica statistics and rate fitting.
"""

import numpy as np
import pytest

from coupled_mkv.picard import DriftPair, MonteCarloParams, picard_solve
from coupled_mkv.poc import (
    STAT_NAMES,
    CouplingContractError,
    ErrorStats,
    coupled_run,
    dt_sensitivity,
    error_stats,
    rate_fit,
    replica_seed,
    run_replicas,
    run_schedule,
)
from coupled_mkv.sde import Ensemble, NoiseTape
from coupled_mkv.util import InvalidArgumentError

# Mark all tests in this file as unit tests
pytestmark = pytest.mark.unit


def synthetic_stats(n: int, value: float, m: int = 0) -> ErrorStats:
    """ErrorStats whose every statistic equals ``value``."""
    means = {name: np.array([0.0, value]) for name in STAT_NAMES[:4]}
    means.update({name: np.array([value]) for name in STAT_NAMES[4:]})
    stderrs = {name: np.zeros_like(v) for name, v in means.items()}
    return ErrorStats(
        N=n, M=m or n, replicas=10, times=np.array([0.0, 1.0]), means=means, stderrs=stderrs
    )


@pytest.fixture
def quadratic_fixed_point(quadratic_config):
    """Converged mean-field drift of the quadratic model on [0, 0.1]."""
    mc = MonteCarloParams(n_particles=400, dt=0.01, seed=5)
    result = picard_solve(quadratic_config, 0.1, mc, tol=1e-10, max_iter=20)
    assert result.converged
    return result.drift


def test_zero_interaction_coupling_is_pathwise_exact(free_config):
    """Without interaction both systems coincide on the same noise."""
    drift = DriftPair.zeros(np.array([0.0, 0.5]), 1)
    run = coupled_run(free_config, 20, 20, 0.5, 0.01, seed=3, hat_drift=drift)
    for name in ("omega", "omega_hat", "zeta", "zeta_hat"):
        assert np.all(getattr(run, name) == 0.0)
    assert run.sup_sq_x == 0.0 and run.sup_sq_y == 0.0
    assert run.times.size == 51


def test_coupled_run_statistics(quadratic_config, quadratic_fixed_point):
    """Gaps start at zero, stay non-negative and the sup dominates the per-time means."""
    run = coupled_run(
        quadratic_config, 30, 30, 0.1, 0.01, 9, quadratic_fixed_point, keep_paths=True
    )
    assert run.omega[0] == 0.0
    assert np.all(run.omega >= 0) and np.all(run.zeta >= 0)
    assert run.omega[-1] > 0
    assert run.sup_sq_x >= run.omega.max() * (1 - 1e-12)
    assert run.paths is not None
    assert run.paths["x"].shape == (11, 30)
    np.testing.assert_array_equal(run.paths["x"][0], run.paths["x_hat"][0])


def test_coupled_run_sup_is_particle_average(quadratic_config, quadratic_fixed_point):
    """sup_sq_x averages each particle's running maximum over the ensemble."""
    run = coupled_run(
        quadratic_config, 12, 12, 0.1, 0.01, 4, quadratic_fixed_point, keep_paths=True
    )
    paths = run.paths
    per_particle_x = ((paths["x"] - paths["x_hat"]) ** 2).max(axis=0)
    per_particle_y = ((paths["y"] - paths["y_hat"]) ** 2).max(axis=0)
    assert run.sup_sq_x == pytest.approx(per_particle_x.mean(), rel=1e-12)
    assert run.sup_sq_y == pytest.approx(per_particle_y.mean(), rel=1e-12)
    assert run.sup_sq_x <= per_particle_x.max()


def test_coupled_run_species_swap(test_factory):
    """Exchanging the species exchanges the X and Y statistics exactly."""
    cfg = test_factory.create_config(
        v2=(0.0, 0.0, 0.5), grad_f11=(0.0, 0.1), grad_f12=(0.0, 0.2), grad_f21=(0.0, 0.3), a=0.25
    )
    drift = test_factory.create_drift([(0.0, 0.1), (0.0, 0.2), (0.05,), (0.0, -0.1)])
    ens = Ensemble.sample(cfg, 4, 12, seed=11)
    tape = NoiseTape.generate(11, 4, 12, 20, 0.01)
    forward = coupled_run(cfg, 4, 12, 0.2, 0.01, 11, drift, initial=ens, tape=tape)
    swapped = coupled_run(
        cfg.swap_species(),
        12,
        4,
        0.2,
        0.01,
        11,
        drift.swapped(),
        initial=ens.swapped(),
        tape=tape.swapped(),
    )
    np.testing.assert_array_equal(forward.omega, swapped.omega_hat)
    np.testing.assert_array_equal(forward.omega_hat, swapped.omega)
    np.testing.assert_array_equal(forward.zeta, swapped.zeta_hat)
    np.testing.assert_array_equal(forward.zeta_hat, swapped.zeta)
    assert forward.sup_sq_x == swapped.sup_sq_y
    assert forward.sup_sq_y == swapped.sup_sq_x
    assert forward.omega[-1] > 0


def test_coupled_run_requires_identical_start(quadratic_config, quadratic_fixed_point):
    """The two systems must start from the same positions."""
    ens = Ensemble.sample(quadratic_config, 5, 5, seed=1)
    other = Ensemble.sample(quadratic_config, 5, 5, seed=2)
    with pytest.raises(CouplingContractError):
        coupled_run(
            quadratic_config, 5, 5, 0.1, 0.01, 1, quadratic_fixed_point, ens, hat_initial=other
        )


@pytest.mark.parametrize(
    "T,dt", [(0.105, 0.01), (0.2, 0.01)], ids=["not-a-multiple", "beyond-drift"]
)
def test_coupled_run_rejects_horizon(quadratic_config, quadratic_fixed_point, T, dt):
    """The horizon must be a multiple of dt inside the drift's domain."""
    with pytest.raises(InvalidArgumentError):
        coupled_run(quadratic_config, 5, 5, T, dt, 1, quadratic_fixed_point)


def test_error_stats_aggregates(quadratic_config, quadratic_fixed_point):
    """Replica means and standard errors per statistic."""
    runs = run_replicas(quadratic_config, 10, 10, 0.1, 0.01, 4, 0, quadratic_fixed_point)
    stats = error_stats(runs)
    assert stats.replicas == 4
    np.testing.assert_allclose(stats.means["omega"], np.mean([r.omega for r in runs], axis=0))
    value, stderr = stats.scalar("sup_sq_x")
    assert value == pytest.approx(np.mean([r.sup_sq_x for r in runs]))
    assert stderr > 0
    assert [row[3] for row in stats.rows()] == list(STAT_NAMES)
    with pytest.raises(InvalidArgumentError):
        stats.scalar("omega_bar")


def test_error_stats_contract(quadratic_config, quadratic_fixed_point):
    """One replica, mixed keys or repeated seeds are rejected."""
    a = coupled_run(quadratic_config, 5, 5, 0.1, 0.01, 1, quadratic_fixed_point)
    b = coupled_run(quadratic_config, 6, 6, 0.1, 0.01, 2, quadratic_fixed_point)
    with pytest.raises(InvalidArgumentError):
        error_stats([a])
    with pytest.raises(InvalidArgumentError):
        error_stats([a, b])
    with pytest.raises(InvalidArgumentError):
        error_stats([a, a])


@pytest.mark.parametrize(
    "power,slope", [(1, -1.0), (2, -2.0)], ids=["one-over-n", "one-over-n-squared"]
)
def test_rate_fit_planted(power, slope):
    """Planted power laws are recovered exactly."""
    schedule = [(n, synthetic_stats(n, 1.0 / n**power)) for n in (50, 100, 200, 400)]
    fits = rate_fit(schedule)
    assert set(fits) == set(STAT_NAMES)
    fit = fits["sup_sq_x"]
    assert fit.slope == pytest.approx(slope)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.predict(800) == pytest.approx(1.0 / 800**power)
    assert fit.row()[0] == "sup_sq_x"


def test_rate_fit_skips_non_positive():
    """A statistic that is zero somewhere cannot be fitted."""
    schedule = [(n, synthetic_stats(n, 1.0 / n)) for n in (50, 100, 200, 400)]
    schedule[0][1].means["zeta"] = np.array([0.0, 0.0])
    fits = rate_fit(schedule)
    assert "zeta" not in fits
    assert "omega" in fits


@pytest.mark.parametrize(
    "schedule",
    [
        [(n, synthetic_stats(n, 1.0 / n)) for n in (50, 100, 200)],
        [
            (n, synthetic_stats(n, 1.0 / n, m))
            for n, m in ((50, 50), (100, 100), (200, 100), (400, 400))
        ],
    ],
    ids=["three-points", "varying-ratio"],
)
def test_rate_fit_rejects_schedule(schedule):
    """Fits need four distinct N at a fixed N/M ratio."""
    with pytest.raises(InvalidArgumentError):
        rate_fit(schedule)


def test_replica_seeds_are_distinct():
    """Every (N, M, replica) gets its own stream."""
    seeds = {replica_seed(0, n, n, r) for n in (10, 20) for r in range(5)}
    assert len(seeds) == 10


def test_run_schedule_with_executor(quadratic_config, quadratic_fixed_point, resource_cleaner):
    """Threaded replicas reproduce the serial ones."""
    from concurrent.futures import ThreadPoolExecutor

    pool = resource_cleaner.enter_context(ThreadPoolExecutor(max_workers=2))
    schedule = [(4, 4), (8, 8)]
    threaded = run_schedule(
        quadratic_config, schedule, 3, 0.1, 0.01, 7, quadratic_fixed_point, executor=pool
    )
    serial = run_schedule(quadratic_config, schedule, 3, 0.1, 0.01, 7, quadratic_fixed_point)
    assert [n for n, _ in threaded] == [4, 8]
    for (_, a), (_, b) in zip(threaded, serial):
        np.testing.assert_array_equal(a.means["omega"], b.means["omega"])


def test_run_schedule_error_decreases_in_n(quadratic_config, quadratic_fixed_point):
    """The coupling error shrinks as the population grows."""
    schedule = [(4, 4), (16, 16), (64, 64)]
    results = run_schedule(quadratic_config, schedule, 16, 0.1, 0.01, 3, quadratic_fixed_point)
    for stat in ("sup_sq_x", "sup_sq_y"):
        estimates = [stats.scalar(stat) for _, stats in results]
        for (big, big_err), (small, small_err) in zip(estimates, estimates[1:]):
            assert small <= big + 2.0 * (big_err + small_err)
        assert estimates[-1][0] < estimates[0][0]


def test_dt_sensitivity_shares_paths(quadratic_config, quadratic_fixed_point):
    """Both resolutions run and the relative change is reported per statistic."""
    sens = dt_sensitivity(quadratic_config, 8, 8, 0.1, 0.02, 3, 1, quadratic_fixed_point)
    assert sens.coarse.times.size == 6
    assert sens.fine.times.size == 11
    assert set(sens.relative_change) == set(STAT_NAMES)
    assert all(v >= 0 for v in sens.relative_change.values())
