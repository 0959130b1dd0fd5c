"""
Propagation-of-chaos experiments.

The interacting system and its independent mean-field copies are stepped in
lockstep on one noise tape from identical initial positions. The squared and
fourth-power pathwise gaps are aggregated over replicas and fitted against
N on log-log axes.
"""

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import ModelConfig
from .picard import DriftPair
from .sde import (
    Ensemble,
    InitialLaw,
    NoiseTape,
    SimulationBlowUpError,
    em_step_external,
    em_step_interacting,
)
from .util import FloatArray, InvalidArgumentError, derive_stream, linfit

logger = logging.getLogger(__name__)

STAT_NAMES = ("omega", "omega_hat", "zeta", "zeta_hat", "sup_sq_x", "sup_sq_y")
MIN_SCHEDULE_POINTS = 4


class CouplingContractError(InvalidArgumentError):
    """Exception raised when the two coupled systems do not start from the same data."""

    pass


@dataclass
class CouplingRun:
    """
    One synchronously coupled run.

    The per-time statistics are particle averages. ``sup_sq_x`` is the
    particle average of sup_t (X^i - hat X^i)^2 over the recorded steps;
    the particles are exchangeable, so this estimates E sup_t |X^1 - hat X^1|^2
    with N samples per run instead of one. ``sup_sq_y`` likewise for Y.
    """

    n_index: int
    N: int
    M: int
    T: float
    dt: float
    seed: int
    times: FloatArray
    omega: FloatArray
    omega_hat: FloatArray
    zeta: FloatArray
    zeta_hat: FloatArray
    sup_sq_x: float
    sup_sq_y: float
    paths: Optional[Dict[str, FloatArray]] = None

    def key(self) -> Tuple[int, int, float, float]:
        return (self.N, self.M, self.T, self.dt)


def _gaps(ens: Ensemble, hat: Ensemble) -> tuple[FloatArray, FloatArray]:
    return ens.x - hat.x, ens.y - hat.y


def coupled_run(
    cfg: ModelConfig,
    N: int,
    M: int,
    T: float,
    dt: float,
    seed: int,
    hat_drift: DriftPair,
    initial: Optional[Ensemble] = None,
    hat_initial: Optional[Ensemble] = None,
    tape: Optional[NoiseTape] = None,
    mu0: Optional[InitialLaw] = None,
    nu0: Optional[InitialLaw] = None,
    n_index: int = 0,
    keep_paths: bool = False,
    fast: Optional[bool] = None,
) -> CouplingRun:
    """
    Step the interacting system and the mean-field copies on shared noise.

    Args:
        cfg: Model configuration
        N: Number of X particles
        M: Number of Y particles
        T: Horizon, a multiple of dt
        dt: Time step
        seed: Seed for the initial draw and the noise tape
        hat_drift: Fixed-point drift driving the mean-field copies
        initial: Initial ensemble, sampled from mu0/nu0 when omitted
        hat_initial: Initial data of the copies; must equal ``initial``
        tape: Noise tape, generated from ``seed`` when omitted
        n_index: Position of (N, M) in a schedule
        keep_paths: Keep full position paths of both systems

    Returns:
        The paired statistics

    Raises:
        CouplingContractError: If the initial data of the two systems differ
        InvalidArgumentError: If T is not covered by the drift
        SimulationBlowUpError: If either system blows up; both are abandoned
    """
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise InvalidArgumentError(f"T={T} is not a positive multiple of dt={dt}")
    hat_drift.check_time(T)
    if abs(cfg.a - N / (N + M)) > 1e-12:
        logger.warning(
            f"Population weight a={cfg.a} differs from N/(N+M)={N / (N + M):.6g}; "
            "the mismatch enters the coupling error"
        )

    ens = initial if initial is not None else Ensemble.sample(cfg, N, M, seed, mu0, nu0)
    hat = hat_initial if hat_initial is not None else ens
    if ens.n != N or ens.m != M:
        raise InvalidArgumentError(f"initial ensemble has {ens.n}+{ens.m} particles, not {N}+{M}")
    if not (np.array_equal(ens.x, hat.x) and np.array_equal(ens.y, hat.y)):
        raise CouplingContractError("coupled systems must start from identical positions")
    if tape is None:
        tape = NoiseTape.generate(seed, N, M, n_steps, dt)

    times = np.arange(n_steps + 1) * dt
    stats = {name: np.zeros(n_steps + 1) for name in ("omega", "omega_hat", "zeta", "zeta_hat")}
    sup_x = np.zeros(N)
    sup_y = np.zeros(M)
    paths: Optional[Dict[str, FloatArray]] = None
    if keep_paths:
        paths = {
            key: np.empty((n_steps + 1, size))
            for key, size in (("x", N), ("x_hat", N), ("y", M), ("y_hat", M))
        }

    for step in range(n_steps + 1):
        gx, gy = _gaps(ens, hat)
        sq_x, sq_y = gx * gx, gy * gy
        stats["omega"][step] = sq_x.mean()
        stats["omega_hat"][step] = sq_y.mean()
        stats["zeta"][step] = (sq_x * sq_x).mean()
        stats["zeta_hat"][step] = (sq_y * sq_y).mean()
        np.maximum(sup_x, sq_x, out=sup_x)
        np.maximum(sup_y, sq_y, out=sup_y)
        if paths is not None:
            paths["x"][step], paths["x_hat"][step] = ens.x, hat.x
            paths["y"][step], paths["y_hat"][step] = ens.y, hat.y
        if step == n_steps:
            break
        noise = tape.slice(step)
        try:
            ens = em_step_interacting(ens, cfg, dt, noise, step, fast)
            hat = em_step_external(hat, cfg, hat_drift, dt, noise, step)
        except SimulationBlowUpError as exc:
            logger.error(f"Coupled run (N={N}, M={M}, seed={seed}) aborted: {exc}")
            raise

    return CouplingRun(
        n_index=n_index,
        N=N,
        M=M,
        T=T,
        dt=dt,
        seed=seed,
        times=times,
        omega=stats["omega"],
        omega_hat=stats["omega_hat"],
        zeta=stats["zeta"],
        zeta_hat=stats["zeta_hat"],
        sup_sq_x=float(sup_x.mean()),
        sup_sq_y=float(sup_y.mean()),
        paths=paths,
    )


@dataclass
class ErrorStats:
    """Replica averages of the coupling statistics with standard errors."""

    N: int
    M: int
    replicas: int
    times: FloatArray
    means: Dict[str, FloatArray]
    stderrs: Dict[str, FloatArray]

    def scalar(self, stat: str) -> tuple[float, float]:
        """
        Headline (value, stderr) of a statistic.

        Time-resolved statistics report their supremum over the recorded
        steps together with the standard error at that step.
        """
        if stat not in STAT_NAMES:
            raise InvalidArgumentError(f"unknown statistic {stat!r}")
        values = self.means[stat]
        k = int(np.argmax(values))
        return float(values[k]), float(self.stderrs[stat][k])

    def rows(self) -> List[List[Any]]:
        """Rows of the results table (N, M, R, stat, value, stderr)."""
        return [[self.N, self.M, self.replicas, s, *self.scalar(s)] for s in STAT_NAMES]


def error_stats(runs: Sequence[CouplingRun]) -> ErrorStats:
    """
    Aggregate replicas into Monte Carlo means and standard errors.

    Raises:
        InvalidArgumentError: If fewer than two replicas are given or their
            (N, M, T, dt) differ
    """
    if len(runs) < 2:
        raise InvalidArgumentError(f"error_stats needs at least 2 replicas, got {len(runs)}")
    key = runs[0].key()
    if any(r.key() != key for r in runs):
        raise InvalidArgumentError("replicas must share N, M, T and dt")
    if len({r.seed for r in runs}) != len(runs):
        raise InvalidArgumentError("replicas must use distinct seeds")

    R = len(runs)
    means: Dict[str, FloatArray] = {}
    stderrs: Dict[str, FloatArray] = {}
    for name in ("omega", "omega_hat", "zeta", "zeta_hat"):
        stacked = np.stack([getattr(r, name) for r in runs])
        means[name] = stacked.mean(axis=0)
        stderrs[name] = stacked.std(axis=0, ddof=1) / np.sqrt(R)
    for name in ("sup_sq_x", "sup_sq_y"):
        values = np.array([getattr(r, name) for r in runs])
        means[name] = np.array([values.mean()])
        stderrs[name] = np.array([values.std(ddof=1) / np.sqrt(R)])
    return ErrorStats(
        N=runs[0].N, M=runs[0].M, replicas=R, times=runs[0].times, means=means, stderrs=stderrs
    )


@dataclass(frozen=True)
class RateFit:
    """Power law stat ~ exp(intercept) N^slope fitted on log-log axes."""

    stat: str
    slope: float
    intercept: float
    r2: float
    ci_halfwidth: float
    n_points: int

    def predict(self, n: float | FloatArray) -> Any:
        """Fitted statistic at particle count n."""
        return np.exp(self.intercept) * np.asarray(n, dtype=float) ** self.slope

    def row(self) -> List[Any]:
        return [self.stat, self.slope, self.ci_halfwidth, self.intercept, self.r2]


def rate_fit(
    schedule: Sequence[Tuple[int, ErrorStats]],
    stats: Sequence[str] = STAT_NAMES,
    level: float = 0.95,
) -> Dict[str, RateFit]:
    """
    Fit log(stat) against log(N) for each statistic.

    Non-positive values cannot be fitted and are skipped with a warning; a
    statistic left with fewer than four points is omitted.

    Raises:
        InvalidArgumentError: If the schedule has fewer than four distinct N
            or the N/M ratio varies
    """
    ns = [n for n, _ in schedule]
    if len(set(ns)) < MIN_SCHEDULE_POINTS:
        raise InvalidArgumentError(
            f"rate_fit needs at least {MIN_SCHEDULE_POINTS} distinct N, got {len(set(ns))}"
        )
    ratios = {round(es.N / es.M, 12) for _, es in schedule}
    if len(ratios) != 1:
        raise InvalidArgumentError("rate_fit needs a fixed N/M ratio along the schedule")

    fits: Dict[str, RateFit] = {}
    for stat in stats:
        xs, ys = [], []
        for n, es in schedule:
            value, _ = es.scalar(stat)
            if value <= 0 or not np.isfinite(value):
                logger.warning(f"Skipping {stat} at N={n}: non-positive value {value}")
                continue
            xs.append(np.log(n))
            ys.append(np.log(value))
        if len(set(xs)) < MIN_SCHEDULE_POINTS:
            logger.warning(f"Not enough positive points to fit {stat}")
            continue
        fit = linfit(xs, ys)
        fits[stat] = RateFit(
            stat=stat,
            slope=fit.slope,
            intercept=fit.intercept,
            r2=fit.r2,
            ci_halfwidth=fit.ci_halfwidth(level),
            n_points=fit.n_points,
        )
        logger.info(f"Rate fit {stat}: slope={fit.slope:.4f} r2={fit.r2:.4f}")
    return fits


def replica_seed(master_seed: int, N: int, M: int, replica: int) -> int:
    return derive_stream(master_seed, f"poc-{N}-{M}", replica)


def run_replicas(
    cfg: ModelConfig,
    N: int,
    M: int,
    T: float,
    dt: float,
    replicas: int,
    master_seed: int,
    hat_drift: DriftPair,
    mu0: Optional[InitialLaw] = None,
    nu0: Optional[InitialLaw] = None,
    n_index: int = 0,
    executor: Optional[Executor] = None,
) -> List[CouplingRun]:
    """Independent replicas of one schedule point, each on its own derived stream."""

    def one(r: int) -> CouplingRun:
        seed = replica_seed(master_seed, N, M, r)
        return coupled_run(cfg, N, M, T, dt, seed, hat_drift, mu0=mu0, nu0=nu0, n_index=n_index)

    if executor is None:
        return [one(r) for r in range(replicas)]
    return list(executor.map(one, range(replicas)))


def run_schedule(
    cfg: ModelConfig,
    schedule: Sequence[Tuple[int, int]],
    replicas: int,
    T: float,
    dt: float,
    master_seed: int,
    hat_drift: DriftPair,
    mu0: Optional[InitialLaw] = None,
    nu0: Optional[InitialLaw] = None,
    executor: Optional[Executor] = None,
) -> List[Tuple[int, ErrorStats]]:
    """Replicated coupling runs along an (N, M) schedule."""
    results = []
    for index, (n, m) in enumerate(schedule):
        logger.info(f"Coupling runs for N={n}, M={m}: {replicas} replicas")
        runs = run_replicas(
            cfg, n, m, T, dt, replicas, master_seed, hat_drift, mu0, nu0, index, executor
        )
        results.append((n, error_stats(runs)))
    return results


@dataclass
class DtSensitivity:
    """Statistics at dt and dt/2 on the same Brownian paths."""

    coarse: ErrorStats
    fine: ErrorStats
    relative_change: Dict[str, float] = field(default_factory=dict)


def dt_sensitivity(
    cfg: ModelConfig,
    N: int,
    M: int,
    T: float,
    dt: float,
    replicas: int,
    master_seed: int,
    hat_drift: DriftPair,
    mu0: Optional[InitialLaw] = None,
    nu0: Optional[InitialLaw] = None,
) -> DtSensitivity:
    """
    Rerun one schedule point at dt/2 and report the relative change per statistic.

    The coarse increments are sums of consecutive fine increments, so both
    resolutions see the same Brownian paths.
    """
    n_fine = 2 * int(round(T / dt))
    coarse_runs, fine_runs = [], []
    for r in range(replicas):
        seed = replica_seed(master_seed, N, M, r)
        fine_tape = NoiseTape.generate(seed, N, M, n_fine, dt / 2)
        coarse_tape = NoiseTape(
            dx=fine_tape.dx.reshape(n_fine // 2, 2, N).sum(axis=1),
            dy=fine_tape.dy.reshape(n_fine // 2, 2, M).sum(axis=1),
            dt=dt,
        )
        ens = Ensemble.sample(cfg, N, M, seed, mu0, nu0)
        coarse_runs.append(coupled_run(cfg, N, M, T, dt, seed, hat_drift, ens, tape=coarse_tape))
        fine_runs.append(coupled_run(cfg, N, M, T, dt / 2, seed, hat_drift, ens, tape=fine_tape))
    coarse, fine = error_stats(coarse_runs), error_stats(fine_runs)
    change = {}
    for stat in STAT_NAMES:
        c, _ = coarse.scalar(stat)
        f, _ = fine.scalar(stat)
        change[stat] = abs(f - c) / abs(c) if c != 0 else (0.0 if f == 0 else float("inf"))
    return DtSensitivity(coarse=coarse, fine=fine, relative_change=change)
