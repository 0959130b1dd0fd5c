"""
Seeded Euler-Maruyama simulation of the two-species particle system.

Two drivers are provided: the interacting system, where every particle feels
the empirical measures of both species through the 1/(N+M) weighted pairwise
sums, and the external-drift system, where particles move independently under
a supplied time-dependent drift 4-tuple. Both consume a pre-generated
``NoiseTape`` so that runs are bit-reproducible regardless of thread count,
and so that two systems can be coupled on identical increments.
"""

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .model import ModelConfig, PolynomialSpec, convolve_moments
from .util import FloatArray, InvalidArgumentError, NumericalFailure, make_rng

if TYPE_CHECKING:
    from .picard import DriftPair

logger = logging.getLogger(__name__)

# The moment-expansion fast path is the default up to this q
FAST_PATH_MAX_Q = 3
MOMENT_TOLERANCE = 1e-12


class SimulationBlowUpError(NumericalFailure):
    """Exception raised when a particle position becomes non-finite."""

    def __init__(self, step: int, time: float, species: str, index: int) -> None:
        self.step = step
        self.time = time
        self.species = species
        self.index = index
        super().__init__(
            f"blow-up at step {step} (t={time:.6g}): species {species} particle {index} "
            "is not finite"
        )


class InitialLaw(BaseModel):
    """
    Law of the initial positions of one species.

    ``point`` uses ``value``, ``gaussian`` uses ``mean``/``var``, ``uniform``
    uses ``low``/``high``.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["point", "gaussian", "uniform"] = "gaussian"
    value: float = 0.0
    mean: float = 0.0
    var: float = Field(default=1.0, ge=0.0)
    low: float = -1.0
    high: float = 1.0

    @model_validator(mode="after")
    def validate_bounds(self) -> "InitialLaw":
        if self.kind == "uniform" and not self.low < self.high:
            raise ValueError("uniform law needs low < high")
        return self

    def sample(self, rng: np.random.Generator, n: int) -> FloatArray:
        """Draw ``n`` i.i.d. positions."""
        if n < 1:
            raise InvalidArgumentError(f"need at least one particle, got {n}")
        if self.kind == "point":
            return np.full(n, self.value)
        if self.kind == "gaussian":
            return self.mean + np.sqrt(self.var) * rng.standard_normal(n)
        return rng.uniform(self.low, self.high, size=n)


@dataclass(frozen=True)
class Ensemble:
    """Positions of the X and Y particles at time ``t``."""

    x: FloatArray
    y: FloatArray
    sigma: float
    t: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size < 1 or y.size < 1:
            raise InvalidArgumentError("ensemble needs N >= 1 X and M >= 1 Y particles")
        if self.t < 0:
            raise InvalidArgumentError(f"ensemble time must be >= 0, got {self.t}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def sample(
        cls,
        cfg: ModelConfig,
        n: int,
        m: int,
        seed: int,
        mu0: Optional[InitialLaw] = None,
        nu0: Optional[InitialLaw] = None,
    ) -> "Ensemble":
        """Sample initial positions from the two laws on seed-derived streams."""
        mu0 = mu0 or InitialLaw()
        nu0 = nu0 or InitialLaw()
        x = mu0.sample(make_rng(seed, "initial-x"), n)
        y = nu0.sample(make_rng(seed, "initial-y"), m)
        return cls(x=x, y=y, sigma=cfg.sigma, seed=seed)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def m(self) -> int:
        return int(self.y.size)

    def swapped(self) -> "Ensemble":
        return replace(self, x=self.y.copy(), y=self.x.copy())


class SimParams(BaseModel):
    """Time stepping and seeding for one simulation."""

    model_config = ConfigDict(frozen=True)

    dt: float = Field(gt=0.0, description="Time step")
    n_steps: int = Field(ge=1, description="Number of steps")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Noise seed")
    record_stride: int = Field(default=1, ge=1, description="Position recording stride")

    @property
    def horizon(self) -> float:
        return self.dt * self.n_steps


@dataclass(frozen=True)
class NoiseSlice:
    """Brownian increments of one step for all particles."""

    dx: FloatArray
    dy: FloatArray


@dataclass(frozen=True)
class NoiseTape:
    """
    Pre-generated N(0, dt) increments, one row per step.

    ``dx`` has shape (n_steps, N) and ``dy`` shape (n_steps, M). Rows come
    from independent streams per species derived from the seed.
    """

    dx: FloatArray
    dy: FloatArray
    dt: float

    @classmethod
    def generate(cls, seed: int, n: int, m: int, n_steps: int, dt: float) -> "NoiseTape":
        if dt <= 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt}")
        scale = np.sqrt(dt)
        dx = scale * make_rng(seed, "noise-x").standard_normal((n_steps, n))
        dy = scale * make_rng(seed, "noise-y").standard_normal((n_steps, m))
        return cls(dx=dx, dy=dy, dt=dt)

    @classmethod
    def zeros(cls, n: int, m: int, n_steps: int, dt: float) -> "NoiseTape":
        return cls(dx=np.zeros((n_steps, n)), dy=np.zeros((n_steps, m)), dt=dt)

    @property
    def n_steps(self) -> int:
        return int(self.dx.shape[0])

    def slice(self, step: int) -> NoiseSlice:
        if not 0 <= step < self.n_steps:
            raise InvalidArgumentError(f"step {step} outside tape of {self.n_steps} steps")
        return NoiseSlice(dx=self.dx[step], dy=self.dy[step])

    def __getitem__(self, key: tuple[str, int, int]) -> float:
        species, particle, step = key
        table = {"x": self.dx, "y": self.dy}
        if species not in table:
            raise InvalidArgumentError(f"unknown species {species!r}")
        return float(table[species][step, particle])

    def swapped(self) -> "NoiseTape":
        return NoiseTape(dx=self.dy, dy=self.dx, dt=self.dt)

    def permuted(self, perm_x: Sequence[int]) -> "NoiseTape":
        """Tape with the X columns reordered."""
        return NoiseTape(dx=self.dx[:, list(perm_x)], dy=self.dy, dt=self.dt)


@dataclass(frozen=True)
class MomentVector:
    """Moments m_0..m_K; m_0 = 1 and even orders are non-negative."""

    values: FloatArray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise InvalidArgumentError("moment vector needs orders 0..K with K >= 1")
        if abs(v[0] - 1.0) > MOMENT_TOLERANCE:
            raise InvalidArgumentError(f"moment of order 0 must be 1, got {v[0]}")
        if np.any(v[::2] < 0):
            raise InvalidArgumentError("even-order moments must be non-negative")
        object.__setattr__(self, "values", v)

    @classmethod
    def point_mass(cls, y: float, order: int) -> "MomentVector":
        return cls(values=float(y) ** np.arange(order + 1))

    @property
    def order(self) -> int:
        return int(self.values.size - 1)

    @property
    def mean(self) -> float:
        return float(self.values[1])

    @property
    def variance(self) -> float:
        if self.order < 2:
            raise InvalidArgumentError("variance needs the second moment")
        return float(self.values[2] - self.values[1] ** 2)

    def __len__(self) -> int:
        return int(self.values.size)

    def __getitem__(self, k: int) -> float:
        return float(self.values[k])

    def __array__(self, dtype: Any = None, copy: Any = None) -> FloatArray:
        return np.asarray(self.values, dtype=dtype)


def _power_sums(positions: FloatArray, order: int) -> FloatArray:
    sums = np.empty(order + 1)
    power = np.ones_like(positions)
    for k in range(order + 1):
        sums[k] = power.sum()
        power = power * positions
    return sums


def empirical_moments(positions: Sequence[float] | FloatArray, K: int) -> MomentVector:
    """
    Empirical moments (1/N) sum x_i^k for k = 0..K.

    Raises:
        InvalidArgumentError: If the array is empty or K < 1
    """
    x = np.asarray(positions, dtype=float).ravel()
    if x.size == 0:
        raise InvalidArgumentError("empirical_moments of an empty array")
    if K < 1:
        raise InvalidArgumentError(f"moment order must be >= 1, got {K}")
    values = _power_sums(x, K) / x.size
    values[0] = 1.0
    return MomentVector(values=values)


def _pairwise_direct(
    grad: PolynomialSpec,
    targets: FloatArray,
    sources: FloatArray,
    executor: Optional[Executor],
) -> FloatArray:
    """sum_j grad(t_i - s_j) for every target, row blocks optionally on threads."""
    if grad.is_zero:
        return np.zeros_like(targets)

    def block(rows: FloatArray) -> FloatArray:
        return np.asarray(grad(rows[:, None] - sources[None, :])).sum(axis=1)

    if executor is None or targets.size < 256:
        return block(targets)
    chunks = np.array_split(targets, 8)
    return np.concatenate(list(executor.map(block, chunks)))


def _species_interaction(
    cfg: ModelConfig,
    species: int,
    own: FloatArray,
    other: FloatArray,
    xs: FloatArray,
    ys: FloatArray,
    fast: bool,
    executor: Optional[Executor],
) -> FloatArray:
    total = xs.size + ys.size
    g_x = cfg.interactions.grad(species, 1)
    g_y = cfg.interactions.grad(species, 2)
    if fast:
        # sum_j (x - z_j)^k expands into power sums of the z_j
        sx = _power_sums(xs, g_x.degree) / total
        sy = _power_sums(ys, g_y.degree) / total
        return np.asarray(convolve_moments(g_x, sx)(own) + convolve_moments(g_y, sy)(own))
    return (
        _pairwise_direct(g_x, own, xs, executor) + _pairwise_direct(g_y, own, ys, executor)
    ) / total


def _check_finite(x: FloatArray, y: FloatArray, step: int, time: float) -> None:
    for name, arr in (("x", x), ("y", y)):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise SimulationBlowUpError(step, time, name, int(bad[0]))


def _resolve_fast(cfg: ModelConfig, fast: Optional[bool]) -> bool:
    return cfg.q <= FAST_PATH_MAX_Q if fast is None else fast


def em_step_interacting(
    ens: Ensemble,
    cfg: ModelConfig,
    dt: float,
    noise: NoiseSlice,
    step: int = 0,
    fast: Optional[bool] = None,
    executor: Optional[Executor] = None,
) -> Ensemble:
    """
    One Euler-Maruyama step of the interacting particle system.

    Each particle moves by -V'(x) dt minus the 1/(N+M) weighted sum of the
    interaction gradients against all particles of both species (self term
    included), plus sigma times its Brownian increment.

    Args:
        ens: Current ensemble
        cfg: Model configuration
        dt: Time step
        noise: Increments for this step, N for X and M for Y
        step: Step index, reported on blow-up
        fast: Use the moment-expansion path (default when q <= 3)
        executor: Optional pool for the direct pairwise sums

    Returns:
        The ensemble at t + dt

    Raises:
        InvalidArgumentError: If dt <= 0 or the noise slice has the wrong size
        SimulationBlowUpError: If any updated position is not finite
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if noise.dx.shape != ens.x.shape or noise.dy.shape != ens.y.shape:
        raise InvalidArgumentError(
            f"noise slice has {noise.dx.size}+{noise.dy.size} increments, "
            f"ensemble has {ens.n}+{ens.m} particles"
        )
    use_fast = _resolve_fast(cfg, fast)
    x, y = ens.x, ens.y
    inter_x = _species_interaction(cfg, 1, x, y, x, y, use_fast, executor)
    inter_y = _species_interaction(cfg, 2, y, x, x, y, use_fast, executor)
    new_x = x - (np.asarray(cfg.v1.derivative()(x)) + inter_x) * dt + ens.sigma * noise.dx
    new_y = y - (np.asarray(cfg.v2.derivative()(y)) + inter_y) * dt + ens.sigma * noise.dy
    _check_finite(new_x, new_y, step, ens.t + dt)
    return replace(ens, x=new_x, y=new_y, t=ens.t + dt)


def external_species_drift(
    potential: PolynomialSpec,
    first: PolynomialSpec,
    second: PolynomialSpec,
    positions: FloatArray,
) -> FloatArray:
    """-V'(x) - (b_first(x) + b_second(x)) for one species."""
    gradient = np.asarray(potential.derivative()(positions))
    return -(gradient + np.asarray((first + second)(positions)))


def em_step_external(
    ens: Ensemble,
    cfg: ModelConfig,
    drift: "DriftPair",
    dt: float,
    noise: NoiseSlice,
    step: int = 0,
) -> Ensemble:
    """
    One Euler-Maruyama step under an externally supplied drift.

    X particles use -V1' - b1(t, .) - b2(t, .), Y particles -V2' - b3 - b4.
    Particles do not interact.

    Raises:
        InvalidArgumentError: If [t, t + dt] leaves the drift's time domain
        SimulationBlowUpError: If any updated position is not finite
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    drift.check_time(ens.t + dt)
    b1, b2, b3, b4 = drift.components_at(ens.t)
    new_x = ens.x + external_species_drift(cfg.v1, b1, b2, ens.x) * dt + ens.sigma * noise.dx
    new_y = ens.y + external_species_drift(cfg.v2, b3, b4, ens.y) * dt + ens.sigma * noise.dy
    _check_finite(new_x, new_y, step, ens.t + dt)
    return replace(ens, x=new_x, y=new_y, t=ens.t + dt)


@dataclass
class Trajectory:
    """
    Recorded simulation output.

    Positions are kept every ``record_stride`` steps (step 0 included);
    moments are kept at every step.
    """

    record_times: FloatArray
    x_positions: FloatArray
    y_positions: FloatArray
    times: FloatArray
    mu_moments: FloatArray
    nu_moments: FloatArray
    final: Ensemble
    metadata: dict[str, Any] = field(default_factory=dict)

    def moments_at(self, step: int) -> tuple[MomentVector, MomentVector]:
        return MomentVector(self.mu_moments[step]), MomentVector(self.nu_moments[step])

    @property
    def mean_x(self) -> FloatArray:
        return self.mu_moments[:, 1]

    @property
    def mean_y(self) -> FloatArray:
        return self.nu_moments[:, 1]

    def write_csv(self, positions_path: Path, moments_path: Path) -> None:
        """Write the position and moment tables."""
        from .formatters import write_csv

        rows: list[list[Any]] = []
        for r, t in enumerate(self.record_times):
            for species, arr in (("x", self.x_positions[r]), ("y", self.y_positions[r])):
                rows.extend([float(t), species, i, float(v)] for i, v in enumerate(arr))
        write_csv(positions_path, ["t", "species", "index", "position"], rows)

        order = self.mu_moments.shape[1] - 1
        header = ["t", "species"] + [f"m{k}" for k in range(order + 1)]
        moment_rows: list[list[Any]] = []
        for s, t in enumerate(self.times):
            moment_rows.append([float(t), "x", *self.mu_moments[s].tolist()])
            moment_rows.append([float(t), "y", *self.nu_moments[s].tolist()])
        write_csv(moments_path, header, moment_rows)


def simulate(
    ens0: Ensemble,
    cfg: ModelConfig,
    params: SimParams,
    drift: Optional["DriftPair"] = None,
    tape: Optional[NoiseTape] = None,
    fast: Optional[bool] = None,
    executor: Optional[Executor] = None,
) -> Trajectory:
    """
    Run ``params.n_steps`` Euler-Maruyama steps from ``ens0``.

    With ``drift`` left as None the interacting system is simulated;
    otherwise particles follow the external drift. The noise tape defaults
    to one generated from ``params.seed``.

    Raises:
        SimulationBlowUpError: If a position becomes non-finite
        InvalidArgumentError: If the tape does not match the ensemble
    """
    if tape is None:
        tape = NoiseTape.generate(params.seed, ens0.n, ens0.m, params.n_steps, params.dt)
    if tape.n_steps < params.n_steps or tape.dx.shape[1] != ens0.n or tape.dy.shape[1] != ens0.m:
        raise InvalidArgumentError("noise tape does not match the ensemble or step count")
    if not (np.all(np.isfinite(ens0.x)) and np.all(np.isfinite(ens0.y))):
        raise InvalidArgumentError("initial ensemble must be finite")

    K = cfg.moment_order
    n_records = params.n_steps // params.record_stride + 1
    record_times = np.empty(n_records)
    xs = np.empty((n_records, ens0.n))
    ys = np.empty((n_records, ens0.m))
    times = np.empty(params.n_steps + 1)
    mu = np.empty((params.n_steps + 1, K + 1))
    nu = np.empty((params.n_steps + 1, K + 1))

    def record(step: int, e: Ensemble) -> None:
        times[step] = e.t
        mu[step] = empirical_moments(e.x, K).values
        nu[step] = empirical_moments(e.y, K).values
        if step % params.record_stride == 0:
            r = step // params.record_stride
            record_times[r] = e.t
            xs[r] = e.x
            ys[r] = e.y

    mode = "interacting" if drift is None else "external"
    logger.debug(
        f"Simulating {mode} system: N={ens0.n}, M={ens0.m}, dt={params.dt}, "
        f"steps={params.n_steps}"
    )
    ens = ens0
    record(0, ens)
    for step in range(params.n_steps):
        noise = tape.slice(step)
        if drift is None:
            ens = em_step_interacting(ens, cfg, params.dt, noise, step, fast, executor)
        else:
            ens = em_step_external(ens, cfg, drift, params.dt, noise, step)
        record(step + 1, ens)

    return Trajectory(
        record_times=record_times,
        x_positions=xs,
        y_positions=ys,
        times=times,
        mu_moments=mu,
        nu_moments=nu,
        final=ens,
        metadata={"mode": mode, "seed": params.seed, "dt": params.dt},
    )
