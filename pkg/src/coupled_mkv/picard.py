"""
Picard iteration on drift 4-tuples.

A ``DriftPair`` holds the four drift components b1..b4 as polynomials in x
on a time grid, linearly interpolated in time. ``gamma_map`` simulates the
particle systems driven by a drift and returns the expected-interaction
drifts they generate; ``picard_solve`` iterates it from zero under common
random numbers until successive iterates agree in the weighted norm.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .model import ModelConfig, PolynomialSpec, convolve_moments, validate_assumptions
from .sde import Ensemble, InitialLaw, NoiseTape, SimParams, simulate
from .util import FloatArray, InvalidArgumentError, NumericalFailure, derive_stream

logger = logging.getLogger(__name__)

NORM_INFLATION = 1.05
EDGE_CHECK_FRACTION = 0.9
TIME_TOLERANCE = 1e-9


class GridTooSmallError(NumericalFailure):
    """Exception raised when the weighted ratio still grows at the grid edge."""

    pass


class GridSpec(BaseModel):
    """Symmetric spatial grid [-radius, radius] for sup-norm estimates."""

    model_config = ConfigDict(frozen=True)

    radius: float = Field(default=10.0, gt=0.0)
    n_points: int = Field(default=4001, ge=3)

    def points(self) -> FloatArray:
        return np.linspace(-self.radius, self.radius, self.n_points)


@dataclass(frozen=True)
class DriftPair:
    """
    Drift components b1..b4 on a time grid.

    ``coeffs`` has shape (4, L + 1, D + 1): component, time node, power of x.
    Between nodes the coefficients interpolate linearly, so every component
    is continuous in t on [0, T].
    """

    time_grid: FloatArray
    coeffs: FloatArray

    def __post_init__(self) -> None:
        tg = np.asarray(self.time_grid, dtype=float)
        c = np.asarray(self.coeffs, dtype=float)
        if tg.ndim != 1 or tg.size < 2 or tg[0] != 0.0 or np.any(np.diff(tg) <= 0):
            raise InvalidArgumentError("time grid must start at 0 and increase strictly")
        if c.ndim != 3 or c.shape[0] != 4 or c.shape[1] != tg.size:
            raise InvalidArgumentError(
                f"coefficients must have shape (4, {tg.size}, D+1), got {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("drift coefficients must be finite")
        object.__setattr__(self, "time_grid", tg)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, time_grid: FloatArray, degree: int) -> "DriftPair":
        tg = np.asarray(time_grid, dtype=float)
        return cls(time_grid=tg, coeffs=np.zeros((4, tg.size, degree + 1)))

    @classmethod
    def constant(cls, time_grid: FloatArray, components: List[PolynomialSpec]) -> "DriftPair":
        """Time-independent drift with the given four polynomials."""
        if len(components) != 4:
            raise InvalidArgumentError("a drift has exactly four components")
        tg = np.asarray(time_grid, dtype=float)
        width = max(p.degree for p in components) + 1
        c = np.zeros((4, tg.size, width))
        for i, p in enumerate(components):
            c[i, :, :] = p.padded(width)
        return cls(time_grid=tg, coeffs=c)

    @property
    def horizon(self) -> float:
        return float(self.time_grid[-1])

    @property
    def degree(self) -> int:
        return int(self.coeffs.shape[2] - 1)

    def check_time(self, t: float) -> None:
        """Raise unless t lies in [0, T] (up to rounding of the step sum)."""
        slack = TIME_TOLERANCE * max(1.0, self.horizon)
        if t < -slack or t > self.horizon + slack:
            raise InvalidArgumentError(
                f"time {t} outside drift domain [0, {self.horizon}]"
            )

    def coefficients_at(self, t: float) -> FloatArray:
        """Interpolated (4, D + 1) coefficient block at time t."""
        self.check_time(t)
        t = min(max(t, 0.0), self.horizon)
        k = int(np.searchsorted(self.time_grid, t, side="right")) - 1
        k = min(max(k, 0), self.time_grid.size - 2)
        t0, t1 = self.time_grid[k], self.time_grid[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.coeffs[:, k, :] + w * self.coeffs[:, k + 1, :]

    def components_at(
        self, t: float
    ) -> tuple[PolynomialSpec, PolynomialSpec, PolynomialSpec, PolynomialSpec]:
        block = self.coefficients_at(t)
        polys = [PolynomialSpec(coeffs=tuple(row)) for row in block]
        return polys[0], polys[1], polys[2], polys[3]

    def evaluate(self, component: int, t: float, x: float | FloatArray) -> Any:
        """b_component(t, x) for component in 1..4."""
        if component not in (1, 2, 3, 4):
            raise InvalidArgumentError(f"component must be 1..4, got {component}")
        return self.components_at(t)[component - 1](x)

    def _aligned(self, other: "DriftPair") -> tuple[FloatArray, FloatArray]:
        if self.time_grid.shape != other.time_grid.shape or not np.allclose(
            self.time_grid, other.time_grid, rtol=0.0, atol=1e-12
        ):
            raise InvalidArgumentError("drifts live on different time grids")
        width = max(self.coeffs.shape[2], other.coeffs.shape[2])
        a = np.zeros((4, self.time_grid.size, width))
        b = np.zeros_like(a)
        a[:, :, : self.coeffs.shape[2]] = self.coeffs
        b[:, :, : other.coeffs.shape[2]] = other.coeffs
        return a, b

    def __sub__(self, other: "DriftPair") -> "DriftPair":
        a, b = self._aligned(other)
        return DriftPair(time_grid=self.time_grid, coeffs=a - b)

    def restricted(self, horizon: float) -> "DriftPair":
        """The drift on [0, horizon]; horizon must be one of the time nodes."""
        self.check_time(horizon)
        slack = TIME_TOLERANCE * max(1.0, horizon)
        keep = self.time_grid <= horizon + slack
        if keep.sum() < 2 or abs(self.time_grid[keep][-1] - horizon) > slack:
            raise InvalidArgumentError(f"horizon {horizon} is not a node of the drift's time grid")
        return DriftPair(time_grid=self.time_grid[keep], coeffs=self.coeffs[:, keep, :])

    def swapped(self) -> "DriftPair":
        """Drift seen after exchanging the species: (b4, b3, b2, b1)."""
        return DriftPair(time_grid=self.time_grid, coeffs=self.coeffs[::-1].copy())

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "time_grid": self.time_grid.tolist(),
            "components": {
                f"b{i + 1}": self.coeffs[i].tolist() for i in range(4)
            },
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "DriftPair":
        comps = data["components"]
        return cls(
            time_grid=np.asarray(data["time_grid"], dtype=float),
            coeffs=np.stack([np.asarray(comps[f"b{i + 1}"], dtype=float) for i in range(4)]),
        )


@dataclass(frozen=True)
class DriftNorms:
    """
    Weighted norms of the four components.

    ``components`` are the grid maxima; ``bounds`` carry the declared 5%
    inflation and stand in for the true supremum.
    """

    components: tuple[float, float, float, float]
    q: int

    @property
    def total(self) -> float:
        return float(sum(self.components))

    @property
    def bounds(self) -> tuple[float, ...]:
        return tuple(NORM_INFLATION * c for c in self.components)


def _weighted_ratio(coeff_block: FloatArray, x: FloatArray, q: int) -> FloatArray:
    """|b(t, x)| / (1 + |x|^{2q}) for every time row of a (L + 1, D + 1) block."""
    powers = x[None, :] ** np.arange(coeff_block.shape[1])[:, None]
    values = coeff_block @ powers
    return np.abs(values) / (1.0 + np.abs(x) ** (2 * q))[None, :]


def norm_T(b: DriftPair, q: int, x_grid: Optional[GridSpec] = None) -> DriftNorms:
    """
    Estimate sup_{s <= T} sup_x |b_i(s, x)| / (1 + |x|^{2q}) per component.

    The supremum is the maximum over (time grid x space grid). The grid is
    accepted only if the ratio at R does not exceed the ratio at 0.9 R.

    Raises:
        InvalidArgumentError: If q < 1
        GridTooSmallError: If the weighted ratio still grows at the grid edge
    """
    if q < 1:
        raise InvalidArgumentError(f"q must be >= 1, got {q}")
    grid = x_grid or GridSpec()
    x = grid.points()
    edge = np.array([EDGE_CHECK_FRACTION * grid.radius, grid.radius])
    edge = np.concatenate([-edge, edge])
    norms = []
    for i in range(4):
        block = b.coeffs[i]
        at_edge = _weighted_ratio(block, edge, q).max(axis=0)
        inner = max(at_edge[0], at_edge[2])
        outer = max(at_edge[1], at_edge[3])
        if outer > inner * (1.0 + 1e-12) + 1e-300:
            raise GridTooSmallError(
                f"weighted ratio of b{i + 1} still grows at radius {grid.radius}; widen the grid"
            )
        norms.append(float(_weighted_ratio(block, x, q).max()))
    return DriftNorms(components=(norms[0], norms[1], norms[2], norms[3]), q=q)


class MonteCarloParams(BaseModel):
    """Particle budget and seeding of one Gamma evaluation."""

    model_config = ConfigDict(frozen=True)

    n_particles: int = Field(default=2000, ge=2, description="Particles per species")
    dt: float = Field(default=1e-2, gt=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    time_stride: int = Field(default=1, ge=1, description="Steps between drift time nodes")
    antithetic: bool = Field(
        default=False, description="Pair every draw with its negation (symmetric configs)"
    )
    mu0: InitialLaw = Field(default_factory=InitialLaw)
    nu0: InitialLaw = Field(default_factory=InitialLaw)

    @model_validator(mode="after")
    def validate_antithetic(self) -> "MonteCarloParams":
        if self.antithetic and self.n_particles % 2:
            raise ValueError("antithetic sampling needs an even n_particles")
        return self

    def n_steps(self, horizon: float) -> int:
        """Steps covering [0, horizon]; the horizon must be a multiple of dt * time_stride."""
        steps = int(round(horizon / self.dt))
        if steps < 1 or abs(steps * self.dt - horizon) > 1e-9 * max(1.0, horizon):
            raise InvalidArgumentError(f"horizon {horizon} is not a multiple of dt={self.dt}")
        if steps % self.time_stride:
            raise InvalidArgumentError("step count must be a multiple of time_stride")
        return steps

    def time_grid(self, horizon: float) -> FloatArray:
        steps = self.n_steps(horizon)
        return np.arange(0, steps + 1, self.time_stride) * self.dt


def _initial_and_noise(
    cfg: ModelConfig, mc: MonteCarloParams, n_steps: int
) -> tuple[Ensemble, NoiseTape]:
    seed = derive_stream(mc.seed, "gamma")
    if not mc.antithetic:
        ens = Ensemble.sample(cfg, mc.n_particles, mc.n_particles, seed, mc.mu0, mc.nu0)
        return ens, NoiseTape.generate(seed, mc.n_particles, mc.n_particles, n_steps, mc.dt)
    half = mc.n_particles // 2
    ens = Ensemble.sample(cfg, half, half, seed, mc.mu0, mc.nu0)
    tape = NoiseTape.generate(seed, half, half, n_steps, mc.dt)
    # Mirror about the laws' centres so symmetric laws stay exactly symmetric
    cx = mc.mu0.value if mc.mu0.kind == "point" else mc.mu0.mean
    cy = mc.nu0.value if mc.nu0.kind == "point" else mc.nu0.mean
    if mc.mu0.kind == "uniform":
        cx = 0.5 * (mc.mu0.low + mc.mu0.high)
    if mc.nu0.kind == "uniform":
        cy = 0.5 * (mc.nu0.low + mc.nu0.high)
    ens = Ensemble(
        x=np.concatenate([ens.x, 2 * cx - ens.x]),
        y=np.concatenate([ens.y, 2 * cy - ens.y]),
        sigma=cfg.sigma,
        seed=seed,
    )
    tape = NoiseTape(
        dx=np.concatenate([tape.dx, -tape.dx], axis=1),
        dy=np.concatenate([tape.dy, -tape.dy], axis=1),
        dt=mc.dt,
    )
    return ens, tape


def gamma_map(
    b: DriftPair, cfg: ModelConfig, mc: MonteCarloParams, horizon: Optional[float] = None
) -> DriftPair:
    """
    Apply Gamma to a drift.

    Simulates X^b and Y^b under ``b`` and returns, at every time node, the
    polynomial expansions of a E[grad F11(x - X^b)], (1 - a) E[grad F12(x - Y^b)],
    a E[grad F21(x - X^b)] and (1 - a) E[grad F22(x - Y^b)] built from the
    empirical moments.

    Args:
        b: Input drift, defined on [0, T]
        cfg: Model configuration; the self- and cross-interaction checks must pass
        mc: Particle budget and seed; the same seed gives common random numbers
        horizon: Simulation horizon, defaults to the drift's own horizon

    Returns:
        The new drift on the time grid of ``mc``

    Raises:
        InvalidArgumentError: If those checks fail or the horizon is outside b's domain
        SimulationBlowUpError: If the simulation blows up
    """
    report = validate_assumptions(cfg)
    if not report.satisfied("self_interaction", "cross_interaction"):
        raise InvalidArgumentError(
            f"gamma_map needs well-posed interactions, violated: {report.violations()}"
        )
    T = b.horizon if horizon is None else horizon
    b.check_time(T)
    n_steps = mc.n_steps(T)
    ens, tape = _initial_and_noise(cfg, mc, n_steps)
    traj = simulate(ens, cfg, SimParams(dt=mc.dt, n_steps=n_steps, seed=mc.seed), b, tape)

    a, one_minus_a = cfg.weights()
    inter = cfg.interactions
    nodes = np.arange(0, n_steps + 1, mc.time_stride)
    width = max(inter.max_degree, 1) + 1
    coeffs = np.zeros((4, nodes.size, width))
    for r, step in enumerate(nodes):
        mu, nu = traj.mu_moments[step], traj.nu_moments[step]
        parts = (
            convolve_moments(inter.grad_f11, mu).scaled(a),
            convolve_moments(inter.grad_f12, nu).scaled(one_minus_a),
            convolve_moments(inter.grad_f21, mu).scaled(a),
            convolve_moments(inter.grad_f22, nu).scaled(one_minus_a),
        )
        for i, p in enumerate(parts):
            coeffs[i, r, :] = p.padded(width)

    # Outputs must stay increasing in x: positive leading coefficient
    for i, g, weight in ((0, inter.grad_f11, a), (3, inter.grad_f22, one_minus_a)):
        if weight > 0 and not g.is_zero and coeffs[i, :, g.degree].min() <= 0:
            logger.warning(f"Gamma output b{i + 1} lost its positive leading coefficient")

    return DriftPair(time_grid=traj.times[nodes], coeffs=coeffs)


@dataclass(frozen=True)
class IterationRecord:
    """One line of the Picard iteration log."""

    iteration: int
    norm_diff: float
    contraction_ratio: float
    wall_time_ms: float


@dataclass
class PicardResult:
    """Outcome of ``picard_solve``."""

    drift: DriftPair
    converged: bool
    log: List[IterationRecord] = field(default_factory=list)
    best_iteration: int = 0
    k_ball: Optional[float] = None
    in_k_ball: Optional[bool] = None

    @property
    def iterations(self) -> int:
        return len(self.log)

    def norm_diffs(self) -> FloatArray:
        return np.array([r.norm_diff for r in self.log])

    def log_rows(self) -> List[List[Any]]:
        return [
            [r.iteration, r.norm_diff, r.contraction_ratio, r.wall_time_ms] for r in self.log
        ]


def picard_solve(
    cfg: ModelConfig,
    T: float,
    mc: MonteCarloParams,
    tol: float,
    max_iter: int,
    x_grid: Optional[GridSpec] = None,
    k_ball: Optional[float] = None,
) -> PicardResult:
    """
    Iterate b^{p+1} = Gamma(b^p) from b^0 = 0.

    Every iteration reuses the seed of ``mc``, so successive differences
    reflect the map and not sampling noise. Iteration stops once
    ||b^{p+1} - b^p||_T^F < tol or after ``max_iter`` iterations; in the
    latter case the iterate with the smallest difference is returned,
    flagged non-converged.

    Args:
        cfg: Model configuration
        T: Horizon
        mc: Particle budget and seed
        tol: Stopping tolerance on the weighted norm of the difference
        max_iter: Iteration cap
        x_grid: Spatial grid for the norm
        k_ball: If given, record whether every iterate has ||b_i||_T <= k_ball

    Raises:
        InvalidArgumentError: If tol <= 0 or max_iter < 1
    """
    if tol <= 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise InvalidArgumentError(f"max_iter must be >= 1, got {max_iter}")

    degree = max(cfg.interactions.max_degree, 1)
    b = DriftPair.zeros(mc.time_grid(T), degree)
    records: List[IterationRecord] = []
    best, best_diff, best_iter = b, float("inf"), 0
    in_ball = True
    prev_diff: Optional[float] = None

    for p in range(1, max_iter + 1):
        started = time.perf_counter()
        nxt = gamma_map(b, cfg, mc, T)
        diff = norm_T(nxt - b, cfg.q, x_grid).total
        ratio = diff / prev_diff if prev_diff else float("nan")
        elapsed = 1000.0 * (time.perf_counter() - started)
        records.append(IterationRecord(p, diff, ratio, elapsed))
        logger.debug(f"Picard iteration {p}: norm_diff={diff:.6g}, ratio={ratio:.4g}")

        if k_ball is not None:
            in_ball = in_ball and max(norm_T(nxt, cfg.q, x_grid).bounds) <= k_ball
        if diff < best_diff:
            best, best_diff, best_iter = nxt, diff, p
        b, prev_diff = nxt, diff
        if diff < tol:
            logger.info(f"Picard iteration converged after {p} iterations (diff={diff:.3g})")
            return PicardResult(
                drift=nxt,
                converged=True,
                log=records,
                best_iteration=p,
                k_ball=k_ball,
                in_k_ball=in_ball if k_ball is not None else None,
            )

    logger.warning(
        f"Picard iteration did not reach tol={tol} in {max_iter} iterations "
        f"(best diff {best_diff:.3g} at iteration {best_iter})"
    )
    return PicardResult(
        drift=best,
        converged=False,
        log=records,
        best_iteration=best_iter,
        k_ball=k_ball,
        in_k_ball=in_ball if k_ball is not None else None,
    )


def contraction_diagnostic(
    cfg: ModelConfig,
    T: float,
    mc: MonteCarloParams,
    b: DriftPair,
    c: DriftPair,
    x_grid: Optional[GridSpec] = None,
) -> float:
    """
    Empirical Lipschitz ratio ||Gamma(b) - Gamma(c)|| / ||b - c|| under common random numbers.

    Raises:
        InvalidArgumentError: If b and c coincide in the weighted norm
    """
    denominator = norm_T((b - c).restricted(T), cfg.q, x_grid).total
    if denominator == 0.0:
        raise InvalidArgumentError("contraction_diagnostic needs two distinct drifts")
    numerator = norm_T(gamma_map(b, cfg, mc, T) - gamma_map(c, cfg, mc, T), cfg.q, x_grid).total
    return numerator / denominator
