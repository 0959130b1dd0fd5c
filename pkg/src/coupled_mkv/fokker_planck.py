"""
Explicit finite-volume solver for the coupled nonlocal Fokker-Planck system.

Each density evolves by d_t mu = d_x(B mu + D d_x mu) with D = sigma^2 / 2 and
B = V' + a (grad F_i1 * mu) + (1 - a)(grad F_i2 * nu). The convolutions are
polynomials in x whose coefficients come from the grid moments, so they are
evaluated exactly at the faces. Face fluxes use Chang-Cooper weighting; both
boundary faces carry zero flux.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Any, List, Optional

import numpy as np

from .model import ModelConfig, drift_polynomial
from .util import FloatArray, InvalidArgumentError, NumericalFailure

if TYPE_CHECKING:
    from .invariant import StationaryPair

logger = logging.getLogger(__name__)

CFL_SAFETY = 0.4
DOMAIN_TAIL_LEVEL = 1e-12
NEGATIVITY_TOLERANCE = 1e-14


class StepSizeError(NumericalFailure):
    """Exception raised when dt violates the explicit stability bound."""

    pass


class DomainAdequacyError(NumericalFailure):
    """Exception raised when the densities are not negligible at the domain boundary."""

    pass


class PositivityError(NumericalFailure):
    """Exception raised when a density turns negative."""

    pass


class FluxScheme(str, Enum):
    """Weighting of the advective face flux."""

    CHANG_COOPER = "chang-cooper"
    CENTRAL = "central"


@dataclass(frozen=True)
class Grid1D:
    """Uniform cells on [x_min, x_max]."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self) -> None:
        if self.n_cells < 16:
            raise InvalidArgumentError(f"grid needs at least 16 cells, got {self.n_cells}")
        if not self.x_min < self.x_max:
            raise InvalidArgumentError("grid needs x_min < x_max")

    @classmethod
    def symmetric(cls, half_width: float, n_cells: int) -> "Grid1D":
        return cls(-half_width, half_width, n_cells)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> FloatArray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def interior_faces(self) -> FloatArray:
        return self.x_min + np.arange(1, self.n_cells) * self.h

    def refined(self) -> "Grid1D":
        return Grid1D(self.x_min, self.x_max, 2 * self.n_cells)


@dataclass(frozen=True)
class DensityPair:
    """Cell averages of mu and nu at time t."""

    mu: FloatArray
    nu: FloatArray
    t: float = 0.0

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        if mu.shape != nu.shape or mu.ndim != 1:
            raise InvalidArgumentError("mu and nu must be 1-D arrays of equal length")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def gaussian(
        cls, grid: Grid1D, mean1: float, var1: float, mean2: float, var2: float
    ) -> "DensityPair":
        """Normalized Gaussian cell values."""
        x = grid.centers

        def bump(mean: float, var: float) -> FloatArray:
            g = np.exp(-((x - mean) ** 2) / (2.0 * var))
            return g / (grid.h * g.sum())

        return cls(mu=bump(mean1, var1), nu=bump(mean2, var2))

    @classmethod
    def from_stationary(cls, sp: "StationaryPair", grid: Grid1D) -> "DensityPair":
        """Cell values from a stationary pair sampled at the cell centers."""
        _check_on_grid(sp.grid, grid)
        return cls(mu=sp.mu / (grid.h * sp.mu.sum()), nu=sp.nu / (grid.h * sp.nu.sum()))

    def masses(self, grid: Grid1D) -> tuple[float, float]:
        return float(grid.h * self.mu.sum()), float(grid.h * self.nu.sum())

    def means(self, grid: Grid1D) -> tuple[float, float]:
        x = grid.centers
        return float(grid.h * (x * self.mu).sum()), float(grid.h * (x * self.nu).sum())

    def l1_distance(self, other: "DensityPair", grid: Grid1D) -> tuple[float, float]:
        return (
            float(grid.h * np.abs(self.mu - other.mu).sum()),
            float(grid.h * np.abs(self.nu - other.nu).sum()),
        )


def _check_on_grid(points: FloatArray, grid: Grid1D) -> None:
    if points.shape != (grid.n_cells,) or not np.allclose(
        points, grid.centers, rtol=0.0, atol=1e-12 * max(1.0, abs(grid.x_min), abs(grid.x_max))
    ):
        raise InvalidArgumentError("density is not sampled at the grid's cell centers")


def grid_moments(density: FloatArray, grid: Grid1D, order: int) -> FloatArray:
    """Moments h sum x_c^k rho_c for k = 0..order, normalized so m_0 = 1."""
    x = grid.centers
    weights = grid.h * density
    moments = np.array([(weights * x**k).sum() for k in range(order + 1)])
    return moments / moments[0]


def assemble_drift_field(
    dp: DensityPair, cfg: ModelConfig, grid: Grid1D
) -> tuple[FloatArray, FloatArray]:
    """
    Drift B = V' + a (grad F_i1 * mu) + (1 - a)(grad F_i2 * nu) at the interior faces.

    Returns:
        Face drifts for mu and for nu
    """
    K = cfg.moment_order
    mu_m = grid_moments(dp.mu, grid, K)
    nu_m = grid_moments(dp.nu, grid, K)
    faces = grid.interior_faces
    b_mu = -np.asarray(drift_polynomial(cfg, 1, mu_m, nu_m)(faces))
    b_nu = -np.asarray(drift_polynomial(cfg, 2, mu_m, nu_m)(faces))
    return b_mu, b_nu


def chang_cooper_delta(w: FloatArray) -> FloatArray:
    """delta(w) = 1/w - 1/(exp(w) - 1), with delta(0) = 1/2."""
    w = np.asarray(w, dtype=float)
    small = np.abs(w) < 1e-8
    safe = np.where(small, 1.0, w)
    with np.errstate(over="ignore"):
        delta = 1.0 / safe - 1.0 / np.expm1(safe)
    return np.where(small, 0.5 - w / 12.0, delta)


def face_fluxes(
    rho: FloatArray,
    drift: FloatArray,
    diffusion: float,
    h: float,
    scheme: FluxScheme = FluxScheme.CHANG_COOPER,
) -> FloatArray:
    """
    Fluxes at all n + 1 faces, zero at both boundaries.

    F = B [(1 - delta) rho_right + delta rho_left] + D (rho_right - rho_left) / h.
    """
    if scheme == FluxScheme.CENTRAL:
        delta = np.full_like(drift, 0.5)
    else:
        delta = chang_cooper_delta(drift * h / diffusion)
    left, right = rho[:-1], rho[1:]
    interior = drift * ((1.0 - delta) * right + delta * left) + diffusion * (right - left) / h
    flux = np.zeros(rho.size + 1)
    flux[1:-1] = interior
    return flux


def max_stable_dt(b_mu: FloatArray, b_nu: FloatArray, cfg: ModelConfig, grid: Grid1D) -> float:
    """0.4 min(h^2 / sigma^2, h / max|B|)."""
    bmax = max(float(np.abs(b_mu).max(initial=0.0)), float(np.abs(b_nu).max(initial=0.0)))
    advective = grid.h / bmax if bmax > 0 else np.inf
    return CFL_SAFETY * min(grid.h**2 / cfg.sigma**2, advective)


def fp_step(
    dp: DensityPair,
    cfg: ModelConfig,
    grid: Grid1D,
    dt: float,
    scheme: FluxScheme = FluxScheme.CHANG_COOPER,
) -> DensityPair:
    """
    One explicit finite-volume step.

    Raises:
        StepSizeError: If dt exceeds the stability bound; the step is never subdivided
        PositivityError: If a density turns negative
    """
    if dp.mu.size != grid.n_cells:
        raise InvalidArgumentError("density does not match the grid")
    b_mu, b_nu = assemble_drift_field(dp, cfg, grid)
    limit = max_stable_dt(b_mu, b_nu, cfg, grid)
    if dt <= 0 or dt > limit:
        raise StepSizeError(f"dt={dt:.6g} violates the stability bound {limit:.6g}")
    diffusion = 0.5 * cfg.sigma**2
    updated = []
    for rho, drift in ((dp.mu, b_mu), (dp.nu, b_nu)):
        flux = face_fluxes(rho, drift, diffusion, grid.h, scheme)
        new = rho + dt / grid.h * (flux[1:] - flux[:-1])
        if new.min() < -NEGATIVITY_TOLERANCE * max(new.max(), 0.0):
            raise PositivityError(f"density turned negative at t={dp.t + dt:.6g}")
        updated.append(new)
    return DensityPair(mu=updated[0], nu=updated[1], t=dp.t + dt)


def check_domain(dp: DensityPair) -> None:
    """
    Raises:
        DomainAdequacyError: If either density at a boundary cell exceeds 1e-12 of its peak
    """
    for name, rho in (("mu", dp.mu), ("nu", dp.nu)):
        peak = rho.max()
        if max(rho[0], rho[-1]) > DOMAIN_TAIL_LEVEL * peak:
            raise DomainAdequacyError(f"{name} is not negligible at the domain boundary")


@dataclass
class Evolution:
    """Result of ``fp_evolve``: final state, mass and mean logs, optional snapshots."""

    final: DensityPair
    times: FloatArray
    masses: FloatArray
    means: FloatArray
    snapshots: List[DensityPair] = field(default_factory=list)

    def snapshot_rows(self, grid: Grid1D) -> List[List[Any]]:
        rows: List[List[Any]] = []
        for snap in self.snapshots:
            for x, a, b in zip(grid.centers, snap.mu, snap.nu):
                rows.append([snap.t, float(x), float(a), float(b)])
        return rows


def fp_evolve(
    dp0: DensityPair,
    cfg: ModelConfig,
    grid: Grid1D,
    T: float,
    dt: float,
    record_stride: int = 1,
    scheme: FluxScheme = FluxScheme.CHANG_COOPER,
    keep_snapshots: bool = False,
    require_domain: bool = True,
) -> Evolution:
    """
    Repeat ``fp_step`` up to time T, logging masses and means every record_stride steps.

    Raises:
        InvalidArgumentError: If T is not a positive multiple of dt
        DomainAdequacyError: If the initial densities reach the boundary
        StepSizeError: If a step violates the stability bound
    """
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise InvalidArgumentError(f"T={T} is not a positive multiple of dt={dt}")
    if record_stride < 1:
        raise InvalidArgumentError("record_stride must be >= 1")
    if require_domain:
        check_domain(dp0)

    dp = replace(dp0, t=0.0)
    times, masses, means = [0.0], [dp.masses(grid)], [dp.means(grid)]
    snapshots = [dp] if keep_snapshots else []
    for step in range(1, n_steps + 1):
        dp = fp_step(dp, cfg, grid, dt, scheme)
        if step % record_stride == 0 or step == n_steps:
            times.append(dp.t)
            masses.append(dp.masses(grid))
            means.append(dp.means(grid))
            if keep_snapshots:
                snapshots.append(dp)
    logger.debug(f"Evolved {n_steps} steps to t={dp.t:.6g} on {grid.n_cells} cells")
    return Evolution(
        final=dp,
        times=np.array(times),
        masses=np.array(masses),
        means=np.array(means),
        snapshots=snapshots,
    )


def fp_residual(
    sp: "StationaryPair",
    cfg: ModelConfig,
    grid: Grid1D,
    scheme: FluxScheme = FluxScheme.CHANG_COOPER,
) -> tuple[float, float]:
    """
    Discrete L1 norm of the stationary operator d_x(B rho + D d_x rho) applied to sp.

    Raises:
        InvalidArgumentError: If sp is not sampled at the grid's cell centers
    """
    _check_on_grid(sp.grid, grid)
    dp = DensityPair(mu=sp.mu, nu=sp.nu)
    b_mu, b_nu = assemble_drift_field(dp, cfg, grid)
    diffusion = 0.5 * cfg.sigma**2
    res = []
    for rho, drift in ((dp.mu, b_mu), (dp.nu, b_nu)):
        flux = face_fluxes(rho, drift, diffusion, grid.h, scheme)
        res.append(float(np.abs(np.diff(flux)).sum()))
    return res[0], res[1]
