"""
Shared numerics for the coupled McKean-Vlasov toolkit.

This module holds the pieces every other module leans on: the exception roots,
the nonlinear Gronwall envelope and its comparison ODE, log-sum-exp, least
squares fitting on log-log data, and derivation of independent RNG streams
from one master seed.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt
from scipy import stats
from scipy.integrate import solve_ivp
from scipy.special import logsumexp as _scipy_logsumexp

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


class CoupledMKVError(Exception):
    """Base exception for all toolkit errors."""

    pass


class InvalidArgumentError(CoupledMKVError, ValueError):
    """Exception raised when an operation is called outside its contract."""

    pass


class NumericalFailure(CoupledMKVError):
    """Exception raised when a computation cannot produce a trustworthy result."""

    pass


@dataclass(frozen=True)
class GronwallBound:
    """
    Constants of the nonlinear Gronwall inequality

        phi(t) <= int_0^t (A phi(s) + B phi(s)^alpha) ds,   phi(0) = 0.
    """

    A: float
    B: float
    alpha: float

    def __post_init__(self) -> None:
        if not self.A > 0:
            raise InvalidArgumentError(f"A must be positive, got {self.A}")
        if self.B < 0:
            raise InvalidArgumentError(f"B must be non-negative, got {self.B}")
        if not 0 <= self.alpha < 1:
            raise InvalidArgumentError(f"alpha must lie in [0, 1), got {self.alpha}")


def gronwall_bound(gb: GronwallBound, t: float | FloatArray) -> float | FloatArray:
    """
    Evaluate the envelope (B/A (exp((1-alpha) A t) - 1))^(1/(1-alpha)).

    Args:
        gb: The inequality constants
        t: Time or array of times, all non-negative

    Returns:
        The bound at each time (same shape as ``t``)

    Raises:
        InvalidArgumentError: If any time is negative
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise InvalidArgumentError("gronwall_bound requires t >= 0")
    power = 1.0 / (1.0 - gb.alpha)
    inner = gb.B / gb.A * np.expm1((1.0 - gb.alpha) * gb.A * t_arr)
    result = inner**power
    if np.ndim(t) == 0:
        return float(result)
    return np.asarray(result, dtype=float)


def integrate_gronwall_ode(
    gb: GronwallBound,
    t_eval: Sequence[float] | FloatArray,
    psi0: float = 1e-300,
    rtol: float = 1e-10,
) -> FloatArray:
    """
    Integrate the comparison ODE psi' = A psi + B psi^alpha numerically.

    The ODE is not Lipschitz at psi = 0, so the degenerate start is replaced by
    a tiny positive value.

    Args:
        gb: The inequality constants
        t_eval: Increasing non-negative sample times
        psi0: Starting value standing in for psi(0) = 0
        rtol: Relative tolerance for the adaptive Runge-Kutta integrator

    Returns:
        psi at each requested time
    """
    times = np.asarray(t_eval, dtype=float)
    if times.size == 0:
        return np.zeros(0)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise InvalidArgumentError("t_eval must be non-negative and increasing")

    def rhs(_t: float, psi: FloatArray) -> FloatArray:
        y = np.maximum(psi, 0.0)
        return gb.A * y + gb.B * y**gb.alpha

    solution = solve_ivp(
        rhs,
        (0.0, float(times[-1])),
        [psi0],
        method="RK45",
        t_eval=times,
        rtol=rtol,
        atol=1e-300,
    )
    if not solution.success:
        raise NumericalFailure(f"Gronwall comparison ODE failed: {solution.message}")
    return np.asarray(solution.y[0], dtype=float)


def logsumexp(values: Sequence[float] | FloatArray) -> float:
    """Stable log(sum(exp(values)))."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InvalidArgumentError("logsumexp of an empty sequence")
    return float(_scipy_logsumexp(arr))


@dataclass(frozen=True)
class LinearFit:
    """Least squares line y = slope * x + intercept."""

    slope: float
    intercept: float
    r2: float
    slope_stderr: float
    n_points: int

    def ci_halfwidth(self, level: float = 0.95) -> float:
        """Half-width of the two-sided confidence interval on the slope."""
        dof = self.n_points - 2
        if dof <= 0:
            return float("nan")
        quantile = stats.t.ppf(0.5 + level / 2.0, dof)
        return float(quantile * self.slope_stderr)


def linfit(xs: Sequence[float] | FloatArray, ys: Sequence[float] | FloatArray) -> LinearFit:
    """
    Fit a straight line by ordinary least squares.

    Raises:
        InvalidArgumentError: If fewer than two distinct abscissae are given
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise InvalidArgumentError("xs and ys must have the same length")
    if np.unique(x).size < 2:
        raise InvalidArgumentError("linfit needs at least two distinct x values")
    result = stats.linregress(x, y)
    r2 = float(result.rvalue**2) if np.isfinite(result.rvalue) else 1.0
    return LinearFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r2=r2,
        slope_stderr=float(result.stderr),
        n_points=int(x.size),
    )


def derive_stream(master_seed: int, purpose: str, index: int = 0) -> int:
    """
    Derive a 64-bit seed for one (purpose, index) stream of a master seed.

    The counter scheme hashes "master|purpose|index", so adding streams never
    perturbs existing ones.
    """
    if master_seed < 0 or index < 0:
        raise InvalidArgumentError("master_seed and index must be non-negative")
    digest = hashlib.sha256(f"{master_seed}|{purpose}|{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(master_seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Create a numpy Generator on a derived stream."""
    return np.random.default_rng(derive_stream(master_seed, purpose, index))
