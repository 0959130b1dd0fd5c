"""
Stationary analysis for quadratic interactions.

With F_ij(x) = alpha_ij x^2 / 2 an invariant pair is a pair of tilted Gibbs
densities parameterized by the means (m1, m2), and those means solve the
self-consistency equation m = Phi(m). This module evaluates Phi by
truncated trapezoid quadrature with log-sum-exp stabilization, finds its
fixed points from a grid of starts, builds the stationary densities, and
provides the small-noise Laplace expansion of Phi about a common minimizer.
"""

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import numpy.typing as npt

from .model import ModelConfig
from .util import FloatArray, InvalidArgumentError, NumericalFailure, logsumexp

logger = logging.getLogger(__name__)

LOG_TAIL_LEVEL = float(np.log(1e-16))
DEFAULT_NODES = 4001
MAX_RADIUS = 1024.0
QUADRATURE_TOLERANCE = 1e-9
CRITICAL_POINT_TOLERANCE = 1e-10


class QuadratureDomainError(NumericalFailure):
    """Exception raised when a truncated domain does not contain the integrand's mass."""

    pass


class SymmetryPreconditionError(InvalidArgumentError):
    """Exception raised when a symmetric construction is asked of asymmetric potentials."""

    pass


class LaplacePreconditionError(InvalidArgumentError):
    """Exception raised when the expansion point is not a nondegenerate common minimizer."""

    pass


@dataclass(frozen=True)
class MeanPair:
    """Means (m1, m2) of the two stationary densities."""

    m1: float
    m2: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.m1) and np.isfinite(self.m2)):
            raise InvalidArgumentError(f"mean pair must be finite, got ({self.m1}, {self.m2})")

    @classmethod
    def from_array(cls, values: Sequence[float] | FloatArray) -> "MeanPair":
        return cls(float(values[0]), float(values[1]))

    def as_array(self) -> FloatArray:
        return np.array([self.m1, self.m2])

    def distance(self, other: "MeanPair") -> float:
        return float(max(abs(self.m1 - other.m1), abs(self.m2 - other.m2)))

    def __neg__(self) -> "MeanPair":
        return MeanPair(-self.m1, -self.m2)


def tilt_matrix(cfg: ModelConfig) -> npt.NDArray[np.float64]:
    """
    Coefficients c_ij of the linear tilt beta_i = sum_j c_ij m_j.

    Rows: (a alpha_11, (1 - a) alpha_12) and (a alpha_21, (1 - a) alpha_22).

    Raises:
        InvalidArgumentError: If the interactions are not quadratic
    """
    alpha = cfg.quadratic_alpha
    if alpha is None:
        raise InvalidArgumentError("stationary analysis requires quadratic interactions")
    a, b = cfg.weights()
    return alpha * np.array([[a, b], [a, b]])


def _exponent(cfg: ModelConfig, species: int, m: MeanPair, x: FloatArray) -> FloatArray:
    """-(2 / sigma^2) [V_i(x) + tau_i x^2 / 2 - beta_i(m) x]."""
    c = tilt_matrix(cfg)
    tau = c[species - 1].sum()
    beta = c[species - 1] @ m.as_array()
    u = np.asarray(cfg.potential(species)(x)) + 0.5 * tau * x * x - beta * x
    return -2.0 / cfg.sigma**2 * u


def _symmetric_axis(extent: float, n: int) -> FloatArray:
    """Uniform points on [-extent, extent], exactly antisymmetric about 0."""
    axis = np.linspace(-extent, extent, n)
    return 0.5 * (axis - axis[::-1])


def _trapezoid_log_weights(n: int) -> FloatArray:
    w = np.zeros(n)
    w[0] = w[-1] = np.log(0.5)
    return w


def _grid_log_weights(grid: FloatArray) -> FloatArray:
    """log trapezoid weights of an arbitrary strictly increasing grid."""
    steps = np.diff(grid)
    if np.any(steps <= 0):
        raise InvalidArgumentError("density grid must be strictly increasing")
    w = np.zeros(grid.size)
    w[:-1] += 0.5 * steps
    w[1:] += 0.5 * steps
    return np.log(w)


@dataclass(frozen=True)
class QuadratureRule:
    """
    Composite trapezoid rule on [-radius, radius].

    ``tail_bound`` is the largest ratio of the integrand at the endpoints to
    its peak, over the corners of the mean box the rule was built for.
    """

    radius: float
    n_nodes: int = DEFAULT_NODES
    m_box: float = 2.0
    tail_bound: float = 0.0
    scheme: str = "trapezoid-on-truncated-domain"

    def __post_init__(self) -> None:
        if self.radius <= 0 or self.n_nodes < 3:
            raise InvalidArgumentError("quadrature needs radius > 0 and at least 3 nodes")

    @classmethod
    def build(
        cls, cfg: ModelConfig, m_box: float = 2.0, n_nodes: int = DEFAULT_NODES
    ) -> "QuadratureRule":
        """
        Double the radius from 1 until the integrand at +-R is below 1e-16 of
        its peak for every species and every corner of [-m_box, m_box]^2.

        Raises:
            QuadratureDomainError: If no radius up to 1024 qualifies
        """
        tilt_matrix(cfg)
        corners = [MeanPair(s1 * m_box, s2 * m_box) for s1 in (-1, 1) for s2 in (-1, 1)]
        radius = 1.0
        while radius <= MAX_RADIUS:
            rule = cls(radius=radius, n_nodes=n_nodes, m_box=m_box)
            log_tail = max(rule.log_tail_ratio(cfg, m) for m in corners)
            if log_tail < LOG_TAIL_LEVEL:
                logger.debug(f"Quadrature radius {radius} (log tail {log_tail:.1f})")
                return cls(
                    radius=radius, n_nodes=n_nodes, m_box=m_box, tail_bound=float(np.exp(log_tail))
                )
            radius *= 2.0
        raise QuadratureDomainError(f"no truncation radius up to {MAX_RADIUS} contains the mass")

    def nodes(self) -> FloatArray:
        return _symmetric_axis(self.radius, self.n_nodes)

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.n_nodes - 1)

    def log_tail_ratio(self, cfg: ModelConfig, m: MeanPair) -> float:
        """log of max(endpoint integrand) / peak, worst species."""
        x = self.nodes()
        worst = -np.inf
        for species in (1, 2):
            e = _exponent(cfg, species, m, x)
            worst = max(worst, float(max(e[0], e[-1]) - e.max()))
        return worst

    def refined(self) -> "QuadratureRule":
        """Same domain with the node spacing halved."""
        return QuadratureRule(
            radius=self.radius,
            n_nodes=2 * self.n_nodes - 1,
            m_box=self.m_box,
            tail_bound=self.tail_bound,
        )


def _tilted_moments(
    cfg: ModelConfig, species: int, m: MeanPair, rule: QuadratureRule
) -> tuple[float, float]:
    """Mean and variance of the tilted density of one species."""
    x = rule.nodes()
    e = _exponent(cfg, species, m, x)
    if max(e[0], e[-1]) - e.max() >= LOG_TAIL_LEVEL:
        raise QuadratureDomainError(
            f"integrand of species {species} at m=({m.m1:.6g}, {m.m2:.6g}) "
            f"is not negligible at radius {rule.radius}"
        )
    log_w = e + _trapezoid_log_weights(x.size)
    p = np.exp(log_w - log_w.max())
    z = p.sum()
    mean = float((x * p).sum() / z)
    var = float(((x - mean) ** 2 * p).sum() / z)
    return mean, var


def phi_map(m: MeanPair, cfg: ModelConfig, rule: QuadratureRule) -> MeanPair:
    """
    Evaluate the self-consistency map Phi at a mean pair.

    Phi_i(m) is the mean of exp(-(2/sigma^2)[V_i(x) + tau_i x^2/2 - beta_i(m) x]).

    Raises:
        InvalidArgumentError: If the interactions are not quadratic
        QuadratureDomainError: If the integrand is not negligible at the rule's edge
    """
    return MeanPair(
        _tilted_moments(cfg, 1, m, rule)[0],
        _tilted_moments(cfg, 2, m, rule)[0],
    )


def phi_jacobian(m: MeanPair, cfg: ModelConfig, rule: QuadratureRule) -> npt.NDArray[np.float64]:
    """Analytic Jacobian d Phi_i / d m_j = (2 / sigma^2) c_ij Var_i(m)."""
    c = tilt_matrix(cfg)
    var = np.array([_tilted_moments(cfg, s, m, rule)[1] for s in (1, 2)])
    return 2.0 / cfg.sigma**2 * c * var[:, None]


def _residual(m: MeanPair, cfg: ModelConfig, rule: QuadratureRule) -> float:
    return phi_map(m, cfg, rule).distance(m)


def _fd_jacobian(m: MeanPair, cfg: ModelConfig, rule: QuadratureRule) -> npt.NDArray[np.float64]:
    """Central-difference Jacobian of Phi with h = 1e-5 (1 + |m_j|)."""
    base = m.as_array()
    jac = np.empty((2, 2))
    for j in range(2):
        h = 1e-5 * (1.0 + abs(base[j]))
        up, down = base.copy(), base.copy()
        up[j] += h
        down[j] -= h
        diff = phi_map(MeanPair.from_array(up), cfg, rule).as_array() - phi_map(
            MeanPair.from_array(down), cfg, rule
        ).as_array()
        jac[:, j] = diff / (2.0 * h)
    return jac


def _newton(
    m: MeanPair, cfg: ModelConfig, rule: QuadratureRule, max_steps: int
) -> tuple[MeanPair, float]:
    """Newton on G(m) = Phi(m) - m; returns the best point seen and its residual."""
    best, best_res = m, _residual(m, cfg, rule)
    current = m
    for _ in range(max_steps):
        g = phi_map(current, cfg, rule).as_array() - current.as_array()
        jac = _fd_jacobian(current, cfg, rule) - np.eye(2)
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            break
        try:
            current = MeanPair.from_array(current.as_array() + step)
            res = _residual(current, cfg, rule)
        except (InvalidArgumentError, QuadratureDomainError):
            break
        if res < best_res:
            best, best_res = current, res
        else:
            break
    return best, best_res


class Stability(str, Enum):
    """Heuristic stability of a root under undamped iteration of Phi."""

    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class Root:
    """A fixed point of Phi."""

    mean: MeanPair
    classification: Stability
    residual: float
    spectral_radius: float

    def row(self, sigma: float) -> List[Any]:
        return [sigma, self.mean.m1, self.mean.m2, self.residual, self.classification.value]


@dataclass(frozen=True)
class StartDiagnostic:
    """What happened to one start."""

    start: MeanPair
    converged: bool
    iterations: int
    residual: float
    method: str
    message: str = ""


@dataclass
class FixedPointResult:
    """Deduplicated roots plus per-start diagnostics."""

    roots: List[Root]
    diagnostics: List[StartDiagnostic] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.roots)

    def means(self) -> List[MeanPair]:
        return [r.mean for r in self.roots]


def _solve_from(
    start: MeanPair,
    cfg: ModelConfig,
    rule: QuadratureRule,
    damping: float,
    tol: float,
    max_iter: int,
) -> tuple[Optional[MeanPair], StartDiagnostic]:
    m = start
    try:
        for it in range(1, max_iter + 1):
            phi = phi_map(m, cfg, rule)
            if phi.distance(m) < tol:
                polished, res = _newton(m, cfg, rule, max_steps=5)
                return polished, StartDiagnostic(start, True, it, res, "damped")
            m = MeanPair.from_array((1.0 - damping) * m.as_array() + damping * phi.as_array())
        # Damped iteration stalls near repelling roots; Newton can still reach them
        polished, res = _newton(start, cfg, rule, max_steps=50)
        if res < tol:
            return polished, StartDiagnostic(start, True, max_iter, res, "newton")
        return None, StartDiagnostic(
            start, False, max_iter, res, "newton", "no convergence from this start"
        )
    except (InvalidArgumentError, QuadratureDomainError) as exc:
        return None, StartDiagnostic(start, False, 0, float("nan"), "damped", str(exc))


def fixed_points(
    cfg: ModelConfig,
    rule: QuadratureRule,
    starts: Sequence[MeanPair],
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
    executor: Optional[Executor] = None,
) -> FixedPointResult:
    """
    Find the fixed points of Phi reachable from a set of starts.

    Each start runs the damped iteration m <- (1 - theta) m + theta Phi(m);
    converged points are polished by Newton steps with a central-difference
    Jacobian, starts that stall fall back to Newton. A root is stable when
    the spectral radius of the Jacobian of Phi there is below one; roots of
    equal stability closer than 10 tol are merged.

    Raises:
        InvalidArgumentError: If starts is empty, tol <= 0 or theta outside (0, 1]
    """
    if not starts:
        raise InvalidArgumentError("fixed_points needs at least one start")
    if tol <= 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}")
    if not 0 < damping <= 1:
        raise InvalidArgumentError(f"damping must lie in (0, 1], got {damping}")

    def solve(start: MeanPair) -> tuple[Optional[MeanPair], StartDiagnostic]:
        return _solve_from(start, cfg, rule, damping, tol, max_iter)

    outcomes = list(executor.map(solve, starts)) if executor else [solve(s) for s in starts]

    roots: List[Root] = []
    for found, diag in outcomes:
        if found is None:
            logger.debug(f"Start ({diag.start.m1:.3g}, {diag.start.m2:.3g}): {diag.message}")
            continue
        radius = float(np.max(np.abs(np.linalg.eigvals(phi_jacobian(found, cfg, rule)))))
        stability = Stability.STABLE if radius < 1.0 else Stability.UNSTABLE
        # Near a bifurcation the branches meet; only same-stability roots may be merged
        if any(
            r.classification == stability and found.distance(r.mean) < 10.0 * tol for r in roots
        ):
            continue
        roots.append(
            Root(
                mean=found,
                classification=stability,
                residual=diag.residual,
                spectral_radius=radius,
            )
        )
    roots.sort(key=lambda r: (r.mean.m1, r.mean.m2))
    if not roots:
        logger.warning(f"No start converged (sigma={cfg.sigma})")
    else:
        logger.info(f"Found {len(roots)} fixed point(s) at sigma={cfg.sigma}")
    return FixedPointResult(roots=roots, diagnostics=[d for _, d in outcomes])


def default_starts(extent: float, n: int = 7) -> List[MeanPair]:
    """n x n uniform start grid over [-extent, extent]^2."""
    axis = _symmetric_axis(extent, n)
    return [MeanPair(float(u), float(v)) for u in axis for v in axis]


@dataclass
class StationaryPair:
    """Normalized stationary densities on a grid and the residual of their means."""

    grid: FloatArray
    mu: FloatArray
    nu: FloatArray
    means: MeanPair
    residual: float

    def grid_means(self) -> tuple[float, float]:
        return (
            float(np.trapezoid(self.grid * self.mu, self.grid)),
            float(np.trapezoid(self.grid * self.nu, self.grid)),
        )

    def rows(self) -> List[List[float]]:
        return [[float(x), float(a), float(b)] for x, a, b in zip(self.grid, self.mu, self.nu)]


def _normalized_density(
    cfg: ModelConfig, species: int, m: MeanPair, grid: FloatArray
) -> FloatArray:
    e = _exponent(cfg, species, m, grid)
    if max(e[0], e[-1]) - e.max() >= LOG_TAIL_LEVEL:
        raise QuadratureDomainError(
            f"grid [{grid[0]:.3g}, {grid[-1]:.3g}] is narrower than the support "
            f"of species {species}"
        )
    log_mass = logsumexp(e + _grid_log_weights(grid))
    return np.exp(e - log_mass)


def stationary_density(
    m: MeanPair,
    cfg: ModelConfig,
    grid: Sequence[float] | FloatArray,
    rule: Optional[QuadratureRule] = None,
) -> StationaryPair:
    """
    Stationary densities with means parameter m on an increasing grid.

    Densities are normalized by the trapezoid rule on that grid. The residual
    |Phi(m) - m| is recorded, not enforced.

    Raises:
        QuadratureDomainError: If the grid does not contain the densities' mass
        InvalidArgumentError: If the grid is not strictly increasing
    """
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise InvalidArgumentError("stationary_density needs a grid of at least 3 points")
    rule = rule or QuadratureRule.build(cfg, m_box=max(abs(m.m1), abs(m.m2)) + 1.0)
    return StationaryPair(
        grid=x,
        mu=_normalized_density(cfg, 1, m, x),
        nu=_normalized_density(cfg, 2, m, x),
        means=m,
        residual=_residual(m, cfg, rule),
    )


def symmetric_invariant(
    cfg: ModelConfig,
    grid: Sequence[float] | FloatArray,
    rule: Optional[QuadratureRule] = None,
) -> StationaryPair:
    """
    The symmetric invariant pair: stationary densities with zero means.

    Raises:
        SymmetryPreconditionError: If V1 or V2 is not even
        NumericalFailure: If (0, 0) is not a fixed point to quadrature accuracy
    """
    if not (cfg.v1.is_even() and cfg.v2.is_even()):
        raise SymmetryPreconditionError("symmetric invariant measure needs even V1 and V2")
    pair = stationary_density(MeanPair(0.0, 0.0), cfg, grid, rule)
    if pair.residual >= QUADRATURE_TOLERANCE:
        raise NumericalFailure(f"(0, 0) residual {pair.residual:.3g} exceeds quadrature tolerance")
    return pair


@dataclass(frozen=True)
class LaplaceExpansion:
    """
    First-order small-noise coefficients: Phi_i(m* + rho sigma^2) = m* - k_i sigma^2 + o(sigma^2).
    """

    m_star: float
    k1: float
    k2: float
    tau1: float
    tau2: float
    rho_threshold: float
    laplace_zeta1: float = 0.0
    laplace_zeta2: float = 0.0
    rho1: float = 0.0
    rho2: float = 0.0

    def to_json_dict(self) -> Dict[str, float]:
        return {
            "m_star": self.m_star,
            "k1": self.k1,
            "k2": self.k2,
            "rho_threshold": self.rho_threshold,
            "tau1": self.tau1,
            "tau2": self.tau2,
        }


def _check_common_minimizer(cfg: ModelConfig, m_star: float) -> None:
    for species in (1, 2):
        v = cfg.potential(species)
        if abs(v.derivative()(m_star)) > CRITICAL_POINT_TOLERANCE:
            raise LaplacePreconditionError(f"V{species}'({m_star}) is not zero")
        if v.derivative(2)(m_star) <= 0:
            raise LaplacePreconditionError(f"V{species}''({m_star}) is not positive")


def laplace_expand(cfg: ModelConfig, m_star: float, rho1: float, rho2: float) -> LaplaceExpansion:
    """
    Small-noise expansion of Phi about a common nondegenerate minimizer m*.

    With U2 = V_i''(m*) + tau_i and laplace_zeta_i = sum_j c_ij rho_j the
    coefficients are k_i = V_i'''(m*) / (4 U2^2) - laplace_zeta_i / U2. The
    threshold max_i |V_i'''| / (4 V_i'' (V_i'' + tau_i)) is the smallest rho
    for which |rho_j| <= rho forces |k_i| <= rho.

    Raises:
        LaplacePreconditionError: If m* is not a nondegenerate critical point of V1 and V2
        InvalidArgumentError: If the interactions are not quadratic
    """
    c = tilt_matrix(cfg)
    _check_common_minimizer(cfg, m_star)
    tau = c.sum(axis=1)
    zeta = c @ np.array([rho1, rho2])
    ks, thresholds = [], []
    for i, species in enumerate((1, 2)):
        v = cfg.potential(species)
        v2, v3 = v.derivative(2)(m_star), v.derivative(3)(m_star)
        u2 = v2 + tau[i]
        ks.append(v3 / (4.0 * u2**2) - zeta[i] / u2)
        thresholds.append(abs(v3) / (4.0 * v2 * u2))
    threshold = float(max(thresholds))

    if max(abs(rho1), abs(rho2)) <= threshold and max(abs(k) for k in ks) > threshold * (1 + 1e-12):
        raise NumericalFailure("expansion coefficients escape the rho-box")
    return LaplaceExpansion(
        m_star=m_star,
        k1=float(ks[0]),
        k2=float(ks[1]),
        tau1=float(tau[0]),
        tau2=float(tau[1]),
        rho_threshold=threshold,
        laplace_zeta1=float(zeta[0]),
        laplace_zeta2=float(zeta[1]),
        rho1=rho1,
        rho2=rho2,
    )


def laplace_moment_correction(
    cfg: ModelConfig, species: int, n: int, m_star: float, rho1: float = 0.0, rho2: float = 0.0
) -> float:
    """
    First-order coefficient c_n with E[x^n] = m*^n + c_n sigma^2 + o(sigma^2).

    For n = 1 this is -k_i of ``laplace_expand``.
    """
    if n < 1:
        raise InvalidArgumentError(f"moment order must be >= 1, got {n}")
    c = tilt_matrix(cfg)
    _check_common_minimizer(cfg, m_star)
    v = cfg.potential(species)
    u2 = v.derivative(2)(m_star) + c[species - 1].sum()
    u3 = v.derivative(3)(m_star)
    df = 2.0 * float(c[species - 1] @ np.array([rho1, rho2]))
    if n == 1:
        return -(u3 / u2 - 2.0 * df) / (4.0 * u2)
    z = m_star
    return -(n * z ** (n - 2) / (4.0 * u2)) * (z * u3 / u2 - n + 1 - 2.0 * z * df)


def laplace_errors(
    cfg: ModelConfig, expansion: LaplaceExpansion, sigmas: Sequence[float]
) -> List[float]:
    """Normalized errors |Phi_1(m* + rho sigma^2) - (m* - k1 sigma^2)| / sigma^2."""
    errors = []
    for sigma in sigmas:
        scfg = cfg.with_updates(sigma=float(sigma))
        s2 = float(sigma) ** 2
        m = MeanPair(
            expansion.m_star + expansion.rho1 * s2, expansion.m_star + expansion.rho2 * s2
        )
        rule = QuadratureRule.build(scfg, m_box=max(abs(m.m1), abs(m.m2)) + 1.0)
        phi1 = phi_map(m, scfg, rule).m1
        errors.append(abs(phi1 - (expansion.m_star - expansion.k1 * s2)) / s2)
    return errors


@dataclass(frozen=True)
class ScanRow:
    """Roots found at one noise level."""

    sigma: float
    root_count: int
    roots: List[Root]


def sigma_scan(
    cfg: ModelConfig,
    sigma_list: Sequence[float],
    starts: Sequence[MeanPair],
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
    executor: Optional[Executor] = None,
) -> List[ScanRow]:
    """
    Trace the root count over decreasing sigma, warm-starting from previous roots.

    Raises:
        InvalidArgumentError: If sigma_list is not strictly decreasing
    """
    sigmas = [float(s) for s in sigma_list]
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise InvalidArgumentError("sigma_list must be strictly decreasing")
    extent = max((max(abs(s.m1), abs(s.m2)) for s in starts), default=1.0)
    rows: List[ScanRow] = []
    warm: List[MeanPair] = []
    for sigma in sigmas:
        scfg = cfg.with_updates(sigma=sigma)
        rule = QuadratureRule.build(scfg, m_box=extent)
        result = fixed_points(scfg, rule, list(starts) + warm, damping, tol, max_iter, executor)
        if rows and rows[-1].root_count != result.count:
            logger.info(
                f"Root count changes {rows[-1].root_count} -> {result.count} "
                f"between sigma={rows[-1].sigma} and sigma={sigma}"
            )
        rows.append(ScanRow(sigma=sigma, root_count=result.count, roots=result.roots))
        warm = result.means()
    return rows


def symmetric_instability(cfg: ModelConfig, rule: Optional[QuadratureRule] = None) -> float:
    """Spectral radius of the Jacobian of Phi at (0, 0); above one the symmetric root repels."""
    rule = rule or QuadratureRule.build(cfg, m_box=1.0)
    jac = phi_jacobian(MeanPair(0.0, 0.0), cfg, rule)
    return float(np.max(np.abs(np.linalg.eigvals(jac))))


def locate_transition(
    cfg: ModelConfig,
    sigma_unique: float,
    sigma_multiple: float,
    starts: Sequence[MeanPair],
    width: float = 1e-3,
    tol: float = 1e-10,
) -> tuple[float, float]:
    """
    Bisect in sigma between a unique-root level and a multi-root level.

    Returns:
        (sigma_low, sigma_high) with multiple roots at sigma_low, one at sigma_high

    Raises:
        InvalidArgumentError: If the bracket does not straddle the transition
    """
    if not sigma_multiple < sigma_unique or width <= 0:
        raise InvalidArgumentError("need sigma_multiple < sigma_unique and width > 0")
    extent = max((max(abs(s.m1), abs(s.m2)) for s in starts), default=1.0)

    def count(sigma: float) -> int:
        scfg = cfg.with_updates(sigma=sigma)
        return fixed_points(scfg, QuadratureRule.build(scfg, m_box=extent), starts, tol=tol).count

    if count(sigma_unique) != 1 or count(sigma_multiple) <= 1:
        raise InvalidArgumentError("sigma bracket does not straddle the root-count transition")
    low, high = sigma_multiple, sigma_unique
    while high - low > width:
        mid = 0.5 * (low + high)
        if count(mid) > 1:
            low = mid
        else:
            high = mid
    logger.info(f"Root-count transition located in [{low:.6g}, {high:.6g}]")
    return low, high
