"""
Problem-instance definition for the coupled two-species system.

This module implements the model layer: polynomial potentials and interaction
gradients, the full configuration (potentials, interactions, population weight
``a`` and noise level ``sigma``), the exact moment expansion of the
interaction convolutions, and the diagnostic check of the standing
modelling hypotheses.
"""

import logging
from enum import Enum
from math import ceil, comb
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .util import FloatArray, InvalidArgumentError

logger = logging.getLogger(__name__)

# Scan used for the semi-convexity constants
SCAN_POINTS = 10_001
SCAN_RADIUS_MARGIN = 1.1

HYPOTHESES = (
    "interaction_regularity",
    "potential_regularity",
    "semiconvexity",
    "quartic_coercivity",
    "convexity_at_infinity",
    "polynomial_growth",
    "self_interaction",
    "cross_interaction",
)


class PolynomialSpec(BaseModel):
    """
    A real polynomial c_0 + c_1 x + ... + c_d x^d.

    Trailing zero coefficients are dropped on construction, so ``degree`` is
    the true degree (0 for constants and for the zero polynomial).
    """

    model_config = ConfigDict(frozen=True)

    coeffs: tuple[float, ...] = Field(
        default=(0.0,), description="Coefficients, constant term first"
    )

    @model_validator(mode="before")
    @classmethod
    def _accept_bare_list(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple)):
            return {"coeffs": tuple(data)}
        return data

    @field_validator("coeffs")
    @classmethod
    def validate_coeffs(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        """
        Validate and normalize the coefficient list.

        Raises:
            ValueError: If a coefficient is not finite
        """
        values = [float(c) for c in v]
        if not all(np.isfinite(values)):
            raise ValueError("polynomial coefficients must be finite")
        while len(values) > 1 and values[-1] == 0.0:
            values.pop()
        if not values:
            values = [0.0]
        return tuple(values)

    @classmethod
    def zero(cls) -> "PolynomialSpec":
        return cls(coeffs=(0.0,))

    @classmethod
    def monomial(cls, coeff: float, power: int) -> "PolynomialSpec":
        return cls(coeffs=tuple([0.0] * power + [float(coeff)]))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    def is_odd(self) -> bool:
        """Whether only odd powers carry nonzero coefficients."""
        return all(c == 0.0 for k, c in enumerate(self.coeffs) if k % 2 == 0)

    def is_even(self) -> bool:
        """Whether only even powers carry nonzero coefficients."""
        return all(c == 0.0 for k, c in enumerate(self.coeffs) if k % 2 == 1)

    def __call__(self, x: float | FloatArray) -> Any:
        """Evaluate by Horner's rule, highest degree first."""
        x_arr = np.asarray(x, dtype=float)
        result = np.full_like(x_arr, self.coeffs[-1])
        for c in reversed(self.coeffs[:-1]):
            result = result * x_arr + c
        if np.ndim(x) == 0:
            return float(result)
        return result

    def derivative(self, order: int = 1) -> "PolynomialSpec":
        """Return the derivative of the given order."""
        coeffs = list(self.coeffs)
        for _ in range(order):
            if len(coeffs) <= 1:
                coeffs = [0.0]
                continue
            coeffs = [k * coeffs[k] for k in range(1, len(coeffs))]
        return PolynomialSpec(coeffs=tuple(coeffs))

    def __add__(self, other: "PolynomialSpec") -> "PolynomialSpec":
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n)
        a[: len(self.coeffs)] += self.coeffs
        a[: len(other.coeffs)] += other.coeffs
        return PolynomialSpec(coeffs=tuple(a))

    def scaled(self, factor: float) -> "PolynomialSpec":
        return PolynomialSpec(coeffs=tuple(factor * c for c in self.coeffs))

    def times_x(self) -> "PolynomialSpec":
        """Return x * p(x)."""
        return PolynomialSpec(coeffs=(0.0,) + self.coeffs)

    def padded(self, length: int) -> FloatArray:
        """Coefficient array zero-padded to ``length`` entries."""
        if length < len(self.coeffs):
            raise InvalidArgumentError(
                f"cannot pad degree {self.degree} polynomial to {length} coefficients"
            )
        out = np.zeros(length)
        out[: len(self.coeffs)] = self.coeffs
        return out


def eval_potential(p: PolynomialSpec, x: float) -> float:
    """Evaluate a potential (or any polynomial) at x."""
    return float(p(x))


def convolve_moments(grad: PolynomialSpec, moments: Sequence[float] | FloatArray) -> PolynomialSpec:
    """
    Expand x -> E[grad(x - Z)] as a polynomial in x from the moments of Z.

    With grad(z) = sum_k c_k z^k, binomial expansion gives the coefficient of
    x^j as sum_{k>=j} c_k C(k, k-j) (-1)^(k-j) m_{k-j}.

    Args:
        grad: Interaction gradient
        moments: Moments m_0..m_K of Z, K >= degree of grad

    Returns:
        The convolution as a polynomial in x

    Raises:
        InvalidArgumentError: If the moment vector is too short
    """
    m = np.asarray(moments, dtype=float)
    d = grad.degree
    if m.ndim != 1 or m.size < d + 1:
        raise InvalidArgumentError(
            f"interaction of degree {d} needs moments of order 0..{d}, got {m.size} values"
        )
    if grad.is_zero:
        return PolynomialSpec.zero()
    out = np.zeros(d + 1)
    for k, c in enumerate(grad.coeffs):
        if c == 0.0:
            continue
        for j in range(k + 1):
            shift = k - j
            out[j] += c * comb(k, shift) * (-1) ** shift * m[shift]
    return PolynomialSpec(coeffs=tuple(out))


class InteractionSpec(BaseModel):
    """
    Interaction gradients between and within the two species.

    ``grad_f11``/``grad_f22`` act within a species, ``grad_f12`` is felt by X
    from Y and ``grad_f21`` by Y from X. The self- and cross-interaction
    hypotheses are not enforced here; ``validate_assumptions`` reports them.
    """

    model_config = ConfigDict(frozen=True)

    grad_f11: PolynomialSpec = Field(default_factory=PolynomialSpec.zero)
    grad_f12: PolynomialSpec = Field(default_factory=PolynomialSpec.zero)
    grad_f21: PolynomialSpec = Field(default_factory=PolynomialSpec.zero)
    grad_f22: PolynomialSpec = Field(default_factory=PolynomialSpec.zero)

    @property
    def q(self) -> int:
        """q >= 1 with 2q - 1 the largest self-interaction degree."""
        d = max(self.grad_f11.degree, self.grad_f22.degree)
        return max(1, ceil((d + 1) / 2))

    @property
    def max_degree(self) -> int:
        return max(g.degree for g in self.grads())

    def grads(self) -> tuple[PolynomialSpec, PolynomialSpec, PolynomialSpec, PolynomialSpec]:
        return (self.grad_f11, self.grad_f12, self.grad_f21, self.grad_f22)

    def grad(self, i: int, j: int) -> PolynomialSpec:
        """Gradient of F_ij for i, j in {1, 2}."""
        table = {
            (1, 1): self.grad_f11,
            (1, 2): self.grad_f12,
            (2, 1): self.grad_f21,
            (2, 2): self.grad_f22,
        }
        try:
            return table[(i, j)]
        except KeyError:
            raise InvalidArgumentError(f"no interaction F_{i}{j}") from None

    @property
    def is_zero(self) -> bool:
        return all(g.is_zero for g in self.grads())


class QuadraticInteraction(BaseModel):
    """Quadratic interaction potentials F_ij(x) = alpha_ij x^2 / 2."""

    model_config = ConfigDict(frozen=True)

    alpha: tuple[tuple[float, float], tuple[float, float]] = Field(
        description="2x2 matrix ((alpha_11, alpha_12), (alpha_21, alpha_22))"
    )

    @field_validator("alpha")
    @classmethod
    def validate_alpha(
        cls, v: tuple[tuple[float, float], tuple[float, float]]
    ) -> tuple[tuple[float, float], tuple[float, float]]:
        """Require non-negative finite entries."""
        for row in v:
            for entry in row:
                if not np.isfinite(entry) or entry < 0:
                    raise ValueError("alpha entries must be finite and non-negative")
        return v

    def to_interaction(self) -> InteractionSpec:
        (a11, a12), (a21, a22) = self.alpha
        return InteractionSpec(
            grad_f11=PolynomialSpec.monomial(a11, 1),
            grad_f12=PolynomialSpec.monomial(a12, 1),
            grad_f21=PolynomialSpec.monomial(a21, 1),
            grad_f22=PolynomialSpec.monomial(a22, 1),
        )


class ModelConfig(BaseModel):
    """
    Full problem instance: confining potentials, interactions, a and sigma.
    """

    model_config = ConfigDict(frozen=True)

    v1: PolynomialSpec = Field(description="Confining potential of species X")
    v2: PolynomialSpec = Field(description="Confining potential of species Y")
    interactions: InteractionSpec = Field(default_factory=InteractionSpec)
    a: float = Field(ge=0.0, le=1.0, description="Asymptotic fraction of X particles")
    sigma: float = Field(gt=0.0, description="Noise amplitude")

    @model_validator(mode="before")
    @classmethod
    def _accept_document_layout(cls, data: Any) -> Any:
        # Documents use "interaction" with either gradient lists or a "quadratic" matrix
        if not isinstance(data, dict) or "interaction" not in data:
            return data
        data = dict(data)
        block = data.pop("interaction")
        if isinstance(block, dict) and "quadratic" in block:
            data["interactions"] = QuadraticInteraction(alpha=block["quadratic"]).to_interaction()
        else:
            data["interactions"] = block
        return data

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "ModelConfig":
        """Build a config from the JSON document layout."""
        return cls.model_validate(document)

    @property
    def q(self) -> int:
        return self.interactions.q

    @property
    def moment_order(self) -> int:
        """Moment order K = max(2q - 1, 4), raised to any larger interaction degree."""
        return max(2 * self.q - 1, 4, self.interactions.max_degree)

    @property
    def quadratic_alpha(self) -> Optional[npt.NDArray[np.float64]]:
        """The alpha matrix if every interaction is of the form alpha_ij z, else None."""
        alpha = np.zeros((2, 2))
        for i in (1, 2):
            for j in (1, 2):
                g = self.interactions.grad(i, j)
                if g.degree > 1 or g.coeffs[0] != 0.0:
                    return None
                alpha[i - 1, j - 1] = g.coeffs[1] if g.degree == 1 else 0.0
        return alpha

    def potential(self, species: int) -> PolynomialSpec:
        if species == 1:
            return self.v1
        if species == 2:
            return self.v2
        raise InvalidArgumentError(f"species must be 1 or 2, got {species}")

    def weights(self) -> tuple[float, float]:
        """Mixing weights (a, 1 - a) applied to the X- and Y-convolutions."""
        return self.a, 1.0 - self.a

    def swap_species(self) -> "ModelConfig":
        """Exchange the roles of X and Y."""
        inter = self.interactions
        return ModelConfig(
            v1=self.v2,
            v2=self.v1,
            interactions=InteractionSpec(
                grad_f11=inter.grad_f22,
                grad_f12=inter.grad_f21,
                grad_f21=inter.grad_f12,
                grad_f22=inter.grad_f11,
            ),
            a=1.0 - self.a,
            sigma=self.sigma,
        )

    def with_updates(self, **changes: Any) -> "ModelConfig":
        return self.model_copy(update=changes)


def drift_polynomial(
    cfg: ModelConfig,
    species: int,
    mu_moments: Sequence[float] | FloatArray,
    nu_moments: Sequence[float] | FloatArray,
) -> PolynomialSpec:
    """
    Mean-field drift of one species as a polynomial in the position.

    For species 1 this is -V1' - a (grad F11 * mu) - (1 - a)(grad F12 * nu);
    species 2 uses V2, F21 and F22.
    """
    a, b = cfg.weights()
    own = convolve_moments(cfg.interactions.grad(species, 1), mu_moments).scaled(a)
    other = convolve_moments(cfg.interactions.grad(species, 2), nu_moments).scaled(b)
    return (cfg.potential(species).derivative() + own + other).scaled(-1.0)


def drift_x(
    cfg: ModelConfig,
    x: float | FloatArray,
    mu_moments: Sequence[float] | FloatArray,
    nu_moments: Sequence[float] | FloatArray,
) -> Any:
    """
    Drift of the X-equation at x given the moments of mu and nu.

    Raises:
        InvalidArgumentError: If a moment vector is shorter than the interaction degree requires
    """
    return drift_polynomial(cfg, 1, mu_moments, nu_moments)(x)


def drift_y(
    cfg: ModelConfig,
    y: float | FloatArray,
    mu_moments: Sequence[float] | FloatArray,
    nu_moments: Sequence[float] | FloatArray,
) -> Any:
    """Drift of the Y-equation at y given the moments of mu and nu."""
    return drift_polynomial(cfg, 2, mu_moments, nu_moments)(y)


class Verdict(str, Enum):
    """Outcome of one hypothesis check."""

    SATISFIED = "satisfied"
    VIOLATED = "violated"
    NOT_CHECKABLE = "not-checkable"


class HypothesisCheck(BaseModel):
    """Verdict and witness values for one hypothesis."""

    model_config = ConfigDict(frozen=True)

    verdict: Verdict
    witnesses: Dict[str, float] = Field(default_factory=dict)
    detail: str = ""


class AssumptionReport(BaseModel):
    """One verdict per entry of HYPOTHESES."""

    model_config = ConfigDict(frozen=True)

    checks: Dict[str, HypothesisCheck]

    @field_validator("checks")
    @classmethod
    def validate_checks(cls, v: Dict[str, HypothesisCheck]) -> Dict[str, HypothesisCheck]:
        """Every hypothesis must carry exactly one verdict."""
        if sorted(v) != sorted(HYPOTHESES):
            raise ValueError(f"report must cover exactly {HYPOTHESES}")
        return v

    def verdict(self, name: str) -> Verdict:
        return self.checks[name].verdict

    def satisfied(self, *names: str) -> bool:
        selected = names or HYPOTHESES
        return all(self.checks[n].verdict == Verdict.SATISFIED for n in selected)

    def violations(self) -> list[str]:
        return [n for n in HYPOTHESES if self.checks[n].verdict == Verdict.VIOLATED]


def _cauchy_radius(p: PolynomialSpec) -> float:
    """Radius outside which p has no real root."""
    if p.degree == 0:
        return 1.0
    lead = abs(p.leading)
    return 1.0 + max(abs(c) / lead for c in p.coeffs[:-1])


def _grows_evenly(v: PolynomialSpec, min_degree: int) -> bool:
    return v.degree >= min_degree and v.degree % 2 == 0 and v.leading > 0


def _check_semiconvexity(potentials: Iterable[PolynomialSpec]) -> HypothesisCheck:
    witnesses: Dict[str, float] = {}
    for idx, v in enumerate(potentials, start=1):
        v2 = v.derivative(2)
        if v2.degree == 0:
            witnesses[f"theta{idx}"] = max(0.0, -v2.coeffs[0])
            continue
        if v2.degree % 2 == 1 or v2.leading < 0:
            return HypothesisCheck(
                verdict=Verdict.VIOLATED,
                witnesses=witnesses,
                detail=f"V{idx}'' is unbounded below",
            )
        radius = SCAN_RADIUS_MARGIN * _cauchy_radius(v2)
        grid = np.linspace(-radius, radius, SCAN_POINTS)
        witnesses[f"theta{idx}"] = max(0.0, -float(np.min(v2(grid))))
    return HypothesisCheck(verdict=Verdict.SATISFIED, witnesses=witnesses)


def _check_coercivity(potentials: Iterable[PolynomialSpec]) -> HypothesisCheck:
    witnesses: Dict[str, float] = {}
    for idx, v in enumerate(potentials, start=1):
        if not _grows_evenly(v, 4):
            return HypothesisCheck(
                verdict=Verdict.VIOLATED,
                witnesses=witnesses,
                detail=f"x V{idx}'(x) has no quartic lower bound (degree {v.degree})",
            )
        xdv = v.derivative().times_x()
        witnesses[f"C4_{idx}"] = 0.5 * xdv.leading
        witnesses[f"C2_{idx}"] = float(sum(abs(c) for c in xdv.coeffs[:-1]))
    return HypothesisCheck(verdict=Verdict.SATISFIED, witnesses=witnesses)


def _check_self_interaction(inter: InteractionSpec) -> HypothesisCheck:
    for name, g in (("grad_f11", inter.grad_f11), ("grad_f22", inter.grad_f22)):
        if g.is_zero:
            continue
        if not g.is_odd():
            return HypothesisCheck(verdict=Verdict.VIOLATED, detail=f"{name} is not odd")
        if g.leading <= 0:
            return HypothesisCheck(
                verdict=Verdict.VIOLATED, detail=f"{name} has non-positive leading coefficient"
            )
        dg = g.derivative()
        radius = SCAN_RADIUS_MARGIN * _cauchy_radius(dg)
        grid = np.linspace(-radius, radius, 2001)
        if np.min(dg(grid)) < -1e-12:
            return HypothesisCheck(verdict=Verdict.VIOLATED, detail=f"{name} is not increasing")
    return HypothesisCheck(verdict=Verdict.SATISFIED, witnesses={"q": float(inter.q)})


def validate_assumptions(cfg: ModelConfig) -> AssumptionReport:
    """
    Check the modelling hypotheses for a configuration.

    Polynomials settle both regularity checks outright. Semi-convexity scans
    V'' for the constants theta_i; coercivity and convexity at infinity need
    even degree >= 4 with positive leading coefficient. Polynomial growth
    extracts m from deg V' = 2m - 1, the self-interaction check extracts q
    and cross-interaction degrees are bounded by one.

    Returns:
        The report; callers decide whether to proceed
    """
    potentials = (cfg.v1, cfg.v2)
    checks: Dict[str, HypothesisCheck] = {
        "interaction_regularity": HypothesisCheck(
            verdict=Verdict.SATISFIED, detail="polynomial gradients"
        ),
        "potential_regularity": HypothesisCheck(
            verdict=Verdict.SATISFIED, detail="polynomial potentials"
        ),
        "semiconvexity": _check_semiconvexity(potentials),
        "quartic_coercivity": _check_coercivity(potentials),
    }

    if all(_grows_evenly(v, 4) for v in potentials):
        checks["convexity_at_infinity"] = HypothesisCheck(verdict=Verdict.SATISFIED)
    else:
        checks["convexity_at_infinity"] = HypothesisCheck(
            verdict=Verdict.VIOLATED, detail="V'' does not tend to +infinity"
        )

    grad_degree = max(cfg.v1.derivative().degree, cfg.v2.derivative().degree)
    m = max(1, ceil((grad_degree + 1) / 2))
    checks["polynomial_growth"] = HypothesisCheck(
        verdict=Verdict.SATISFIED if m >= 2 else Verdict.VIOLATED,
        witnesses={"m": float(m)},
        detail="" if m >= 2 else f"m = {m} < 2",
    )

    checks["self_interaction"] = _check_self_interaction(cfg.interactions)

    cross = {"grad_f12": cfg.interactions.grad_f12, "grad_f21": cfg.interactions.grad_f21}
    too_steep = [name for name, g in cross.items() if g.degree > 1]
    checks["cross_interaction"] = HypothesisCheck(
        verdict=Verdict.VIOLATED if too_steep else Verdict.SATISFIED,
        detail=f"degree > 1: {', '.join(too_steep)}" if too_steep else "",
    )

    report = AssumptionReport(checks=checks)
    if report.violations():
        logger.debug(f"Assumption violations: {report.violations()}")
    return report
