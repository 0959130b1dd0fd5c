"""
Experiment documents and their runners.

An experiment document names a ``kind``, a model (inline or by path), a
kind-specific ``params`` block, an output directory and a master seed. Every
kind has a pydantic parameter model; ``load_experiment`` validates the whole
document and reports failures with a dotted field path.
"""

import logging
from concurrent.futures import Executor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Type

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from .config import default_output_dir, default_workers, resolve_model_document
from .fokker_planck import DensityPair, FluxScheme, Grid1D, fp_evolve, fp_residual
from .invariant import (
    MeanPair,
    QuadratureRule,
    default_starts,
    fixed_points,
    laplace_errors,
    laplace_expand,
    laplace_moment_correction,
    sigma_scan,
    stationary_density,
    symmetric_instability,
)
from .lifecycle import ExperimentContext
from .model import ModelConfig, validate_assumptions
from .picard import GridSpec, MonteCarloParams, contraction_diagnostic, picard_solve
from .poc import STAT_NAMES, dt_sensitivity, rate_fit, run_schedule
from .sde import Ensemble, InitialLaw, SimParams, simulate
from .util import InvalidArgumentError, derive_stream

logger = logging.getLogger(__name__)

ExperimentKind = Literal["simulate", "picard", "poc", "invariant", "fpde", "laplace"]


class ExperimentSpecError(InvalidArgumentError):
    """Exception raised when an experiment document fails validation."""

    pass


class ExperimentSpec(BaseModel):
    """Top-level experiment document."""

    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind
    model: Dict[str, Any] | str = Field(description="Model document or path to one")
    params: Dict[str, Any] = Field(default_factory=dict)
    output_dir: Optional[str] = None
    seed: int = Field(default=0, ge=0, lt=2**64, description="Master seed")
    workers: Optional[int] = Field(default=None, ge=1)


class SimulateParams(BaseModel):
    """Parameters of a ``simulate`` run."""

    model_config = ConfigDict(extra="forbid")

    n_x: int = Field(default=1000, ge=1)
    n_y: int = Field(default=1000, ge=1)
    dt: float = Field(default=1e-2, gt=0.0)
    n_steps: int = Field(default=100, ge=1)
    record_stride: int = Field(default=10, ge=1)
    mu0: InitialLaw = Field(default_factory=InitialLaw)
    nu0: InitialLaw = Field(default_factory=InitialLaw)
    fast: Optional[bool] = None


class PicardParams(BaseModel):
    """Parameters of a ``picard`` run."""

    model_config = ConfigDict(extra="forbid")

    horizon: float = Field(default=0.25, gt=0.0)
    n_particles: int = Field(default=2000, ge=2)
    dt: float = Field(default=1e-2, gt=0.0)
    time_stride: int = Field(default=1, ge=1)
    antithetic: bool = False
    mu0: InitialLaw = Field(default_factory=InitialLaw)
    nu0: InitialLaw = Field(default_factory=InitialLaw)
    tol: float = Field(default=1e-3, gt=0.0)
    max_iter: int = Field(default=20, ge=1)
    grid_radius: float = Field(default=10.0, gt=0.0)
    grid_points: int = Field(default=4001, ge=3)
    k_ball: Optional[float] = Field(default=None, gt=0.0)
    contraction_check: bool = Field(
        default=False, description="Measure the Gamma Lipschitz ratio at T, T/2 and T/4"
    )

    def monte_carlo(self, seed: int) -> MonteCarloParams:
        return MonteCarloParams(
            n_particles=self.n_particles,
            dt=self.dt,
            seed=seed,
            time_stride=self.time_stride,
            antithetic=self.antithetic,
            mu0=self.mu0,
            nu0=self.nu0,
        )

    def grid(self) -> GridSpec:
        return GridSpec(radius=self.grid_radius, n_points=self.grid_points)


class PocParams(BaseModel):
    """Parameters of a ``poc`` run."""

    model_config = ConfigDict(extra="forbid")

    schedule: List[Tuple[int, int]] = Field(description="(N, M) pairs with a fixed ratio")
    replicas: int = Field(default=50, ge=2)
    horizon: float = Field(default=2.0, gt=0.0)
    dt: float = Field(default=1e-3, gt=0.0)
    mu0: InitialLaw = Field(default_factory=InitialLaw)
    nu0: InitialLaw = Field(default_factory=InitialLaw)
    picard: PicardParams = Field(
        default_factory=lambda: PicardParams(n_particles=4000, tol=1e-3, max_iter=30)
    )
    dt_check: bool = Field(default=False, description="Rerun the largest N at dt/2")

    @field_validator("schedule")
    @classmethod
    def validate_schedule(cls, v: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
        """At least four distinct N at one N/M ratio, all counts positive."""
        if any(n < 1 or m < 1 for n, m in v):
            raise ValueError("particle counts must be positive")
        if len({n for n, _ in v}) < 4:
            raise ValueError("rate fitting needs at least 4 distinct N")
        if len({round(n / m, 12) for n, m in v}) != 1:
            raise ValueError("N/M must be the same for every schedule point")
        return v

    @model_validator(mode="after")
    def share_initial_laws(self) -> "PocParams":
        """The mean-field drift must be solved from the laws the coupling starts from."""
        for name in ("mu0", "nu0"):
            law = getattr(self, name)
            if name in self.picard.model_fields_set and getattr(self.picard, name) != law:
                raise ValueError(f"picard.{name} differs from {name}; set it once at the top level")
        self.picard = self.picard.model_copy(update={"mu0": self.mu0, "nu0": self.nu0})
        return self

    @property
    def weight(self) -> float:
        n, m = self.schedule[0]
        return n / (n + m)


class InvariantParams(BaseModel):
    """Parameters of an ``invariant`` run."""

    model_config = ConfigDict(extra="forbid")

    start_extent: float = Field(default=2.0, gt=0.0)
    start_count: int = Field(default=7, ge=1)
    damping: float = Field(default=0.5, gt=0.0, le=1.0)
    tol: float = Field(default=1e-10, gt=0.0)
    max_iter: int = Field(default=500, ge=1)
    n_nodes: int = Field(default=4001, ge=3)
    sigma_list: Optional[List[float]] = Field(default=None, description="Decreasing noise levels")
    density_half_width: float = Field(default=3.0, gt=0.0)
    density_cells: int = Field(default=512, ge=16)
    fp_check: bool = Field(default=True, description="Report the PDE residual of each root")

    @field_validator("sigma_list")
    @classmethod
    def validate_sigma_list(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None:
            if any(s <= 0 for s in v):
                raise ValueError("noise levels must be positive")
            if any(b >= a for a, b in zip(v, v[1:])):
                raise ValueError("sigma_list must be strictly decreasing")
        return v


class FpdeParams(BaseModel):
    """Parameters of an ``fpde`` run."""

    model_config = ConfigDict(extra="forbid")

    half_width: float = Field(default=4.0, gt=0.0)
    n_cells: int = Field(default=256, ge=16)
    horizon: float = Field(default=1.0, gt=0.0)
    dt: float = Field(default=1e-4, gt=0.0)
    record_stride: int = Field(default=100, ge=1)
    mean1: float = 0.0
    var1: float = Field(default=0.25, gt=0.0)
    mean2: float = 0.0
    var2: float = Field(default=0.25, gt=0.0)
    scheme: FluxScheme = FluxScheme.CHANG_COOPER
    residual_cells: List[int] = Field(
        default_factory=list, description="Cell counts for a residual refinement study"
    )
    residual_means: Tuple[float, float] = (0.0, 0.0)

    @field_validator("residual_cells")
    @classmethod
    def validate_residual_cells(cls, v: List[int]) -> List[int]:
        if any(n < 16 for n in v):
            raise ValueError("every refinement grid needs at least 16 cells")
        return v


class LaplaceParams(BaseModel):
    """Parameters of a ``laplace`` run."""

    model_config = ConfigDict(extra="forbid")

    m_star: float
    rho1: float = 0.0
    rho2: float = 0.0
    sigmas: List[float] = Field(default_factory=lambda: [0.4, 0.3, 0.2, 0.15])
    moment_orders: List[int] = Field(default_factory=lambda: [1, 2])

    @field_validator("sigmas")
    @classmethod
    def validate_sigmas(cls, v: List[float]) -> List[float]:
        if any(s <= 0 for s in v):
            raise ValueError("noise levels must be positive")
        return v


PARAM_MODELS: Dict[str, Type[BaseModel]] = {
    "simulate": SimulateParams,
    "picard": PicardParams,
    "poc": PocParams,
    "invariant": InvariantParams,
    "fpde": FpdeParams,
    "laplace": LaplaceParams,
}


def _format_validation_error(exc: ValidationError, prefix: str = "") -> str:
    messages = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        path = f"{prefix}.{loc}" if prefix and loc else (prefix or loc)
        messages.append(f"{path}: {err['msg']}")
    return "; ".join(messages)


@dataclass
class ResolvedExperiment:
    """A validated experiment: spec, model and kind parameters."""

    spec: ExperimentSpec
    model: ModelConfig
    params: Any
    output_dir: Path
    workers: int

    def as_dict(self) -> Dict[str, Any]:
        """Fully resolved document, as echoed in the manifest."""
        return {
            "kind": self.spec.kind,
            "seed": self.spec.seed,
            "model": self.model.model_dump(mode="json"),
            "params": self.params.model_dump(mode="json"),
            "output_dir": str(self.output_dir),
            "workers": self.workers,
        }


def load_experiment(
    document: Dict[str, Any],
    base_dir: Optional[Path] = None,
    output_dir: Optional[Path] = None,
) -> ResolvedExperiment:
    """
    Validate an experiment document.

    Args:
        document: Parsed experiment document
        base_dir: Directory against which a model path resolves
        output_dir: Overrides the document's output directory

    Raises:
        ExperimentSpecError: With a dotted field path, if any part is invalid
    """
    try:
        spec = ExperimentSpec.model_validate(document)
    except ValidationError as exc:
        raise ExperimentSpecError(_format_validation_error(exc)) from exc
    try:
        model_doc = resolve_model_document(spec.model, base_dir)
    except (FileNotFoundError, ValueError) as exc:
        raise ExperimentSpecError(f"model: {exc}") from exc
    try:
        model = ModelConfig.from_document(model_doc)
    except ValidationError as exc:
        raise ExperimentSpecError(_format_validation_error(exc, "model")) from exc
    try:
        params = PARAM_MODELS[spec.kind].model_validate(spec.params)
    except ValidationError as exc:
        raise ExperimentSpecError(_format_validation_error(exc, "params")) from exc

    out = output_dir or (Path(spec.output_dir) if spec.output_dir else default_output_dir())
    return ResolvedExperiment(
        spec=spec,
        model=model,
        params=params,
        output_dir=out,
        workers=spec.workers or default_workers(),
    )


def _run_simulate(exp: ResolvedExperiment, ctx: ExperimentContext) -> Dict[str, Any]:
    p: SimulateParams = exp.params
    cfg = exp.model
    ens = Ensemble.sample(cfg, p.n_x, p.n_y, derive_stream(exp.spec.seed, "simulate"), p.mu0, p.nu0)
    sim = SimParams(
        dt=p.dt,
        n_steps=p.n_steps,
        seed=derive_stream(exp.spec.seed, "simulate-noise"),
        record_stride=p.record_stride,
    )
    traj = simulate(ens, cfg, sim, fast=p.fast, executor=ctx.executor)
    traj.write_csv(ctx.path("positions.csv"), ctx.path("moments.csv"))
    ctx.record(ctx.path("positions.csv"))
    ctx.record(ctx.path("moments.csv"))
    return {
        "status": "ok",
        "headline": {"final_mean_x": traj.mean_x[-1], "final_mean_y": traj.mean_y[-1]},
        "details": {"final_m2_x": traj.mu_moments[-1, 2], "final_m2_y": traj.nu_moments[-1, 2]},
    }


def _run_picard(exp: ResolvedExperiment, ctx: ExperimentContext) -> Dict[str, Any]:
    p: PicardParams = exp.params
    cfg = exp.model
    mc = p.monte_carlo(derive_stream(exp.spec.seed, "picard"))
    result = picard_solve(cfg, p.horizon, mc, p.tol, p.max_iter, p.grid(), p.k_ball)
    ctx.write_csv(
        "iterations.csv",
        ["iter", "norm_diff", "contraction_ratio", "wall_time_ms"],
        result.log_rows(),
    )
    ctx.write_json("drift.json", result.drift.to_json_dict())
    headline: Dict[str, Any] = {"converged": result.converged, "iterations": result.iterations}
    if p.contraction_check:
        ratios = _contraction_study(cfg, p, mc, result.drift)
        ctx.write_csv("contraction.csv", ["horizon", "ratio"], ratios)
        headline["contraction_ratios"] = [r for _, r in ratios]
    return {
        "status": "ok" if result.converged else "not-converged",
        "headline": headline,
        "details": {"in_k_ball": result.in_k_ball, "best_iteration": result.best_iteration},
    }


def _contraction_study(
    cfg: ModelConfig, p: PicardParams, mc: MonteCarloParams, fixed: Any
) -> List[List[float]]:
    """Lipschitz ratio of Gamma between 0 and the fixed point at T, T/2, T/4."""
    zero = fixed - fixed
    rows = []
    for divisor in (1, 2, 4):
        horizon = p.horizon / divisor
        ratio = contraction_diagnostic(cfg, horizon, mc, fixed, zero, p.grid())
        rows.append([horizon, ratio])
    return rows


def _run_poc(exp: ResolvedExperiment, ctx: ExperimentContext) -> Dict[str, Any]:
    p: PocParams = exp.params
    cfg = exp.model
    if abs(cfg.a - p.weight) > 1e-12:
        logger.warning(f"Setting a={p.weight:.6g} from the schedule ratio (model has a={cfg.a})")
        cfg = cfg.with_updates(a=p.weight)

    mc = p.picard.monte_carlo(derive_stream(exp.spec.seed, "poc-picard"))
    hat = picard_solve(cfg, p.horizon, mc, p.picard.tol, p.picard.max_iter, p.picard.grid())
    ctx.write_csv(
        "picard_iterations.csv",
        ["iter", "norm_diff", "contraction_ratio", "wall_time_ms"],
        hat.log_rows(),
    )
    if not hat.converged:
        return {
            "status": "not-converged",
            "headline": {"stage": "picard", "iterations": hat.iterations},
        }

    schedule = run_schedule(
        cfg,
        p.schedule,
        p.replicas,
        p.horizon,
        p.dt,
        exp.spec.seed,
        hat.drift,
        p.mu0,
        p.nu0,
        ctx.executor,
    )
    ctx.write_csv(
        "results.csv",
        ["N", "M", "R", "stat", "value", "stderr"],
        [row for _, stats in schedule for row in stats.rows()],
    )
    fits = rate_fit(schedule)
    ctx.write_csv(
        "rates.csv",
        ["stat", "slope", "ci_halfwidth", "intercept", "r2"],
        [fits[s].row() for s in STAT_NAMES if s in fits],
    )
    headline: Dict[str, Any] = {s: fits[s].slope for s in ("sup_sq_x", "zeta") if s in fits}
    if p.dt_check:
        n, m = max(p.schedule)
        sens = dt_sensitivity(
            cfg, n, m, p.horizon, p.dt, p.replicas, exp.spec.seed, hat.drift, p.mu0, p.nu0
        )
        ctx.write_csv(
            "dt_sensitivity.csv",
            ["stat", "relative_change"],
            [[s, sens.relative_change[s]] for s in STAT_NAMES],
        )
    return {"status": "ok", "headline": {"slopes": headline}, "details": {"fits": len(fits)}}


def _run_invariant(exp: ResolvedExperiment, ctx: ExperimentContext) -> Dict[str, Any]:
    p: InvariantParams = exp.params
    cfg = exp.model
    starts = default_starts(p.start_extent, p.start_count)
    executor: Optional[Executor] = ctx.executor
    header = ["sigma", "m1", "m2", "residual", "classification"]

    if p.sigma_list:
        rows = sigma_scan(cfg, p.sigma_list, starts, p.damping, p.tol, p.max_iter, executor)
        ctx.write_csv("roots.csv", header, [r.row(s.sigma) for s in rows for r in s.roots])
        return {
            "status": "ok",
            "headline": {"root_counts": {str(s.sigma): s.root_count for s in rows}},
        }

    rule = QuadratureRule.build(cfg, m_box=p.start_extent, n_nodes=p.n_nodes)
    result = fixed_points(cfg, rule, starts, p.damping, p.tol, p.max_iter, executor)
    ctx.write_csv("roots.csv", header, [r.row(cfg.sigma) for r in result.roots])

    grid = Grid1D.symmetric(p.density_half_width, p.density_cells)
    residuals = []
    for k, root in enumerate(result.roots):
        pair = stationary_density(root.mean, cfg, grid.centers, rule)
        ctx.write_csv(f"densities_root{k}.csv", ["x", "mu", "nu"], pair.rows())
        if p.fp_check:
            residuals.append([k, grid.h, *fp_residual(pair, cfg, grid)])
    if residuals:
        ctx.write_csv("fp_residuals.csv", ["root", "grid_h", "res_mu", "res_nu"], residuals)
    return {
        "status": "ok",
        "headline": {"root_count": result.count},
        "details": {
            "symmetric_instability": symmetric_instability(cfg, rule),
            "classifications": [r.classification.value for r in result.roots],
        },
    }


def _run_fpde(exp: ResolvedExperiment, ctx: ExperimentContext) -> Dict[str, Any]:
    p: FpdeParams = exp.params
    cfg = exp.model
    grid = Grid1D.symmetric(p.half_width, p.n_cells)
    dp0 = DensityPair.gaussian(grid, p.mean1, p.var1, p.mean2, p.var2)
    evo = fp_evolve(dp0, cfg, grid, p.horizon, p.dt, p.record_stride, p.scheme, keep_snapshots=True)
    ctx.write_csv("snapshots.csv", ["t", "x", "mu", "nu"], evo.snapshot_rows(grid))
    ctx.write_csv(
        "log.csv",
        ["t", "mass_mu", "mass_nu", "mean_mu", "mean_nu"],
        [[t, *mass, *mean] for t, mass, mean in zip(evo.times, evo.masses, evo.means)],
    )
    headline: Dict[str, Any] = {"final_means": list(evo.final.means(grid))}
    if p.residual_cells:
        m = MeanPair(*p.residual_means)
        rows = []
        for n in p.residual_cells:
            g = Grid1D.symmetric(p.half_width, n)
            pair = stationary_density(m, cfg, g.centers)
            rows.append([g.h, *fp_residual(pair, cfg, g, p.scheme)])
        ctx.write_csv("residuals.csv", ["grid_h", "res_mu", "res_nu"], rows)
        headline["residual_order"] = _observed_order(rows)
    return {"status": "ok", "headline": headline}


def _observed_order(rows: List[List[float]]) -> Optional[float]:
    if len(rows) < 2:
        return None
    h = np.array([r[0] for r in rows])
    res = np.array([max(r[1], 1e-300) for r in rows])
    return float(np.polyfit(np.log(h), np.log(res), 1)[0])


def _run_laplace(exp: ResolvedExperiment, ctx: ExperimentContext) -> Dict[str, Any]:
    p: LaplaceParams = exp.params
    cfg = exp.model
    expansion = laplace_expand(cfg, p.m_star, p.rho1, p.rho2)
    ctx.write_json("expansion.json", expansion.to_json_dict())
    errors = laplace_errors(cfg, expansion, p.sigmas)
    ctx.write_csv("errors.csv", ["sigma", "error"], [[s, e] for s, e in zip(p.sigmas, errors)])
    corrections = [
        [species, n, laplace_moment_correction(cfg, species, n, p.m_star, p.rho1, p.rho2)]
        for species in (1, 2)
        for n in p.moment_orders
    ]
    ctx.write_csv("moment_corrections.csv", ["species", "order", "coefficient"], corrections)
    return {
        "status": "ok",
        "headline": {
            "k1": expansion.k1,
            "k2": expansion.k2,
            "rho_threshold": expansion.rho_threshold,
        },
    }


RUNNERS: Dict[str, Callable[[ResolvedExperiment, ExperimentContext], Dict[str, Any]]] = {
    "simulate": _run_simulate,
    "picard": _run_picard,
    "poc": _run_poc,
    "invariant": _run_invariant,
    "fpde": _run_fpde,
    "laplace": _run_laplace,
}


def run_experiment(exp: ResolvedExperiment, ctx: ExperimentContext) -> Dict[str, Any]:
    """Run one experiment and write its summary; returns the summary."""
    report = validate_assumptions(exp.model)
    violations = report.violations()
    if violations:
        logger.warning(f"Model violates {', '.join(violations)}; results carry no guarantee")
    summary = {"kind": exp.spec.kind, **RUNNERS[exp.spec.kind](exp, ctx)}
    summary["details"] = {**summary.get("details", {}), "assumption_violations": violations}
    ctx.write_json("summary.json", summary)
    return summary


def _planned_files(exp: ResolvedExperiment) -> List[str]:
    kind, p = exp.spec.kind, exp.params
    files: Dict[str, List[str]] = {
        "simulate": ["positions.csv", "moments.csv"],
        "picard": ["iterations.csv", "drift.json"]
        + (["contraction.csv"] if getattr(p, "contraction_check", False) else []),
        "poc": ["picard_iterations.csv", "results.csv", "rates.csv"]
        + (["dt_sensitivity.csv"] if getattr(p, "dt_check", False) else []),
        "invariant": ["roots.csv"]
        + ([] if getattr(p, "sigma_list", None) else ["densities_root<k>.csv"])
        + (["fp_residuals.csv"] if getattr(p, "fp_check", False) and not p.sigma_list else []),
        "fpde": ["snapshots.csv", "log.csv"]
        + (["residuals.csv"] if getattr(p, "residual_cells", None) else []),
        "laplace": ["expansion.json", "errors.csv", "moment_corrections.csv"],
    }
    return files[kind] + ["summary.json", "manifest.json"]


def _planned_schedule(exp: ResolvedExperiment) -> Tuple[List[str], int]:
    """Human-readable schedule lines and an estimate of peak array memory in bytes."""
    kind, p, seed = exp.spec.kind, exp.params, exp.spec.seed
    if kind == "simulate":
        records = p.n_steps // p.record_stride + 1
        lines = [
            f"N={p.n_x} M={p.n_y}: {p.n_steps} steps of dt={p.dt}, noise seed "
            f"{derive_stream(seed, 'simulate-noise')}"
        ]
        return lines, 8 * (p.n_steps * (p.n_x + p.n_y) + records * (p.n_x + p.n_y))
    if kind == "picard":
        steps = int(round(p.horizon / p.dt))
        lines = [
            f"up to {p.max_iter} Gamma evaluations, {p.n_particles} particles per species, "
            f"{steps} steps, seed {derive_stream(seed, 'picard')}"
        ]
        return lines, 8 * 4 * steps * p.n_particles
    if kind == "poc":
        steps = int(round(p.horizon / p.dt))
        lines = [f"N={n} M={m}: {p.replicas} coupled runs" for n, m in p.schedule]
        lines.append(f"total coupled runs: {len(p.schedule) * p.replicas}")
        biggest = max(n + m for n, m in p.schedule)
        return lines, 8 * steps * biggest * exp.workers
    if kind == "invariant":
        starts = p.start_count**2
        sigmas = p.sigma_list or [exp.model.sigma]
        lines = [f"sigma={s}: {starts} starts, {p.n_nodes} quadrature nodes" for s in sigmas]
        return lines, 8 * p.n_nodes * 4 * exp.workers
    if kind == "fpde":
        steps = int(round(p.horizon / p.dt))
        lines = [f"{steps} steps of dt={p.dt} on {p.n_cells} cells"]
        lines.extend(f"residual grid: {n} cells" for n in p.residual_cells)
        return lines, 8 * 2 * p.n_cells * (steps // p.record_stride + 2)
    lines = [f"error curve at sigma in {p.sigmas}", f"moment orders {p.moment_orders}"]
    return lines, 8 * 4001 * 4


def build_plan(exp: ResolvedExperiment) -> Dict[str, Any]:
    """The dry-run plan: schedule, seeds, memory estimate and files; computes nothing."""
    schedule, memory = _planned_schedule(exp)
    return {
        "kind": exp.spec.kind,
        "seed": exp.spec.seed,
        "output_dir": str(exp.output_dir),
        "workers": exp.workers,
        "memory_bytes": memory,
        "schedule": schedule,
        "files": _planned_files(exp),
        "spec": exp.as_dict(),
    }
