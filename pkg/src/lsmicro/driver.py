"""Outer optimisation loop: velocity, CFL line search, reinitialisation and
stopping test, with per-iteration history."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .functionals import FunctionalSpec, evaluate_design, sensitivity_of, value_of
from .grid import ParameterError, PeriodicGrid, isotropic_tensor
from .hilbertian import ExtensionOperator, extend
from .levelset import DesignCollapseError, LevelSetState, advect, hj_steps, initial_structure, reinitialise
from .projection import compute_velocity, orthogonalise
from .slp import slp_velocity

log = logging.getLogger(__name__)

METHODS = ("projection", "slp")


@dataclass(frozen=True)
class RunConfig:
    """Problem selection plus every optimisation parameter.

    ``eta`` and ``beta`` are given in units of the mesh spacing.
    """

    preset: str = "bulk2d"
    method: str = "projection"
    n: int = 100
    q_max: int = 1000
    k_max: int = 10
    eps_void: float = 1e-3
    eta: float = 1.5
    beta: float = 4.0
    alpha_min_sq: float = 0.1
    lam: float = 0.5
    gamma_min: float = 1e-3
    gamma_max: float = 0.1
    gamma_reinit: float = 0.1
    xi: float = 0.005
    delta_inc: float = 1.1
    delta_dec: float = 0.7
    eps_1: float = 0.01
    eps_2: float = 1e-4
    j_max: int = 5
    lambda_cap: float = float("inf")
    max_decay: float = 1.0
    holes: int | None = None
    hole_radius: float | None = None
    solver: str = "auto"

    def validate(self) -> None:
        """Raise ``ParameterError`` naming the first violated invariant."""
        if self.preset not in PRESETS:
            raise ParameterError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.n < 8:
            raise ParameterError(f"n must be >= 8, got {self.n}")
        if not 0.0 < self.gamma_min <= self.gamma_max < 1.0:
            raise ParameterError("invariant 0 < gamma_min <= gamma_max < 1 violated "
                                 f"(gamma_min={self.gamma_min}, gamma_max={self.gamma_max})")
        if not 0.0 < self.alpha_min_sq <= 1.0:
            raise ParameterError(f"invariant 0 < alpha_min_sq <= 1 violated (alpha_min_sq={self.alpha_min_sq})")
        if not self.delta_dec < 1.0 < self.delta_inc:
            raise ParameterError("invariant delta_dec < 1 < delta_inc violated "
                                 f"(delta_dec={self.delta_dec}, delta_inc={self.delta_inc})")
        if self.delta_dec <= 0.0:
            raise ParameterError(f"delta_dec must be positive, got {self.delta_dec}")
        if not 0.0 < self.gamma_reinit < 1.0:
            raise ParameterError(f"gamma_reinit must lie in (0, 1), got {self.gamma_reinit}")
        if not 0.0 < self.eps_void < 1.0:
            raise ParameterError(f"eps_void must lie in (0, 1), got {self.eps_void}")
        for name in ("q_max", "k_max", "j_max"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        for name in ("eta", "beta", "lam", "eps_1", "eps_2", "lambda_cap", "max_decay"):
            if not getattr(self, name) > 0.0:
                raise ParameterError(f"{name} must be positive")
        if np.isnan(self.xi):
            raise ParameterError("xi must be a number")

    @classmethod
    def for_preset(cls, preset: str, **overrides) -> RunConfig:
        """Defaults with the preset's own overrides, then the caller's."""
        if preset not in PRESETS:
            raise ParameterError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        return replace(cls(preset=preset, **PRESETS[preset].overrides), **overrides)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class Problem:
    objective: FunctionalSpec
    constraints: tuple[FunctionalSpec, ...]
    structure: str
    holes: int
    multiphase: bool = False
    overrides: dict = field(default_factory=dict)
    description: str = ""


def _iso() -> tuple[FunctionalSpec, ...]:
    return tuple(FunctionalSpec("isotropy_residual", index=i) for i in range(1, 7))


_MAX_BULK = FunctionalSpec("bulk_modulus", scale=-1.0)
_HALF_VOLUME = FunctionalSpec("volume", target=0.5)
_PHASE_VOLUMES = (FunctionalSpec("phase_volume", target=0.25, phase=2),
                  FunctionalSpec("phase_volume", target=0.25, phase=3))

PRESETS: dict[str, Problem] = {
    "bulk2d": Problem(_MAX_BULK, (_HALF_VOLUME,), "holes", 2,
                      description="maximum bulk modulus at half volume"),
    "bulk2d_iso": Problem(_MAX_BULK, (_HALF_VOLUME,) + _iso(), "holes", 2,
                          description="maximum bulk modulus at half volume, six isotropy residuals"),
    "bulk2d_iso_measure": Problem(_MAX_BULK, (_HALF_VOLUME, FunctionalSpec("anisotropy_measure")), "holes", 2,
                                  description="maximum bulk modulus at half volume, single anisotropy measure"),
    "auxetic2d": Problem(FunctionalSpec("volume"),
                         (FunctionalSpec("stiffness_target", 0.1, ijkl="1111"),
                          FunctionalSpec("stiffness_target", 0.1, ijkl="2222"),
                          FunctionalSpec("stiffness_target", -0.05, ijkl="1122"),
                          FunctionalSpec("stiffness_target", 0.0, ijkl="1112"),
                          FunctionalSpec("stiffness_target", 0.0, ijkl="2212")),
                         "holes", 4, overrides={"gamma_max": 0.05, "alpha_min_sq": 0.5},
                         description="minimum volume with Poisson ratio -0.5"),
    "multiphase2d": Problem(_MAX_BULK, _PHASE_VOLUMES, "overlapping_pair", 2, multiphase=True,
                            overrides={"gamma_max": 0.05},
                            description="two-material maximum bulk modulus, quarter volume each"),
    "multiphase2d_iso": Problem(_MAX_BULK, _PHASE_VOLUMES + _iso(), "overlapping_pair", 3, multiphase=True,
                                overrides={"gamma_max": 0.05},
                                description="two-material maximum bulk modulus with isotropy"),
}

HS_REFERENCE = {
    "bulk2d": 0.1860, "bulk2d_iso": 0.1860, "bulk2d_iso_measure": 0.1860,
    "bulk3d": 0.2308,
    "multiphase2d": 0.1524, "multiphase2d_iso": 0.1524,
    "auxetic2d": None,
}


def hs_reference(problem: str) -> float | None:
    """Stored upper bound on the bulk modulus for reporting (``None`` when not applicable)."""
    try:
        return HS_REFERENCE[problem]
    except KeyError:
        raise LookupError(f"no reference bound stored for {problem!r}") from None


def base_materials(problem: Problem, eps_void: float) -> list[np.ndarray]:
    stiff = isotropic_tensor(1.0, 0.3)
    if not problem.multiphase:
        return [stiff]
    weak = eps_void * stiff
    # colour table order: 1 void, 2 stiff, 3 soft, 4 void
    return [weak, stiff, isotropic_tensor(0.5, 0.3), weak]


@dataclass
class TrialRecord:
    gamma: float
    objective: float
    accepted: bool


@dataclass
class HistoryRecord:
    iteration: int
    objective: float
    constraints: tuple[float, ...]
    gamma: float
    rejections: int
    accepted: bool
    alpha_sq_sum: float
    lambda_used: float
    wall_ms: float
    stalled: bool = False
    trials: list[TrialRecord] = field(default_factory=list)


@dataclass
class RunResult:
    config: RunConfig
    state: LevelSetState
    history: list[HistoryRecord]
    status: str
    objective: float
    constraints: tuple[float, ...]
    constraint_labels: tuple[str, ...]
    Cbar: np.ndarray
    initial_objective: float
    initial_constraints: tuple[float, ...]

    @property
    def iterations(self) -> int:
        return len(self.history)

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "constraints": dict(zip(self.constraint_labels, self.constraints)),
            "iterations": self.iterations,
            "status": self.status,
            "hs_reference": hs_reference(self.config.preset),
            "effective_tensor": self.Cbar.tolist(),
            "config": asdict(self.config),
        }


def converged(objectives: list[float], constraints, eps_1: float, eps_2: float, j_max: int) -> bool:
    """Objective stationary over the last ``j_max`` steps and all constraints within ``eps_2``.

    ``objectives`` includes the starting value; at least ``j_max + 1`` accepted
    iterations are needed before the test applies.
    """
    if len(objectives) < j_max + 2:
        return False
    Jq = objectives[-1]
    if any(abs(Jq - objectives[-1 - j]) > eps_1 * abs(Jq) for j in range(1, j_max + 1)):
        return False
    return bool(np.all(np.abs(np.asarray(constraints)) < eps_2))


class _Evaluator:
    def __init__(self, problem: Problem, config: RunConfig):
        self.problem = problem
        self.config = config
        self.base = base_materials(problem, config.eps_void)

    def __call__(self, state: LevelSetState):
        ev = evaluate_design(state, self.base, self.config.eps_void, self.config.solver)
        J = value_of(self.problem.objective, ev)
        C = tuple(value_of(c, ev) for c in self.problem.constraints)
        return ev, J, C


def run(config: RunConfig, initial: LevelSetState | None = None, callback=None) -> RunResult:
    """Optimise the preset's problem; ``callback(record, state)`` fires after each accepted step."""
    config.validate()
    problem = PRESETS[config.preset]
    grid = PeriodicGrid(config.n)
    if initial is None:
        m = config.holes or problem.holes
        state = initial_structure(grid, problem.structure, m=m, r=config.hole_radius,
                                  eta_factor=config.eta, gamma_reinit=config.gamma_reinit)
    else:
        state = initial if initial.is_reinitialised else reinitialise(initial, config.gamma_reinit)
    op = ExtensionOperator(grid, config.beta * grid.dx)
    evaluate = _Evaluator(problem, config)
    ev, J, C = evaluate(state)
    J0, C0 = J, C
    objectives = [J]
    history: list[HistoryRecord] = []
    gamma = config.gamma_max
    status = "max_iterations"

    for q in range(1, config.q_max + 1):
        t0 = time.perf_counter()
        g = extend(op, sensitivity_of(problem.objective, ev), state)
        mus = [extend(op, sensitivity_of(c, ev), state) for c in problem.constraints]
        if config.method == "projection":
            bundle = orthogonalise(mus, op, C) if mus else None
            if bundle is None:
                from .projection import ConstraintBundle
                bundle = ConstraintBundle(np.zeros(0), [], [], [], [], np.zeros(0))
            horizon = hj_steps(grid.n) * gamma * grid.dx

            def pseudo_time(v, horizon=horizon):
                vmax = float(np.max(np.abs(v)))
                return horizon / vmax if vmax > 0.0 else 0.0

            vel = compute_velocity(g, bundle, op, config.lam, config.alpha_min_sq, config.lambda_cap,
                                   consistency_tol=config.eps_2, pseudo_time=pseudo_time,
                                   max_decay=config.max_decay)
        else:
            vel = slp_velocity(g, mus, C, op, config.lam)
        if vel.stationary:
            log.info("iteration %d: stationary direction, stopping", q)
            status = "converged"
            break

        trials: list[TrialRecord] = []
        accepted = None
        for k in range(config.k_max):
            trial = reinitialise(advect(state, vel.v, gamma), config.gamma_reinit)
            try:
                trial.check_nonempty()
            except DesignCollapseError as exc:
                raise DesignCollapseError(f"iteration {q}, trial {k + 1}: {exc}") from exc
            t_ev, t_J, t_C = evaluate(trial)
            ok = t_J < J + config.xi * abs(J)
            trials.append(TrialRecord(gamma, t_J, ok))
            if ok:
                accepted = (trial, t_ev, t_J, t_C, gamma)
                gamma = min(config.delta_inc * gamma, config.gamma_max)
                break
            accepted = (trial, t_ev, t_J, t_C, gamma)
            gamma = max(config.delta_dec * gamma, config.gamma_min)
        stalled = not trials[-1].accepted
        if stalled:
            log.info("iteration %d: line search exhausted, taking the smallest step", q)
        state, ev, J, C, used_gamma = accepted
        objectives.append(J)
        rec = HistoryRecord(q, J, C, used_gamma, len(trials) - 1 if not stalled else len(trials), True,
                            vel.alpha_sq_sum, vel.lambda_used, 1e3 * (time.perf_counter() - t0),
                            stalled, trials)
        history.append(rec)
        log.debug("q=%d J=%.6g C=%s gamma=%.4g", q, J, np.round(C, 6), used_gamma)
        if callback is not None:
            callback(rec, state)
        if converged(objectives, C, config.eps_1, config.eps_2, config.j_max):
            status = "converged"
            break

    labels = tuple(c.label for c in problem.constraints)
    return RunResult(config, state, history, status, J, C, labels, ev.Cbar, J0, C0)
