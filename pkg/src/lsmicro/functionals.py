"""Objective and constraint functionals with their shape-derivative integrands.

Every functional of the homogenised tensor is written as ``F(Cbar)``; its
integrand on the boundary of level set ``m`` is
``sum_{a<=b} dF/dCbar_ab * eps_a . T_m eps_b`` with ``T_m`` the material's
sensitivity tensor (base stiffness for one level set, ``-dC/dH_m`` for the
colour interpolation). Integrands are Gauss-point arrays ``(m, ne, 4)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import CellSolution, homogenised_tensor, solve_cell_problems
from .grid import ParameterError, tensor_component, voigt_index
from .levelset import LevelSetState, smoothed_heaviside
from .materials import MaterialField, material_field, phase_indicator_derivatives, phase_indicators

ANISOTROPY_KINK = 1e-12
POISSON_EPS = 1e-8


class DegenerateDesignError(ArithmeticError):
    """A functional's denominator vanished for the current design."""


# --- scalar formulas ---------------------------------------------------------------

def bulk_modulus(Cbar: np.ndarray, d: int = 2) -> float:
    if d == 2:
        return 0.25 * (Cbar[0, 0] + Cbar[1, 1] + 2.0 * Cbar[0, 1])
    if d == 3:
        return (np.trace(Cbar[:3, :3]) + 2.0 * (Cbar[0, 1] + Cbar[0, 2] + Cbar[1, 2])) / 9.0
    raise ParameterError(f"dimension must be 2 or 3, got {d}")


def shear_modulus_2d(Cbar: np.ndarray) -> float:
    return 0.125 * (Cbar[0, 0] + Cbar[1, 1]) - 0.25 * Cbar[0, 1] + 0.5 * Cbar[2, 2]


def isotropy_normaliser(Cbar: np.ndarray) -> float:
    k, mu = bulk_modulus(Cbar), shear_modulus_2d(Cbar)
    return float(np.sqrt(4.0 * k**2 + 8.0 * mu**2))


def isotropy_residuals_2d(Cbar: np.ndarray, normaliser: float | None = None) -> np.ndarray:
    """The six normalised isotropy residuals ``C_1 .. C_6``."""
    s = isotropy_normaliser(Cbar) if normaliser is None else normaliser
    if s <= 0.0:
        raise DegenerateDesignError("isotropy normaliser vanished (zero bulk and shear modulus)")
    k, mu = bulk_modulus(Cbar), shear_modulus_2d(Cbar)
    raw = np.array([
        Cbar[0, 0] - k - mu,
        Cbar[1, 1] - k - mu,
        np.sqrt(2.0) * (Cbar[0, 1] - k + mu),
        2.0 * Cbar[0, 2],
        2.0 * Cbar[1, 2],
        2.0 * (Cbar[2, 2] - mu),
    ])
    return raw / s


def anisotropy_measure(residuals: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(residuals))))


def poisson_ratio(Cbar: np.ndarray) -> float:
    if abs(Cbar[0, 0]) < POISSON_EPS:
        raise DegenerateDesignError(f"Cbar_1111 = {Cbar[0, 0]:.3e} is too small for a Poisson ratio")
    return float(Cbar[0, 1] / Cbar[0, 0])


# --- linearisations in Cbar (upper-triangular coefficient matrices) -------------

def _unit(a: int, b: int) -> np.ndarray:
    G = np.zeros((3, 3))
    G[min(a, b), max(a, b)] = 1.0
    return G


G_BULK = 0.25 * _unit(0, 0) + 0.25 * _unit(1, 1) + 0.5 * _unit(0, 1)
G_SHEAR = 0.125 * _unit(0, 0) + 0.125 * _unit(1, 1) - 0.25 * _unit(0, 1) + 0.5 * _unit(2, 2)


def isotropy_coefficients(normaliser: float) -> np.ndarray:
    """``dC_i/dCbar`` with the normaliser frozen, shape ``(6, 3, 3)``."""
    G = np.stack([
        _unit(0, 0) - G_BULK - G_SHEAR,
        _unit(1, 1) - G_BULK - G_SHEAR,
        np.sqrt(2.0) * (_unit(0, 1) - G_BULK + G_SHEAR),
        2.0 * _unit(0, 2),
        2.0 * _unit(1, 2),
        2.0 * (_unit(2, 2) - G_SHEAR),
    ])
    return G / normaliser


# --- evaluation context ------------------------------------------------------------

@dataclass
class DesignEvaluation:
    """State, material, cell solution and homogenised tensor of one design."""

    state: LevelSetState
    material: MaterialField
    sol: CellSolution
    Cbar: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def normaliser(self) -> float:
        if "normaliser" not in self._cache:
            self._cache["normaliser"] = isotropy_normaliser(self.Cbar)
        return self._cache["normaliser"]

    def pair_integrand(self, a: int, b: int) -> np.ndarray:
        """``eps_a . T_m eps_b`` for each level set, ``(m, ne, 4)``."""
        key = ("pair", min(a, b), max(a, b))
        if key not in self._cache:
            eps = self.sol.total_strain
            self._cache[key] = np.einsum("egi,megij,egj->meg", eps[a], self.material.sensitivity_tensor,
                                         eps[b], optimize=True)
        return self._cache[key]

    def linear_integrand(self, G: np.ndarray) -> np.ndarray:
        out = np.zeros((self.state.num_phases,) + self.sol.total_strain.shape[1:3])
        for a in range(3):
            for b in range(a, 3):
                if G[a, b] != 0.0:
                    out += G[a, b] * self.pair_integrand(a, b)
        return out


def evaluate_design(state: LevelSetState, base: list[np.ndarray], eps_void: float = 1e-3,
                    solver: str = "auto") -> DesignEvaluation:
    material = material_field(state, base, eps_void)
    sol = solve_cell_problems(state.grid, material, method=solver)
    return DesignEvaluation(state, material, sol, homogenised_tensor(sol, material))


def stiffness_sensitivity(ev: DesignEvaluation, ijkl: str) -> np.ndarray:
    """Boundary integrand of ``Cbar_ijkl`` for every level set."""
    i, j, k, l = (int(c) - 1 for c in ijkl)
    return ev.pair_integrand(voigt_index(i, j), voigt_index(k, l))


def volume(state: LevelSetState, phase: int | None = None) -> float:
    """Smoothed volume of the solid (single level set) or of colour phase ``phase`` (1..4)."""
    grid = state.grid
    H = smoothed_heaviside(grid.to_gauss(state.phi), state.eta)
    ind = phase_indicators(H)
    if state.num_phases == 1:
        if phase not in (None, 1):
            raise ParameterError("single-phase designs only have the solid phase")
        return grid.integrate(ind[0])
    if phase not in (1, 2, 3, 4):
        raise ParameterError(f"phase must be 1..4 for colour level sets, got {phase}")
    return grid.integrate(ind[phase - 1])


def volume_sensitivity(state: LevelSetState, phase: int | None = None) -> np.ndarray:
    """Integrand ``-d(indicator)/dH_m``; 1 for a single level set."""
    grid = state.grid
    H = smoothed_heaviside(grid.to_gauss(state.phi), state.eta)
    dind = phase_indicator_derivatives(H)
    idx = 0 if state.num_phases == 1 else phase - 1
    return -dind[idx]


# --- functional specs ----------------------------------------------------------------

KINDS = ("bulk_modulus", "volume", "phase_volume", "isotropy_residual", "anisotropy_measure",
         "stiffness_target", "poisson_ratio", "stiffness")


@dataclass(frozen=True)
class FunctionalSpec:
    """A functional ``scale * (raw - target)``.

    ``kind`` selects the raw quantity; ``index`` is the isotropy residual
    number (1..6), ``ijkl`` the tensor component for stiffness kinds and
    ``phase`` the colour phase for ``phase_volume``.
    """

    kind: str
    target: float = 0.0
    scale: float = 1.0
    index: int | None = None
    ijkl: str | None = None
    phase: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown functional kind {self.kind!r}")
        if not np.isfinite(self.target):
            raise ParameterError("functional target must be finite")
        if self.kind == "isotropy_residual" and self.index not in range(1, 7):
            raise ParameterError(f"isotropy residual index must be 1..6, got {self.index}")
        if self.kind in ("stiffness_target", "stiffness") and (self.ijkl is None or len(self.ijkl) != 4):
            raise ParameterError("stiffness functionals need a 4-digit ijkl component")
        if self.kind == "phase_volume" and self.phase not in (1, 2, 3, 4):
            raise ParameterError(f"phase_volume needs phase 1..4, got {self.phase}")

    @property
    def label(self) -> str:
        if self.kind == "isotropy_residual":
            return f"iso_{self.index}"
        if self.kind in ("stiffness_target", "stiffness"):
            return f"C{self.ijkl}"
        if self.kind == "phase_volume":
            return f"vol_{self.phase}"
        return self.kind


def _raw_value(spec: FunctionalSpec, ev: DesignEvaluation) -> float:
    kind = spec.kind
    if kind == "bulk_modulus":
        return bulk_modulus(ev.Cbar)
    if kind == "volume":
        return volume(ev.state)
    if kind == "phase_volume":
        return volume(ev.state, spec.phase)
    if kind == "isotropy_residual":
        return float(isotropy_residuals_2d(ev.Cbar, ev.normaliser)[spec.index - 1])
    if kind == "anisotropy_measure":
        return anisotropy_measure(isotropy_residuals_2d(ev.Cbar, ev.normaliser))
    if kind in ("stiffness_target", "stiffness"):
        return tensor_component(ev.Cbar, spec.ijkl)
    if kind == "poisson_ratio":
        return poisson_ratio(ev.Cbar)
    raise ParameterError(kind)


def value_of(spec: FunctionalSpec, ev: DesignEvaluation) -> float:
    return spec.scale * (_raw_value(spec, ev) - spec.target)


def _tensor_coefficients(spec: FunctionalSpec, ev: DesignEvaluation) -> np.ndarray:
    kind = spec.kind
    if kind == "bulk_modulus":
        return G_BULK
    if kind == "isotropy_residual":
        return isotropy_coefficients(ev.normaliser)[spec.index - 1]
    if kind == "anisotropy_measure":
        res = isotropy_residuals_2d(ev.Cbar, ev.normaliser)
        A = anisotropy_measure(res)
        if A < ANISOTROPY_KINK:
            return np.zeros((3, 3))
        return np.einsum("i,iab->ab", res, isotropy_coefficients(ev.normaliser)) / A
    if kind in ("stiffness_target", "stiffness"):
        i, j, k, l = (int(c) - 1 for c in spec.ijkl)
        return _unit(voigt_index(i, j), voigt_index(k, l))
    if kind == "poisson_ratio":
        c11, c12 = ev.Cbar[0, 0], ev.Cbar[0, 1]
        if abs(c11) < POISSON_EPS:
            raise DegenerateDesignError(f"Cbar_1111 = {c11:.3e} is too small for a Poisson ratio")
        return _unit(0, 1) / c11 - (c12 / c11**2) * _unit(0, 0)
    raise ParameterError(kind)


def sensitivity_of(spec: FunctionalSpec, ev: DesignEvaluation) -> np.ndarray:
    """Boundary integrand ``f_m`` with ``J'(theta) = sum_m int f_m theta_m . n``."""
    if spec.kind == "volume":
        if ev.state.num_phases != 1:
            raise ParameterError("use phase_volume for colour level sets")
        f = volume_sensitivity(ev.state)
    elif spec.kind == "phase_volume":
        f = volume_sensitivity(ev.state, spec.phase)
    else:
        f = ev.linear_integrand(_tensor_coefficients(spec, ev))
    return spec.scale * f
