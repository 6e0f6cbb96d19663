"""Ersatz and colour-level-set stiffness interpolation sampled at Gauss points."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ParameterError
from .levelset import LevelSetState, smoothed_heaviside


@dataclass(frozen=True)
class MaterialField:
    """Stiffness sampled at every Gauss point.

    Attributes
    ----------
    C : (ne, 4, 3, 3) pointwise Voigt stiffness.
    heavisides : (m, ne, 4) ``H_eta`` of each level set at the Gauss points.
    sensitivity_tensor : (m, ne, 4, 3, 3) tensor ``T_m`` such that the boundary
        integrand of ``Cbar_ab`` with respect to level set ``m`` is
        ``eps_a . T_m eps_b``.
    """

    C: np.ndarray
    heavisides: np.ndarray
    sensitivity_tensor: np.ndarray
    base: tuple[np.ndarray, ...]

    @property
    def num_phases(self) -> int:
        return self.heavisides.shape[0]


def _phase_weights(H1: np.ndarray, H2: np.ndarray) -> list[np.ndarray]:
    # Colour table: 1 = (-,+), 2 = (+,-), 3 = (-,-), 4 = (+,+)
    return [(1 - H1) * H2, H1 * (1 - H2), (1 - H1) * (1 - H2), H1 * H2]


def phase_indicators(heavisides: np.ndarray) -> np.ndarray:
    """Smoothed indicators of the phases, ``(2, ...)`` single-phase (solid, void)
    or ``(4, ...)`` for the colour table."""
    if heavisides.shape[0] == 1:
        H = heavisides[0]
        return np.stack([1.0 - H, H])
    return np.stack(_phase_weights(heavisides[0], heavisides[1]))


def phase_indicator_derivatives(heavisides: np.ndarray) -> np.ndarray:
    """``d(indicator_p)/dH_m`` with shape ``(num_indicators, m, ...)``."""
    if heavisides.shape[0] == 1:
        one = np.ones_like(heavisides[0])
        return np.stack([-one, one])[:, None]
    H1, H2 = heavisides
    return np.stack([
        np.stack([-H2, 1 - H1]),
        np.stack([1 - H2, -H1]),
        np.stack([-(1 - H2), -(1 - H1)]),
        np.stack([H2, H1]),
    ])


def material_field(state: LevelSetState, base: list[np.ndarray], eps_void: float = 1e-3) -> MaterialField:
    """Interpolate stiffness from the level sets.

    Single phase: ``C (1 - H) + eps_void C H``. Two level sets: the four-term
    colour interpolation over ``base = [C_1, C_2, C_3, C_4]`` (phase ``k`` as
    in the colour table; void phases are passed in already scaled).
    """
    grid = state.grid
    Hg = smoothed_heaviside(grid.to_gauss(state.phi), state.eta)  # (m, ne, 4)
    base = [np.asarray(b, dtype=float) for b in base]
    if state.num_phases == 1:
        if len(base) != 1:
            raise ParameterError(f"single-phase design needs 1 base tensor, got {len(base)}")
        if not 0.0 < eps_void < 1.0:
            raise ParameterError(f"eps_void must lie in (0, 1), got {eps_void}")
        C0 = base[0]
        scale = (1.0 - Hg[0]) + eps_void * Hg[0]
        C = scale[..., None, None] * C0
        sens = np.broadcast_to(C0, (1,) + Hg.shape[1:] + C0.shape)
        return MaterialField(C, Hg, sens, tuple(base))
    if state.num_phases == 2:
        if len(base) != 4:
            raise ParameterError(f"colour level sets need 4 base tensors, got {len(base)}")
        w = _phase_weights(Hg[0], Hg[1])
        C = sum(wk[..., None, None] * Ck for wk, Ck in zip(w, base))
        dw = phase_indicator_derivatives(Hg)  # (4, 2, ne, 4)
        dC = np.einsum("kmeg,kab->megab", dw, np.stack(base))
        return MaterialField(C, Hg, -dC, tuple(base))
    raise ParameterError(f"unsupported number of level sets: {state.num_phases}")
