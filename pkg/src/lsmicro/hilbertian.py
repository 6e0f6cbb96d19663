"""H^1-periodic extension-regularisation of shape sensitivities.

Given a boundary integrand ``f`` (so that ``J'(theta) = int_dOmega f theta.n``),
``extend`` solves ``<g, w>_H = -J'(w n)`` for all ``w`` in the bilinear space,
with ``<u, v>_H = beta^2 int grad u . grad v + int u v``. Boundary integrals are
smeared over the level set band with ``H'_eta(phi) |grad phi|``.

Fields handled here carry a leading level-set axis, ``(m, n, n)``; inner
products on that product space sum over the level sets.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .grid import PeriodicGrid
from .levelset import LevelSetState, smoothed_heaviside_prime


class ExtensionOperator:
    """Factorised ``beta^2 K + M`` on the periodic scalar bilinear space."""

    def __init__(self, grid: PeriodicGrid, beta: float):
        self.grid = grid
        self.beta = beta
        A = (beta**2) * grid.laplace_matrix + grid.mass_matrix
        self.A = A.tocsr()
        self._lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                             options={"SymmetricMode": True})

    def solve(self, b: np.ndarray) -> np.ndarray:
        """``A^{-1} b`` for nodal loads of shape ``(..., n, n)``."""
        shape = b.shape
        flat = b.reshape(-1, self.grid.num_nodes).T
        x = self._lu.solve(np.ascontiguousarray(flat))
        return x.T.reshape(shape)

    def apply(self, u: np.ndarray) -> np.ndarray:
        shape = u.shape
        flat = u.reshape(-1, self.grid.num_nodes).T
        return (self.A @ flat).T.reshape(shape)


def smeared_delta(state: LevelSetState) -> np.ndarray:
    """``H'_eta(phi) |grad phi|`` at Gauss points for every level set, ``(m, ne, 4)``."""
    grid = state.grid
    out = np.empty((state.num_phases, grid.num_elements, 4))
    for m, phi in enumerate(state.phi):
        pg = grid.to_gauss(phi)
        grad = np.linalg.norm(grid.grad_gauss(phi), axis=-1)
        out[m] = smoothed_heaviside_prime(pg, state.eta) * grad
    return out


def shape_derivative_load(state: LevelSetState, integrand: np.ndarray) -> np.ndarray:
    """Nodal representation ``b_j = int f N_j delta_eta`` of ``J'(N_j n)``, ``(m, n, n)``."""
    grid = state.grid
    delta = smeared_delta(state)
    return np.stack([grid.load_vector(integrand[m] * delta[m]) for m in range(state.num_phases)])


def directional_derivative(state: LevelSetState, integrand: np.ndarray, w: np.ndarray) -> float:
    """``J'(w n) = sum_m int f_m w_m delta_eta`` for nodal directions ``w`` ``(m, n, n)``."""
    grid = state.grid
    w = np.asarray(w, dtype=float).reshape(state.phi.shape)
    delta = smeared_delta(state)
    return float(sum(grid.integrate(integrand[m] * delta[m] * grid.to_gauss(w[m]))
                     for m in range(state.num_phases)))


def extend(op: ExtensionOperator, integrand: np.ndarray, state: LevelSetState) -> np.ndarray:
    """Extended, regularised field ``g`` with ``<g, w>_H = -J'(w n)``, shape ``(m, n, n)``."""
    integrand = np.asarray(integrand, dtype=float)
    if not np.all(np.isfinite(integrand)):
        raise ValueError("sensitivity integrand contains non-finite values")
    return -op.solve(shape_derivative_load(state, integrand))


def extend_volumetric(op: ExtensionOperator, fg: np.ndarray) -> np.ndarray:
    """Identification with a volumetric load: ``<g, w>_H = -int f w``."""
    grid = op.grid
    fg = np.asarray(fg, dtype=float)
    if fg.ndim == 2:
        return -op.solve(grid.load_vector(fg))
    return -op.solve(np.stack([grid.load_vector(f) for f in fg]))


def h_inner(op: ExtensionOperator, a: np.ndarray, b: np.ndarray) -> float:
    """``<a, b>_H`` summed over any leading level-set axis."""
    op.grid.check(a, b)
    return float(np.sum(a * op.apply(b)))


def h_norm(op: ExtensionOperator, a: np.ndarray) -> float:
    return float(np.sqrt(max(h_inner(op, a, a), 0.0)))
