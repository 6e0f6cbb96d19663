"""Periodic Cartesian grid on the unit cell, bilinear element machinery and
symmetric stiffness-tensor helpers.

Nodal fields are plain ``(n, n)`` float arrays indexed ``[i, j]`` with
``x = i * dx`` and ``y = j * dx``. Element ``(i, j)`` spans nodes ``(i, j)``,
``(i+1, j)``, ``(i+1, j+1)``, ``(i, j+1)`` (indices wrap modulo ``n``).
Element quantities are sampled at the 2x2 Gauss points and stored as
``(n*n, 4)`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

# Voigt ordering for 2D: (11, 22, 12) with engineering shear strain.
VOIGT_2D = {(0, 0): 0, (1, 1): 1, (0, 1): 2, (1, 0): 2}

_GP = 1.0 / np.sqrt(3.0)
# Gauss points in the reference square [-1, 1]^2, counter-clockwise.
GAUSS_POINTS = np.array([[-_GP, -_GP], [_GP, -_GP], [_GP, _GP], [-_GP, _GP]])
# Local node coordinates in the reference square, same ordering as nodes of an element.
LOCAL_NODES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


class GridMismatchError(ValueError):
    """Fields defined on different grids were combined."""


class ParameterError(ValueError):
    """A physical or numerical parameter is outside its admissible range."""


def voigt_index(i: int, j: int) -> int:
    """Map a symmetric tensor index pair (0-based) to its 2D Voigt slot.

    ``C_ijkl`` is ``voigt[voigt_index(i, j), voigt_index(k, l)]``; the strain
    vector uses engineering shear so that the energy density is
    ``0.5 * eps @ C @ eps``.
    """
    return VOIGT_2D[(i, j)]


def tensor_component(voigt: np.ndarray, ijkl: str) -> float:
    """Read ``C_ijkl`` from a 2D Voigt matrix, e.g. ``tensor_component(C, "1112")``."""
    i, j, k, l = (int(c) - 1 for c in ijkl)
    return float(voigt[voigt_index(i, j), voigt_index(k, l)])


def isotropic_tensor(E: float, nu: float, d: int = 2, planar_mode: str = "plane_stress") -> np.ndarray:
    """Isotropic stiffness in Voigt form (3x3 for ``d=2``, 6x6 for ``d=3``)."""
    if not E > 0:
        raise ParameterError(f"Young's modulus must be positive, got E={E}")
    if not -1.0 < nu < 0.5:
        raise ParameterError(f"Poisson ratio must lie in (-1, 0.5), got nu={nu}")
    mu = E / (2.0 * (1.0 + nu))
    if d == 2:
        if planar_mode == "plane_stress":
            c11 = E / (1.0 - nu**2)
            c12 = nu * E / (1.0 - nu**2)
        elif planar_mode == "plane_strain":
            lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
            c11 = lam + 2.0 * mu
            c12 = lam
        else:
            raise ParameterError(f"unknown planar mode {planar_mode!r}")
        return np.array([[c11, c12, 0.0], [c12, c11, 0.0], [0.0, 0.0, mu]])
    if d == 3:
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        C = np.zeros((6, 6))
        C[:3, :3] = lam
        C[np.arange(3), np.arange(3)] = lam + 2.0 * mu
        C[np.arange(3, 6), np.arange(3, 6)] = mu
        return C
    raise ParameterError(f"dimension must be 2 or 3, got d={d}")


def _shape(xi: float, eta: float) -> np.ndarray:
    return 0.25 * (1.0 + LOCAL_NODES[:, 0] * xi) * (1.0 + LOCAL_NODES[:, 1] * eta)


def _shape_grad(xi: float, eta: float) -> np.ndarray:
    """Reference gradients, shape (2, 4)."""
    return 0.25 * np.array([
        LOCAL_NODES[:, 0] * (1.0 + LOCAL_NODES[:, 1] * eta),
        LOCAL_NODES[:, 1] * (1.0 + LOCAL_NODES[:, 0] * xi),
    ])


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid of ``n x n`` bilinear elements on ``[0, 1]^2``."""

    n: int
    d: int = 2

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"need at least 2 elements per axis, got n={self.n}")
        if self.d != 2:
            raise ParameterError("only d=2 is implemented")

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def num_nodes(self) -> int:
        return self.n * self.n

    @property
    def num_elements(self) -> int:
        return self.n * self.n

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodal coordinates ``(X, Y)`` each of shape ``(n, n)``."""
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def check(self, *fields: np.ndarray) -> None:
        for f in fields:
            if f.shape[-2:] != self.shape:
                raise GridMismatchError(f"field shape {f.shape} does not match grid {self.shape}")

    # --- element connectivity -------------------------------------------------

    @cached_property
    def connectivity(self) -> np.ndarray:
        """Flat node ids of each element, shape ``(n*n, 4)``."""
        n = self.n
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        i, j = i.ravel(), j.ravel()
        ip, jp = (i + 1) % n, (j + 1) % n
        return np.stack([i * n + j, ip * n + j, ip * n + jp, i * n + jp], axis=1)

    @cached_property
    def N(self) -> np.ndarray:
        """Shape function values at Gauss points, shape (4 gauss, 4 nodes)."""
        return np.array([_shape(*g) for g in GAUSS_POINTS])

    @cached_property
    def dN(self) -> np.ndarray:
        """Physical shape gradients at Gauss points, shape (4 gauss, 2, 4 nodes)."""
        return np.array([_shape_grad(*g) for g in GAUSS_POINTS]) * (2.0 / self.dx)

    @property
    def gauss_weight(self) -> float:
        """Quadrature weight per Gauss point (Jacobian included)."""
        return self.dx**2 / 4.0

    # --- interpolation & integration -----------------------------------------

    def element_values(self, f: np.ndarray) -> np.ndarray:
        """Gather nodal values per element, ``(..., n*n, 4)``."""
        flat = f.reshape(f.shape[:-2] + (-1,))
        return flat[..., self.connectivity]

    def to_gauss(self, f: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of a nodal field to Gauss points, ``(..., n*n, 4)``."""
        return self.element_values(f) @ self.N.T

    def grad_gauss(self, f: np.ndarray) -> np.ndarray:
        """Gradient of the bilinear interpolant at Gauss points, ``(n*n, 4, 2)``."""
        fe = self.element_values(f)
        return np.einsum("ea,gka->egk", fe, self.dN)

    def integrate(self, fg: np.ndarray) -> float:
        """Integral over the cell of a Gauss-point sampled quantity."""
        return float(np.sum(fg) * self.gauss_weight)

    def scatter(self, fe: np.ndarray) -> np.ndarray:
        """Sum per-element nodal contributions ``(n*n, 4)`` into a nodal field."""
        out = np.bincount(self.connectivity.ravel(), weights=fe.ravel(), minlength=self.num_nodes)
        return out.reshape(self.shape)

    def load_vector(self, fg: np.ndarray) -> np.ndarray:
        """Nodal load ``b_j = int f N_j`` for a Gauss-sampled ``f``."""
        return self.scatter((fg @ self.N) * self.gauss_weight)

    # --- scalar FE matrices ---------------------------------------------------

    def _assemble_scalar(self, ke: np.ndarray) -> sp.csr_matrix:
        conn = self.connectivity
        rows = np.repeat(conn, 4, axis=1).ravel()
        cols = np.tile(conn, (1, 4)).ravel()
        vals = np.broadcast_to(ke.ravel(), (conn.shape[0], 16)).ravel()
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.num_nodes, self.num_nodes))

    @cached_property
    def mass_matrix(self) -> sp.csr_matrix:
        me = self.gauss_weight * np.einsum("ga,gb->ab", self.N, self.N)
        return self._assemble_scalar(me)

    @cached_property
    def laplace_matrix(self) -> sp.csr_matrix:
        ke = self.gauss_weight * np.einsum("gka,gkb->ab", self.dN, self.dN)
        return self._assemble_scalar(ke)

    # --- finite differences on nodes -----------------------------------------

    def central_gradient_norm(self, f: np.ndarray) -> np.ndarray:
        """``|grad f|`` by periodic central differences."""
        h = self.dx
        fx = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * h)
        fy = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * h)
        return np.hypot(fx, fy)


def inner_product_L2(grid: PeriodicGrid, a: np.ndarray, b: np.ndarray) -> float:
    """``int_D a b`` using the consistent bilinear mass matrix."""
    grid.check(a, b)
    return float(a.ravel() @ (grid.mass_matrix @ b.ravel()))
