"""Periodic linear-elastic cell problems on bilinear quads and the homogenised
stiffness tensor.

Each unit macroscopic strain (11, 22, 12) drives a fluctuation field solved
with a pinned node for the rigid-body gauge. Strains are engineering Voigt
vectors so ``Cbar[a, b]`` is directly the Voigt entry.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import PeriodicGrid
from .materials import MaterialField

log = logging.getLogger(__name__)

NUM_LOADS = 3
DIRECT_SOLVER_MAX_N = 128


class SolverError(RuntimeError):
    """The linear solver failed to reach its tolerance."""


@dataclass(frozen=True)
class CellSolution:
    grid: PeriodicGrid
    fluctuations: np.ndarray  # (3, n, n, 2)
    total_strain: np.ndarray  # (3, ne, 4, 3) at Gauss points
    solver_stats: dict = field(default_factory=dict)

    @property
    def macro_strains(self) -> np.ndarray:
        return np.eye(NUM_LOADS)


class ElasticityFE:
    """Bilinear plane elasticity operators on a periodic grid."""

    def __init__(self, grid: PeriodicGrid):
        self.grid = grid
        dN = grid.dN  # (4, 2, 4)
        B = np.zeros((4, 3, 8))
        B[:, 0, 0::2] = dN[:, 0]
        B[:, 1, 1::2] = dN[:, 1]
        B[:, 2, 0::2] = dN[:, 1]
        B[:, 2, 1::2] = dN[:, 0]
        self.B = B
        conn = grid.connectivity
        edofs = np.empty((conn.shape[0], 8), dtype=np.int64)
        edofs[:, 0::2] = 2 * conn
        edofs[:, 1::2] = 2 * conn + 1
        self.edofs = edofs
        self.ndof = 2 * grid.num_nodes
        self._rows = np.repeat(edofs, 8, axis=1).ravel()
        self._cols = np.tile(edofs, (1, 8)).ravel()
        # node 0 pinned
        self.free = np.arange(2, self.ndof)

    def element_stiffness(self, C: np.ndarray) -> np.ndarray:
        """``(ne, 8, 8)`` element matrices for Gauss-point stiffness ``C``."""
        w = self.grid.gauss_weight
        return w * np.einsum("gia,egij,gjb->eab", self.B, C, self.B, optimize=True)

    def stiffness(self, C: np.ndarray) -> sp.csr_matrix:
        ke = self.element_stiffness(C)
        return sp.csr_matrix((ke.ravel(), (self._rows, self._cols)), shape=(self.ndof, self.ndof))

    def macro_loads(self, C: np.ndarray) -> np.ndarray:
        """Right-hand sides ``-int B^T C e_a`` for the three unit strains, ``(ndof, 3)``."""
        w = self.grid.gauss_weight
        fe = -w * np.einsum("gia,egij->eaj", self.B, C, optimize=True)  # (ne, 8, 3)
        out = np.zeros((self.ndof, NUM_LOADS))
        for a in range(NUM_LOADS):
            out[:, a] = np.bincount(self.edofs.ravel(), weights=fe[:, :, a].ravel(), minlength=self.ndof)
        return out

    def strains(self, u: np.ndarray) -> np.ndarray:
        """Gauss-point engineering strains of a flat displacement vector, ``(ne, 4, 3)``."""
        ue = u[self.edofs]
        return np.einsum("gia,ea->egi", self.B, ue)


_FE_CACHE: dict[int, ElasticityFE] = {}


def elasticity_fe(grid: PeriodicGrid) -> ElasticityFE:
    fe = _FE_CACHE.get(grid.n)
    if fe is None:
        fe = _FE_CACHE[grid.n] = ElasticityFE(grid)
    return fe


def _solve(K: sp.csr_matrix, F: np.ndarray, method: str, tol: float, maxiter: int) -> tuple[np.ndarray, dict]:
    stats: dict = {"method": method}
    if method == "direct":
        lu = spla.splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
        U = lu.solve(F)
    else:
        U = np.zeros_like(F)
        Minv = 1.0 / K.diagonal()
        prec = spla.LinearOperator(K.shape, matvec=lambda x: Minv * x)
        iters = []
        for a in range(F.shape[1]):
            count = [0]

            def cb(_xk, count=count):
                count[0] += 1

            U[:, a], info = spla.cg(K, F[:, a], rtol=tol, maxiter=maxiter, M=prec, callback=cb)
            if info != 0:
                res = np.linalg.norm(K @ U[:, a] - F[:, a]) / max(np.linalg.norm(F[:, a]), 1e-300)
                raise SolverError(f"CG did not converge for load {a}: relative residual {res:.3e}")
            iters.append(count[0])
        stats["iterations"] = iters
    bnorm = np.maximum(np.linalg.norm(F, axis=0), 1e-300)
    stats["residuals"] = (np.linalg.norm(K @ U - F, axis=0) / bnorm).tolist()
    return U, stats


def solve_cell_problems(grid: PeriodicGrid, material: MaterialField, method: str = "auto",
                        tol: float = 1e-8, maxiter: int = 20000) -> CellSolution:
    """Solve the periodic cell problems for the three unit macroscopic strains."""
    fe = elasticity_fe(grid)
    if method == "auto":
        method = "direct" if grid.n <= DIRECT_SOLVER_MAX_N else "cg"
    K = fe.stiffness(material.C)
    F = fe.macro_loads(material.C)
    free = fe.free
    Kf = K[free][:, free]
    Uf, stats = _solve(Kf, F[free], method, tol, maxiter)
    if max(stats["residuals"]) > max(tol, 1e-8) * 10:
        raise SolverError(f"cell solve residuals {stats['residuals']} exceed tolerance {tol}")
    U = np.zeros((fe.ndof, NUM_LOADS))
    U[free] = Uf
    strain = np.stack([fe.strains(U[:, a]) + np.eye(NUM_LOADS)[a] for a in range(NUM_LOADS)])
    fluct = U.T.reshape(NUM_LOADS, grid.n, grid.n, 2)
    return CellSolution(grid, fluct, strain, stats)


def homogenised_tensor(sol: CellSolution, material: MaterialField) -> np.ndarray:
    """``Cbar[a, b] = int (eps(u_a) + e_a) . C e_b`` over the unit cell."""
    grid = sol.grid
    return grid.gauss_weight * np.einsum("aegi,egij->aj", sol.total_strain, material.C, optimize=True)


def energy_tensor(sol: CellSolution, material: MaterialField) -> np.ndarray:
    """Symmetric energy form ``int (eps(u_a) + e_a) . C (eps(u_b) + e_b)``."""
    grid = sol.grid
    return grid.gauss_weight * np.einsum("aegi,egij,begj->ab", sol.total_strain, material.C,
                                         sol.total_strain, optimize=True)


def strain_fields(sol: CellSolution, kl: int) -> np.ndarray:
    """Total strain ``eps(u_kl) + e_kl`` at the Gauss points, ``(ne, 4, 3)``."""
    if not 0 <= kl < NUM_LOADS:
        raise IndexError(f"load index must be 0, 1 or 2, got {kl}")
    return sol.total_strain[kl]
