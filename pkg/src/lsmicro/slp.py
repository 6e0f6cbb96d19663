"""Sequential linear programming in the Hilbertian setting, as a comparison
velocity strategy.

The step ``v = l0 g + sum_i l_i mu_i`` maximises ``<g, v>_H`` subject to the
linearised equalities ``<mu_i, v>_H = rate * C_i`` and box trust regions
``|l_i| <= dx / (2 ||mu_i||_H)``, ``|l0| <= dx / (2 ||g||_H)``. When the box
makes the equalities infeasible they are relaxed: first the L1 violation is
minimised, then the objective is maximised at that violation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .hilbertian import ExtensionOperator
from .projection import VelocityResult

log = logging.getLogger(__name__)

ZERO_NORM = 1e-14


@dataclass(frozen=True)
class SlpStep:
    """LP solution: ``lambdas[0]`` multiplies ``g``, ``lambdas[1:]`` the constraints."""

    lambdas: np.ndarray
    trust: np.ndarray
    relaxed: bool
    violation: float


def _solve_lp(cost, A_eq, b_eq, bounds):
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    return res if res.status == 0 else None


def slp_step(g: np.ndarray, extended: list[np.ndarray], values, op: ExtensionOperator, rate: float = 0.5) -> SlpStep:
    """Solve the trust-region LP in normalised coordinates ``y_i = l_i ||f_i||_H``."""
    dx = op.grid.dx
    fields = [g] + list(extended)
    A_fields = [op.apply(f) for f in fields]
    norms = np.array([np.sqrt(max(float(np.sum(f * Af)), 0.0)) for f, Af in zip(fields, A_fields)])
    active = norms > ZERO_NORM * max(norms.max(initial=0.0), 1.0)
    k = len(fields)
    unit = [f / nrm if a else np.zeros_like(f) for f, nrm, a in zip(fields, norms, active)]
    gram = np.array([[float(np.sum(Af * u)) for u in unit] for Af in A_fields])  # <f_r, u_c>
    trust = np.where(active, dx / (2.0 * np.where(active, norms, 1.0)), 0.0)
    bounds = [(-dx / 2, dx / 2) if a else (0.0, 0.0) for a in active]

    values = np.asarray(values, dtype=float)
    n_con = len(extended)
    # maximise <g, v> = sum_c y_c <g, u_c>
    cost = -gram[0]
    # equality rows scaled by 1/||mu_j|| (rows of inactive constraints stay unscaled)
    rows, rhs = [], []
    for j in range(n_con):
        s = norms[j + 1] if active[j + 1] else 1.0
        rows.append(gram[j + 1] / s)
        rhs.append(rate * values[j] / s)
    A_eq = np.array(rows).reshape(n_con, k)
    b_eq = np.array(rhs)

    relaxed, violation = False, 0.0
    res = _solve_lp(cost, A_eq, b_eq, bounds) if n_con else _solve_lp(cost, None, None, bounds)
    if res is None:
        relaxed = True
        # phase 1: min sum(s+ + s-) with A y + s+ - s- = b
        eye = np.eye(n_con)
        A1 = np.hstack([A_eq, eye, -eye])
        c1 = np.concatenate([np.zeros(k), np.ones(2 * n_con)])
        b1 = bounds + [(0.0, None)] * (2 * n_con)
        r1 = _solve_lp(c1, A1, b_eq, b1)
        if r1 is None:
            raise RuntimeError("relaxed SLP subproblem failed")
        violation = float(r1.fun)
        # phase 2: best objective with violation held at its minimum
        c2 = np.concatenate([cost, np.zeros(2 * n_con)])
        A_ub = c1[None, :]
        r2 = linprog(c2, A_ub=A_ub, b_ub=[violation * (1 + 1e-9) + 1e-14], A_eq=A1, b_eq=b_eq,
                     bounds=b1, method="highs")
        res = r2 if r2.status == 0 else r1
        log.info("SLP equalities relaxed, L1 violation %.3e", violation)
    y = np.asarray(res.x[:k])
    lambdas = np.where(active, y / np.where(active, norms, 1.0), 0.0)
    return SlpStep(lambdas, trust[1:], relaxed, violation)


def slp_velocity(g: np.ndarray, extended: list[np.ndarray], values, op: ExtensionOperator,
                 rate: float = 0.5) -> VelocityResult:
    """Velocity from the SLP step; ``alphas`` holds the LP coefficients.

    ``alpha_sq_sum`` has no meaning here and is reported as NaN.
    """
    step = slp_step(g, extended, values, op, rate)
    v = step.lambdas[0] * g
    for lam_i, mu in zip(step.lambdas[1:], extended):
        v = v + lam_i * mu
    g_norm = np.sqrt(max(float(np.sum(g * op.apply(g))), 0.0))
    stationary = not np.any(step.lambdas)
    return VelocityResult(v, step.lambdas, rate, float("nan"), g_norm, stationary=stationary)
