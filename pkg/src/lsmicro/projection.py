"""Hilbertian projection: combine the extended objective sensitivity, projected
orthogonally to the constraint sensitivities, with an orthogonal basis of the
constraint sensitivities weighted to reduce every constraint at rate ``lambda``.

All fields are ``(m, n, n)`` arrays on the product space of the level sets.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .hilbertian import ExtensionOperator

log = logging.getLogger(__name__)

DROP_TOL = 1e-8
PG_ZERO = 1e-12


class InfeasibleDirectionError(RuntimeError):
    """Every constraint sensitivity vanished while some constraint is violated."""


@dataclass
class ConstraintBundle:
    """Constraint values, extended sensitivities and their orthogonal basis.

    ``orthobasis[p]`` comes from constraint ``retained[p]``; constraints in
    ``dropped`` lie (numerically) in the span of earlier ones.
    """

    values: np.ndarray
    extended: list[np.ndarray]
    orthobasis: list[np.ndarray]
    retained: list[int]
    dropped: list[int]
    basis_norms: np.ndarray
    _A_basis: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def rank(self) -> int:
        return len(self.orthobasis)

    def basis_inner(self, p: int, f: np.ndarray) -> float:
        """``<mu_bar_p, f>_H`` using the cached ``A mu_bar_p``."""
        return float(np.sum(self._A_basis[p] * f))


@dataclass
class VelocityResult:
    v: np.ndarray
    alphas: np.ndarray
    lambda_used: float
    alpha_sq_sum: float
    pg_norm: float
    stationary: bool = False
    lambda_capped: bool = False
    inconsistent: list[int] = field(default_factory=list)


def orthogonalise(extended: list[np.ndarray], op: ExtensionOperator, values=None,
                  drop_tol: float = DROP_TOL) -> ConstraintBundle:
    """Modified Gram-Schmidt with one re-orthogonalisation pass, in input order.

    A candidate is dropped when its residual H-norm falls to ``drop_tol``
    times its original norm or below.
    """
    values = np.zeros(len(extended)) if values is None else np.asarray(values, dtype=float)
    if len(values) != len(extended):
        raise ValueError("one value per constraint sensitivity is required")
    basis, A_basis, norms, retained, dropped = [], [], [], [], []
    for i, mu in enumerate(extended):
        r = np.array(mu, dtype=float, copy=True)
        norm0 = np.sqrt(max(float(np.sum(r * op.apply(r))), 0.0))
        for _ in range(2):
            for q, b in enumerate(basis):
                r -= (float(np.sum(A_basis[q] * r)) / norms[q] ** 2) * b
        Ar = op.apply(r)
        nr = np.sqrt(max(float(np.sum(r * Ar)), 0.0))
        if norm0 == 0.0 or nr <= drop_tol * norm0:
            dropped.append(i)
            continue
        basis.append(r)
        A_basis.append(Ar)
        norms.append(nr)
        retained.append(i)
    if not basis and len(extended) and np.any(values != 0.0):
        raise InfeasibleDirectionError("all constraint sensitivities vanish but constraints are violated")
    return ConstraintBundle(values, list(extended), basis, retained, dropped, np.array(norms), A_basis)


def project(g: np.ndarray, bundle: ConstraintBundle) -> np.ndarray:
    """``P g = g - sum_p <mu_bar_p, g>_H / ||mu_bar_p||^2 mu_bar_p``."""
    out = np.array(g, dtype=float, copy=True)
    for p, b in enumerate(bundle.orthobasis):
        out -= (bundle.basis_inner(p, g) / bundle.basis_norms[p] ** 2) * b
    return out


def solve_alphas(bundle: ConstraintBundle, lam: float) -> np.ndarray:
    """Forward substitution for ``<mu_p, v>_H = lam C_p`` over retained constraints."""
    k = bundle.rank
    alphas = np.zeros(k)
    for p in range(k):
        mu_p = bundle.extended[bundle.retained[p]]
        acc = sum(alphas[l] * bundle.basis_inner(l, mu_p) / bundle.basis_norms[l] for l in range(p))
        alphas[p] = (lam * bundle.values[bundle.retained[p]] - acc) / bundle.basis_norms[p]
    return alphas


def implied_rates(bundle: ConstraintBundle, alphas: np.ndarray) -> np.ndarray:
    """``<mu_i, sum_p alpha_p mu_bar_p / ||mu_bar_p||>_H`` for every constraint."""
    out = np.zeros(len(bundle.extended))
    for i, mu in enumerate(bundle.extended):
        out[i] = sum(alphas[p] * bundle.basis_inner(p, mu) / bundle.basis_norms[p] for p in range(bundle.rank))
    return out


def consistency_violations(bundle: ConstraintBundle, alphas: np.ndarray, lam: float, tol: float) -> list[int]:
    """Dropped constraints whose implied rate disagrees with ``lam C_i`` by more than ``tol``."""
    rates = implied_rates(bundle, alphas)
    return [i for i in bundle.dropped if abs(rates[i] - lam * bundle.values[i]) > tol]


def _combine(pg, pg_norm, bundle, alphas, objective_dead):
    s = float(np.sum(alphas**2))
    v = np.zeros_like(pg, dtype=float)
    if not objective_dead:
        v += np.sqrt(max(1.0 - s, 0.0)) * pg / pg_norm
    for p, b in enumerate(bundle.orthobasis):
        v += alphas[p] * b / bundle.basis_norms[p]
    return v, s


def compute_velocity(g: np.ndarray, bundle: ConstraintBundle, op: ExtensionOperator, lam: float = 0.5,
                     alpha_min_sq: float = 0.1, lambda_cap: float = np.inf,
                     consistency_tol: float = 1e-4, pseudo_time=None,
                     max_decay: float = 1.0) -> VelocityResult:
    """Unit H-norm velocity from the projected objective and constraint basis.

    ``alpha`` is linear in ``lambda`` so one rescale brings ``sum alpha^2``
    into ``[alpha_min_sq, 1]``; upward rescaling stops at ``lambda_cap`` times
    the nominal rate. When ``pseudo_time(v)`` is given (the time a velocity
    will be integrated for), ``lambda`` is further limited so that the
    linearised constraint decay ``pseudo_time * lambda`` stays at or below
    ``max_decay``; this prevents the ``alpha_min_sq`` floor from overshooting
    nearly satisfied constraints.
    """
    pg = project(g, bundle)
    pg_norm = np.sqrt(max(float(np.sum(pg * op.apply(pg))), 0.0))
    g_norm = np.sqrt(max(float(np.sum(g * op.apply(g))), 0.0))
    alphas = solve_alphas(bundle, lam)
    s = float(np.sum(alphas**2))
    lam_used, capped = lam, False
    objective_dead = pg_norm <= PG_ZERO * max(g_norm, 1.0)

    if objective_dead:
        if s == 0.0:
            return VelocityResult(np.zeros_like(g), alphas, lam, 0.0, pg_norm, stationary=True)
        target = 1.0
    else:
        target = min(max(s, alpha_min_sq), 1.0) if s > 0.0 else 0.0
    if s > 0.0 and target != s:
        factor = np.sqrt(target / s)
        if factor > lambda_cap and not objective_dead:
            factor, capped = lambda_cap, True
            log.info("lambda rescale capped at %.1fx nominal", lambda_cap)
        alphas = alphas * factor
        lam_used = lam * factor
        s = float(np.sum(alphas**2))

    v, s = _combine(pg, pg_norm, bundle, alphas, objective_dead)
    if pseudo_time is not None and s > 0.0 and not objective_dead:
        # ||v||_inf depends on alpha, so settle the limit with a few passes
        for _ in range(4):
            tau = pseudo_time(v)
            if tau * lam_used <= max_decay * (1.0 + 1e-6):
                break
            factor = max_decay / (tau * lam_used)
            alphas = alphas * factor
            lam_used *= factor
            capped = True
            v, s = _combine(pg, pg_norm, bundle, alphas, objective_dead)
    bad = consistency_violations(bundle, alphas, lam_used, consistency_tol)
    if bad:
        log.warning("linearly dependent constraints %s are inconsistent with the retained set", bad)
    return VelocityResult(v, alphas, lam_used, s, pg_norm, lambda_capped=capped, inconsistent=bad)
