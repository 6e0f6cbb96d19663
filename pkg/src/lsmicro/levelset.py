"""Level set kinematics on the periodic grid.

Sign convention: ``phi < 0`` in the solid (or phase interior), ``phi > 0`` in
the void. A positive normal velocity moves the zero level set outward from
the solid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .grid import ParameterError, PeriodicGrid

log = logging.getLogger(__name__)

REINIT_TOL = 5e-5
REINIT_MAX_ITER = 2000


class NumericalBlowupError(RuntimeError):
    """Non-finite values appeared while integrating a level set equation."""


class DesignCollapseError(RuntimeError):
    """A level set function no longer has a zero level set."""


@dataclass(frozen=True)
class LevelSetState:
    """One (single-phase) or two (colour, multi-phase) level set functions."""

    grid: PeriodicGrid
    phi: np.ndarray  # (m, n, n)
    eta: float
    is_reinitialised: bool = False
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim == 2:
            phi = phi[None]
        self.grid.check(phi)
        object.__setattr__(self, "phi", phi)

    @property
    def num_phases(self) -> int:
        return self.phi.shape[0]

    def with_phi(self, phi: np.ndarray, **kw) -> LevelSetState:
        kw.setdefault("is_reinitialised", False)
        return replace(self, phi=phi, **kw)

    def check_nonempty(self) -> None:
        for m, p in enumerate(self.phi):
            if p.min() >= 0.0 or p.max() <= 0.0:
                raise DesignCollapseError(f"level set {m} has no zero level set")


# --- smoothed Heaviside --------------------------------------------------------

def smoothed_heaviside(phi, eta: float):
    """``H_eta``: 0 below ``-eta``, 1 above ``eta``, sine-smoothed in between."""
    phi = np.asarray(phi, dtype=float)
    t = np.clip(phi, -eta, eta)
    H = 0.5 + t / (2.0 * eta) + np.sin(np.pi * t / eta) / (2.0 * np.pi)
    return np.where(phi <= -eta, 0.0, np.where(phi >= eta, 1.0, H))


def smoothed_heaviside_prime(phi, eta: float):
    phi = np.asarray(phi, dtype=float)
    inside = np.abs(phi) <= eta
    return np.where(inside, (1.0 + np.cos(np.pi * phi / eta)) / (2.0 * eta), 0.0)


# --- upwind machinery ------------------------------------------------------------

def _one_sided(phi: np.ndarray, h: float):
    dxm = (phi - np.roll(phi, 1, axis=0)) / h
    dxp = (np.roll(phi, -1, axis=0) - phi) / h
    dym = (phi - np.roll(phi, 1, axis=1)) / h
    dyp = (np.roll(phi, -1, axis=1) - phi) / h
    return dxm, dxp, dym, dyp


def godunov_gradients(phi: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Godunov upwind ``|grad phi|`` for positive and negative speeds respectively."""
    dxm, dxp, dym, dyp = _one_sided(phi, h)
    grad_pos = np.sqrt(
        np.maximum(np.maximum(dxm, 0.0) ** 2, np.minimum(dxp, 0.0) ** 2)
        + np.maximum(np.maximum(dym, 0.0) ** 2, np.minimum(dyp, 0.0) ** 2)
    )
    grad_neg = np.sqrt(
        np.maximum(np.minimum(dxm, 0.0) ** 2, np.maximum(dxp, 0.0) ** 2)
        + np.maximum(np.minimum(dym, 0.0) ** 2, np.maximum(dyp, 0.0) ** 2)
    )
    return grad_pos, grad_neg


def approximate_sign(grid: PeriodicGrid, phi: np.ndarray) -> np.ndarray:
    """Smoothed sign ``phi / sqrt(phi^2 + |grad phi|^2 dx^2)``."""
    g = grid.central_gradient_norm(phi)
    denom = np.sqrt(phi**2 + (g * grid.dx) ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0.0, phi / np.where(denom > 0.0, denom, 1.0), 0.0)
    return s


def hj_steps(n: int, d: int = 2) -> int:
    return max(1, n // 10) if d == 2 else max(1, n // 3)


def advect(state: LevelSetState, velocity: np.ndarray, gamma: float, steps: int | None = None) -> LevelSetState:
    """Transport each level set with ``phi_t + v |grad phi| = 0``.

    Uses ``floor(n/10)`` explicit first order Godunov steps with
    ``dt = gamma * dx / ||v||_inf``, the sup norm taken jointly over all
    level sets.
    """
    grid = state.grid
    v = np.asarray(velocity, dtype=float)
    if v.ndim == 2:
        v = v[None]
    if v.shape != state.phi.shape:
        raise ParameterError(f"velocity shape {v.shape} != level set shape {state.phi.shape}")
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"CFL coefficient must lie in (0, 1), got {gamma}")
    vmax = float(np.max(np.abs(v)))
    if vmax == 0.0:
        return state
    h = grid.dx
    dt = gamma * h / vmax
    nsteps = hj_steps(grid.n) if steps is None else steps
    vp, vm = np.maximum(v, 0.0), np.minimum(v, 0.0)
    phi = state.phi.copy()
    for step in range(nsteps):
        for m in range(phi.shape[0]):
            gp, gm = godunov_gradients(phi[m], h)
            phi[m] -= dt * (vp[m] * gp + vm[m] * gm)
        if not np.all(np.isfinite(phi)):
            raise NumericalBlowupError(f"non-finite level set after advection step {step}")
    return state.with_phi(phi)


def _subcell_distance(phi0: np.ndarray, h: float):
    """Nodes next to a sign change and their distance estimate from ``phi0``."""
    near = np.zeros(phi0.shape, dtype=bool)
    spread = []
    for axis in (0, 1):
        fwd = np.roll(phi0, -1, axis=axis)
        bwd = np.roll(phi0, 1, axis=axis)
        near |= (phi0 * fwd <= 0.0) | (phi0 * bwd <= 0.0)
        spread.append(np.maximum.reduce([np.abs(fwd - bwd) / 2.0, np.abs(fwd - phi0), np.abs(phi0 - bwd)]))
    slope = np.maximum(np.hypot(*spread), 1e-12 * h)
    return near, h * phi0 / slope


def _volume_shift(phi: np.ndarray, target: float, eta: float) -> float:
    """Constant ``c`` with ``sum H(phi + c) == target`` (``H`` increasing in ``phi``)."""
    total = lambda c: float(np.sum(smoothed_heaviside(phi + c, eta))) - target  # noqa: E731
    lo, hi = -eta, eta
    while total(lo) > 0.0:
        lo *= 2.0
    while total(hi) < 0.0:
        hi *= 2.0
    return brentq(total, lo, hi, xtol=1e-12 * eta)


def reinitialise(state: LevelSetState, gamma_reinit: float = 0.1, tol: float = REINIT_TOL,
                 max_iter: int = REINIT_MAX_ITER, subcell_fix: bool = False,
                 preserve_volume: bool = True) -> LevelSetState:
    """Drive each level set towards a signed distance function.

    Iterates ``phi_t + S(phi_0)(|grad phi| - 1) = 0`` with ``dt = gamma_reinit * dx``
    until the sup-norm change of one step drops below ``tol``.

    ``preserve_volume`` finishes with a constant shift of each level set that
    restores its smoothed volume ``int H(phi)``, cancelling the small drift
    of the upwind scheme near curved or thin features. ``subcell_fix``
    instead pins nodes next to the interface at the distance implied by
    ``phi_0`` (Russo-Smereka); it conserves volume locally but also freezes
    mesh-scale wiggles of the interface, so it is off by default.
    """
    if not 0.0 < gamma_reinit < 1.0:
        raise ParameterError(f"reinitialisation CFL must lie in (0, 1), got {gamma_reinit}")
    grid = state.grid
    h = grid.dx
    dt = gamma_reinit * h
    out = np.empty_like(state.phi)
    warnings = list(state.warnings)
    for m, phi0 in enumerate(state.phi):
        S = approximate_sign(grid, phi0)
        Sp, Sm = np.maximum(S, 0.0), np.minimum(S, 0.0)
        if subcell_fix:
            near, dist = _subcell_distance(phi0, h)
            sgn = np.sign(phi0)
        phi = phi0.copy()
        for it in range(max_iter):
            gp, gm = godunov_gradients(phi, h)
            update = dt * (Sp * (gp - 1.0) + Sm * (gm - 1.0))
            if subcell_fix:
                update = np.where(near, (dt / h) * (sgn * np.abs(phi) - dist), update)
            phi -= update
            if not np.all(np.isfinite(phi)):
                raise NumericalBlowupError(f"non-finite level set after reinitialisation step {it}")
            if np.max(np.abs(update)) < tol:
                break
        else:
            msg = f"reinitialisation of level set {m} hit the {max_iter} iteration cap"
            log.warning(msg)
            warnings.append(msg)
        if preserve_volume and np.any(phi0 > 0.0) and np.any(phi0 < 0.0):
            phi += _volume_shift(phi, float(np.sum(smoothed_heaviside(phi0, state.eta))), state.eta)
        out[m] = phi
    return replace(state, phi=out, is_reinitialised=True, warnings=tuple(warnings))


# --- diagnostics -----------------------------------------------------------------

def interface_points(grid: PeriodicGrid, phi: np.ndarray) -> np.ndarray:
    """Zero crossings along grid edges by linear interpolation, shape ``(k, 2)``.

    Coordinates are unwrapped: a crossing on the edge from node ``n-1`` to
    node ``0`` is reported near ``x = 1``.
    """
    X, Y = grid.coordinates()
    h = grid.dx
    pts = []
    for axis in (0, 1):
        nxt = np.roll(phi, -1, axis=axis)
        mask = (phi * nxt < 0.0) | ((phi == 0.0) & (nxt != 0.0))
        t = phi[mask] / (phi[mask] - nxt[mask])
        x, y = X[mask].copy(), Y[mask].copy()
        if axis == 0:
            x += t * h
        else:
            y += t * h
        pts.append(np.column_stack([x, y]))
    return np.concatenate(pts)


def solid_fraction_sharp(phi: np.ndarray) -> float:
    """Fraction of nodes with ``phi < 0``."""
    return float(np.mean(phi < 0.0))


# --- initial designs -------------------------------------------------------------

def _periodic_distance_to_lattice(grid: PeriodicGrid, m: int, offset: float) -> np.ndarray:
    """Distance from each node to the nearest point of ``((i + offset)/m, (j + offset)/m)``."""
    X, Y = grid.coordinates()
    a = 1.0 / m
    # position inside one lattice cell, centred on the lattice point
    dxl = (X - offset * a) % a
    dyl = (Y - offset * a) % a
    dxl = np.minimum(dxl, a - dxl)
    dyl = np.minimum(dyl, a - dyl)
    return np.hypot(dxl, dyl)


def holes_field(grid: PeriodicGrid, m: int, r: float, offset: float = 0.5) -> np.ndarray:
    """Signed distance to an ``m x m`` periodic array of circular holes (void, ``phi > 0``)."""
    if m < 1:
        raise ParameterError(f"hole count per axis must be >= 1, got {m}")
    if not 0.0 < r < 1.0 / (2 * m):
        raise ParameterError(f"hole radius {r} must lie in (0, {1.0 / (2 * m)}) for m={m}")
    return r - _periodic_distance_to_lattice(grid, m, offset)


def initial_structure(grid: PeriodicGrid, preset: str = "holes", m: int = 2, r: float | None = None,
                      eta_factor: float = 1.5, gamma_reinit: float = 0.1) -> LevelSetState:
    """Build and reinitialise a starting design.

    ``holes``: ``m x m`` holes of radius ``r`` (default ``0.3/m``, about 70% solid).
    ``overlapping_pair``: two level sets whose solid regions nest so that the
    start contains only phase 3 (both negative) and void; the second level set
    has additional holes offset by half a hole spacing.
    """
    eta = eta_factor * grid.dx
    if preset == "holes":
        r = 0.3 / m if r is None else r
        phi = holes_field(grid, m, r)[None]
    elif preset == "overlapping_pair":
        r = 0.2 / m if r is None else r
        if r >= (np.sqrt(2.0) / 4.0) / m:
            raise ParameterError(f"radius {r} makes the two hole arrays merge for m={m}")
        phi1 = holes_field(grid, m, r)
        phi2 = np.maximum(phi1, holes_field(grid, m, r, offset=0.0))
        phi = np.stack([phi1, phi2])
    else:
        raise ParameterError(f"unknown initial structure preset {preset!r}")
    state = LevelSetState(grid, phi, eta)
    return reinitialise(state, gamma_reinit)
