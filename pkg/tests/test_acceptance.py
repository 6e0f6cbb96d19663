"""End-to-end acceptance checks, one verdict line each in the terminal summary.

The example runs take several minutes in total; each preset runs once per
session and is shared between the checks that need it.
"""
import time

import numpy as np
import pytest

from conftest import smooth_bumps
from lsmicro.driver import RunConfig, hs_reference, run
from lsmicro.fem import homogenised_tensor, solve_cell_problems
from lsmicro.functionals import (FunctionalSpec, anisotropy_measure, bulk_modulus, evaluate_design,
                                 isotropy_residuals_2d, poisson_ratio, sensitivity_of, value_of, volume)
from lsmicro.grid import PeriodicGrid, isotropic_tensor
from lsmicro.hilbertian import ExtensionOperator, directional_derivative, extend, h_inner, h_norm
from lsmicro.levelset import LevelSetState, advect, holes_field, initial_structure, reinitialise
from lsmicro.materials import material_field
from lsmicro.projection import compute_velocity, orthogonalise, project
from test_fem import laminate_state, laminate_tensor

_RUNS: dict = {}


def example(preset, **overrides):
    key = (preset, tuple(sorted(overrides.items())))
    if key not in _RUNS:
        t0 = time.perf_counter()
        res = run(RunConfig.for_preset(preset, n=100, **overrides))
        _RUNS[key] = (res, time.perf_counter() - t0)
    return _RUNS[key]


# 1 -------------------------------------------------------------------------------

def test_criterion_1_homogenisation_identity(report, solid):
    grid = PeriodicGrid(32)
    t0 = time.perf_counter()
    errs = []
    for sign, expected in ((-1.0, solid), (1.0, 1e-3 * solid)):
        st = LevelSetState(grid, sign * np.ones(grid.shape), 1.5 * grid.dx)
        mat = material_field(st, [solid])
        Cbar = homogenised_tensor(solve_cell_problems(grid, mat), mat)
        nz = expected != 0
        errs.append(float(np.max(np.abs(Cbar - expected)[nz] / np.abs(expected[nz]))))
        errs.append(float(np.max(np.abs(Cbar[~nz]))))
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-10 and elapsed < 1.0
    report("1", ok, f"max rel error {max(errs):.2e} (solid and ersatz), {elapsed:.2f}s")
    assert ok


# 2 -------------------------------------------------------------------------------

def test_criterion_2_laminate(report):
    t0 = time.perf_counter()
    E1, E2 = isotropic_tensor(1.0, 0.3), isotropic_tensor(0.5, 0.3)
    st = laminate_state(64)
    mat = material_field(st, [1e-3 * E1, E1, E2, 1e-3 * E1])
    Cbar = homogenised_tensor(solve_cell_problems(st.grid, mat), mat)
    exact = laminate_tensor(E2, E1)
    rel = max(abs(Cbar[a, b] / exact[a, b] - 1) for a, b in ((0, 0), (1, 1), (0, 1), (2, 2)))
    elapsed = time.perf_counter() - t0
    ok = rel <= 0.01 and elapsed < 10
    report("2", ok, f"max rel deviation from series/parallel values {rel:.2e} at n=64, {elapsed:.1f}s")
    assert ok


# 3 -------------------------------------------------------------------------------

def _fd_errors(state, base, specs, bumps, tau=1e-3):
    grid = state.grid
    ev = evaluate_design(state, base)
    gn = np.stack([grid.central_gradient_norm(p) for p in state.phi])
    errors = {s.label if s.kind != "bulk_modulus" else "kappa": [] for s in specs}
    for w in bumps:
        plus = evaluate_design(state.with_phi(state.phi - tau * w * gn), base)
        minus = evaluate_design(state.with_phi(state.phi + tau * w * gn), base)
        for s in specs:
            analytic = directional_derivative(state, sensitivity_of(s, ev), w)
            if s.kind == "isotropy_residual":
                # the normaliser is frozen at the base design, as in the linearisation
                r = lambda e: isotropy_residuals_2d(e.Cbar, ev.normaliser)[s.index - 1]  # noqa: E731
                fd = (r(plus) - r(minus)) / (2 * tau)
            else:
                fd = (value_of(s, plus) - value_of(s, minus)) / (2 * tau)
            key = s.label if s.kind != "bulk_modulus" else "kappa"
            errors[key].append(abs(analytic - fd) / abs(fd))
    return {k: max(v) for k, v in errors.items()}


def test_criterion_3_shape_derivatives(report, solid, multiphase_base):
    t0 = time.perf_counter()
    grid = PeriodicGrid(100)
    single = initial_structure(grid, "holes", m=2, r=0.15)
    specs = [FunctionalSpec("stiffness", ijkl="1111"), FunctionalSpec("bulk_modulus"), FunctionalSpec("volume"),
             FunctionalSpec("isotropy_residual", index=1), FunctionalSpec("poisson_ratio")]
    err = _fd_errors(single, [solid], specs, smooth_bumps(grid, 5, seed=11))
    pair = initial_structure(grid, "overlapping_pair", m=2)
    mp_specs = [FunctionalSpec("bulk_modulus"), FunctionalSpec("phase_volume", phase=2)]
    mp_err = _fd_errors(pair, multiphase_base, mp_specs, smooth_bumps(grid, 5, seed=12, layers=2))
    err.update({f"multiphase {k}": v for k, v in mp_err.items()})
    elapsed = time.perf_counter() - t0
    worst = max(err, key=err.get)
    ok = err[worst] <= 0.05 and elapsed < 300
    report("3", ok, f"worst FD mismatch {err[worst]:.2%} ({worst}) over 5 bumps x {len(err)} functionals, "
                    f"{elapsed:.0f}s")
    assert ok, err


# 4 -------------------------------------------------------------------------------

def test_criterion_4_projection_algebra(report, solid):
    t0 = time.perf_counter()
    grid = PeriodicGrid(40)
    op = ExtensionOperator(grid, 4 * grid.dx)
    X, Y = grid.coordinates()
    base = initial_structure(grid, "holes", m=2, r=0.15)
    # break the square symmetry so the isotropy sensitivities are generic
    st = reinitialise(base.with_phi(base.phi + 0.02 * np.sin(2 * np.pi * X + 0.3)[None]))
    ev = evaluate_design(st, [solid])
    g = extend(op, sensitivity_of(FunctionalSpec("bulk_modulus", scale=-1.0), ev), st)
    specs = [FunctionalSpec("volume", target=0.5)] + [FunctionalSpec("isotropy_residual", index=i)
                                                      for i in range(1, 7)]
    mus = [extend(op, sensitivity_of(s, ev), st) for s in specs]
    C = np.array([value_of(s, ev) for s in specs])
    checks = {}
    b = orthogonalise(mus, op, C)
    checks["isotropy nullity 2"] = b.rank == 5 and len(b.dropped) == 2
    pg = project(g, b)
    scale = h_norm(op, g)
    checks["orthogonality"] = max(abs(h_inner(op, pg, mu)) / (scale * h_norm(op, mu)) for mu in mus) <= 1e-9
    checks["idempotency"] = h_norm(op, project(pg, b) - pg) <= 1e-9 * scale
    checks["in-span annihilation"] = h_norm(op, project(mus[0] + 2 * mus[3], b)) <= 1e-9 * h_norm(op, mus[0])
    vel = compute_velocity(g, b, op)
    checks["unit norm"] = abs(h_norm(op, vel.v) - 1) <= 1e-10
    checks["constraint rates"] = max(abs(h_inner(op, mu, vel.v) - vel.lambda_used * c)
                                     for mu, c in zip(mus, C)) <= 1e-8
    checks["objective scaling"] = h_norm(op, compute_velocity(3.7 * g, b, op).v - vel.v) <= 1e-10
    dup = orthogonalise([mus[0], mus[0].copy()], op, [C[0], C[0]])
    checks["duplicate reduction"] = dup.rank == 1
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 10
    failed = [k for k, v in checks.items() if not v]
    report("4", ok, f"{len(checks) - len(failed)}/{len(checks)} algebra checks"
                    f"{' (failed: ' + ', '.join(failed) + ')' if failed else ''}, {elapsed:.1f}s")
    assert ok, failed


# 5 -------------------------------------------------------------------------------

def _skeleton_neighbourhood(grid, dist, width):
    """Nodes within ``width`` cells of the ridge of an analytic distance field."""
    ridge = np.abs(grid.central_gradient_norm(dist) - 1.0) > 0.02
    out = ridge.copy()
    for di in range(-width, width + 1):
        for dj in range(-width, width + 1):
            out |= np.roll(np.roll(ridge, di, 0), dj, 1)
    return out


def test_criterion_5_kinematics(report):
    t0 = time.perf_counter()
    errors = {}
    for n in (64, 128):
        grid = PeriodicGrid(n)
        X, Y = grid.coordinates()
        st = LevelSetState(grid, np.hypot(X - 0.5, Y - 0.5) - 0.2, 1.5 * grid.dx)
        elapsed_time = 0.0
        for _ in range(4):
            st = advect(st, np.ones_like(st.phi), 0.5)
            elapsed_time += (n // 10) * 0.5 * grid.dx
        exact = np.hypot(X - 0.5, Y - 0.5) - 0.2 - elapsed_time
        band = np.abs(exact) < 3 * grid.dx
        errors[n] = (float(np.max(np.abs(st.phi[0] - exact)[band])), grid.dx)
    transport_ok = all(e <= 2 * h for e, h in errors.values())
    order = np.log2(errors[64][0] / errors[128][0])

    grid = PeriodicGrid(100)
    X, Y = grid.coordinates()
    dist = holes_field(grid, 2, 0.15)
    warped = LevelSetState(grid, (dist * (1 + 0.5 * np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y)))[None],
                           1.5 * grid.dx)
    once = reinitialise(warped)
    twice = reinitialise(once)
    idem = float(np.max(np.abs(twice.phi - once.phi)))
    off_band = (np.abs(dist) > 1.5 * grid.dx) & ~_skeleton_neighbourhood(grid, dist, 3)
    gn = grid.central_gradient_norm(once.phi[0])[off_band]
    elapsed = time.perf_counter() - t0
    ok = transport_ok and order >= 0.8 and idem <= 1e-3 and gn.min() >= 0.9 and gn.max() <= 1.1 and elapsed < 30
    report("5", ok, f"transport error {errors[64][0] / errors[64][1]:.2f}dx / {errors[128][0] / errors[128][1]:.2f}dx "
                    f"(order {order:.2f}), reinit idempotency {idem:.1e}, off-band |grad phi| in "
                    f"[{gn.min():.3f}, {gn.max():.3f}], {elapsed:.1f}s")
    assert ok


# 6 -------------------------------------------------------------------------------

def test_criterion_6_example_1(report):
    res, elapsed = example("bulk2d")
    kappa = bulk_modulus(res.Cbar)
    vol = volume(res.state)
    target = 0.97 * hs_reference("bulk2d")
    ok = (res.status == "converged" and kappa >= target and abs(vol - 0.5) <= 1e-3 and res.iterations <= 200
          and elapsed <= 600)
    report("6", ok, f"kappa {kappa:.4f} (gate {target:.4f}), Vol {vol:.4f}, {res.status} after "
                    f"{res.iterations} iterations, {elapsed:.0f}s")
    assert ok


# 7 -------------------------------------------------------------------------------

def test_criterion_7_example_2(report):
    res, elapsed = example("bulk2d_iso")
    kappa = bulk_modulus(res.Cbar)
    aniso = anisotropy_measure(isotropy_residuals_2d(res.Cbar))
    vol = volume(res.state)
    single, _ = example("bulk2d_iso_measure")
    kappa_single = bulk_modulus(single.Cbar)
    gap = abs(kappa_single / kappa - 1)
    ok = (res.status == "converged" and kappa >= 0.96 * 0.1860 and aniso <= 1e-3 and abs(vol - 0.5) <= 1e-3
          and res.iterations <= 400 and single.status == "converged" and gap <= 0.01)
    report("7", ok, f"full set: kappa {kappa:.4f} (gate {0.96 * 0.1860:.4f}), A {aniso:.1e}, Vol {vol:.4f}, "
                    f"{res.status} after {res.iterations} it, {elapsed:.0f}s; single measure: kappa "
                    f"{kappa_single:.4f} ({gap:.2%} apart), {single.status} after {single.iterations} it")
    assert ok


# 8 -------------------------------------------------------------------------------

def test_criterion_8_auxetic(report):
    res, elapsed = example("auxetic2d")
    worst = max(abs(c) for c in res.constraints)
    nu = poisson_ratio(res.Cbar)
    vol = volume(res.state)
    ok = worst <= 1e-3 and abs(nu + 0.5) <= 0.01 and 0.25 <= vol <= 0.45
    report("8", ok, f"max |C_i| {worst:.1e}, nu {nu:.4f}, Vol {vol:.4f}, {res.status} after "
                    f"{res.iterations} it, {elapsed:.0f}s")
    assert ok


# 9 -------------------------------------------------------------------------------

def test_criterion_9_multiphase(report):
    res, elapsed = example("multiphase2d")
    kappa = bulk_modulus(res.Cbar)
    v2, v3 = volume(res.state, 2), volume(res.state, 3)
    iso, elapsed_iso = example("multiphase2d_iso")
    kappa_iso = bulk_modulus(iso.Cbar)
    aniso = anisotropy_measure(isotropy_residuals_2d(iso.Cbar))
    hsw = hs_reference("multiphase2d")
    ok_plain = kappa >= 0.90 * hsw and abs(v2 - 0.25) <= 1e-3 and abs(v3 - 0.25) <= 1e-3
    ok_iso = kappa_iso >= 0.88 * hsw and aniso <= 1e-3
    report("9", ok_plain and ok_iso,
           f"no isotropy: kappa {kappa:.4f} (gate {0.9 * hsw:.4f}), Vol2 {v2:.4f}, Vol3 {v3:.4f}, {res.status} "
           f"after {res.iterations} it; isotropic: kappa {kappa_iso:.4f} (gate {0.88 * hsw:.4f}), A {aniso:.1e}, "
           f"{iso.status} after {iso.iterations} it; {elapsed + elapsed_iso:.0f}s")
    assert ok_plain and ok_iso


# 10 ------------------------------------------------------------------------------

def test_criterion_10_slp(report):
    res, elapsed = example("bulk2d", method="slp")
    kappa = bulk_modulus(res.Cbar)
    gap = abs(kappa / 0.1860 - 1)
    ok = res.status == "converged" and gap <= 0.03
    report("10", ok, f"SLP kappa {kappa:.4f} ({gap:.2%} from 0.1860), {res.status} after {res.iterations} it, "
                     f"{elapsed:.0f}s")
    assert ok


# 11 ------------------------------------------------------------------------------

def test_criterion_11_three_dimensional_scope(report):
    # No 3D solver is built; only the stored reference and the 3D moduli helpers exist.
    C3 = isotropic_tensor(1.0, 0.3, d=3)
    ok = hs_reference("bulk3d") == 0.2308 and bulk_modulus(C3, d=3) == pytest.approx(1 / 1.2)
    report("11", ok, "3D results are out of scope; 3D bulk modulus helper and stored 0.2308 reference checked")
    assert ok
