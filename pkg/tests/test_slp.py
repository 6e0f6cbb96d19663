import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsmicro.grid import PeriodicGrid
from lsmicro.hilbertian import ExtensionOperator, h_inner, h_norm
from lsmicro.slp import slp_step, slp_velocity

GRID = PeriodicGrid(16)
OP = ExtensionOperator(GRID, 4 * GRID.dx)


def rand(rng, k):
    return list(rng.normal(size=(k, 1) + GRID.shape))


def test_unconstrained_step_is_gradient_at_trust_bound():
    g = rand(np.random.default_rng(0), 1)[0]
    step = slp_step(g, [], [], OP)
    assert step.lambdas[0] == pytest.approx(GRID.dx / (2 * h_norm(OP, g)))
    vel = slp_velocity(g, [], [], OP)
    np.testing.assert_allclose(vel.v, step.lambdas[0] * g)


def test_satisfied_orthogonal_constraints_leave_gradient_step():
    rng = np.random.default_rng(1)
    g, mu = rand(rng, 2)
    mu -= h_inner(OP, g, mu) / h_norm(OP, g) ** 2 * g
    step = slp_step(g, [mu], [0.0], OP)
    assert step.lambdas[1] == pytest.approx(0.0, abs=1e-12)
    assert step.lambdas[0] > 0 and not step.relaxed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_trust_regions_hold_and_feasible_equalities_are_met(seed):
    rng = np.random.default_rng(seed)
    g, *mus = rand(rng, 3)
    C = rng.normal(scale=1e-3, size=2)
    step = slp_step(g, mus, C, OP)
    assert np.all(np.abs(step.lambdas[1:]) <= step.trust + 1e-12)
    assert abs(step.lambdas[0]) <= GRID.dx / (2 * h_norm(OP, g)) + 1e-12
    vel = slp_velocity(g, mus, C, OP)
    if not step.relaxed:
        for mu, c in zip(mus, C):
            assert h_inner(OP, mu, vel.v) == pytest.approx(0.5 * c, abs=1e-9)


def test_infeasible_equalities_are_relaxed_not_fatal():
    rng = np.random.default_rng(2)
    g, mu = rand(rng, 2)
    step = slp_step(g, [mu, mu.copy()], [10.0, -10.0], OP)
    assert step.relaxed and step.violation > 0
    assert np.all(np.abs(step.lambdas[1:]) <= step.trust + 1e-12)


def test_degenerate_problem_is_stationary():
    z = np.zeros((1,) + GRID.shape)
    vel = slp_velocity(z, [z], [0.0], OP)
    assert vel.stationary
