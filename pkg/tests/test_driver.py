import math

import numpy as np
import pytest

from lsmicro.driver import PRESETS, RunConfig, converged, hs_reference, run
from lsmicro.grid import ParameterError

SMALL = dict(n=32, q_max=8)


def test_defaults_validate_and_presets_apply_overrides():
    RunConfig().validate()
    assert set(PRESETS) == {"bulk2d", "bulk2d_iso", "bulk2d_iso_measure", "auxetic2d", "multiphase2d",
                            "multiphase2d_iso"}
    aux = RunConfig.for_preset("auxetic2d")
    assert (aux.gamma_max, aux.alpha_min_sq) == (0.05, 0.5)
    assert RunConfig.for_preset("multiphase2d").gamma_max == 0.05
    assert RunConfig.for_preset("bulk2d", gamma_max=0.2).gamma_max == 0.2


@pytest.mark.parametrize("bad, fragment", [
    (dict(gamma_min=0.2, gamma_max=0.1), "gamma_min <= gamma_max"),
    (dict(gamma_max=1.0), "gamma_max < 1"),
    (dict(alpha_min_sq=0.0), "alpha_min_sq"),
    (dict(alpha_min_sq=1.5), "alpha_min_sq"),
    (dict(delta_inc=0.9), "delta_dec < 1 < delta_inc"),
    (dict(method="newton"), "method"),
    (dict(preset="bulk5d"), "preset"),
    (dict(n=4), "n must be"),
    (dict(eps_void=0.0), "eps_void"),
])
def test_invalid_configs_name_the_invariant(bad, fragment):
    with pytest.raises(ParameterError, match=fragment):
        RunConfig(**bad).validate()


def test_hs_reference_values():
    assert hs_reference("bulk2d") == 0.1860
    assert hs_reference("bulk3d") == 0.2308
    assert hs_reference("multiphase2d") == 0.1524
    assert hs_reference("auxetic2d") is None
    with pytest.raises(LookupError):
        hs_reference("unknown")


def test_stopping_rule():
    flat = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
    assert converged(flat, [0.0], 0.01, 1e-4, 5)
    assert not converged(flat[:-1], [0.0], 0.01, 1e-4, 5)  # window not yet full
    assert not converged(flat, [2e-4], 0.01, 1e-4, 5)
    drifting = [1.0, 1.0, 1.0, 1.0, 1.0, 1.02, 1.0]
    assert not converged(drifting, [0.0], 0.01, 1e-4, 5)
    assert converged([5.0] + flat, [], 0.01, 1e-4, 5)  # only the last j_max steps matter


def test_short_run_records_and_invariants():
    cfg = RunConfig.for_preset("bulk2d", **SMALL)
    seen = []
    res = run(cfg, callback=lambda rec, st: seen.append((rec.iteration, st.is_reinitialised)))
    assert res.status == "max_iterations" and res.iterations == cfg.q_max
    assert [s[0] for s in seen] == list(range(1, cfg.q_max + 1)) and all(s[1] for s in seen)
    J_prev = res.initial_objective
    for rec in res.history:
        assert cfg.gamma_min <= rec.gamma <= cfg.gamma_max
        assert rec.stalled or rec.objective < J_prev + cfg.xi * abs(J_prev)
        assert rec.rejections == sum(not t.accepted for t in rec.trials)
        J_prev = rec.objective
    # the volume constraint is being driven towards zero from the 70%-solid start
    assert abs(res.constraints[0]) < abs(res.initial_constraints[0])
    summary = res.summary()
    assert {"objective", "constraints", "iterations", "status", "hs_reference"} <= set(summary)
    assert list(summary["constraints"]) == ["volume"] and summary["hs_reference"] == 0.1860


def test_runs_are_deterministic():
    cfg = RunConfig.for_preset("bulk2d", n=24, q_max=4)
    a, b = run(cfg), run(cfg)
    assert [r.objective for r in a.history] == [r.objective for r in b.history]
    assert [r.constraints for r in a.history] == [r.constraints for r in b.history]
    np.testing.assert_array_equal(a.state.phi, b.state.phi)


def test_infinite_tolerance_accepts_every_first_trial():
    cfg = RunConfig.for_preset("bulk2d", n=24, q_max=5, xi=math.inf)
    res = run(cfg)
    assert all(r.rejections == 0 and not r.stalled for r in res.history)
    gammas = [r.gamma for r in res.history]
    assert gammas == sorted(gammas) and gammas[-1] <= cfg.gamma_max


def test_exhausted_line_search_takes_smallest_step():
    # xi = -1 demands J_new < 2J (J < 0), i.e. doubling the bulk modulus in one step
    cfg = RunConfig.for_preset("bulk2d", n=24, q_max=2, k_max=3, xi=-1.0)
    res = run(cfg)
    for rec in res.history:
        assert rec.stalled and rec.rejections == cfg.k_max
        assert rec.gamma == pytest.approx(rec.trials[-1].gamma)
        assert rec.gamma >= cfg.gamma_min


def test_slp_method_runs():
    res = run(RunConfig.for_preset("bulk2d", n=24, q_max=3, method="slp"))
    assert res.iterations == 3
    assert all(math.isnan(r.alpha_sq_sum) for r in res.history)


def test_multiphase_preset_short_run():
    res = run(RunConfig.for_preset("multiphase2d", n=32, q_max=2))
    assert res.state.phi.shape == (2, 32, 32)
    assert len(res.constraints) == 2
