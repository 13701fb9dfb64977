"""Retry-chain closed form against the brute-force stationary solve.

The oracle builds the full transition matrix and solves pi P = pi
numerically, sharing no algebra with the closed form."""

import numpy as np
import pytest

from rachcap import model
from rachcap.config import SystemConfig
from rachcap.oracles import chain_linear_solve


def _grid():
    for p_f in (0.0, 0.3, 0.6, 0.9):
        for p_on in (0.01, 0.5, 1.0):
            for m in (0, 1, 2, 9):
                for w_c in (1, 5, 20):
                    yield p_f, p_on, m, w_c


@pytest.mark.parametrize("p_f,p_on,m,w_c", list(_grid()))
def test_closed_form_matches_linear_solve(p_f, p_on, m, w_c):
    cfg = SystemConfig(m=m, w_c=w_c)
    closed = model.chain_steady_state(p_f, p_on, cfg)
    solved = chain_linear_solve(p_f, p_on, m, w_c)
    assert closed.b_off == pytest.approx(solved.b_off, abs=1e-12)
    assert closed.b_connect == pytest.approx(solved.b_connect, abs=1e-12)
    assert closed.b_drop == pytest.approx(solved.b_drop, abs=1e-12)
    np.testing.assert_allclose(closed.b, solved.b, atol=1e-12)


def test_total_probability_is_one():
    for p_f, p_on, m, w_c in _grid():
        cfg = SystemConfig(m=m, w_c=w_c)
        sol = model.chain_steady_state(p_f, p_on, cfg)
        assert sol.total_probability() == pytest.approx(1.0, abs=1e-12)


def test_fresh_attempt_has_no_backoff():
    cfg = SystemConfig(m=9, w_c=20)
    sol = model.chain_steady_state(0.7, 0.4, cfg)
    assert np.all(sol.b[0, 1:] == 0.0)
    assert sol.b[0, 0] > 0.0


def test_backoff_mass_decays_linearly_within_attempt():
    cfg = SystemConfig(m=3, w_c=10)
    sol = model.chain_steady_state(0.5, 0.8, cfg)
    for i in range(1, 4):
        row = sol.b[i]
        # residence k subframes before the retry: (w_c - k) of the w_c
        # equally likely draws still have that long to go
        expect = row[0] * (cfg.w_c - np.arange(cfg.w_c)) / cfg.w_c
        np.testing.assert_allclose(row, expect, rtol=1e-12)


def test_outage_identity_against_aggregates():
    for p_f in (0.01, 0.3, 0.83):
        for m in (0, 2, 9):
            cfg = SystemConfig(m=m)
            sol = model.chain_steady_state(p_f, 0.25, cfg)
            assert sol.outage() == pytest.approx(
                model.outage_probability(p_f, m), abs=1e-14
            )
            assert sol.mean_transmissions() == pytest.approx(
                model.expected_transmissions(p_f, m), rel=1e-12
            )


def test_degenerate_never_fails():
    cfg = SystemConfig(m=9, w_c=20)
    sol = model.chain_steady_state(0.0, 0.5, cfg)
    assert sol.b_drop == 0.0
    assert sol.outage() == 0.0
    assert sol.mean_transmissions() == 1.0
    assert np.all(sol.b[1:] == 0.0)      # retries never reached


def test_always_on_source():
    cfg = SystemConfig(m=2, w_c=5)
    sol = model.chain_steady_state(0.4, 1.0, cfg)
    assert sol.total_probability() == pytest.approx(1.0, abs=1e-12)
    solved = chain_linear_solve(0.4, 1.0, 2, 5)
    assert sol.b_connect == pytest.approx(solved.b_connect, abs=1e-12)


def test_rejects_out_of_range():
    cfg = SystemConfig()
    with pytest.raises(ValueError):
        model.chain_steady_state(1.0, 0.5, cfg)    # certain failure never drains
    with pytest.raises(ValueError):
        model.chain_steady_state(-0.1, 0.5, cfg)
    with pytest.raises(ValueError):
        model.chain_steady_state(0.5, 0.0, cfg)
    with pytest.raises(ValueError):
        model.chain_steady_state(0.5, 1.2, cfg)
