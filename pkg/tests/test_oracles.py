"""Brute-force counterparts: the workload-recursion queue simulator,
the direct contention sampler, and the bracketing fixed-point root."""

import math

import numpy as np
import pytest

from rachcap import model
from rachcap.config import SystemConfig
from rachcap.oracles import (
    chain_linear_solve,
    fixed_point_bisection,
    impatient_queue_sim,
    preamble_monte_carlo,
)


# ---------------------------------------------------------------------------
# impatient grant queue

def test_queue_sim_reproducible():
    a = impatient_queue_sim(2.7, 3.0, 5, horizon=1_000_000, seed=7)
    b = impatient_queue_sim(2.7, 3.0, 5, horizon=1_000_000, seed=7)
    assert a == b


def test_queue_sim_bookkeeping():
    est = impatient_queue_sim(2.7, 3.0, 5, horizon=1_000_000, seed=3)
    assert est.customers == 900_000             # 10% warmup removed
    assert est.loss_fraction == pytest.approx(est.losses / est.customers)
    assert est.std_error > 0.0


def test_queue_sim_matches_closed_form_quick(cfg):
    # rho = 0.9: losses frequent enough to resolve with a short run
    lam = 2.7
    formula = model.grant_drop_probability(lam, cfg)
    est = impatient_queue_sim(lam, cfg.mu, cfg.t_rar, horizon=4_000_000, seed=11)
    assert abs(formula - est.loss_fraction) <= 0.05 * formula + 3.0 * est.std_error


def test_queue_sim_deterministic_service_close_in_absolute_terms(cfg):
    # service-time distribution barely moves the loss numbers
    for lam in (2.4, 2.7, 2.85):
        exp_est = impatient_queue_sim(lam, cfg.mu, cfg.t_rar,
                                      horizon=1_000_000, seed=5)
        det_est = impatient_queue_sim(lam, cfg.mu, cfg.t_rar,
                                      service="deterministic",
                                      horizon=1_000_000, seed=5)
        assert abs(exp_est.loss_fraction - det_est.loss_fraction) <= 0.05
        # regular service smooths the workload: it should never lose more
        assert det_est.loss_fraction <= exp_est.loss_fraction + 3.0 * (
            exp_est.std_error + det_est.std_error
        )


def test_queue_sim_zero_losses_deep_in_stability():
    est = impatient_queue_sim(0.9, 3.0, 5, horizon=1_000_000, seed=1)
    assert est.losses == 0


def test_queue_sim_rejects_bad_args():
    with pytest.raises(ValueError):
        impatient_queue_sim(-1.0, 3.0, 5)
    with pytest.raises(ValueError):
        impatient_queue_sim(1.0, 0.0, 5)
    with pytest.raises(ValueError):
        impatient_queue_sim(1.0, 3.0, 5, service="uniform")
    with pytest.raises(ValueError):
        impatient_queue_sim(1.0, 3.0, 5, horizon=10)
    with pytest.raises(ValueError):
        impatient_queue_sim(1.0, 1.0, 1)   # zero patience window


# ---------------------------------------------------------------------------
# preamble contention sampler

def test_preamble_mc_reproducible():
    a = preamble_monte_carlo(10.0, 54, seed=9)
    b = preamble_monte_carlo(10.0, 54, seed=9)
    assert a == b


def test_preamble_mc_matches_exact_collided_fraction():
    # the sampled estimand has a closed form under Poisson arrivals and
    # uniform preamble choice; the sampler must sit within noise of it
    d, q = 54, 53.0 / 54.0
    for nu in (1, 2, 5, 10, 20, 40):
        r = preamble_monte_carlo(float(nu), d, n_trials=100_000, seed=0)
        exact = -math.expm1(-nu) - (math.exp(-nu / d) - math.exp(-nu)) / q
        assert abs(r.collision_prob - exact) <= 3.0 * r.collision_se, nu


def test_preamble_mc_matches_exact_activated_count():
    d = 54
    for nu in (1, 5, 20, 40):
        r = preamble_monte_carlo(float(nu), d, n_trials=100_000, seed=0)
        exact = -d * math.expm1(-nu / d)
        assert abs(r.mean_activated - exact) <= 3.0 * r.activated_se, nu


def test_preamble_mc_empty_rounds():
    r = preamble_monte_carlo(0.0, 54, n_trials=10_000, seed=0)
    assert r.collision_prob == 0.0
    assert r.mean_activated == 0.0


def test_preamble_mc_certain_collision_with_one_preamble():
    r = preamble_monte_carlo(8.0, 1, n_trials=10_000, seed=0)
    # nearly every round has >= 2 senders, all colliding on the lone preamble
    assert r.collision_prob > 0.95
    assert r.mean_activated == pytest.approx(-math.expm1(-8.0), abs=0.01)


def test_preamble_mc_rejects_bad_args():
    with pytest.raises(ValueError):
        preamble_monte_carlo(-1.0, 54)
    with pytest.raises(ValueError):
        preamble_monte_carlo(1.0, 0)
    with pytest.raises(ValueError):
        preamble_monte_carlo(1.0, 54, n_trials=100)


# ---------------------------------------------------------------------------
# chain linear solve sanity (the componentwise match lives in test_chain)

def test_chain_linear_solve_is_stationary():
    sol = chain_linear_solve(0.6, 0.3, m=4, w_c=7)
    assert sol.total_probability() == pytest.approx(1.0, abs=1e-12)
    assert np.all(sol.b >= -1e-15)
    assert sol.b_off > 0 and sol.b_connect > 0 and sol.b_drop > 0


# ---------------------------------------------------------------------------
# fixed-point bisection

def test_bisection_trivial_cases(cfg):
    assert fixed_point_bisection(0.0, cfg) == 0.0
    cfg0 = SystemConfig(m=0)
    assert fixed_point_bisection(1.9, cfg0) == 1.9


def test_bisection_agrees_with_iteration_below_blowup(cfg, cfg_d1):
    for sys_cfg, loads_s in ((cfg, (500.0, 1500.0, 2200.0, 2500.0)),
                             (cfg_d1, (500.0, 2000.0, 2800.0, 2950.0))):
        for lam_s in loads_s:
            lam = lam_s / 1000.0
            root = fixed_point_bisection(lam, sys_cfg)
            res = model.solve_total_rate(lam, sys_cfg, rel_tol=1e-6)
            assert res.converged
            assert abs(res.load.lambda_t - root) <= 0.005 * root


def test_bisection_rejects_negative(cfg):
    with pytest.raises(ValueError):
        fixed_point_bisection(-1.0, cfg)


def test_bisection_finds_congested_root_beyond_blowup(cfg):
    # past the blow-up the first crossing is the congested operating
    # point; it must still satisfy the fixed-point equation
    lam = 3.0
    root = fixed_point_bisection(lam, cfg)
    n_tx = model.expected_transmissions(model.one_shot_failure(root, cfg), cfg.m)
    assert root == pytest.approx(lam * n_tx, rel=1e-6)
    assert root > lam
