import math

import numpy as np
import pytest
from scipy.stats import norm

import seqgp


def bs_call(s, k, tau, sigma):
    v = sigma * math.sqrt(tau)
    d1 = (math.log(s / k) + 0.5 * v * v) / v
    return s * norm.cdf(d1) - k * norm.cdf(d1 - v)


def test_softplus():
    assert seqgp.softplus(0.0) == pytest.approx(math.log(2.0))
    assert seqgp.softplus(50.0) == pytest.approx(50.0)


def test_gram_matches_closed_form():
    x = np.array([[0.1, 0.2], [0.4, 0.9]])
    inputs = seqgp.InputSet(np.array([0.0, 0.5]), x)
    k = seqgp.KernelParams(np.array([0.5, 0.7]), 0.6, 1.3)
    g = seqgp.gram_matrix(inputs, k)
    r2 = (0.3 / 0.5) ** 2 + (0.7 / 0.7) ** 2 + (0.5 / 0.6) ** 2
    assert g[0, 1] == pytest.approx(1.69 * math.exp(-0.5 * r2))
    assert np.allclose(g, g.T)


def test_conditional_prior_interpolates():
    x = np.array([[0.3, 0.3]])
    a = seqgp.InputSet(np.array([0.0]), x)
    k = seqgp.KernelParams(np.array([0.5, 0.5]), 0.5, 1.0)
    mean, cov = seqgp.conditional_prior([(np.array([0.7]), a)], a, k)
    assert mean[0] == pytest.approx(0.7, abs=1e-6)
    assert cov[0, 0] == pytest.approx(0.0, abs=1e-6)


def test_ssg_round_trip():
    lo, hi = np.zeros(3), np.array([1.0, 2.0, 3.0])
    z = np.array([-1.0, 0.0, 2.0])
    theta = seqgp.ssg_forward(z, lo, hi)
    assert np.all(theta > lo) and np.all(theta < hi)
    assert np.allclose(seqgp.ssg_inverse(theta, lo, hi), z)


def test_flat_volatility_prices():
    quotes = [(1.0, 1000.0), (0.5, 1200.0)]
    p = seqgp.price_flat(1000.0, 0.2, quotes, n_k=400, n_t=400)
    for (tau, k), v in zip(quotes, p):
        assert v == pytest.approx(bs_call(1000.0, k, tau, 0.2), rel=5e-3)


def test_sequence_and_baseline_shapes():
    data = seqgp.generate_regression(t_steps=2, n_per_step=5, seed=3)
    cfg = seqgp.default_config("regression")
    cfg.t_steps = 2
    cfg.m_samples = 30
    cfg.n_initial = 400
    cfg.burn_in = 100
    cfg.thin = 10
    res = seqgp.run_sequence(data, cfg)
    assert len(res["sets"]) == 2
    assert res["sets"][1]["f"].shape == (30, 5)
    assert res["sets"][1]["kappa"].shape == (30, 4)
    again = seqgp.run_sequence(data, cfg)
    assert np.array_equal(res["sets"][1]["f"], again["sets"][1]["f"])
    base = seqgp.full_gibbs_baseline(data, cfg)
    assert base["sets"][1]["f"].shape == (30, 5)


def test_invalid_config_raises():
    cfg = seqgp.default_config("regression")
    cfg.thin = 0
    with pytest.raises(ValueError):
        cfg.validate()


def test_cli_exit_codes(tmp_path):
    assert seqgp.cli(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    out = tmp_path / "d"
    assert seqgp.cli(["generate", "--t-steps", "2", "--n", "4", "--out", str(out)]) == 0
    assert (out / "truth.txt").exists()


def test_option_defaults_start_at_the_mode():
    assert seqgp.default_config("options").mode_start
    assert not seqgp.default_config("regression").mode_start
