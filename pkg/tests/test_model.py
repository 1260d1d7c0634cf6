import json

import numpy as np
import pytest

from bfman.model import (ConfigError, Hyperparams, PosteriorDraws, check_data, default_K,
                         init_state, log_likelihood, simulate_data, validate)


def test_default_K_uses_natural_log():
    assert default_K(100, 20) == 15
    assert default_K(30, 60) == 21
    assert default_K(5, 4) == 4
    assert default_K(1, 1) == 1


def test_validate_fills_K_and_keeps_defaults():
    hp = validate(Hyperparams(), np.zeros((100, 20)))
    assert hp.K == 15
    assert (hp.a_sigma, hp.b_sigma, hp.nu, hp.a1, hp.a2, hp.psi) == (1.0, 0.3, 3.0, 2.1, 3.1, 0.5)
    assert hp.mh.inner_iters == 5 and hp.mh.target_accept == 0.44


def test_validate_lists_every_problem():
    hp = Hyperparams().replace(b_sigma=0.0, nu=-1.0, chain={"burnin": 5000})
    with pytest.raises(ConfigError) as err:
        validate(hp, np.zeros((10, 3)))
    assert "b_sigma must be > 0" in err.value.problems
    assert "nu must be > 0" in err.value.problems
    assert any("burnin" in p for p in err.value.problems)


def test_psi_vector_length_checked():
    with pytest.raises(ConfigError, match="psi vector"):
        validate(Hyperparams(psi=[0.5, 0.5], K=3), np.zeros((10, 3)))
    hp = validate(Hyperparams(psi=[0.1, 0.2, 0.3], K=3), np.zeros((10, 3)))
    np.testing.assert_array_equal(hp.psi_vector(3), [0.1, 0.2, 0.3])


def test_unknown_config_field_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"a_sigma": 2.0, "alpha": 1}))
    with pytest.raises(ConfigError, match="alpha"):
        Hyperparams.from_json(path)


def test_config_round_trip():
    hp = Hyperparams().replace(psi=[0.3, 0.4], K=2, mh={"proposal_sd": 0.7})
    assert Hyperparams.from_dict(hp.to_dict()) == hp


def test_check_data_names_bad_cell():
    Y = np.zeros((4, 3))
    Y[2, 1] = np.nan
    with pytest.raises(ValueError, match="row 2, column 1"):
        check_data(Y)


def test_init_state_is_deterministic_and_consistent():
    hp = validate(Hyperparams(), np.zeros((50, 10)))
    a = init_state(hp, np.zeros((50, 10)), np.random.default_rng(0))
    b = init_state(hp, np.zeros((50, 10)), np.random.default_rng(0))
    a.check()
    np.testing.assert_array_equal(a.eta, b.eta)
    np.testing.assert_array_equal(a.lam, b.lam)
    assert a.k == hp.K and a.n == 50 and a.p == 10


def test_tau_is_the_running_product():
    hp = validate(Hyperparams(), np.zeros((50, 10)))
    state = init_state(hp, np.zeros((50, 10)), np.random.default_rng(1))
    np.testing.assert_allclose(state.tau, np.cumprod(state.delta))
    # with a2 > 1 the expected tau grows, so later columns are shrunk harder on average
    taus = np.array([init_state(hp, np.zeros((5, 10)), np.random.default_rng(s)).tau
                     for s in range(2000)])
    assert np.all(np.diff(np.log(taus).mean(axis=0)) > 0)


def test_log_likelihood_against_direct_sum():
    hp = validate(Hyperparams(K=2), np.zeros((6, 3)))
    rng = np.random.default_rng(2)
    state = init_state(hp, np.zeros((6, 3)), rng)
    Y = simulate_data(state, rng)
    from scipy import stats
    direct = stats.norm.logpdf(Y, state.eta @ state.lam.T, np.sqrt(state.sigma2)).sum()
    assert log_likelihood(state, Y) == pytest.approx(direct, rel=1e-12)


def test_posterior_draws_gram_means():
    rng = np.random.default_rng(3)
    lam = rng.normal(size=(4, 3, 2))
    eta = rng.normal(size=(4, 5, 2))
    d = PosteriorDraws(lam=lam, eta=eta, z=np.ones((4, 5, 2), np.int8), theta=np.ones((4, 2)),
                       sigma2=np.ones((4, 3)), tau=np.ones((4, 2)), loglik=np.zeros(4),
                       accept_rate=np.zeros(4), zero_prop=np.zeros((4, 2)))
    gl, ge = d.gram_means([1])
    np.testing.assert_allclose(gl, np.mean([l[:, [1]] @ l[:, [1]].T for l in lam], axis=0))
    np.testing.assert_allclose(ge, np.mean([e[:, [1]] @ e[:, [1]].T for e in eta], axis=0))
    assert d.subset([1]).k == 1
