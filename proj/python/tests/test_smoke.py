import numpy as np
import pytest

import phireg

BETA0 = np.array([[0.0, -0.9, 0.1], [0.6, -1.2, 0.8]])


@pytest.fixture(scope="module")
def data():
    return phireg.generate(H=4, nh=15, m=20, beta=BETA0, family="m_inflated", rho2=0.5, seed=7)


def test_generate_shapes(data):
    assert len(data) == 60
    assert data.counts.shape == (60, 3)
    assert np.all(data.counts.sum(axis=1) == 20)
    assert np.all(data.covariates[:, 0] == 1.0)
    assert data.tau == pytest.approx(1200.0)


def test_fit_and_wald(data):
    res = phireg.fit(data, lam=-0.3)
    assert res.converged
    assert res.beta_hat.shape == (2, 3)
    assert res.V_hat.shape == (6, 6)
    assert np.allclose(res.V_hat, res.V_hat.T)
    M = np.zeros((6, 1))
    M[1, 0] = 1.0
    rep = phireg.wald_test(res, M, np.array([res.beta_flat[1]]))
    assert rep["statistic"] == pytest.approx(0.0, abs=1e-12)
    assert rep["p_value"] == pytest.approx(1.0)
    back = phireg.FitResult.from_json(res.to_json())
    assert np.array_equal(back.beta_hat, res.beta_hat)


def test_kl_score_vanishes_at_fit(data):
    res = phireg.fit(data, lam=0.0)
    u = phireg.estimating_function(data, res.beta_hat, 0.0)
    assert np.max(np.abs(u)) < 1e-6


def test_planning():
    assert phireg.approximate_power(0.04, 0.4, 1, 400) == pytest.approx(0.93572, abs=1e-4)
    assert phireg.required_sample_size(0.04, 0.4, 1, 0.05, 0.8) == 222
    with pytest.raises(ValueError):
        phireg.required_sample_size(0.0, 0.0, 1)


def test_influence(data):
    rep = phireg.influence(data, BETA0, -0.5, stratum=1, cluster=1, category=2)
    assert rep["if"].shape == (6,)
    assert rep["psi"].shape == (6, 6)
    with pytest.raises(ValueError):
        phireg.influence(data, BETA0, -0.5, stratum=9, cluster=1, category=2)


def test_csv_round_trip(tmp_path, data):
    path = str(tmp_path / "d.csv")
    data.to_csv(path)
    back = phireg.Dataset.from_csv(path)
    assert np.array_equal(back.counts, data.counts)
    assert np.array_equal(back.covariates, data.covariates)


def test_from_arrays_and_errors():
    d = phireg.Dataset.from_arrays(
        [1, 1, 1], [1, 2, 3], np.ones(3), [2, 2, 2],
        np.array([[1.0, 1.0], [2.0, 0.0], [0.0, 2.0]]), np.array([[0.1], [0.5], [-0.4]]),
    )
    assert d.num_covariates == 2
    with pytest.raises(ValueError):
        phireg.Dataset.from_arrays([1], [1], np.ones(1), [3], np.array([[1.0, 1.0]]), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        phireg.fit(d, lam=-2.0)


def test_simulate_tiny():
    cells = phireg.simulate({"replicates": 2, "nh_grid": [5], "lambdas": [0.0]})
    assert len(cells) == 2
    assert {c["contaminated"] for c in cells} == {False, True}
