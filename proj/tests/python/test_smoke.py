import os

import numpy as np
import pytest

import polcm

FIXTURES = os.environ.get("POLCM_FIXTURES", os.path.join(os.path.dirname(__file__), "..", "..", "fixtures"))


def fixture(rel):
    return polcm.load_graph(os.path.join(FIXTURES, rel))


def test_check_verdicts():
    assert polcm.check(fixture("gs/gs1.json"))["verdict"] == "FullyIdentifiable"
    report = polcm.check(fixture("ot/ot1.json"))
    assert report["verdict"] == "IdentifiableUpToOrthogonal"
    assert report["orth_indeterminacy"] == [["L1", "L2"]]


def test_covariance_single_edge():
    g = {"num_latent": 0, "num_observed": 2, "edges": [[0, 1]]}
    f = np.array([[0.0, 0.5], [0.0, 0.0]])
    s = polcm.covariance(g, f, [1.0, 1.0])
    np.testing.assert_allclose(s, [[1.0, 0.5], [0.5, 1.25]], atol=1e-15)


def test_population_recovery_factor_model():
    g = fixture("misc/factor_three.json")
    f = np.zeros((4, 4))
    f[0, 1:] = [0.5, 0.6, 0.7]
    omega = np.concatenate([[1.0], 1.0 - f[0, 1:] ** 2])
    sigma = polcm.covariance(g, f, omega)[1:, 1:]
    est = polcm.estimate(g, sigma, 10000, restarts=5, seed=1, threads=1)
    f_hat = polcm.coefficient_matrix(g, est["f_hat"])
    assert polcm.mse_group_sign(g, f, f_hat) < 1e-8
    assert polcm.mse_orthogonal(g, f, f_hat) < 1e-8


def test_simulate_estimate_round_trip():
    g = fixture("misc/factor_three.json")
    x, names, truth = polcm.simulate(g, k=20000, seed=3, min_abs_coeff=0.5)
    assert x.shape == (20000, 3)
    assert names == ["X2", "X3", "X4"]
    z = (x - x.mean(axis=0)) / x.std(axis=0, ddof=1)
    est = polcm.estimate(g, np.cov(z, rowvar=False), len(z), restarts=5, seed=1, threads=1)
    assert polcm.mse_group_sign(g, truth, polcm.coefficient_matrix(g, est["f_hat"])) < 1e-2


def test_errors():
    with pytest.raises(polcm.ParseError):
        polcm.check({"num_latent": 1})
    with pytest.raises(ValueError):
        polcm.estimate(fixture("misc/factor_three.json"), np.eye(3), 100, method="xx")
