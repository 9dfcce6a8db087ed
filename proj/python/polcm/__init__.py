"""Partially observed linear causal models: identifiability, simulation, estimation."""

import json

import numpy as np

from . import _polcm

ParseError = _polcm.ParseError
EstimationFailed = _polcm.EstimationFailed


def _text(graph):
    return graph if isinstance(graph, str) else json.dumps(graph)


def load_graph(path):
    with open(path) as fh:
        return json.load(fh)


def check(graph):
    """Identifiability report as a dict."""
    return json.loads(_polcm.check(_text(graph)))


def covariance(graph, f, omega):
    """Full model covariance for coefficient matrix f and noise variances omega."""
    return _polcm.covariance(_text(graph), np.asarray(f, float), np.asarray(omega, float))


def simulate(graph, k=10000, seed=0, **config):
    """Returns (samples, names, standardized true coefficients)."""
    cfg = {
        "coeff_range": [-2.0, 2.0],
        "noise_var_range": [1.0, 5.0],
        "noise": "gaussian",
        "lrelu_alpha": None,
        "min_abs_coeff": 0.0,
        **config,
        "k": k,
        "seed": seed,
    }
    return _polcm.simulate(_text(graph), json.dumps(cfg))


def estimate(graph, sigma_hat, k, method="tr", restarts=30, seed=0, threads=0):
    """Fits the model to a covariance matrix; returns the estimate as a dict."""
    out = _polcm.estimate(_text(graph), np.asarray(sigma_hat, float), float(k), method, restarts, seed, threads)
    return json.loads(out)


def coefficient_matrix(graph, triples):
    """Dense coefficient matrix from [parent, child, value] triples."""
    g = json.loads(_text(graph))
    d = g["num_latent"] + g["num_observed"]
    f = np.zeros((d, d))
    for p, c, v in triples:
        f[p, c] = v
    return f


def mse_group_sign(graph, f_true, f_hat):
    return _polcm.mse_group_sign(_text(graph), np.asarray(f_true, float), np.asarray(f_hat, float))


def mse_orthogonal(graph, f_true, f_hat, full_q=False):
    return _polcm.mse_orthogonal(_text(graph), np.asarray(f_true, float), np.asarray(f_hat, float), full_q)


__all__ = [
    "ParseError",
    "EstimationFailed",
    "load_graph",
    "check",
    "covariance",
    "simulate",
    "estimate",
    "coefficient_matrix",
    "mse_group_sign",
    "mse_orthogonal",
]
