#!/usr/bin/env python3
"""
Tests for the GAMP engine and its scalar channel functions
"""

import csv
import os
import sys
import tempfile

import numpy as np
from numpy.testing import assert_allclose

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pcsbl.config import InnerConfig
from pcsbl.errors import ConfigError, DimensionError, DomainError
from pcsbl.gamp import TRACE_COLUMNS, g_in, g_out, gamp_run, output_posterior
from pcsbl.linop import DenseOperator, make_dense, make_gaussian_dense, make_hadamard_sensing
from pcsbl.rng import make_rng

TIGHT = InnerConfig(epsilon=1e-24, k_max=2000)


def test_g_in_examples():
    mu, phi = g_in(np.array([0.7, -2.0]), np.array([0.3, 1.5]), np.zeros(2))
    assert_allclose(mu, [0.7, -2.0])
    assert_allclose(phi, [0.3, 1.5])
    mu, phi = g_in(2.0, 1.0, 1.0)
    assert_allclose((mu, phi), (1.0, 0.5))
    mu, phi = g_in(2.0, 1.0, 1e12)
    assert abs(mu) < 1e-10 and abs(phi) < 1e-10
    try:
        g_in(1.0, 0.0, 1.0)
    except DomainError:
        pass
    else:
        assert False, "tau_r = 0 should be rejected"


def test_g_out_examples():
    s, tau_s = g_out(np.array([1.2]), np.array([0.4]), np.array([1.2]), 3.0)
    assert s[0] == 0.0 and tau_s[0] > 0
    assert_allclose(g_out(0.0, 1.0, 2.0, 1.0), (1.0, 0.5))
    s, tau_s = g_out(0.5, 0.25, 2.0, 1e12)
    assert_allclose(s, (2.0 - 0.5) / 0.25, rtol=1e-10)
    assert_allclose(tau_s, 1 / 0.25, rtol=1e-10)


def test_output_posterior_examples():
    mu_z, _ = output_posterior(0.3, 1.0, 2.0, 1e12)
    assert_allclose(mu_z, 2.0, rtol=1e-10)
    assert_allclose(output_posterior(0.0, 1.0, 2.0, 1.0), (1.0, 0.5))
    mu_z, phi_z = output_posterior(0.3, 1e-14, 2.0, 1.0)
    assert_allclose(mu_z, 0.3, atol=1e-12)
    assert phi_z > 0


def test_scalar_fixed_point():
    op = make_dense([[1.0]])
    result = gamp_run(op, [3.0], [1.0], 1.0, TIGHT)
    assert not result.diverged
    assert_allclose(result.state.mu_x, [1.5], atol=1e-10)
    # variance fixed point of the scalar channel: φ² + φ − 1 = 0
    assert_allclose(result.state.phi_x, [(np.sqrt(5) - 1) / 2], atol=1e-10)


def test_orthonormal_square_matches_exact_mean():
    op = make_hadamard_sensing(16, 16, seed=3)
    A = op.to_dense()
    rng = make_rng(4)
    y = rng.standard_normal(16)
    eta = rng.uniform(0.5, 2.0, 16)
    gamma = 2.0
    result = gamp_run(op, y, eta, gamma, TIGHT)
    exact = gamma * (A.T @ y) / (gamma + eta)
    assert_allclose(result.state.mu_x, exact, atol=1e-8)


def test_zero_measurements_stay_at_zero():
    op = make_gaussian_dense(6, 10, seed=1)
    result = gamp_run(op, np.zeros(6), np.full(10, 2.0), 5.0, InnerConfig(k_max=5))
    assert np.all(result.state.mu_x == 0)
    assert result.converged and result.iterations == 1
    assert result.trace[0][1] == 0.0


def test_one_iteration_regression():
    A = np.array([[1.0, -0.5, 0.25, 2.0],
                  [0.0, 1.5, -1.0, 0.5],
                  [0.75, 0.0, 1.0, -1.25]])
    y = np.array([0.5, -1.0, 2.0])
    eta = np.array([1.0, 2.0, 0.5, 4.0])
    gamma = 3.0

    phi0 = 1 / eta
    tau_p = (A ** 2) @ phi0
    s = gamma * y / (1 + gamma * tau_p)
    tau_s = gamma / (1 + gamma * tau_p)
    tau_r = 1 / ((A ** 2).T @ tau_s)
    r = tau_r * (A.T @ s)
    expected_mu = r / (1 + eta * tau_r)
    expected_phi = tau_r / (1 + eta * tau_r)

    result = gamp_run(make_dense(A), y, eta, gamma, InnerConfig(k_max=1))
    assert result.iterations == 1
    assert_allclose(result.state.mu_x, expected_mu, rtol=1e-12)
    assert_allclose(result.state.phi_x, expected_phi, rtol=1e-12)
    assert_allclose(result.state.tau_p, tau_p, rtol=1e-12)


def test_damping_reaches_the_same_mean():
    op = make_gaussian_dense(30, 40, seed=8)
    rng = make_rng(9)
    y = rng.standard_normal(30)
    eta = rng.uniform(0.5, 2.0, 40)
    plain = gamp_run(op, y, eta, 10.0, TIGHT)
    damped = gamp_run(op, y, eta, 10.0, InnerConfig(epsilon=1e-24, k_max=4000, damping=0.5))
    assert_allclose(damped.state.mu_x, plain.state.mu_x, atol=1e-7)


def test_variances_stay_positive():
    op = make_gaussian_dense(50, 100, seed=12)
    rng = make_rng(13)
    result = gamp_run(op, rng.standard_normal(50), rng.uniform(0.1, 10.0, 100), 100.0)
    state = result.state
    for name in ("phi_x", "tau_r", "tau_p", "tau_s"):
        assert np.all(getattr(state, name) > 0), name
    assert np.all(result.phi_z > 0)


class OverscaledAdjoint(DenseOperator):
    """Adjoint scaled by 100: each step overshoots and the mean oscillates with growing amplitude"""

    def _apply_adjoint(self, v):
        return 100.0 * super()._apply_adjoint(v)


def test_growing_oscillation_is_flagged_diverged():
    result = gamp_run(OverscaledAdjoint([[1.0]]), [1.0], [1.0], 1.0)
    assert result.diverged and not result.converged
    assert result.iterations < 10
    assert result.state.is_finite()


def test_runaway_residual_is_flagged_diverged():
    op = make_dense(np.eye(3))
    result = gamp_run(op, np.ones(3), np.ones(3), 1.0, mu_init=np.full(3, 1e6))
    assert result.diverged
    assert result.iterations == 0


def test_input_validation():
    op = make_gaussian_dense(4, 6, seed=0)
    try:
        gamp_run(op, np.zeros(4), np.ones(5), 1.0)
    except DimensionError:
        pass
    else:
        assert False, "wrong eta length should be rejected"
    try:
        gamp_run(op, np.zeros(4), np.ones(6), 0.0)
    except DomainError:
        pass
    else:
        assert False, "gamma = 0 should be rejected"
    try:
        gamp_run(op, np.zeros(4), np.ones(6), 1.0, InnerConfig(damping=1.5))
    except ConfigError:
        pass
    else:
        assert False, "damping above 1 should be rejected"


def test_trace_file():
    op = make_gaussian_dense(5, 8, seed=2)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "inner.csv")
        result = gamp_run(op, make_rng(1).standard_normal(5), np.ones(8), 10.0,
                          InnerConfig(k_max=4, trace_path=path))
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert len(rows) == 1 + len(result.trace)
    assert [int(r[0]) for r in rows[1:]] == list(range(1, len(result.trace) + 1))


if __name__ == "__main__":
    for name, func in list(globals().items()):
        if name.startswith("test_") and callable(func):
            print(f"🔍 {name}")
            func()
    print("✅ All GAMP tests passed")
