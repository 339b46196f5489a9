import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logbilinear.design import ContingencyTable, DesignSpec, SchemeSpec, build_model_matrices
from logbilinear.errors import ConvergenceError, DomainError
from logbilinear.fit import (
    eta_from_parameters,
    expected_table,
    extract_lambda,
    fit_loglinear,
    ipf_constrained,
    log_odds_ratios,
)

from conftest import random_instance
from oracles import ipf_loops, mle_by_optimizer


def test_saturated_2x2(example_2x2):
    _, mm, table = example_2x2
    fit = fit_loglinear(table, mm)
    assert fit.converged
    assert fit.theta_hat.shape == (1, 1)
    assert abs(fit.theta_hat[0, 0] - np.log(2 / 3)) < 1e-12
    np.testing.assert_allclose(fit.mu_hat.cells, table.cells, rtol=1e-12)
    np.testing.assert_allclose(fit.gamma_hat, [np.log(2)], atol=1e-12)
    assert abs(fit.alpha_hat - np.log(10)) < 1e-12


def test_saturated_fit_reproduces_log_odds_ratios():
    rng = np.random.default_rng(5)
    counts = rng.integers(1, 50, size=(3, 4)).astype(float)
    mm = build_model_matrices(DesignSpec.saturated(2, 3))
    fit = fit_loglinear(ContingencyTable(counts), mm)
    np.testing.assert_allclose(fit.theta_hat, log_odds_ratios(counts), atol=1e-9)


def test_independence_like_table_gives_zero_theta():
    counts = np.outer([10.0, 20.0, 30.0], [1.0, 2.0, 3.0])
    mm = build_model_matrices(DesignSpec.linear_by_linear(2, 2))
    fit = fit_loglinear(ContingencyTable(counts), mm)
    assert abs(fit.theta_hat[0, 0]) < 1e-10
    np.testing.assert_allclose(fit.mu_hat.cells, counts, rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fit_matches_generic_optimizer(seed):
    rng = np.random.default_rng(seed)
    spec, mm, table, fit = random_instance(rng, max_levels=3, max_scores=2)
    mu, theta = mle_by_optimizer(table.cells, spec.xtilde, spec.ytilde)
    np.testing.assert_allclose(fit.theta_vec, theta, rtol=1e-4, atol=1e-5)
    np.testing.assert_allclose(fit.mu_hat.cells, mu, rtol=1e-4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_normal_equations_hold(seed):
    rng = np.random.default_rng(seed)
    _, mm, table, fit = random_instance(rng)
    resid = mm.Hbasis.T @ (table.vector() - fit.mu_hat.vector())
    assert np.max(np.abs(resid)) <= 1e-8 * (1 + table.total)
    np.testing.assert_allclose(fit.mu_hat.row_totals, table.row_totals, rtol=1e-10)
    np.testing.assert_allclose(fit.mu_hat.col_totals, table.col_totals, rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parameters_rebuild_eta(seed):
    rng = np.random.default_rng(seed)
    _, mm, _, fit = random_instance(rng)
    eta = eta_from_parameters(fit.alpha_hat, fit.rho_hat, fit.gamma_hat, fit.theta_hat, mm)
    np.testing.assert_allclose(eta, fit.eta_hat, atol=1e-9)
    gamma, theta = extract_lambda(eta, mm)
    np.testing.assert_allclose(theta, fit.theta_vec, atol=1e-9)
    np.testing.assert_allclose(fit.lambda_hat, np.concatenate([gamma, theta]), atol=1e-9)


def test_zero_margin_is_rejected():
    mm = build_model_matrices(DesignSpec.saturated(1, 1))
    with pytest.raises(DomainError, match="row 1"):
        fit_loglinear(ContingencyTable([[1.0, 2.0], [0.0, 0.0]]), mm)


def test_sampling_zero_in_saturated_model_does_not_converge():
    mm = build_model_matrices(DesignSpec.saturated(1, 1))
    with pytest.raises(ConvergenceError) as info:
        fit_loglinear(ContingencyTable([[0.0, 5.0], [5.0, 5.0]]), mm)
    assert info.value.diagnostics["smallest_cell"] == (0, 0)


def test_sampling_zero_in_unsaturated_model_is_fine():
    mm = build_model_matrices(DesignSpec.linear_by_linear(2, 2))
    fit = fit_loglinear(ContingencyTable([[0.0, 5.0, 9.0], [5.0, 5.0, 3.0], [7.0, 2.0, 4.0]]), mm)
    assert fit.converged and np.all(fit.mu_hat.cells > 0)


def test_shape_mismatch():
    mm = build_model_matrices(DesignSpec.saturated(1, 1))
    with pytest.raises(DomainError):
        fit_loglinear(ContingencyTable(np.ones((3, 3))), mm)


def test_ipf_2x2_known_answer():
    mm = build_model_matrices(DesignSpec.saturated(1, 1))
    p = ipf_constrained([[np.log(4)]], [0.5, 0.5], [0.5, 0.5], mm)
    np.testing.assert_allclose(p.cells, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ipf_matches_loop_oracle_and_preserves_odds(seed):
    rng = np.random.default_rng(seed)
    J, K = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    spec = DesignSpec(rng.normal(size=(J, 1)), rng.normal(size=(K, 1)))
    mm = build_model_matrices(spec)
    theta = rng.normal(size=(1, 1))
    row = rng.dirichlet(np.ones(J + 1) * 3)
    col = rng.dirichlet(np.ones(K + 1) * 3)
    psi = (mm.Z @ theta.ravel()).reshape((J + 1, K + 1), order="F")
    seen = []
    p = ipf_constrained(theta, row, col, mm, callback=lambda s, t, d: seen.append(t))
    np.testing.assert_allclose(p.cells, ipf_loops(np.exp(psi), row, col), atol=1e-12)
    np.testing.assert_allclose(p.cells.sum(axis=1), row, atol=1e-12)
    np.testing.assert_allclose(p.cells.sum(axis=0), col, atol=1e-12)
    for t in seen:
        np.testing.assert_allclose(log_odds_ratios(t), psi[1:, 1:], atol=1e-10)


def test_ipf_input_validation():
    mm = build_model_matrices(DesignSpec.saturated(1, 1))
    with pytest.raises(DomainError):
        ipf_constrained([[0.0]], [0.6, 0.6], [0.5, 0.5], mm)
    with pytest.raises(DomainError):
        ipf_constrained([[0.0]], [1.0, 0.0], [0.5, 0.5], mm)
    with pytest.raises(DomainError):
        ipf_constrained([[0.0, 1.0]], [0.5, 0.5], [0.5, 0.5], mm)


def test_ipf_nonconvergence_reported():
    mm = build_model_matrices(DesignSpec.saturated(1, 1))
    with pytest.raises(ConvergenceError):
        ipf_constrained([[8.0]], [0.5, 0.5], [0.1, 0.9], mm, max_sweeps=2)


def test_ipf_zero_theta_gives_independence():
    mm = build_model_matrices(DesignSpec.linear_by_linear(2, 3))
    row, col = np.array([0.2, 0.3, 0.5]), np.array([0.1, 0.2, 0.3, 0.4])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = ipf_constrained([[0.0]], row, col, mm)
    np.testing.assert_allclose(p.cells, np.outer(row, col), atol=1e-14)


def test_expected_table_schemes():
    p = np.array([[0.1, 0.2], [0.3, 0.4]])
    np.testing.assert_allclose(expected_table(p, SchemeSpec.multinomial(100)).cells, 100 * p)
    np.testing.assert_allclose(expected_table(p, SchemeSpec.poisson(50)).cells, 50 * p)
    mr = expected_table(p, SchemeSpec.rows([30, 70])).cells
    np.testing.assert_allclose(mr.sum(axis=1), [30, 70])
    mc = expected_table(p, SchemeSpec.cols([40, 60])).cells
    np.testing.assert_allclose(mc.sum(axis=0), [40, 60])
    # conditional shapes preserve the odds ratios
    np.testing.assert_allclose(log_odds_ratios(mr), log_odds_ratios(p), atol=1e-14)
    with pytest.raises(DomainError):
        expected_table(p, SchemeSpec.rows([1, 2, 3]))
    with pytest.raises(DomainError):
        expected_table(p * 2, SchemeSpec.multinomial(10))
