import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logbilinear import kernels
from logbilinear.design import DesignSpec, build_model_matrices

numba_kernels = kernels.numba_kernels
numpy_kernels = kernels.numpy_kernels

pytestmark = pytest.mark.skipif(numba_kernels is None, reason="numba not importable")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ipf_sweep_agrees(seed):
    rng = np.random.default_rng(seed)
    shape = tuple(rng.integers(2, 6, size=2))
    t = rng.uniform(0.1, 3, size=shape)
    row, col = rng.dirichlet(np.ones(shape[0])), rng.dirichlet(np.ones(shape[1]))
    a, b = t.copy(), t.copy()
    da = numba_kernels.ipf_sweep(a, row, col)
    db = numpy_kernels.ipf_sweep(b, row, col)
    np.testing.assert_allclose(a, b, rtol=1e-13)
    assert abs(da - db) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cell_kernels_agree(seed):
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.5, 50, size=tuple(rng.integers(2, 6, size=2)))
    np.testing.assert_allclose(numba_kernels.ctdc(mu), numpy_kernels.ctdc(mu), rtol=1e-13)
    np.testing.assert_allclose(numba_kernels.mr_covariance(mu), numpy_kernels.mr_covariance(mu), rtol=1e-12, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_newton_agrees(seed):
    rng = np.random.default_rng(seed)
    J, K = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    mm = build_model_matrices(DesignSpec(rng.normal(size=(J, 1)), rng.normal(size=(K, 1))))
    h = np.array(mm.Hbasis)
    r = rng.poisson(30, size=mm.I).astype(float) + 1
    beta0 = np.linalg.lstsq(h, np.log(r + 0.5), rcond=None)[0]
    out_a = numba_kernels.newton_poisson(h, r, beta0, 1e-10 * (1 + r.sum()), 1e-10, 100, 10)
    out_b = numpy_kernels.newton_poisson(h, r, beta0, 1e-10 * (1 + r.sum()), 1e-10, 100, 10)
    assert out_a[2] == out_b[2] == kernels.CONVERGED
    np.testing.assert_allclose(h @ out_a[0], h @ out_b[0], atol=1e-9)


def test_mr_covariance_structure():
    mu = np.array([[1.0, 3.0], [2.0, 2.0]])
    w = numpy_kernels.mr_covariance(mu)
    # rows of the table are independent multinomials
    np.testing.assert_allclose(w[0, 0], 1.0 - 1.0 / 4.0)
    np.testing.assert_allclose(w[0, 2], -3.0 / 4.0)
    assert w[0, 1] == 0.0
    np.testing.assert_allclose(w.sum(axis=1)[[0, 2]], 0.0, atol=1e-14)


def _backend_in_subprocess(value):
    env = dict(os.environ)
    if value is None:
        env.pop(kernels.ENV_VAR, None)
    else:
        env[kernels.ENV_VAR] = value
    code = "import warnings; warnings.simplefilter('ignore'); from logbilinear import kernels; print(kernels.backend_name())"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_backend():
    assert _backend_in_subprocess("numpy") == "numpy"
    assert _backend_in_subprocess("numba") == "numba"
    assert _backend_in_subprocess(None) == "numba"
    assert _backend_in_subprocess("fortran") == "numba"
