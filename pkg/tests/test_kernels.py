import os
import subprocess
import sys

import numpy as np
import pytest

from ptmetric import kernels
from ptmetric.families import random_schedule

BACKENDS = [pytest.param(kernels.rk4_linear_py, id="numpy")]
if kernels.rk4_linear_ext is not None:
    BACKENDS.append(pytest.param(kernels.rk4_linear_ext, id="cython"))


def _samples(d, n, seed=3):
    sched = random_schedule(d, seed)
    H = sched.samples(np.linspace(0, 1, 2 * n + 1))
    return np.ascontiguousarray(-1j * H), np.ascontiguousarray(1j * H)


@pytest.mark.parametrize("kernel", BACKENDS)
def test_constant_generator_matches_rk4_polynomial(kernel):
    # for constant L the RK4 step is the degree-4 Taylor polynomial of exp(hL)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    h, n = 0.01, 10
    L = np.ascontiguousarray(np.broadcast_to(A, (2 * n + 1, 3, 3)))
    y0 = np.array([1.0, 0.5j, -0.25], dtype=complex)
    hA = h * A
    step = np.eye(3) + hA + hA @ hA / 2 + hA @ hA @ hA / 6 + hA @ hA @ hA @ hA / 24
    out = kernel(L, None, y0, h)
    assert out.shape == (n + 1, 3)
    assert np.allclose(out[-1], np.linalg.matrix_power(step, n) @ y0, atol=1e-13)


@pytest.mark.parametrize("kernel", BACKENDS)
def test_right_action(kernel):
    # y' = y R with y0 = I is the transpose problem of Y' = R^T Y
    L, R = _samples(3, 40)
    LT = np.ascontiguousarray(np.swapaxes(R, 1, 2))
    a = kernel(None, R, np.eye(3, dtype=complex), 1 / 40)
    b = kernel(LT, None, np.eye(3, dtype=complex), 1 / 40)
    assert np.allclose(a, np.swapaxes(b, 1, 2), atol=1e-14)


@pytest.mark.skipif(kernels.rk4_linear_ext is None, reason="extension not built")
@pytest.mark.parametrize("d", [1, 2, 5, 8])
def test_backend_parity(d):
    L, R = _samples(d, 64, seed=d)
    psi = np.linspace(1, 2, d) + 0j
    rho = np.eye(d, dtype=complex) / d
    h = 1 / 64
    for args in ((L, None, psi), (None, R, np.eye(d, dtype=complex)), (L, R, rho)):
        a = kernels.rk4_linear_py(*args, h)
        b = kernels.rk4_linear_ext(*args, h)
        assert a.shape == b.shape
        assert np.max(np.abs(a - b)) < 1e-13


def test_backend_selection_env():
    code = "from ptmetric import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, PTMETRIC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("python", "cython")
    if kernels.rk4_linear_ext is not None and os.environ.get("PTMETRIC_PURE_PYTHON") != "1":
        assert kernels.BACKEND == "cython"
