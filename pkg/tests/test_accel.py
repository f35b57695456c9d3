import os
import subprocess
import sys

import numpy as np
import pytest

from radiomap import _accel

needs_numba = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")


def _links(seed, n=40):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 8, (n, 2)), rng.uniform(0, 8, (n, 2))


@needs_numba
def test_pairwise_parity():
    rng = np.random.default_rng(0)
    X, Y = rng.standard_normal((30, 3)), rng.standard_normal((20, 3))
    assert np.allclose(_accel.pairwise_distances_numba(X, Y), _accel.pairwise_distances_numpy(X, Y), atol=1e-12)


@needs_numba
def test_traversal_parity():
    A, B = _links(1)
    args = (np.zeros(2), np.ones(2), np.array([8, 8]))
    assert np.allclose(_accel.traversal_matrix_numba(A, B, *args), _accel.traversal_matrix_numpy(A, B, *args),
                       atol=1e-12)


@needs_numba
def test_ellipse_parity():
    A, B = _links(2)
    P = np.random.default_rng(3).uniform(0, 8, (64, 2))
    ex = np.full(A.shape[0], 0.3)
    assert np.array_equal(_accel.ellipse_mask_numba(A, B, P, ex), _accel.ellipse_mask_numpy(A, B, P, ex))


def test_disable_env_selects_numpy():
    code = ("import numpy as np\nfrom radiomap import _accel\n"
            "A=np.array([[0.1,0.2],[3.3,0.5]]);B=np.array([[7.9,7.1],[0.4,6.6]])\n"
            "M=_accel.traversal_matrix(A,B,np.zeros(2),np.ones(2),np.array([8,8]))\n"
            "print(_accel.BACKEND, repr(float(M.sum())))")
    env = dict(os.environ, RADIOMAP_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, total = out.stdout.split()
    assert backend == "numpy"
    A = np.array([[0.1, 0.2], [3.3, 0.5]])
    B = np.array([[7.9, 7.1], [0.4, 6.6]])
    ref = _accel.traversal_matrix_numpy(A, B, np.zeros(2), np.ones(2), np.array([8, 8])).sum()
    assert float(total) == pytest.approx(ref, abs=1e-12)
