import os
import subprocess
import sys

import numpy as np
import pytest

from chitab import _kernels


def _random_boxes(rng, n):
    xy = rng.uniform(0, 100, size=(n, 2))
    wh = rng.uniform(0, 30, size=(n, 2))
    wh[rng.random(n) < 0.1, 0] = 0.0
    return np.hstack([xy, xy + wh])


@pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba not available")
def test_numba_and_numpy_paths_agree():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = _random_boxes(rng, rng.integers(0, 40))
        b = _random_boxes(rng, rng.integers(0, 40))
        np.testing.assert_array_equal(_kernels.intersect_matrix_numba(a, b), _kernels.intersect_matrix_numpy(a, b))
        np.testing.assert_allclose(_kernels.hcover_matrix_numba(a, b), _kernels.hcover_matrix_numpy(a, b),
                                   rtol=0, atol=1e-12, equal_nan=True)


def test_zero_width_column_gives_nan():
    cells = np.array([[0.0, 0, 10, 1]])
    cols = np.array([[2.0, 0, 2, 1], [2.0, 0, 4, 1]])
    out = _kernels.hcover_matrix(cells, cols)
    assert np.isnan(out[0, 0]) and out[0, 1] == 1.0


def test_env_flag_selects_numpy_path():
    code = "from chitab import _kernels as k; print(k.HAS_NUMBA, k.intersect_matrix.__name__)"
    env = dict(os.environ, CHITAB_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "intersect_matrix_numpy"]
