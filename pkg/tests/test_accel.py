"""The dispatched kernels must agree with the numpy reference path."""

import numpy as np

from sldg import _accel


def test_mode_matrix_paths_agree():
    rng = np.random.default_rng(1)
    x = rng.uniform(0.0, 2.5, size=257)
    ref = _accel.fourier_mode_matrix_numpy(x, 2.5, 17)
    got = _accel.fourier_mode_matrix(x, 2.5, 17)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-13)


def test_mode_matrix_orthonormal():
    # rectangle rule on a uniform periodic grid integrates the basis exactly
    n = 512
    length = 2.0
    x = length * np.arange(n) / n
    E = _accel.fourier_mode_matrix(x, length, 9)
    gram = E.T @ E * (length / n)
    np.testing.assert_allclose(gram, np.eye(9), atol=1e-12)


def test_weighted_blocks_paths_agree_and_symmetric():
    rng = np.random.default_rng(2)
    vals = rng.standard_normal((13, 5))
    phi = rng.standard_normal((3, 5))
    w = rng.uniform(0.1, 1.0, 5)
    widths = rng.uniform(0.5, 1.5, 13)
    ref = _accel.weighted_blocks_numpy(vals, phi, w, widths)
    got = _accel.weighted_blocks(vals, phi, w, widths)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-13)
    # exact symmetry is load-bearing for charge conservation
    assert np.array_equal(got, got.transpose(0, 2, 1))
    assert np.array_equal(ref, ref.transpose(0, 2, 1))
