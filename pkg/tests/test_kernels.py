import numpy as np
import pytest

from hermitian_ma.kernels import numba_backend, numpy_backend


def random_hermitian(rng, count, n, definite=False):
    a = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    h = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    if definite:
        h = h + (2.0 * n) * np.eye(n)
    return h


@pytest.mark.parametrize("n", [2, 3])
def test_backends_agree(n):
    rng = np.random.default_rng(100 + n)
    a = random_hermitian(rng, 500, n, definite=True)
    b = random_hermitian(rng, 500, n)
    np.testing.assert_allclose(numba_backend.det_hermitian(a),
                               numpy_backend.det_hermitian(a),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(numba_backend.inv_hermitian(a),
                               numpy_backend.inv_hermitian(a),
                               rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(numba_backend.min_eig_hermitian(a),
                               numpy_backend.min_eig_hermitian(a),
                               rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(numba_backend.trace_product(a, b),
                               numpy_backend.trace_product(a, b),
                               rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("backend", [numba_backend, numpy_backend])
@pytest.mark.parametrize("n", [2, 3])
def test_against_lapack_references(backend, n):
    rng = np.random.default_rng(7 * n)
    a = random_hermitian(rng, 200, n)
    np.testing.assert_allclose(backend.det_hermitian(a),
                               np.linalg.det(a).real, rtol=1e-11, atol=1e-11)
    np.testing.assert_allclose(backend.min_eig_hermitian(a),
                               np.linalg.eigvalsh(a)[..., 0],
                               rtol=1e-9, atol=1e-9)
    spd = random_hermitian(rng, 200, n, definite=True)
    np.testing.assert_allclose(backend.inv_hermitian(spd), np.linalg.inv(spd),
                               rtol=1e-11, atol=1e-12)
    b = random_hermitian(rng, 200, n)
    expected = np.einsum("...ij,...ji->...", spd, b).real
    np.testing.assert_allclose(backend.trace_product(spd, b), expected,
                               rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("backend", [numba_backend, numpy_backend])
def test_grid_shaped_inputs(backend):
    rng = np.random.default_rng(3)
    a = random_hermitian(rng, 2 * 3 * 4, 2, definite=True).reshape(2, 3, 4, 2, 2)
    d = backend.det_hermitian(a)
    assert d.shape == (2, 3, 4)
    inv = backend.inv_hermitian(a)
    assert inv.shape == a.shape
    ident = np.einsum("...ij,...jk->...ik", a, inv)
    np.testing.assert_allclose(ident, np.broadcast_to(np.eye(2), a.shape),
                               atol=1e-12)
