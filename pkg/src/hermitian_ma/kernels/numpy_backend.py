"""Vectorised numpy implementations of the per-point matrix kernels."""

import numpy as np

BACKEND = "numpy"


def det_hermitian(a):
    """Determinant of Hermitian matrices, shape (..., n, n) -> (...,) real."""
    n = a.shape[-1]
    if n == 2:
        return a[..., 0, 0].real * a[..., 1, 1].real - np.abs(a[..., 0, 1]) ** 2
    return np.linalg.det(a).real


def inv_hermitian(a):
    """Inverse of Hermitian matrices, shape preserved."""
    n = a.shape[-1]
    if n == 2:
        d = det_hermitian(a)
        out = np.empty_like(a)
        out[..., 0, 0] = a[..., 1, 1] / d
        out[..., 1, 1] = a[..., 0, 0] / d
        out[..., 0, 1] = -a[..., 0, 1] / d
        out[..., 1, 0] = -a[..., 1, 0] / d
        return out
    return np.linalg.inv(a)


def min_eig_hermitian(a):
    """Smallest eigenvalue of Hermitian matrices, (..., n, n) -> (...,) real."""
    n = a.shape[-1]
    if n == 2:
        half_tr = 0.5 * (a[..., 0, 0].real + a[..., 1, 1].real)
        half_gap = 0.5 * (a[..., 0, 0].real - a[..., 1, 1].real)
        rad = np.sqrt(half_gap**2 + np.abs(a[..., 0, 1]) ** 2)
        return half_tr - rad
    return np.linalg.eigvalsh(a)[..., 0]


def trace_product(a, b):
    """Re tr(A B) per point for matrix fields of matching shape."""
    return np.einsum("...ij,...ji->...", a, b).real
