"""JIT-compiled implementations of the per-point matrix kernels.

Each public function reshapes the leading axes to a flat point index and
dispatches to an @njit loop specialised for n = 2 or n = 3.  Loops are
sequential, so reductions and outputs are bit-reproducible run to run.
"""

import math

import numpy as np
from numba import njit

BACKEND = "numba"

_JIT = dict(cache=True, fastmath=False)


@njit(**_JIT)
def _det2(a, out):
    for p in range(a.shape[0]):
        out[p] = (a[p, 0, 0].real * a[p, 1, 1].real
                  - a[p, 0, 1].real ** 2 - a[p, 0, 1].imag ** 2)


@njit(**_JIT)
def _det3(a, out):
    for p in range(a.shape[0]):
        m = a[p]
        d = (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
             - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
             + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
        out[p] = d.real


@njit(**_JIT)
def _inv2(a, out):
    for p in range(a.shape[0]):
        m = a[p]
        d = m[0, 0].real * m[1, 1].real - m[0, 1].real ** 2 - m[0, 1].imag ** 2
        out[p, 0, 0] = m[1, 1] / d
        out[p, 1, 1] = m[0, 0] / d
        out[p, 0, 1] = -m[0, 1] / d
        out[p, 1, 0] = -m[1, 0] / d


@njit(**_JIT)
def _inv3(a, out):
    for p in range(a.shape[0]):
        m = a[p]
        c00 = m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
        c01 = m[1, 2] * m[2, 0] - m[1, 0] * m[2, 2]
        c02 = m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]
        c10 = m[0, 2] * m[2, 1] - m[0, 1] * m[2, 2]
        c11 = m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        c12 = m[0, 1] * m[2, 0] - m[0, 0] * m[2, 1]
        c20 = m[0, 1] * m[1, 2] - m[0, 2] * m[1, 1]
        c21 = m[0, 2] * m[1, 0] - m[0, 0] * m[1, 2]
        c22 = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        d = m[0, 0] * c00 + m[0, 1] * c01 + m[0, 2] * c02
        out[p, 0, 0] = c00 / d
        out[p, 0, 1] = c10 / d
        out[p, 0, 2] = c20 / d
        out[p, 1, 0] = c01 / d
        out[p, 1, 1] = c11 / d
        out[p, 1, 2] = c21 / d
        out[p, 2, 0] = c02 / d
        out[p, 2, 1] = c12 / d
        out[p, 2, 2] = c22 / d


@njit(**_JIT)
def _mineig2(a, out):
    for p in range(a.shape[0]):
        m = a[p]
        half_tr = 0.5 * (m[0, 0].real + m[1, 1].real)
        half_gap = 0.5 * (m[0, 0].real - m[1, 1].real)
        off = m[0, 1].real ** 2 + m[0, 1].imag ** 2
        out[p] = half_tr - math.sqrt(half_gap * half_gap + off)


@njit(**_JIT)
def _mineig3(a, out):
    # Trigonometric solution of the characteristic cubic; eigenvalues of a
    # Hermitian matrix are real, so the acos argument lands in [-1, 1] up to
    # roundoff and is clipped.
    for p in range(a.shape[0]):
        m = a[p]
        q = (m[0, 0].real + m[1, 1].real + m[2, 2].real) / 3.0
        off = (m[0, 1].real ** 2 + m[0, 1].imag ** 2
               + m[0, 2].real ** 2 + m[0, 2].imag ** 2
               + m[1, 2].real ** 2 + m[1, 2].imag ** 2)
        dd = ((m[0, 0].real - q) ** 2 + (m[1, 1].real - q) ** 2
              + (m[2, 2].real - q) ** 2)
        p2 = dd + 2.0 * off
        if p2 <= 0.0:
            out[p] = q
            continue
        sp = math.sqrt(p2 / 6.0)
        b00 = (m[0, 0] - q) / sp
        b11 = (m[1, 1] - q) / sp
        b22 = (m[2, 2] - q) / sp
        b01 = m[0, 1] / sp
        b02 = m[0, 2] / sp
        b12 = m[1, 2] / sp
        detb = (b00 * (b11 * b22 - b12 * np.conj(b12))
                - b01 * (np.conj(b01) * b22 - b12 * np.conj(b02))
                + b02 * (np.conj(b01) * np.conj(b12) - b11 * np.conj(b02)))
        r = detb.real / 2.0
        if r < -1.0:
            r = -1.0
        elif r > 1.0:
            r = 1.0
        phi = math.acos(r) / 3.0
        out[p] = q + 2.0 * sp * math.cos(phi + 2.0 * math.pi / 3.0)


@njit(**_JIT)
def _trace_product(a, b, out):
    n = a.shape[1]
    for p in range(a.shape[0]):
        acc = 0.0
        for i in range(n):
            for j in range(n):
                acc += (a[p, i, j].real * b[p, j, i].real
                        - a[p, i, j].imag * b[p, j, i].imag)
        out[p] = acc


def _flatten(a):
    n = a.shape[-1]
    return np.ascontiguousarray(a, dtype=np.complex128).reshape(-1, n, n)


def det_hermitian(a):
    flat = _flatten(a)
    out = np.empty(flat.shape[0])
    (_det2 if a.shape[-1] == 2 else _det3)(flat, out)
    return out.reshape(a.shape[:-2])


def inv_hermitian(a):
    flat = _flatten(a)
    out = np.empty_like(flat)
    (_inv2 if a.shape[-1] == 2 else _inv3)(flat, out)
    return out.reshape(a.shape)


def min_eig_hermitian(a):
    flat = _flatten(a)
    out = np.empty(flat.shape[0])
    (_mineig2 if a.shape[-1] == 2 else _mineig3)(flat, out)
    return out.reshape(a.shape[:-2])


def trace_product(a, b):
    n = a.shape[-1]
    fa = _flatten(a)
    fb = _flatten(np.broadcast_to(b, a.shape))
    out = np.empty(fa.shape[0])
    _trace_product(fa, fb, out)
    return out.reshape(a.shape[:-2])
