"""Per-point linear-algebra kernels for small Hermitian matrix fields.

Two interchangeable backends provide the same four operations on arrays of
shape (..., n, n) with n in {2, 3}:

    det_hermitian   -- real determinant per point
    inv_hermitian   -- matrix inverse per point
    min_eig_hermitian -- smallest (real) eigenvalue per point
    trace_product   -- Re tr(A B) per point

The numba backend JIT-compiles explicit loops; the numpy backend uses
vectorised LAPACK calls.  Selection happens once at import time through the
environment variable HMA_KERNELS:

    HMA_KERNELS=numpy   force the pure-numpy fallback
    HMA_KERNELS=numba   require numba (ImportError if unavailable)
    unset               use numba when importable, else fall back silently

Both backends are deterministic run-to-run; see benchmarks/bench_kernels.py
for a timing comparison.
"""

import os

_requested = os.environ.get("HMA_KERNELS", "").strip().lower()

if _requested == "numpy":
    from . import numpy_backend as _impl
elif _requested == "numba":
    from . import numba_backend as _impl
else:
    try:
        from . import numba_backend as _impl
    except ImportError:
        from . import numpy_backend as _impl

det_hermitian = _impl.det_hermitian
inv_hermitian = _impl.inv_hermitian
min_eig_hermitian = _impl.min_eig_hermitian
trace_product = _impl.trace_product
BACKEND = _impl.BACKEND


def backend_name():
    return BACKEND
