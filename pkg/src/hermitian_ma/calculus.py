"""Spectral complex calculus and Hermitian matrix fields on torus grids.

Derivatives are computed in frequency space with the Nyquist mode zeroed
(see TorusGrid.wavenumbers).  For band-limited inputs every derivative
here is exact to roundoff; products of fields are formed pointwise in the
collocation style, so their spectra are exact whenever the combined
bandwidth stays below Nyquist.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

import numpy as np

from . import kernels
from .forms import Form, metric_form
from .grid import ComplexField, Measure, ScalarField, TorusGrid

__all__ = [
    "HermitianField",
    "TorsionTensor",
    "spectral_partial",
    "ddbar",
    "mixed_discriminant",
    "wedge_quotient",
    "gradient_pairing",
    "holomorphic_gradient",
    "gradient_energy",
    "chern_laplacian",
    "ricci_form",
    "torsion",
    "volume_measure",
    "trace_ratio",
    "del_form",
    "delbar_form",
    "refine_scalar",
    "refine_matrix_values",
]

_HERM_TOL = 1e-12


class HermitianField:
    """An n x n Hermitian matrix at every grid point.

    Stores determinant and inverse lazily; instances are treated as
    immutable after construction.
    """

    __slots__ = ("grid", "values", "_det", "_inv")

    def __init__(self, grid: TorusGrid, values, check: bool = True):
        values = np.asarray(values, dtype=np.complex128)
        expected = grid.sizes + (grid.n, grid.n)
        if values.shape != expected:
            raise ValueError(f"values shape {values.shape} != {expected}")
        if check:
            dev = np.max(np.abs(values - np.conj(np.swapaxes(values, -1, -2))))
            if dev > _HERM_TOL:
                raise ValueError(f"Hermitian deviation {dev:.3e} exceeds {_HERM_TOL}")
            if not np.all(np.isfinite(values.view(np.float64))):
                raise ValueError("matrix field contains non-finite values")
        self.grid = grid
        self.values = values
        self._det = None
        self._inv = None

    @classmethod
    def identity(cls, grid: TorusGrid) -> "HermitianField":
        vals = np.zeros(grid.sizes + (grid.n, grid.n), dtype=np.complex128)
        for i in range(grid.n):
            vals[..., i, i] = 1.0
        return cls(grid, vals, check=False)

    def det(self) -> np.ndarray:
        if self._det is None:
            self._det = kernels.det_hermitian(self.values)
        return self._det

    def inv(self) -> np.ndarray:
        if self._inv is None:
            self._inv = kernels.inv_hermitian(self.values)
        return self._inv

    def min_eig(self) -> float:
        return float(kernels.min_eig_hermitian(self.values).min())

    def __add__(self, other: "HermitianField") -> "HermitianField":
        return HermitianField(self.grid, self.values + other.values, check=False)

    def __sub__(self, other: "HermitianField") -> "HermitianField":
        return HermitianField(self.grid, self.values - other.values, check=False)

    def scaled_by(self, factor) -> "HermitianField":
        """Pointwise conformal scaling; factor is a scalar or a grid array."""
        f = np.asarray(factor)
        if f.shape == self.grid.sizes:
            f = f[..., None, None]
        return HermitianField(self.grid, self.values * f, check=False)

    def as_form(self) -> Form:
        return metric_form(self.values, self.grid.n)


@dataclass
class TorsionTensor:
    """Coefficients T_{kij} = d_k g_{ij} of the (2,1)-form del omega."""

    grid: TorusGrid
    values: np.ndarray  # shape sizes + (n, n, n), complex

    def del_omega_form(self) -> Form:
        """The (2,1)-form of del omega, antisymmetrized in the dz slots."""
        n = self.grid.n
        out = Form(n, (2, 1))
        for k in range(n):
            for i in range(k + 1, n):
                for j in range(n):
                    out.add_term(
                        ((k, i), (j,)),
                        1j * (self.values[..., k, i, j] - self.values[..., i, k, j]),
                    )
        return out

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def antisymmetry_defect(self) -> float:
        """Sup deviation of T from symmetry in (k, i); zero iff Kahler."""
        sym = np.swapaxes(self.values, -3, -2)
        return float(np.max(np.abs(self.values - sym)))


# ---------------------------------------------------------------------------
# spectral derivatives


def _spectrum(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values)


def _holo_from_spectrum(grid, spec, j):
    return np.fft.ifftn(spec * grid.holo_multipliers[j])


def _anti_from_spectrum(grid, spec, j):
    return np.fft.ifftn(spec * grid.anti_multipliers[j])


def spectral_partial(f: ScalarField | ComplexField, axis: int, conjugate: bool = False) -> ComplexField:
    """d f / dz^axis (or dzbar^axis when conjugate) via the FFT."""
    grid = f.grid
    if not 0 <= axis < grid.n:
        raise ValueError(f"complex axis {axis} out of range for n={grid.n}")
    spec = _spectrum(f.values)
    out = _anti_from_spectrum(grid, spec, axis) if conjugate else _holo_from_spectrum(grid, spec, axis)
    return ComplexField(grid, out)


def ddbar(f: ScalarField) -> HermitianField:
    """Complex Hessian H_{ij} = d_i dbar_j f, exactly Hermitian.

    Entries are computed for i <= j and mirrored, which kills roundoff
    asymmetry; every entry has zero grid mean because the zero frequency
    carries no derivative.
    """
    grid = f.grid
    n = grid.n
    spec = _spectrum(f.values)
    H = np.empty(grid.sizes + (n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(i, n):
            mult = grid.holo_multipliers[i] * grid.anti_multipliers[j]
            entry = np.fft.ifftn(spec * mult)
            if i == j:
                H[..., i, i] = entry.real
            else:
                H[..., i, j] = entry
                H[..., j, i] = np.conj(entry)
    return HermitianField(grid, H, check=False)


def holomorphic_gradient(f: ScalarField) -> list[np.ndarray]:
    """All d f / dz^j at once, sharing a single forward transform."""
    grid = f.grid
    spec = _spectrum(f.values)
    return [_holo_from_spectrum(grid, spec, j) for j in range(grid.n)]


def gradient_pairing(f: ScalarField) -> HermitianField:
    """Rank-one field G_{ij} = (d_i f)(conj d_j f), i.e. i del f ^ dbar f."""
    grid = f.grid
    grads = holomorphic_gradient(f)
    n = grid.n
    G = np.empty(grid.sizes + (n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            G[..., i, j] = grads[i] * np.conj(grads[j])
    return HermitianField(grid, G, check=False)


def gradient_energy(f: ScalarField, metric: HermitianField) -> np.ndarray:
    """|del f|^2 in the metric: ginv^{ij} (d_i f)(conj d_j f), pointwise."""
    grads = holomorphic_gradient(f)
    ginv = metric.inv()
    n = metric.grid.n
    acc = np.zeros(metric.grid.sizes)
    for i in range(n):
        for j in range(n):
            acc += (ginv[..., i, j] * grads[j] * np.conj(grads[i])).real
    return acc


# ---------------------------------------------------------------------------
# pointwise multilinear algebra


def mixed_discriminant(mats) -> np.ndarray:
    """Symmetric multilinear extension of det over n matrix arrays.

    Normalized so that repeating one matrix n times returns its
    determinant.  Evaluated by inclusion-exclusion over subset sums,
    at most 2^n - 1 determinant evaluations.
    """
    mats = [np.asarray(m) for m in mats]
    n = mats[0].shape[-1]
    if len(mats) != n:
        raise ValueError(f"need exactly n={n} matrices, got {len(mats)}")
    acc = None
    for r in range(1, n + 1):
        sign = (-1.0) ** (n - r)
        for subset in itertools.combinations(range(n), r):
            s = mats[subset[0]]
            for idx in subset[1:]:
                s = s + mats[idx]
            d = sign * kernels.det_hermitian(s)
            acc = d if acc is None else acc + d
    return acc / factorial(n)


def wedge_quotient(factors, reference: HermitianField) -> ScalarField:
    """Top-degree ratio of a wedge of (1,1)-forms to the reference volume.

    factors is a list of (HermitianField, multiplicity) pairs whose
    multiplicities sum to n; the result equals the pointwise mixed
    discriminant of the expanded list divided by det(reference).
    """
    grid = reference.grid
    n = grid.n
    expanded = []
    for field, mult in factors:
        if mult < 0:
            raise ValueError("multiplicities must be nonnegative")
        expanded.extend([field.values] * mult)
    if len(expanded) != n:
        raise ValueError(
            f"multiplicities sum to {len(expanded)}, expected n={n}"
        )
    return ScalarField(grid, mixed_discriminant(expanded) / reference.det())


def trace_ratio(metric: HermitianField, other: HermitianField) -> ScalarField:
    """tr_g h = ginv^{ij} h_{ij} pointwise."""
    return ScalarField(metric.grid, kernels.trace_product(metric.inv(), other.values))


# ---------------------------------------------------------------------------
# operators built from the metric


def chern_laplacian(f: ScalarField, metric: HermitianField) -> ScalarField:
    """Complex Laplacian ginv^{ij} d_i dbar_j f with respect to the metric."""
    if metric.det().min() <= 0.0:
        raise ValueError("metric is singular or not positive definite")
    H = ddbar(f)
    return ScalarField(f.grid, kernels.trace_product(metric.inv(), H.values))


def ricci_form(metric: HermitianField) -> HermitianField:
    """First Chern form -(1/2pi) i ddbar log det g as a Hermitian field."""
    d = metric.det()
    if d.min() <= 0.0:
        raise ValueError("log det undefined: determinant nonpositive somewhere")
    grid = metric.grid
    logdet = ScalarField(grid, np.log(d))
    H = ddbar(logdet)
    return HermitianField(grid, -H.values / (2.0 * np.pi), check=False)


def torsion(metric: HermitianField) -> TorsionTensor:
    """Spectral derivatives T_{kij} = d_k g_{ij} of the metric."""
    grid = metric.grid
    n = grid.n
    T = np.empty(grid.sizes + (n, n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            spec = _spectrum(metric.values[..., i, j])
            for k in range(n):
                T[..., k, i, j] = _holo_from_spectrum(grid, spec, k)
    return TorsionTensor(grid, T)


def volume_measure(metric: HermitianField) -> Measure:
    """Volume density of the metric relative to the flat coordinate volume."""
    return Measure(ScalarField(metric.grid, metric.det()))


# ---------------------------------------------------------------------------
# form-level spectral operators


def del_form(form: Form, grid: TorusGrid) -> Form:
    """Holomorphic exterior derivative of a form with grid coefficients."""
    n = form.n
    p, q = form.degree
    out = Form(n, (p + 1, q))
    if p + 1 > n:
        return out
    for (I, J), c in form.coeffs.items():
        spec = _spectrum(np.broadcast_to(np.asarray(c, dtype=np.complex128), grid.sizes))
        for k in range(n):
            if k in I:
                continue
            sign = -1.0 if sum(1 for i in I if i < k) % 2 else 1.0
            newI = tuple(sorted(I + (k,)))
            out.add_term((newI, J), sign * _holo_from_spectrum(grid, spec, k))
    return out


def delbar_form(form: Form, grid: TorusGrid) -> Form:
    """Antiholomorphic exterior derivative of a form with grid coefficients."""
    n = form.n
    p, q = form.degree
    out = Form(n, (p, q + 1))
    if q + 1 > n:
        return out
    block = -1.0 if p % 2 else 1.0
    for (I, J), c in form.coeffs.items():
        spec = _spectrum(np.broadcast_to(np.asarray(c, dtype=np.complex128), grid.sizes))
        for l in range(n):
            if l in J:
                continue
            sign = -1.0 if sum(1 for j in J if j < l) % 2 else 1.0
            newJ = tuple(sorted(J + (l,)))
            out.add_term((I, newJ), (block * sign) * _anti_from_spectrum(grid, spec, l))
    return out


# ---------------------------------------------------------------------------
# band-limited refinement (exact Fourier interpolation)


def refine_scalar(f: ScalarField, factor: int) -> ScalarField:
    """Resample onto a factor-times finer grid; exact for band-limited f."""
    if factor == 1:
        return f
    fine = f.grid.refined(factor)
    vals = _zero_pad_resample(f.values, fine.sizes)
    return ScalarField(fine, vals.real)


def refine_matrix_values(values: np.ndarray, grid: TorusGrid, factor: int) -> np.ndarray:
    """Entrywise Fourier refinement of a matrix field array."""
    if factor == 1:
        return values
    fine = grid.refined(factor)
    n = values.shape[-1]
    out = np.empty(fine.sizes + (n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            out[..., i, j] = _zero_pad_resample(values[..., i, j], fine.sizes)
    return out


def _pad_axis(spec: np.ndarray, axis: int, fine_size: int) -> np.ndarray:
    """Zero-pad one frequency axis, splitting the Nyquist coefficient.

    Splitting half the Nyquist weight onto +N/2 and -N/2 keeps real
    fields real after interpolation.
    """
    N = spec.shape[axis]
    if fine_size == N:
        return spec
    work = np.moveaxis(spec, axis, 0)
    out_shape = (fine_size,) + work.shape[1:]
    out = np.zeros(out_shape, dtype=np.complex128)
    half = N // 2
    out[:half] = work[:half]
    out[fine_size - (half - 1):] = work[half + 1:]
    nyq = 0.5 * work[half]
    out[half] += nyq
    out[fine_size - half] += nyq
    return np.moveaxis(out, 0, axis)


def _zero_pad_resample(values: np.ndarray, fine_sizes) -> np.ndarray:
    spec = np.fft.fftn(values)
    for axis, M in enumerate(fine_sizes):
        spec = _pad_axis(spec, axis, M)
    scale = np.prod(fine_sizes) / np.prod(values.shape)
    out = np.fft.ifftn(spec) * scale
    if np.isrealobj(values):
        return out.real
    return out
