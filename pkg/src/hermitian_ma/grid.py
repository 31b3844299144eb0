"""Periodic grids on flat complex tori, scalar fields, and quadrature.

The torus has 2n real coordinate axes, each of period 2*pi; complex
coordinate j pairs real axes (2j, 2j+1) as z^j = x^{2j} + i x^{2j+1}.
Quadrature is the periodic trapezoid rule, which is exact for every
trigonometric polynomial below the Nyquist band of the grid.

Volume forms are represented by their scalar density against the flat
coordinate volume.  The constant Jacobian between the flat Hermitian
volume form and Lebesgue measure is dropped throughout: it cancels in
every ratio, normalized measure, and constant this package reports.

Reductions (sums, sups) run over the row-major flattening of the sample
array via numpy, whose pairwise summation gives a fixed deterministic
ordering, so repeated runs produce bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "TorusGrid",
    "ScalarField",
    "ComplexField",
    "Measure",
    "build_grid",
    "flat_measure",
    "integrate",
    "lp_norm",
    "sublevel_measure",
]

PERIOD = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the 2n-dimensional coordinate torus."""

    n: int
    sizes: tuple[int, ...]

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"complex dimension must be 2 or 3, got {self.n}")
        if len(self.sizes) != 2 * self.n:
            raise ValueError(
                f"expected {2 * self.n} axis sizes for n={self.n}, got {len(self.sizes)}"
            )
        for a, s in enumerate(self.sizes):
            if s < 4 or s % 2 != 0:
                raise ValueError(f"axis {a} size {s} must be even and >= 4")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @property
    def point_count(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self) -> float:
        return PERIOD ** (2 * self.n) / self.point_count

    def axis_coordinates(self, axis: int) -> np.ndarray:
        return PERIOD * np.arange(self.sizes[axis]) / self.sizes[axis]

    @cached_property
    def coordinates(self) -> list[np.ndarray]:
        """Per-axis coordinate arrays broadcast to the full grid shape."""
        naxes = 2 * self.n
        out = []
        for a in range(naxes):
            shape = [1] * naxes
            shape[a] = self.sizes[a]
            out.append(self.axis_coordinates(a).reshape(shape))
        return out

    @cached_property
    def wavenumbers(self) -> list[np.ndarray]:
        """Integer wavenumbers per axis, broadcastable, Nyquist zeroed.

        Zeroing the Nyquist column keeps spectral derivatives of real
        fields real and avoids the asymmetric mode on even grids.
        """
        naxes = 2 * self.n
        out = []
        for a in range(naxes):
            k = np.fft.fftfreq(self.sizes[a]) * self.sizes[a]
            k[self.sizes[a] // 2] = 0.0
            shape = [1] * naxes
            shape[a] = self.sizes[a]
            out.append(k.reshape(shape))
        return out

    @cached_property
    def inert_mode_mask(self) -> np.ndarray:
        """Boolean spectrum mask of modes invisible to spectral derivatives.

        A mode is inert when every axis wavenumber is 0 or Nyquist: with
        the Nyquist column zeroed, all derivative multipliers vanish
        there, so such modes carry no geometric content on this grid.
        The constant mode is included.
        """
        naxes = 2 * self.n
        mask = np.ones((1,) * naxes, dtype=bool)
        for a in range(naxes):
            k = np.fft.fftfreq(self.sizes[a]) * self.sizes[a]
            inert = (k == 0) | (np.abs(k) == self.sizes[a] // 2)
            shape = [1] * naxes
            shape[a] = self.sizes[a]
            mask = mask & inert.reshape(shape)
        return mask

    @cached_property
    def holo_multipliers(self) -> list[np.ndarray]:
        """Fourier multipliers of d/dz^j = (d/dx^{2j} - i d/dx^{2j+1}) / 2."""
        return [
            0.5 * (1j * self.wavenumbers[2 * j] + self.wavenumbers[2 * j + 1])
            for j in range(self.n)
        ]

    @cached_property
    def anti_multipliers(self) -> list[np.ndarray]:
        """Fourier multipliers of d/dzbar^j = (d/dx^{2j} + i d/dx^{2j+1}) / 2."""
        return [
            0.5 * (1j * self.wavenumbers[2 * j] - self.wavenumbers[2 * j + 1])
            for j in range(self.n)
        ]

    def refined(self, factor: int) -> "TorusGrid":
        return TorusGrid(self.n, tuple(s * factor for s in self.sizes))


def build_grid(n: int, sizes) -> TorusGrid:
    """Construct a TorusGrid, rejecting odd or undersized axes."""
    return TorusGrid(n, tuple(sizes))


class _Field:
    __slots__ = ("grid", "values")

    def __init__(self, grid: TorusGrid, values):
        values = np.asarray(values, dtype=self._dtype)
        if values.shape != grid.sizes:
            raise ValueError(f"values shape {values.shape} != grid sizes {grid.sizes}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        self.grid = grid
        self.values = values

    def __add__(self, other):
        if isinstance(other, _Field):
            self._check_grid(other)
            return type(self)(self.grid, self.values + other.values)
        return type(self)(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, _Field):
            self._check_grid(other)
            return type(self)(self.grid, self.values - other.values)
        return type(self)(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, _Field):
            self._check_grid(other)
            return type(self)(self.grid, self.values * other.values)
        return type(self)(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.grid, -self.values)

    def _check_grid(self, other):
        if other.grid is not self.grid and other.grid != self.grid:
            raise ValueError("fields live on different grids")


class ScalarField(_Field):
    """Real sample values on a TorusGrid."""

    _dtype = np.float64

    def sup(self) -> float:
        # Grid-sample sup only; the continuum sup of a smooth field can
        # exceed it, so results quoting sups should carry the grid sizes.
        return float(self.values.max())

    def inf(self) -> float:
        return float(self.values.min())


class ComplexField(_Field):
    """Complex sample values on a TorusGrid."""

    _dtype = np.complex128

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values))


class Measure:
    """Positive density against the flat coordinate volume."""

    __slots__ = ("density", "total_mass")

    def __init__(self, density: ScalarField):
        if density.values.min() <= 0.0:
            raise ValueError("measure density must be strictly positive")
        self.density = density
        self.total_mass = float(density.grid.cell_volume * density.values.sum())

    @property
    def grid(self):
        return self.density.grid


def flat_measure(grid: TorusGrid) -> Measure:
    return Measure(ScalarField(grid, np.ones(grid.sizes)))


def _shared_grid(f: _Field, m: Measure) -> TorusGrid:
    if f.grid != m.grid:
        raise ValueError("field and measure live on different grids")
    return f.grid


def integrate(f: ScalarField, m: Measure) -> float:
    """Trapezoid quadrature of f against the measure density.

    Exact for integrands whose spectrum stays below the Nyquist band.
    """
    grid = _shared_grid(f, m)
    return float(grid.cell_volume * np.sum(f.values * m.density.values))


def lp_norm(f: ScalarField, p: float, m: Measure) -> float:
    """L^p norm of f in the measure normalized to unit mass.

    Evaluated as sup|f| * (mean (|f|/sup|f|)^p)^(1/p), which stays inside
    the floating range for arbitrarily large p.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    grid = _shared_grid(f, m)
    absf = np.abs(f.values)
    top = absf.max()
    if top == 0.0:
        return 0.0
    w = m.density.values
    mean_p = np.sum((absf / top) ** p * w) / np.sum(w)
    return float(top * mean_p ** (1.0 / p))


def sublevel_measure(f: ScalarField, threshold: float, m: Measure) -> float:
    """Normalized measure of the set {f <= threshold}, in [0, 1]."""
    _shared_grid(f, m)
    w = m.density.values
    return float(np.sum(w[f.values <= threshold]) / np.sum(w))
