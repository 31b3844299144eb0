"""Gauduchon conformal factor and metric classification.

Every conformal class on a compact complex manifold contains a metric
e^u * omega whose (n-1)-th power is ddbar-closed, unique once sup u = 0.
Writing w = e^{(n-1)u}, the closedness condition is linear in w:

    P(w) := [ i del dbar (w * omega^{n-1}) ] / (flat volume form) = 0,

so the factor is recovered from the one-dimensional kernel of the
discretized operator P.  The kernel vector is positive; a sign flip in
the computed vector is treated as an iteration failure rather than
projected away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .calculus import (HermitianField, ddbar, del_form, delbar_form,
                       holomorphic_gradient)
from .forms import (Form, anti_one_form, flat_volume_coefficient, form_power,
                    holo_one_form, metric_form)
from .grid import ScalarField
from .solver import _inverse_symbol, project_active

__all__ = [
    "GauduchonResult",
    "GauduchonError",
    "KernelDegeneracyError",
    "MetricFlags",
    "gauduchon_defect",
    "solve_gauduchon",
    "classify_metric",
]


class GauduchonError(RuntimeError):
    """Kernel iteration failed to produce a valid conformal factor."""


class KernelDegeneracyError(GauduchonError):
    """Two independent near-null vectors were found; kernel not simple."""


@dataclass
class GauduchonResult:
    u: ScalarField          # conformal exponent, sup u = 0 exactly
    residual: float         # sup |P(w)| / sup |w| for the returned kernel vector
    iterations: int


class _DefectOperator:
    """Matrix-free action w -> P(w) with metric-derivative forms cached.

    Expands i del dbar (w * beta) by the product rule, so the spectral
    derivatives of the metric coefficients are computed once and each
    application only differentiates w.
    """

    def __init__(self, metric: HermitianField):
        self.metric = metric
        self.grid = metric.grid
        n = self.grid.n
        beta = form_power(metric.as_form(), n - 1)
        self.beta = beta
        self.del_beta = del_form(beta, self.grid)
        self.delbar_beta = delbar_form(beta, self.grid)
        ddb = del_form(self.delbar_beta, self.grid)
        self.top_i_ddbar_beta = 1j * ddb.top_coefficient()
        self.flat_top = flat_volume_coefficient(n)

    def apply(self, w_values: np.ndarray) -> np.ndarray:
        grid = self.grid
        n = grid.n
        w_field = ScalarField(grid, w_values)
        hess = metric_form(ddbar(w_field).values, n)
        grads = holomorphic_gradient(w_field)
        dw = holo_one_form(grads, n)
        dbar_w = anti_one_form([np.conj(g) for g in grads], n)

        top = hess.wedge(self.beta).top_coefficient()
        top = top - 1j * dbar_w.wedge(self.del_beta).top_coefficient()
        top = top + 1j * dw.wedge(self.delbar_beta).top_coefficient()
        top = top + w_values * self.top_i_ddbar_beta
        return (top / self.flat_top).real


def gauduchon_defect(w: ScalarField, metric: HermitianField) -> ScalarField:
    """Scalar defect [i del dbar(w omega^{n-1})] / flat volume; linear in w."""
    if w.values.min() <= 0.0:
        raise ValueError("conformal weight w must be strictly positive")
    op = _DefectOperator(metric)
    return ScalarField(w.grid, op.apply(w.values))


def _kernel_solve(op: _DefectOperator, tol: float, maxiter: int, x0: np.ndarray):
    """Solve P(1 + y) = 0 for y in the active band; returns (w, iterations).

    The system is posed on the derivative-visible modes (mean and inert
    alternating modes projected out), which keeps the matrix-free
    operator nonsingular when the kernel is simple.  A defect below the
    roundoff floor short-circuits to w = 1.
    """
    grid = op.grid
    N = grid.point_count

    rhs_field = -project_active(op.apply(np.ones(grid.sizes)), grid)
    rhs = rhs_field.ravel()

    scale = max(float(np.max(np.abs(c))) for c in op.beta.coeffs.values())
    if np.max(np.abs(rhs)) <= 1e-13 * max(scale, 1.0):
        return np.ones(grid.sizes), 0

    def matvec(vec):
        # Input and output are both restricted to the active band, so the
        # operator is square there and starting-vector junk on inert
        # modes cannot leak into the converged kernel vector.
        v = project_active(vec.reshape(grid.sizes), grid)
        out = op.apply(v)
        return project_active(out, grid).ravel()

    mean_metric = op.metric.values.mean(axis=tuple(range(2 * grid.n)))
    inv_sym = _inverse_symbol(grid, mean_metric)

    def prec(vec):
        v = vec.reshape(grid.sizes)
        return np.fft.ifftn(np.fft.fftn(v) * inv_sym).real.ravel()

    A = LinearOperator((N, N), matvec=matvec, dtype=np.float64)
    M = LinearOperator((N, N), matvec=prec, dtype=np.float64)

    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    rhs_norm = np.linalg.norm(rhs)
    x = x0.ravel().copy()
    for _ in range(4):
        x, _info = gmres(A, rhs, x0=x, M=M, rtol=0.05 * tol, atol=0.0,
                         restart=40, maxiter=max(1, maxiter // 40),
                         callback=count, callback_type="pr_norm")
        if np.linalg.norm(matvec(x) - rhs) / rhs_norm <= tol:
            break
    else:
        raise GauduchonError(
            f"kernel solve did not converge ({iters} Krylov iterations); "
            "possible kernel degeneracy or an inadmissible metric"
        )
    y = project_active(x.reshape(grid.sizes), grid)
    return 1.0 + y, iters


def solve_gauduchon(metric: HermitianField, tol: float = 1e-10,
                    probe: bool = True, maxiter: int = 4000) -> GauduchonResult:
    """Conformal exponent u with e^u * omega Gauduchon and sup u = 0.

    The kernel vector of the defect operator is computed by a projected
    matrix-free solve normalized to unit mean.  When probe is set, a
    second solve from a randomized starting vector guards against a
    degenerate (multi-dimensional) kernel: disagreement between the two
    converged vectors is reported, never silently resolved.
    """
    grid = metric.grid
    n = grid.n
    op = _DefectOperator(metric)

    w, iters = _kernel_solve(op, tol, maxiter, np.zeros(grid.point_count))

    if w.min() <= 0.0:
        raise GauduchonError(
            f"kernel vector changed sign (min {w.min():.3e}); iteration failed"
        )

    if probe:
        rng = np.random.default_rng(np.random.Philox(key=20230517))
        x0 = rng.standard_normal(grid.point_count)
        x0 -= x0.mean()
        w2, iters2 = _kernel_solve(op, tol, maxiter, x0)
        iters += iters2
        gap = float(np.max(np.abs(w - w2)))
        if gap > 1e-6 * float(np.max(np.abs(w))):
            raise KernelDegeneracyError(
                f"two independent near-null vectors (gap {gap:.3e}); "
                "kernel dimension appears to exceed one"
            )

    residual = float(np.max(np.abs(op.apply(w))) / np.max(np.abs(w)))
    if residual > tol * 100:
        raise GauduchonError(
            f"defect residual {residual:.3e} above tolerance after solve")

    u_vals = np.log(w) / (n - 1)
    u_vals = u_vals - u_vals.max()
    return GauduchonResult(u=ScalarField(grid, u_vals), residual=residual,
                           iterations=iters)


@dataclass
class MetricFlags:
    """Sup-norms of the closedness obstructions with pass booleans."""

    norms: dict
    flags: dict
    threshold: float

    def __getitem__(self, key):
        return self.flags[key]


def classify_metric(metric: HermitianField, threshold: float = 1e-10) -> MetricFlags:
    """Kahler / balanced / Gauduchon / ddbar-closedness flags.

    Reports sup-norms of d omega, d(omega^{n-1}), ddbar omega,
    ddbar omega^2 and ddbar omega^{n-1}; a form whose degree exceeds
    (n, n) is identically zero and its norm reports as 0.
    """
    grid = metric.grid
    n = grid.n
    omega = metric.as_form()

    def d_norm(form: Form) -> float:
        return max(del_form(form, grid).sup_norm(),
                   delbar_form(form, grid).sup_norm())

    def ddbar_norm(form: Form) -> float:
        return del_form(delbar_form(form, grid), grid).sup_norm()

    beta = form_power(omega, n - 1)
    omega_sq = omega.wedge(omega)

    norms = {
        "d_omega": d_norm(omega),
        "d_omega_power": d_norm(beta),
        "ddbar_omega": ddbar_norm(omega),
        "ddbar_omega_sq": ddbar_norm(omega_sq),
        "ddbar_omega_power": ddbar_norm(beta),
    }
    flags = {
        "kahler": norms["d_omega"] <= threshold,
        "balanced": norms["d_omega_power"] <= threshold,
        "ddbar_closed_1": norms["ddbar_omega"] <= threshold,
        "ddbar_closed_2": norms["ddbar_omega_sq"] <= threshold,
        "gauduchon": norms["ddbar_omega_power"] <= threshold,
        "volume_formula": (norms["ddbar_omega"] <= threshold
                           and norms["ddbar_omega_sq"] <= threshold),
    }
    return MetricFlags(norms=norms, flags=flags, threshold=threshold)
