"""End-to-end checks in complex dimension three on a small 6^6 grid."""

import numpy as np
import pytest

from hermitian_ma.calculus import (HermitianField, chern_laplacian, ddbar,
                                   mixed_discriminant, wedge_quotient)
from hermitian_ma.gauduchon import classify_metric, solve_gauduchon
from hermitian_ma.grid import ScalarField, build_grid
from hermitian_ma.solver import manufacture, solve


@pytest.fixture(scope="module")
def grid():
    return build_grid(3, [6, 6, 6, 6, 6, 6])


@pytest.fixture(scope="module")
def flat(grid):
    return HermitianField.identity(grid)


def field(grid, profile):
    return ScalarField(grid, np.broadcast_to(profile, grid.sizes).copy())


def test_laplacian_single_mode(grid, flat):
    f = field(grid, np.cos(grid.coordinates[4]))
    lap = chern_laplacian(f, flat)
    assert np.max(np.abs(lap.values + 0.25 * np.cos(grid.coordinates[4]))) < 1e-13


def test_wedge_quotient_diag(grid, flat):
    vals = np.zeros(grid.sizes + (3, 3), dtype=complex)
    for i, d in enumerate((1.1, 1.2, 1.3)):
        vals[..., i, i] = d
    gphi = HermitianField(grid, vals, check=False)
    # D(A, I, I) = tr(A)/3 for n = 3
    q = wedge_quotient([(gphi, 1), (flat, 2)], flat)
    assert np.max(np.abs(q.values - (1.1 + 1.2 + 1.3) / 3.0)) < 1e-13
    full = wedge_quotient([(gphi, 3)], flat)
    assert np.max(np.abs(full.values - 1.1 * 1.2 * 1.3)) < 1e-13


def test_manufactured_solve_dimension_three(grid, flat):
    x = grid.coordinates
    phi_star = field(grid, 0.06 * np.cos(x[0]) + 0.04 * np.sin(x[3] + x[5]))
    F = manufacture(flat, phi_star)
    report = solve(flat, F)
    target = phi_star.values - phi_star.values.max()
    assert report.final_residual <= 1e-10
    assert np.max(np.abs(report.phi.values - target)) < 1e-8
    assert abs(report.b) < 1e-8


def test_gauduchon_conformal_dimension_three():
    # Eight points per axis resolve exp(-2v) to ~1e-8 at these amplitudes;
    # six would cap the match near 3e-6.
    g = build_grid(3, [8] * 6)
    flat8 = HermitianField.identity(g)
    x = g.coordinates
    v = np.broadcast_to(0.02 * np.cos(x[1]) + 0.01 * np.sin(x[2] + x[4]),
                        g.sizes).copy()
    metric = flat8.scaled_by(np.exp(v))
    res = solve_gauduchon(metric, tol=1e-9)
    assert np.max(np.abs(res.u.values - (v.min() - v))) < 1e-7
    flags = classify_metric(metric)
    assert not flags["kahler"]
    # ddbar(omega^2) is a genuine obstruction in dimension three
    assert flags.norms["ddbar_omega_sq"] > 1e-8


def test_telescoping_identity_dimension_three(grid, flat):
    rng = np.random.default_rng(33)
    modes = 0.03 * np.cos(grid.coordinates[0]) + 0.02 * np.sin(
        grid.coordinates[2] + grid.coordinates[5])
    phi = field(grid, modes)
    H = ddbar(phi)
    gphi = HermitianField(grid, flat.values + H.values, check=False)
    lhs = gphi.det() - flat.det()
    rhs = np.zeros(grid.sizes)
    for k in range(3):
        rhs += wedge_quotient([(H, 1), (gphi, k), (flat, 2 - k)], flat).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12
