import numpy as np
import pytest

from hermitian_ma.calculus import HermitianField, ddbar, volume_measure
from hermitian_ma.diagnostics import (b_formula_check, gradient_energy_ratio,
                                      measure_bound_check, moser_profile,
                                      pointwise_ineq_sample, poincare_check,
                                      ricci_identity_check,
                                      shifted_potential_checks,
                                      sublevel_certificate, trace_estimate,
                                      wedge_integral_ledger)
from hermitian_ma.gauduchon import solve_gauduchon
from hermitian_ma.grid import ScalarField, build_grid, flat_measure
from hermitian_ma.scenarios import random_band_limited
from hermitian_ma.solver import manufacture, solve


@pytest.fixture(scope="module")
def grid():
    return build_grid(2, [16, 16, 16, 16])


@pytest.fixture(scope="module")
def flat(grid):
    return HermitianField.identity(grid)


def field(grid, profile):
    return ScalarField(grid, np.broadcast_to(profile, grid.sizes).copy())


def zero(grid):
    return ScalarField(grid, np.zeros(grid.sizes))


@pytest.fixture(scope="module")
def solved(grid, flat):
    x = grid.coordinates
    phi_star = field(grid, 0.1 * np.cos(x[0]) + 0.05 * np.cos(x[1]) * np.cos(x[2]))
    F = manufacture(flat, phi_star)
    report = solve(flat, F)
    return report.phi, report.b, F


# ---------------------------------------------------------------------------
# gradient-energy ratio


def test_gradient_energy_ratio_zero_potential(grid, flat):
    res = gradient_energy_ratio(zero(grid), flat, [4, 8, 16], oversample=1)
    assert all(q == 0.0 for q in res.ratio_direct)
    assert all(q == 0.0 for q in res.ratio_chain)


def test_gradient_energy_ratio_dual_routes_agree(grid, flat, solved):
    phi, _, _ = solved
    res = gradient_energy_ratio(phi, flat, [8, 16, 32, 64], oversample=2)
    assert res.max_rel_gap < 1e-10
    assert all(np.isfinite(q) for q in res.ratio_chain)
    assert res.empirical_constant > 0.0


def test_gradient_energy_ratio_survives_huge_p(grid, flat, solved):
    phi, _, _ = solved
    res = gradient_energy_ratio(phi, flat, [128, 256, 512, 1024], oversample=1)
    assert all(np.isfinite(q) and q >= 0.0 for q in res.ratio_chain)


# ---------------------------------------------------------------------------
# wedge ledger


def test_ledger_zero_potential(grid, flat):
    led = wedge_integral_ledger(zero(grid), flat, 8.0)
    vol = (2 * np.pi) ** 4
    assert all(v == pytest.approx(vol, rel=1e-12) for v in led.volume_terms)
    assert all(abs(gk) < 1e-12 * vol for gk in led.gradient_terms)
    assert led.claim_constant == pytest.approx(0.0, abs=1e-12)


def test_ledger_trace_identity_dimension_two(grid, flat, solved):
    # oracle: w_phi ^ w / w^2 = tr_w(w_phi) / 2 in complex dimension 2
    phi, _, _ = solved
    p = 16.0
    led = wedge_integral_ledger(phi, flat, p)
    g_phi = HermitianField(grid, flat.values + ddbar(phi).values, check=False)
    from hermitian_ma.calculus import trace_ratio
    tr = trace_ratio(flat, g_phi).values
    psi = phi.values - phi.values.min()
    direct = grid.cell_volume * np.sum(np.exp(-p * psi) * 0.5 * tr * flat.det())
    assert led.volume_terms[1] == pytest.approx(direct, rel=1e-10)


def test_ledger_positivity(grid, flat, solved):
    phi, _, _ = solved
    for p in (8.0, 32.0, 128.0):
        led = wedge_integral_ledger(phi, flat, p)
        assert all(v > 0.0 for v in led.volume_terms)
        assert all(gk >= -1e-12 for gk in led.gradient_terms)
        assert np.isfinite(led.claim_constant)


# ---------------------------------------------------------------------------
# Moser profile


def test_moser_profile_zero_potential(grid, flat):
    prof = moser_profile(zero(grid), flat, p0=8, levels=4)
    assert all(n == pytest.approx(1.0, rel=1e-13) for n in prof.norms)
    assert prof.sup_value == 1.0
    assert prof.bound_holds


def test_moser_profile_on_solved_field(grid, flat, solved):
    phi, _, _ = solved
    prof = moser_profile(phi, flat, p0=8, levels=6)
    assert prof.p_list[-1] == pytest.approx(512.0)
    assert all(a <= b * (1 + 1e-12) for a, b in zip(prof.norms, prof.norms[1:]))
    assert prof.norms[-1] <= prof.sup_value * (1 + 1e-12)
    assert abs(prof.norms[-1] - prof.sup_value) <= 0.05 * prof.sup_value
    assert prof.bound_holds


def test_moser_profile_norms_monotone_random_fields(grid, flat):
    rng = np.random.default_rng(55)
    meas = volume_measure(flat)
    from hermitian_ma.grid import lp_norm
    for _ in range(100):
        f = random_band_limited(grid, rng, amplitude=0.7)
        decay = ScalarField(grid, np.exp(-(f.values - f.values.min())))
        norms = [lp_norm(decay, p, meas) for p in (2.0, 4.0, 8.0)]
        assert norms[0] <= norms[1] * (1 + 1e-12) <= norms[2] * (1 + 1e-12) ** 2


def test_moser_profile_requires_levels(grid, flat):
    with pytest.raises(ValueError):
        moser_profile(zero(grid), flat, levels=2)


# ---------------------------------------------------------------------------
# measure bound / sublevel certificate


def test_measure_bound_constant_field(grid, flat):
    res = measure_bound_check(zero(grid), volume_measure(flat))
    assert res.c1 == pytest.approx(0.0, abs=1e-14)
    assert res.sublevel == 1.0
    assert res.passed


def test_measure_bound_two_valued_field(grid):
    # oracle: C1 = -log((1 + e^{-10})/2), sublevel exactly one half
    vals = np.zeros(grid.sizes)
    vals[: grid.sizes[0] // 2] = 10.0
    f = ScalarField(grid, vals)
    res = measure_bound_check(f, flat_measure(grid))
    assert res.c1 == pytest.approx(-np.log((1 + np.exp(-10)) / 2), rel=1e-12)
    assert res.sublevel == pytest.approx(0.5)
    assert res.bound == pytest.approx(np.exp(-res.c1) / 4, rel=1e-12)
    assert res.passed


def test_measure_bound_random_fields(grid, flat):
    g = build_grid(2, [8, 8, 8, 8])
    rng = np.random.default_rng(13)
    m = flat_measure(g)
    for _ in range(200):
        f = random_band_limited(g, rng, amplitude=2.0)
        assert measure_bound_check(f, m).passed


def test_sublevel_certificate(grid, flat, solved):
    phi, _, _ = solved
    cert = sublevel_certificate(phi, flat, p0=8.0)
    assert cert.passed
    assert 0.0 < cert.delta <= 1.0
    assert cert.measured >= cert.delta
    trivial = sublevel_certificate(zero(grid), flat)
    assert trivial.measured == 1.0


# ---------------------------------------------------------------------------
# trace estimate


def test_trace_estimate_zero_potential(grid, flat):
    te = trace_estimate(zero(grid), flat)
    assert all(c == pytest.approx(2.0, rel=1e-13) for c in te.constants.values())


def test_trace_estimate_monotone_in_amplitude(grid, flat, solved):
    phi, _, _ = solved
    te = trace_estimate(phi, flat)
    assert te.constants[8.0] <= te.constants[1.0] * (1 + 1e-12)
    assert te.passed is None
    gated = trace_estimate(phi, flat, ceiling=100.0)
    assert gated.passed


def test_trace_matches_eigenvalue_sum(grid, flat, solved):
    phi, _, _ = solved
    g_phi = HermitianField(grid, flat.values + ddbar(phi).values, check=False)
    from hermitian_ma.calculus import trace_ratio
    tr = trace_ratio(flat, g_phi).values
    rng = np.random.default_rng(3)
    flat_idx = rng.integers(0, grid.point_count, size=100)
    pts = np.unravel_index(flat_idx, grid.sizes)
    for i in range(100):
        pt = tuple(p[i] for p in pts)
        prod = np.linalg.solve(flat.values[pt], g_phi.values[pt])
        eigs = np.linalg.eigvals(prod)
        assert np.max(np.abs(eigs.imag)) < 1e-10
        assert tr[pt] == pytest.approx(eigs.real.sum(), rel=1e-10)


# ---------------------------------------------------------------------------
# shifted-potential and Poincare checks


def test_potential_checks_zero_field(grid, flat):
    gres = solve_gauduchon(flat)
    sp = shifted_potential_checks(zero(grid), flat, gres.u)
    assert sp.c0 == pytest.approx(0.0, abs=1e-14)
    assert sp.c1 == 0.0
    assert all(l == 0.0 for l in sp.lhs)


def test_potential_checks_conformal_identity(grid, solved):
    # exercise the identity with a genuinely non-flat Gauduchon factor
    x = grid.coordinates
    v = np.broadcast_to(0.1 * np.cos(x[0]) + 0.05 * np.sin(x[2] + x[3]),
                        grid.sizes).copy()
    metric = HermitianField.identity(grid).scaled_by(np.exp(v))
    gres = solve_gauduchon(metric)
    phi, _, _ = solved
    sp = shifted_potential_checks(phi, metric, gres.u)
    assert sp.conformal_identity_gap < 1e-10
    assert np.isfinite(sp.c0) and np.isfinite(sp.c1) and np.isfinite(sp.c2)


def test_poincare_constant_field(grid, flat):
    pc = poincare_check(zero(grid), flat)
    assert pc.l2_deviation == 0.0


def test_poincare_single_mode_flat(grid, flat):
    # lowest nonzero Laplacian eigenvalue is 1/4, so the ratio is 2
    psi = field(grid, np.cos(grid.coordinates[0]))
    pc = poincare_check(psi, flat)
    assert pc.ratio == pytest.approx(2.0, abs=1e-12)


def test_poincare_stable_under_refinement():
    ratios = []
    for size in (8, 16):
        g = build_grid(2, [size] * 4)
        metric = HermitianField.identity(g)
        vals = np.broadcast_to(np.cos(g.coordinates[0])
                               + 0.3 * np.sin(g.coordinates[1]), g.sizes).copy()
        ratios.append(poincare_check(ScalarField(g, vals), metric).ratio)
    assert abs(ratios[0] - ratios[1]) / ratios[1] < 0.01


# ---------------------------------------------------------------------------
# identity checks for solved pairs


def test_ricci_identity_trivial(grid, flat):
    assert ricci_identity_check(zero(grid), 0.0, zero(grid), flat) == 0.0


def test_ricci_identity_manufactured(grid, flat, solved):
    phi, b, F = solved
    assert ricci_identity_check(phi, b, F, flat) < 1e-8


def test_b_formula_trivial(grid, flat):
    res = b_formula_check(flat, zero(grid), 0.0)
    assert res.predicted == pytest.approx(0.0, abs=1e-14)
    assert res.deviation == pytest.approx(0.0, abs=1e-14)
    assert res.condition_holds


def test_b_formula_condition_flag_on_nonkahler_metric(grid, flat):
    x = grid.coordinates
    m1 = np.array([[0.05, 0.02 + 0.03j], [0.02 - 0.03j, -0.02]])
    vals = flat.values + np.cos(x[0] + x[3])[..., None, None] * m1
    metric = HermitianField(grid, vals, check=False)
    res = b_formula_check(metric, zero(grid), 0.0)
    assert not res.condition_holds
    assert res.ddbar_norms[0] > 1e-10
    assert np.isfinite(res.deviation)


def test_b_formula_kahler_quadrature_oracle(grid, flat):
    x = grid.coordinates
    raw = 0.5 * np.cos(x[0]) * np.cos(x[2])
    F = field(grid, raw - raw.max())
    rep = solve(flat, F)
    res = b_formula_check(flat, F, rep.b)
    # independent quadrature for the prediction
    expected = np.log((2 * np.pi) ** 4
                      / ((2 * np.pi) ** 4 * np.mean(np.exp(F.values))))
    assert res.predicted == pytest.approx(expected, rel=1e-12)
    assert res.deviation < 1e-8
    assert res.condition_holds


# ---------------------------------------------------------------------------
# pointwise inequality sampler


def test_pointwise_zero_gradient_and_torsion_trivial():
    # with the torsion scaled to zero the left side vanishes identically
    res = pointwise_ineq_sample(500, eps=0.5, seed=1, n=2, torsion_scale=0.0)
    assert res.constants[0] == 0.0


def test_pointwise_sample_shapes_and_determinism():
    a = pointwise_ineq_sample(2000, eps=0.5, seed=9, n=3)
    b = pointwise_ineq_sample(2000, eps=0.5, seed=9, n=3)
    assert set(a.constants) == {0, 1}
    for k in a.constants:
        assert a.constants[k] == b.constants[k]
        assert len(a.ratios[k]) == 2000


def test_pointwise_torsion_homogeneity_paired():
    base = pointwise_ineq_sample(20000, eps=0.5, seed=11, n=2, torsion_scale=1.0)
    double = pointwise_ineq_sample(20000, eps=0.5, seed=11, n=2, torsion_scale=2.0)
    assert double.constants[0] == pytest.approx(2.0 * base.constants[0], rel=1e-12)


def test_pointwise_gradient_eps_joint_invariance():
    # rescaling the gradient by t together with eps -> t*eps leaves the
    # sampled constant unchanged (paired draws make the identity exact)
    for n in (2, 3):
        base = pointwise_ineq_sample(20000, eps=0.5, seed=13, n=n)
        scaled = pointwise_ineq_sample(20000, eps=0.25, seed=13, n=n,
                                       gradient_scale=0.5)
        for k in base.constants:
            assert scaled.constants[k] == pytest.approx(base.constants[k],
                                                        rel=1e-12)


def test_pointwise_eps_validation():
    with pytest.raises(ValueError):
        pointwise_ineq_sample(10, eps=0.0, seed=0)
    with pytest.raises(ValueError):
        pointwise_ineq_sample(10, eps=0.5, seed=0, n=4)
