"""Empirical verification of the integral estimates behind the solver.

Each operation here evaluates one inequality or identity on solved or
synthetic fields and reports the measured constants.  Constants are
reported, never compared against hardcoded targets: the inequalities
hold with some uniform constant, and the point of the diagnostics is to
measure how large it actually is on concrete data.

Large exponents are handled by factoring e^{-p inf(phi)} out of every
integrand, so integrals of e^{-p phi} stay inside the floating range for
p in the thousands; ratios of such integrals are unaffected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import (HermitianField, chern_laplacian, ddbar,
                       gradient_energy, refine_matrix_values, refine_scalar,
                       ricci_form, volume_measure, wedge_quotient,
                       gradient_pairing, trace_ratio)
from .forms import (anti_one_form, flat_volume_coefficient, form_power,
                    holo_one_form, Form)
from .gauduchon import classify_metric
from .grid import Measure, ScalarField, integrate, lp_norm, sublevel_measure

__all__ = [
    "MoserProfile",
    "WedgeIntegralLedger",
    "GradientEnergyRatio",
    "PointwiseInequalitySample",
    "MeasureBoundResult",
    "SublevelCertificate",
    "TraceEstimate",
    "ShiftedPotentialChecks",
    "PoincareCheck",
    "BFormulaCheck",
    "CheckResult",
    "DiagnosticsReport",
    "moser_profile",
    "wedge_integral_ledger",
    "gradient_energy_ratio",
    "pointwise_ineq_sample",
    "measure_bound_check",
    "sublevel_certificate",
    "trace_estimate",
    "shifted_potential_checks",
    "poincare_check",
    "ricci_identity_check",
    "b_formula_check",
]


def _quad(values: np.ndarray, density: np.ndarray, cell: float) -> float:
    return float(cell * np.sum(values * density))


# ---------------------------------------------------------------------------
# gradient-energy ratio (dual evaluation routes)


@dataclass
class GradientEnergyRatio:
    p_list: list[float]
    ratio_direct: list[float]   # spectral gradient of exp(-p phi / 2)
    ratio_chain: list[float]    # (p^2/4) exp(-p phi) |grad phi|^2
    empirical_constant: float
    max_rel_gap: float
    oversample: int


def gradient_energy_ratio(phi: ScalarField, metric: HermitianField,
                          p_list, oversample: int = 2) -> GradientEnergyRatio:
    """Gradient energy of exp(-p phi / 2) against p times the mass of exp(-p phi).

    Evaluates the ratio along two independent routes: differentiating the
    sampled exponential spectrally, and the algebraic route through
    |grad phi|^2.  Both are computed on an `oversample`-times finer grid
    (exact Fourier interpolation of the band-limited inputs) so the
    exponential stays spectrally resolved for larger p.
    """
    grid = phi.grid
    fine_phi = refine_scalar(phi, oversample)
    fine_grid = fine_phi.grid
    fine_metric = HermitianField(
        fine_grid, refine_matrix_values(metric.values, grid, oversample),
        check=False)
    psi = fine_phi.values - fine_phi.values.min()
    density = fine_metric.det()
    cell = fine_grid.cell_volume
    energy_phi = gradient_energy(fine_phi, fine_metric)

    direct, chain = [], []
    for p in p_list:
        decay = np.exp(-p * psi)
        denom = p * _quad(decay, density, cell)
        h = ScalarField(fine_grid, np.exp(-(p / 2.0) * psi))
        num_direct = _quad(gradient_energy(h, fine_metric), density, cell)
        num_chain = _quad((p * p / 4.0) * decay * energy_phi, density, cell)
        direct.append(num_direct / denom if denom > 0 else 0.0)
        chain.append(num_chain / denom if denom > 0 else 0.0)

    gaps = [abs(a - b) / max(abs(a), abs(b), 1e-300)
            for a, b in zip(direct, chain)]
    return GradientEnergyRatio(
        p_list=list(p_list), ratio_direct=direct, ratio_chain=chain,
        empirical_constant=max(chain) if chain else 0.0,
        max_rel_gap=max(gaps) if gaps else 0.0, oversample=oversample)


# ---------------------------------------------------------------------------
# wedge-power integral ledger


@dataclass
class WedgeIntegralLedger:
    """Shifted integrals of exp(-p phi) against wedge-power densities.

    volume_terms[k] holds the integral with density of the k-fold evolved
    power against (n-k) background powers; gradient_terms[k] carries one
    slot of i del phi ^ dbar phi.  All integrals carry the common factor
    exp(-p * inf_shift) removed; ratios between entries are unaffected.
    """

    p: float
    inf_shift: float
    volume_terms: list[float]     # k = 0 .. n
    gradient_terms: list[float]   # k = 0 .. n-1
    claim_constant: float         # (p / 2^{n-1}) * sum(gradient) / volume_terms[0]


def wedge_integral_ledger(phi: ScalarField, metric: HermitianField,
                          p: float) -> WedgeIntegralLedger:
    grid = phi.grid
    n = grid.n
    g_phi = HermitianField(grid, metric.values + ddbar(phi).values, check=False)
    pairing = gradient_pairing(phi)
    psi = phi.values - phi.values.min()
    decay = np.exp(-p * psi)
    density = metric.det()
    cell = grid.cell_volume

    vol_terms = []
    for k in range(n + 1):
        q = wedge_quotient([(g_phi, k), (metric, n - k)], metric)
        vol_terms.append(_quad(decay * q.values, density, cell))
    grad_terms = []
    for k in range(n):
        q = wedge_quotient([(pairing, 1), (g_phi, k), (metric, n - 1 - k)], metric)
        grad_terms.append(_quad(decay * q.values, density, cell))

    claim = (p / 2.0 ** (n - 1)) * sum(grad_terms) / vol_terms[0]
    return WedgeIntegralLedger(
        p=p, inf_shift=float(phi.values.min()), volume_terms=vol_terms,
        gradient_terms=grad_terms, claim_constant=claim)


# ---------------------------------------------------------------------------
# Moser-iteration norm profile


@dataclass
class MoserProfile:
    p_list: list[float]
    norms: list[float]
    beta: float
    fitted_constant: float
    sup_value: float          # grid sup of exp(-phi)
    bound_lhs: float          # sup / norm(p0)
    bound_rhs: float          # iterated product with the fitted constant
    bound_holds: bool


def moser_profile(phi: ScalarField, metric: HermitianField,
                  p0: float = 8.0, levels: int = 6) -> MoserProfile:
    """L^p profile of exp(-phi) along p0 * beta^j with the iterated bound.

    The fitted constant is the least C making every step
    norm(p*beta) <= (C p)^{1/p} norm(p) hold, with the grid sup treated
    as the final rung, so the explicit product bound holds by
    construction and quantifies how much room the iteration has.
    """
    if levels < 3:
        raise ValueError("need at least 3 levels")
    grid = phi.grid
    n = grid.n
    beta = n / (n - 1.0)
    meas = volume_measure(metric)
    psi = ScalarField(grid, np.exp(-(phi.values - phi.values.min())))
    scale = float(np.exp(-phi.values.min()))

    p_list = [p0 * beta**j for j in range(levels + 1)]
    norms = [scale * lp_norm(psi, p, meas) for p in p_list]

    constants = []
    for p, lo, hi in zip(p_list, norms, norms[1:]):
        ratio = max(hi / lo, 1e-300)
        constants.append(ratio**p / p)
    p_last = p_list[-1]
    constants.append(max(scale / norms[-1], 1e-300) ** p_last / p_last)
    fitted = max(constants)

    rhs = 1.0
    for p in p_list:
        rhs *= (fitted * p) ** (1.0 / p)
    lhs = scale / norms[0]
    return MoserProfile(
        p_list=p_list, norms=norms, beta=beta, fitted_constant=fitted,
        sup_value=scale, bound_lhs=lhs, bound_rhs=rhs,
        bound_holds=lhs <= rhs * (1.0 + 1e-12))


# ---------------------------------------------------------------------------
# pointwise torsion inequality sampler


@dataclass
class PointwiseInequalitySample:
    n: int
    eps: float
    torsion_scale: float
    trials: int
    constants: dict            # k -> minimal C over the sample
    ratios: dict = field(repr=False, default_factory=dict)  # k -> per-sample C


def pointwise_ineq_sample(trials: int, eps: float, seed: int, n: int = 2,
                          torsion_scale: float = 1.0,
                          gradient_scale: float = 1.0) -> PointwiseInequalitySample:
    """Sample the pointwise torsion inequality in normal-form coordinates.

    Coordinates are normalized so the background form is the identity and
    the evolved form diagonal with positive entries; the gradient vector
    and torsion coefficients are drawn at random (torsion normalized to
    the requested sup-norm).  For each k <= n-2 the minimal constant C
    with

        |i dbar(phi) ^ del(omega) ^ w_phi^k ^ w^{n-k-2}|
            <= (C/eps) * (i del(phi) ^ dbar(phi) ^ w_phi^k ^ w^{n-k-1})
               + eps * C * (w_phi^k ^ w^{n-k})

    (all top-degree ratios to the volume form) is returned across the
    sample.  The left side is linear in the torsion, so the constant
    scales linearly with the torsion sup-norm; rescaling the gradient by
    t together with eps -> t*eps leaves it unchanged.

    Sampling uses a counter-based generator keyed by the seed, so
    partitioned parallel draws would stay deterministic.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if n not in (2, 3):
        raise ValueError("n must be 2 or 3")
    rng = np.random.Generator(np.random.Philox(key=seed))
    lam = rng.lognormal(mean=0.0, sigma=0.75, size=(trials, n))
    v = gradient_scale * (rng.standard_normal((trials, n))
                          + 1j * rng.standard_normal((trials, n))) / np.sqrt(2.0)
    T = (rng.standard_normal((trials, n, n, n))
         + 1j * rng.standard_normal((trials, n, n, n))) / np.sqrt(2.0)
    T *= (torsion_scale / np.max(np.abs(T), axis=(1, 2, 3)))[:, None, None, None]

    flat_top = flat_volume_coefficient(n)
    omega = Form(n, (1, 1), {((i,), (i,)): np.asarray(1j) for i in range(n)})
    omega_phi = Form(n, (1, 1),
                     {((i,), (i,)): 1j * lam[:, i] for i in range(n)})
    del_omega = Form(n, (2, 1))
    for k in range(n):
        for i in range(k + 1, n):
            for j in range(n):
                del_omega.add_term(((k, i), (j,)),
                                   1j * (T[:, k, i, j] - T[:, i, k, j]))
    d_phi = holo_one_form([v[:, i] for i in range(n)], n)
    dbar_phi = anti_one_form([np.conj(v[:, i]) for i in range(n)], n)

    constants, ratios = {}, {}
    for k in range(n - 1):
        pow_phi = form_power(omega_phi, k)
        lhs_form = dbar_phi.wedge(del_omega).wedge(pow_phi).wedge(
            form_power(omega, n - k - 2))
        lhs = np.abs(1j * lhs_form.top_coefficient() / flat_top)
        q1_form = d_phi.wedge(dbar_phi).wedge(pow_phi).wedge(
            form_power(omega, n - k - 1))
        q1 = np.real(1j * q1_form.top_coefficient() / flat_top)
        q2_form = pow_phi.wedge(form_power(omega, n - k))
        q2 = np.real(q2_form.top_coefficient() / flat_top)
        # q1 >= 0 and q2 > 0 up to roundoff; a tiny negative q1 would only
        # make the sampled constant conservative.
        q1 = np.maximum(q1, 0.0)
        per_sample = lhs / (q1 / eps + eps * q2)
        constants[k] = float(per_sample.max())
        ratios[k] = per_sample
    return PointwiseInequalitySample(
        n=n, eps=eps, torsion_scale=torsion_scale, trials=trials,
        constants=constants, ratios=ratios)


# ---------------------------------------------------------------------------
# sublevel-set measure bound (a theorem for arbitrary fields)


@dataclass
class MeasureBoundResult:
    c1: float
    threshold: float
    sublevel: float
    bound: float
    passed: bool


def measure_bound_check(f: ScalarField, m: Measure) -> MeasureBoundResult:
    """Check |{f <= inf f + C1 + 1}| >= exp(-C1)/4 with the minimal C1.

    C1 is the least constant with exp(-inf f) <= exp(C1) * mean(exp(-f));
    the conclusion holds for every measurable f, so a failure here always
    indicates an implementation bug, not bad data.
    """
    shifted = f.values - f.values.min()
    w = m.density.values
    mean_decay = float(np.sum(np.exp(-shifted) * w) / np.sum(w))
    c1 = -float(np.log(mean_decay))
    threshold = f.values.min() + c1 + 1.0
    sub = sublevel_measure(f, threshold, m)
    bound = float(np.exp(-c1) / 4.0)
    return MeasureBoundResult(c1=c1, threshold=threshold, sublevel=sub,
                              bound=bound, passed=sub >= bound)


@dataclass
class SublevelCertificate:
    offset: float       # C with |{phi <= inf phi + C}| >= delta
    delta: float
    measured: float
    p0: float
    passed: bool


def sublevel_certificate(phi: ScalarField, metric: HermitianField,
                         p0: float = 8.0) -> SublevelCertificate:
    """Uniform sublevel certificate induced by the measure bound at p0."""
    meas = volume_measure(metric)
    scaled = ScalarField(phi.grid, p0 * phi.values)
    res = measure_bound_check(scaled, meas)
    return SublevelCertificate(
        offset=(res.c1 + 1.0) / p0, delta=res.bound, measured=res.sublevel,
        p0=p0, passed=res.passed)


# ---------------------------------------------------------------------------
# trace growth estimate


@dataclass
class TraceEstimate:
    constants: dict           # A -> sup(trace * exp(-A (phi - inf phi)))
    trace_sup: float
    ceiling: float | None
    passed: bool | None


def trace_estimate(phi: ScalarField, metric: HermitianField,
                   amplitudes=(1.0, 2.0, 4.0, 8.0),
                   ceiling: float | None = None) -> TraceEstimate:
    """Fit of trace(ginv g_phi) <= C exp(A (phi - inf phi)) over a grid of A."""
    g_phi = HermitianField(phi.grid, metric.values + ddbar(phi).values,
                           check=False)
    tr = trace_ratio(metric, g_phi).values
    psi = phi.values - phi.values.min()
    constants = {float(a): float(np.max(tr * np.exp(-a * psi)))
                 for a in amplitudes}
    passed = None
    if ceiling is not None:
        passed = min(constants.values()) <= ceiling
    return TraceEstimate(constants=constants, trace_sup=float(tr.max()),
                         ceiling=ceiling, passed=passed)


# ---------------------------------------------------------------------------
# nonnegative-potential estimates in the Gauduchon gauge


@dataclass
class ShiftedPotentialChecks:
    c0: float                     # -inf of the Gauduchon Laplacian of psi
    c1: float                     # gradient-power estimate constant
    c2: float                     # sup bound constant
    conformal_identity_gap: float
    p_list: list[float]
    lhs: list[float]
    rhs: list[float]


def shifted_potential_checks(phi: ScalarField, metric: HermitianField,
                             u: ScalarField,
                             p_list=(1.0, 2.0, 4.0, 8.0)) -> ShiftedPotentialChecks:
    """Estimates for psi = phi - inf phi in the conformal Gauduchon metric.

    Verifies the pointwise identity Lap_G psi = exp(-u) Lap psi, then
    measures the constants in

        int |del psi^{(p+1)/2}|_G^2 vol_G <= C1 p int psi^p vol_G
        sup psi <= C2 max(int psi vol_G, 1).

    The gradient of psi^{(p+1)/2} is evaluated by the chain rule from the
    exact spectral gradient of psi, which avoids differentiating the
    fractional power across its zero set.
    """
    grid = phi.grid
    psi_vals = phi.values - phi.values.min()
    psi = ScalarField(grid, psi_vals)
    e_u = np.exp(u.values)
    metric_G = metric.scaled_by(e_u)

    lap = chern_laplacian(psi, metric)
    lap_G = chern_laplacian(psi, metric_G)
    gap = float(np.max(np.abs(lap_G.values - lap.values / e_u)))
    c0 = -float(lap_G.values.min())

    dens_G = metric_G.det()
    cell = grid.cell_volume
    energy_G = gradient_energy(psi, metric_G)

    lhs_list, rhs_list, c1 = [], [], 0.0
    for p in p_list:
        weight = ((p + 1.0) / 2.0) ** 2 * psi_vals ** (p - 1.0)
        lhs = _quad(weight * energy_G, dens_G, cell)
        rhs = p * _quad(psi_vals**p, dens_G, cell)
        lhs_list.append(lhs)
        rhs_list.append(rhs)
        if rhs > 0.0:
            c1 = max(c1, lhs / rhs)

    mass = _quad(psi_vals, dens_G, cell)
    c2 = float(psi_vals.max()) / max(mass, 1.0)
    return ShiftedPotentialChecks(
        c0=c0, c1=c1, c2=c2, conformal_identity_gap=gap,
        p_list=list(p_list), lhs=lhs_list, rhs=rhs_list)


@dataclass
class PoincareCheck:
    l2_deviation: float
    gradient_energy: float
    ratio: float


def poincare_check(psi: ScalarField, metric_G: HermitianField) -> PoincareCheck:
    """Empirical Poincare constant of the Gauduchon volume form.

    Returns ||psi - mean||_{L^2} and the gradient energy (both against
    the Gauduchon volume) and their ratio; on the flat torus the ratio
    for a lowest mode is 2, the inverse square root of the first
    Laplacian eigenvalue 1/4.
    """
    grid = psi.grid
    dens = metric_G.det()
    cell = grid.cell_volume
    total = _quad(np.ones(grid.sizes), dens, cell)
    mean = _quad(psi.values, dens, cell) / total
    l2 = float(np.sqrt(_quad((psi.values - mean) ** 2, dens, cell)))
    energy = _quad(gradient_energy(psi, metric_G), dens, cell)
    ratio = l2 / np.sqrt(energy) if energy > 0.0 else 0.0
    return PoincareCheck(l2_deviation=l2, gradient_energy=energy, ratio=ratio)


# ---------------------------------------------------------------------------
# structural identities of the solved equation


def ricci_identity_check(phi: ScalarField, b: float, F: ScalarField,
                         metric: HermitianField) -> float:
    """Sup-norm of Ric(g_phi) - Ric(g) + (1/2pi) ddbar F for a solved pair."""
    g_phi = HermitianField(phi.grid, metric.values + ddbar(phi).values,
                           check=False)
    delta = (ricci_form(g_phi).values - ricci_form(metric).values
             + ddbar(F).values / (2.0 * np.pi))
    return float(np.max(np.abs(delta)))


@dataclass
class BFormulaCheck:
    predicted: float
    deviation: float
    condition_holds: bool
    ddbar_norms: tuple


def b_formula_check(metric: HermitianField, F: ScalarField,
                    b: float) -> BFormulaCheck:
    """Compare b with log(vol / int e^F vol), valid under ddbar-closedness.

    condition_holds records whether ddbar(omega) and ddbar(omega^2)
    vanish; when it is false the deviation is reported without any
    pass/fail semantics.
    """
    meas = volume_measure(metric)
    vol = meas.total_mass
    int_ef = integrate(ScalarField(F.grid, np.exp(F.values)), meas)
    predicted = float(np.log(vol / int_ef))
    flags = classify_metric(metric)
    return BFormulaCheck(
        predicted=predicted, deviation=abs(b - predicted),
        condition_holds=flags["volume_formula"],
        ddbar_norms=(flags.norms["ddbar_omega"], flags.norms["ddbar_omega_sq"]))


# ---------------------------------------------------------------------------
# aggregate report


@dataclass
class CheckResult:
    name: str
    passed: bool | None          # None marks report-only checks
    constants: dict


@dataclass
class DiagnosticsReport:
    n: int
    grid_sizes: tuple
    checks: dict

    def add(self, name, passed, constants):
        if name in self.checks:
            raise ValueError(f"duplicate check {name}")
        self.checks[name] = CheckResult(name, passed, constants)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks.values() if c.passed is False]
