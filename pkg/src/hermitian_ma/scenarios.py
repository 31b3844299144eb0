"""Scenario configuration: metric/right-hand-side families and parsing.

Scenarios are flat key-path text files (``key = value`` per line, ``#``
comments).  Metrics and right-hand sides are finite lists of plane-wave
modes, which keeps every input band-limited so the spectral calculus is
exact, and makes scenario files diffable and serializable.

Mode syntax (one line per mode, zero-based indices):

    F.mode.0 = AMPLITUDE cos|sin K0 K1 ... K_{2n-1}

with the integer frequency vector K below the Nyquist band of the grid.
Metric families:

    flat_kahler            identity metric
    kahler_potential       identity plus ddbar of a trig potential
                           (metric.potential.mode.K entries)
    conformal_kahler       exp(v) times identity, v a trig polynomial
                           (metric.conformal.mode.K entries)
    hermitian_perturbed    identity plus trig modes with Hermitian matrix
                           amplitudes (metric.mode.K.freq / .phase /
                           .matrix, matrix as n^2 re,im pairs row-major)

When ``phi_star.mode.K`` entries are present the right-hand side is
manufactured from that potential and any ``F.mode`` entries are
rejected.  Positive definiteness of the metric is validated numerically
over the whole grid at load time.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .calculus import HermitianField, ddbar
from .grid import ScalarField, TorusGrid, build_grid
from .solver import SolveOptions, manufacture

__all__ = [
    "ConfigError",
    "Mode",
    "MatrixMode",
    "Scenario",
    "parse_config_text",
    "load_scenario",
    "scenario_from_mapping",
    "trig_sum",
    "random_band_limited",
    "random_admissible_potential",
]

METRIC_FAMILIES = ("flat_kahler", "kahler_potential", "conformal_kahler",
                   "hermitian_perturbed")


class ConfigError(ValueError):
    """Configuration problem, carrying the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"key '{key}': {message}")


@dataclass
class Mode:
    amplitude: float
    phase: str                 # "cos" or "sin"
    freq: tuple[int, ...]


@dataclass
class MatrixMode:
    phase: str
    freq: tuple[int, ...]
    matrix: np.ndarray         # Hermitian amplitude, shape (n, n)


@dataclass
class Scenario:
    name: str
    n: int
    sizes: tuple[int, ...]
    seed: int = 0
    metric_family: str = "flat_kahler"
    metric_modes: list = dc_field(default_factory=list)
    f_modes: list = dc_field(default_factory=list)
    f_normalize: str = "raw"
    f_offset: float = 0.0
    phi_star_modes: list = dc_field(default_factory=list)
    solve_options: SolveOptions = dc_field(default_factory=SolveOptions)
    gauduchon_tol: float = 1e-10
    diagnostics_checks: tuple[str, ...] = ("all",)
    diagnostics_p0: float = 8.0
    diagnostics_trials: int = 20000

    def build_grid(self) -> TorusGrid:
        return build_grid(self.n, self.sizes)

    def build_metric(self, grid: TorusGrid) -> HermitianField:
        n = grid.n
        eye = np.zeros(grid.sizes + (n, n), dtype=np.complex128)
        for i in range(n):
            eye[..., i, i] = 1.0
        if self.metric_family == "flat_kahler":
            values = eye
        elif self.metric_family == "kahler_potential":
            rho = trig_sum(grid, self.metric_modes)
            values = eye + ddbar(ScalarField(grid, rho)).values
        elif self.metric_family == "conformal_kahler":
            v = trig_sum(grid, self.metric_modes)
            values = eye * np.exp(v)[..., None, None]
        elif self.metric_family == "hermitian_perturbed":
            values = eye.copy()
            for mode in self.metric_modes:
                profile = _wave(grid, mode.freq, mode.phase)
                values = values + profile[..., None, None] * mode.matrix
        else:
            raise ConfigError("metric.family",
                              f"unknown family '{self.metric_family}'")
        metric = HermitianField(grid, values, check=False)
        worst = metric.min_eig()
        if worst <= 0.0:
            raise ConfigError(
                "metric", f"not positive definite on the grid (min eigenvalue {worst:.3e})")
        return metric

    def phi_star(self, grid: TorusGrid) -> ScalarField | None:
        if not self.phi_star_modes:
            return None
        return ScalarField(grid, trig_sum(grid, self.phi_star_modes))

    def build_rhs(self, grid: TorusGrid, metric: HermitianField) -> ScalarField:
        star = self.phi_star(grid)
        if star is not None:
            values = manufacture(metric, star).values
        else:
            values = trig_sum(grid, self.f_modes)
        if self.f_normalize == "sup_zero":
            values = values - values.max()
        return ScalarField(grid, values + self.f_offset)


def _wave(grid: TorusGrid, freq, phase: str) -> np.ndarray:
    arg = np.zeros(grid.sizes)
    for a, k in enumerate(freq):
        if k:
            arg = arg + k * grid.coordinates[a]
    return np.cos(arg) if phase == "cos" else np.sin(arg)


def trig_sum(grid: TorusGrid, modes) -> np.ndarray:
    out = np.zeros(grid.sizes)
    for mode in modes:
        out += mode.amplitude * _wave(grid, mode.freq, mode.phase)
    return out


# ---------------------------------------------------------------------------
# config parsing


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines into an ordered mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = value.strip()
    return out


def _parse_int(mapping, key, default=None):
    if key not in mapping:
        if default is None:
            raise ConfigError(key, "required key missing")
        return default
    try:
        return int(mapping[key])
    except ValueError:
        raise ConfigError(key, f"expected integer, got {mapping[key]!r}") from None


def _parse_float(mapping, key, default):
    if key not in mapping:
        return default
    try:
        return float(mapping[key])
    except ValueError:
        raise ConfigError(key, f"expected number, got {mapping[key]!r}") from None


def _indexed_keys(mapping, prefix):
    """Sorted (index, key) pairs for keys of the form prefix.<int>."""
    found = {}
    for key in mapping:
        if not key.startswith(prefix + "."):
            continue
        tail = key[len(prefix) + 1:].split(".", 1)[0]
        try:
            idx = int(tail)
        except ValueError:
            raise ConfigError(key, f"expected integer index after '{prefix}.'") from None
        found[idx] = tail
    return sorted(found)


def _parse_mode(key: str, value: str, naxes: int) -> Mode:
    tokens = value.split()
    if len(tokens) != 2 + naxes:
        raise ConfigError(key, f"expected 'AMP cos|sin {naxes} frequencies', got {value!r}")
    try:
        amp = float(tokens[0])
    except ValueError:
        raise ConfigError(key, f"bad amplitude {tokens[0]!r}") from None
    phase = tokens[1]
    if phase not in ("cos", "sin"):
        raise ConfigError(key, f"phase must be cos or sin, got {phase!r}")
    try:
        freq = tuple(int(t) for t in tokens[2:])
    except ValueError:
        raise ConfigError(key, f"bad frequency vector {tokens[2:]!r}") from None
    return Mode(amplitude=amp, phase=phase, freq=freq)


def _check_band(key: str, freq, sizes):
    for a, (k, size) in enumerate(zip(freq, sizes)):
        if abs(k) >= size // 2:
            raise ConfigError(
                key, f"frequency {k} on axis {a} reaches the Nyquist band of size {size}")


def scenario_from_mapping(mapping: dict[str, str], name: str = "scenario") -> Scenario:
    known_prefixes = ("name", "n", "grid.sizes", "seed", "metric.", "F.",
                      "phi_star.", "solve.", "gauduchon.", "diagnostics.")
    for key in mapping:
        if not any(key == p or key.startswith(p) for p in known_prefixes):
            raise ConfigError(key, "unknown key")

    n = _parse_int(mapping, "n")
    if n not in (2, 3):
        raise ConfigError("n", f"complex dimension must be 2 or 3, got {n}")
    naxes = 2 * n

    if "grid.sizes" not in mapping:
        raise ConfigError("grid.sizes", "required key missing")
    try:
        sizes = tuple(int(t) for t in mapping["grid.sizes"].split())
    except ValueError:
        raise ConfigError("grid.sizes", f"expected integers, got {mapping['grid.sizes']!r}") from None
    if len(sizes) != naxes:
        raise ConfigError("grid.sizes", f"expected {naxes} axis sizes, got {len(sizes)}")
    for a, s in enumerate(sizes):
        if s < 4 or s % 2:
            raise ConfigError("grid.sizes", f"axis {a} size {s} must be even and >= 4")

    family = mapping.get("metric.family", "flat_kahler")
    if family not in METRIC_FAMILIES:
        raise ConfigError("metric.family",
                          f"unknown family {family!r}; choose from {METRIC_FAMILIES}")

    metric_modes: list = []
    if family in ("kahler_potential", "conformal_kahler"):
        prefix = ("metric.potential.mode" if family == "kahler_potential"
                  else "metric.conformal.mode")
        for idx in _indexed_keys(mapping, prefix):
            key = f"{prefix}.{idx}"
            mode = _parse_mode(key, mapping[key], naxes)
            _check_band(key, mode.freq, sizes)
            metric_modes.append(mode)
        if not metric_modes:
            raise ConfigError(prefix, f"family {family} needs at least one mode")
    elif family == "hermitian_perturbed":
        for idx in _indexed_keys(mapping, "metric.mode"):
            base = f"metric.mode.{idx}"
            for sub in ("freq", "phase", "matrix"):
                if f"{base}.{sub}" not in mapping:
                    raise ConfigError(f"{base}.{sub}", "required key missing")
            try:
                freq = tuple(int(t) for t in mapping[f"{base}.freq"].split())
            except ValueError:
                raise ConfigError(f"{base}.freq", "expected integers") from None
            if len(freq) != naxes:
                raise ConfigError(f"{base}.freq", f"expected {naxes} entries")
            _check_band(f"{base}.freq", freq, sizes)
            phase = mapping[f"{base}.phase"]
            if phase not in ("cos", "sin"):
                raise ConfigError(f"{base}.phase", f"phase must be cos or sin, got {phase!r}")
            try:
                nums = [float(t) for t in mapping[f"{base}.matrix"].split()]
            except ValueError:
                raise ConfigError(f"{base}.matrix", "expected numbers") from None
            if len(nums) != 2 * n * n:
                raise ConfigError(f"{base}.matrix",
                                  f"expected {2 * n * n} numbers (re,im pairs row-major)")
            mat = (np.array(nums[0::2]) + 1j * np.array(nums[1::2])).reshape(n, n)
            if np.max(np.abs(mat - mat.conj().T)) > 1e-12:
                raise ConfigError(f"{base}.matrix", "amplitude matrix is not Hermitian")
            metric_modes.append(MatrixMode(phase=phase, freq=freq, matrix=mat))
        if not metric_modes:
            raise ConfigError("metric.mode", "family hermitian_perturbed needs at least one mode")

    f_modes = []
    for idx in _indexed_keys(mapping, "F.mode"):
        key = f"F.mode.{idx}"
        mode = _parse_mode(key, mapping[key], naxes)
        _check_band(key, mode.freq, sizes)
        f_modes.append(mode)

    phi_star_modes = []
    for idx in _indexed_keys(mapping, "phi_star.mode"):
        key = f"phi_star.mode.{idx}"
        mode = _parse_mode(key, mapping[key], naxes)
        _check_band(key, mode.freq, sizes)
        phi_star_modes.append(mode)
    if phi_star_modes and f_modes:
        raise ConfigError("F.mode", "F.mode conflicts with phi_star (manufactured) entries")

    normalize = mapping.get("F.normalize", "raw")
    if normalize not in ("raw", "sup_zero"):
        raise ConfigError("F.normalize", f"expected raw or sup_zero, got {normalize!r}")

    checks = tuple(t.strip() for t in
                   mapping.get("diagnostics.checks", "all").split(",") if t.strip())

    opts = SolveOptions(
        max_newton_iters=_parse_int(mapping, "solve.max_newton_iters", 50),
        residual_tol=_parse_float(mapping, "solve.residual_tol", 1e-10),
        krylov_tol=_parse_float(mapping, "solve.krylov_tol", 1e-8),
        damping=_parse_float(mapping, "solve.damping", 0.5),
        min_step=_parse_float(mapping, "solve.min_step", 1e-4),
        positivity_floor=_parse_float(mapping, "solve.positivity_floor", 1e-6),
        continuity_steps=_parse_int(mapping, "solve.continuity_steps", 1),
    )

    return Scenario(
        name=mapping.get("name", name),
        n=n,
        sizes=sizes,
        seed=_parse_int(mapping, "seed", 0),
        metric_family=family,
        metric_modes=metric_modes,
        f_modes=f_modes,
        f_normalize=normalize,
        f_offset=_parse_float(mapping, "F.offset", 0.0),
        phi_star_modes=phi_star_modes,
        solve_options=opts,
        gauduchon_tol=_parse_float(mapping, "gauduchon.tol", 1e-10),
        diagnostics_checks=checks,
        diagnostics_p0=_parse_float(mapping, "diagnostics.p0", 8.0),
        diagnostics_trials=_parse_int(mapping, "diagnostics.trials", 20000),
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    from pathlib import Path
    return scenario_from_mapping(parse_config_text(text), name=Path(path).stem)


# ---------------------------------------------------------------------------
# random field factories (tests and probes)


def random_band_limited(grid: TorusGrid, rng, amplitude: float = 1.0,
                        max_abs_freq: int = 2, modes: int = 8) -> ScalarField:
    """Random trigonometric polynomial with frequencies in a small box."""
    naxes = 2 * grid.n
    values = np.zeros(grid.sizes)
    for _ in range(modes):
        freq = rng.integers(-max_abs_freq, max_abs_freq + 1, size=naxes)
        phase = "cos" if rng.random() < 0.5 else "sin"
        amp = amplitude * rng.standard_normal() / np.sqrt(modes)
        values += amp * _wave(grid, freq, phase)
    return ScalarField(grid, values)


def random_admissible_potential(grid: TorusGrid, metric: HermitianField, rng,
                                amplitude: float = 0.05) -> ScalarField:
    """Small random potential keeping g + ddbar(phi) safely positive."""
    base = metric.min_eig()
    f = random_band_limited(grid, rng, amplitude=amplitude)
    values = f.values - f.values.mean()
    for _ in range(60):
        cand = HermitianField(
            grid, metric.values + ddbar(ScalarField(grid, values)).values,
            check=False)
        if cand.min_eig() >= 0.5 * base:
            return ScalarField(grid, values)
        values = 0.5 * values
    raise RuntimeError("could not produce an admissible random potential")
