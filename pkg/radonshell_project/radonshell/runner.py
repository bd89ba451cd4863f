"""
Experiment runs: configuration, execution, CSV/SVG outputs and manifests.

Every run lives in its own directory ``<out>/<kind>-<hash12>-<timestamp>``
and ends with ``manifest.json``, written atomically once everything it
lists exists.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from django.utils import timezone  # noqa: E402
from rest_framework import serializers  # noqa: E402

from . import __version__  # noqa: E402
from .exceptions import InvalidInputError  # noqa: E402
from .frames import jacobian_scan  # noqa: E402
from .geometry_core import (  # noqa: E402
    SliceKind,
    SphereShell,
    location_lemma_trials,
    regular_inscribed_simplex,
    shell_slice_grid,
)
from .mc_engine import lower_bound_scan, radius_scan, reciprocal_integral, thickness_scan  # noqa: E402
from .profiles import cap_witness, gaussian_bump, zonal_polynomial  # noqa: E402
from .radon import (  # noqa: E402
    GaussianField,
    adjointness_check,
    cap_family,
    decay_experiment,
    layerwise_sum,
)
from .serializers import ExperimentConfigSerializer, RunManifestSerializer, build_profile  # noqa: E402
from .wave import (  # noqa: E402
    energy_norm,
    exterior_energy,
    radiation_convergence,
    strichartz_exterior,
    wave_residual,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
DEFAULT_THICKNESSES = (0.1, 0.05, 0.025, 0.0125)
DEFAULT_LOWER_BOUND_THICKNESSES = (0.1, 0.05, 0.025)
RADIUS_SCAN_FACTORS = (1.0, 2.0, 4.0)
SLOW_TIER_DIM = 4
DEFAULT_DECAY_RADII = (4.0, 8.0, 16.0, 32.0)
HOMOGENEITY_FACTOR = 2.0
HOMOGENEITY_SAMPLES = 20000
RADIATION_FLOOR = 1e-10
# excluded from the hash: they change where and how fast a run goes, not what it computes
UNHASHED_FIELDS = ('output_dir', 'workers')


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    dim: int
    seed: int
    samples: int | None = None
    radius: float = 1.0
    thicknesses: tuple = ()
    radii: tuple = ()
    times: tuple = ()
    eps: float = 0.5
    profiles: tuple = ()
    quadrature_level: int = 8
    gamma: float = 2.0
    k_range: tuple = (0, 6)
    claim: str = 'b'
    count: int = 100
    workers: int = 1
    block_size: int = 16384
    soft_criteria: tuple = ()
    soft_ok: bool = False
    output_dir: str = 'results'

    @classmethod
    def from_data(cls, data: dict) -> 'ExperimentConfig':
        """Validate through ExperimentConfigSerializer; raises serializers.ValidationError."""
        serializer = ExperimentConfigSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        values = dict(serializer.validated_data)
        for name in ('thicknesses', 'radii', 'times', 'k_range', 'soft_criteria'):
            values[name] = tuple(values[name])
        values['profiles'] = tuple(dict(profile) for profile in values['profiles'])
        return cls(**values)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        for name, value in data.items():
            if isinstance(value, tuple):
                data[name] = list(value)
        data['profiles'] = [dict(profile) for profile in self.profiles]
        return data

    def config_hash(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k not in UNHASHED_FIELDS}
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def is_soft(self, criterion: str) -> bool:
        return criterion in self.soft_criteria


@dataclass
class Criterion:
    name: str
    statement: str
    passed: bool
    soft: bool = False
    value: float | None = None
    detail: str = ''

    @property
    def status(self) -> str:
        if self.passed:
            return 'pass'
        return 'soft-fail' if self.soft else 'fail'

    def to_dict(self) -> dict:
        value = None if self.value is None or not math.isfinite(self.value) else float(self.value)
        return {'name': self.name, 'statement': self.statement, 'status': self.status, 'soft': self.soft,
                'value': value, 'detail': self.detail}


@dataclass(frozen=True)
class RunManifest:
    path: Path
    data: dict

    @property
    def directory(self) -> Path:
        return self.path.parent

    @property
    def status(self) -> str:
        return self.data['status']

    @property
    def hard_failures(self) -> list:
        return [c['name'] for c in self.data['criteria'] if c['status'] == 'fail']

    @property
    def soft_failures(self) -> list:
        return [c['name'] for c in self.data['criteria'] if c['status'] == 'soft-fail']


# ------------------------------------------------------------------ outputs

def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class RunDirectory:
    """The directory of one run and the outputs written into it."""

    def __init__(self, root, config: ExperimentConfig):
        root = Path(root)
        stamp = timezone.now().strftime('%Y%m%dT%H%M%SZ')
        base = f"{config.kind}-{config.config_hash()[:12]}-{stamp}"
        path = root / base
        suffix = 1
        while path.exists():
            path = root / f"{base}-{suffix}"
            suffix += 1
        path.mkdir(parents=True)
        self.path = path
        self.outputs = []

    def write_csv(self, name: str, header: list, rows) -> Path:
        target = self.path / name
        with open(target, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(value) for value in row])
        self.outputs.append(name)
        return target

    def write_plot(self, name: str, fit, xlabel: str, ylabel: str, title: str) -> Path:
        """Log-log plot of the fitted points and the fitted line."""
        target = self.path / name
        x = np.array([point[0] for point in fit.points])
        y = np.array([point[1] for point in fit.points])
        line = np.exp(fit.intercept) * x ** fit.exponent
        with plt.rc_context({'svg.hashsalt': 'radonshell', 'svg.fonttype': 'none'}):
            figure, axes = plt.subplots(figsize=(5.0, 4.0))
            axes.loglog(x, y, 'o', label='measured')
            axes.loglog(x, line, '-', label=f'slope {fit.exponent:.4f}')
            axes.set_xlabel(xlabel)
            axes.set_ylabel(ylabel)
            axes.set_title(title)
            axes.legend()
            figure.savefig(target, format='svg', metadata={'Date': None})
            plt.close(figure)
        self.outputs.append(name)
        return target


def write_json_atomic(path: Path, payload: dict) -> None:
    handle, temporary = tempfile.mkstemp(dir=path.parent, prefix='.manifest-', suffix='.tmp')
    try:
        with os.fdopen(handle, 'w') as stream:
            json.dump(payload, stream, indent=2, sort_keys=True)
            stream.write('\n')
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise


# ------------------------------------------------------------- experiments

EXPERIMENTS = {}


def experiment(kind: str):
    def register(function):
        EXPERIMENTS[kind] = function
        return function
    return register


def _profiles(config: ExperimentConfig, defaults) -> list:
    if config.profiles:
        return [build_profile(data, config.dim) for data in config.profiles]
    return list(defaults)


def _smooth_family(d: int) -> list:
    return [
        gaussian_bump(d, 0.0, 0.5),
        gaussian_bump(d, 0.5, 0.4),
        gaussian_bump(d, 0.0, 0.4, order=1),
        zonal_polynomial(d, 1, 0.0, 0.5),
        zonal_polynomial(d, 2, 0.3, 0.4),
    ]


def _reach(profile) -> float:
    a, b = profile.support
    return max(abs(a), abs(b))


def _strictly_decreasing(values) -> bool:
    return all(later < earlier for earlier, later in zip(values, values[1:]))


@experiment('reciprocal-scan')
def run_reciprocal_scan(config: ExperimentConfig, run_dir: RunDirectory):
    d, r = config.dim, config.radius
    ws = config.thicknesses or DEFAULT_THICKNESSES
    options = {'workers': config.workers, 'block_size': config.block_size}
    estimates, fit = thickness_scan(d, r, ws, config.samples, config.seed, **options)
    run_dir.write_csv(
        'thickness_scan.csv',
        ['w [length]', 'estimate', 'std_error', 'truncated_fraction', 'acceptance_fraction'],
        [(w, e.value, e.std_error, e.truncated_mass_fraction, e.acceptance_fraction) for w, e in estimates],
    )
    run_dir.write_plot('thickness_scan.svg', fit, 'w [length]', 'reciprocal integral',
                       f'd={d}, r={r}: w-exponent {fit.exponent:.3f}')

    n = min(config.samples, HOMOGENEITY_SAMPLES)
    radii = [r * factor for factor in RADIUS_SCAN_FACTORS]
    radius_estimates, radius_fit = radius_scan(d, radii, min(ws) / r, n, config.seed, **options)
    run_dir.write_csv(
        'radius_scan.csv',
        ['r [length]', 'estimate', 'std_error'],
        [(radius, e.value, e.std_error) for radius, e in radius_estimates],
    )
    run_dir.write_plot('radius_scan.svg', radius_fit, 'r [length]', 'reciprocal integral',
                       f'd={d}, w/r={min(ws) / r:g}: r-exponent {radius_fit.exponent:.3f}')

    reference = regular_inscribed_simplex(r, d)
    shell = SphereShell(r, min(ws), d)
    base = reciprocal_integral(reference, shell, n, seed=config.seed, **options)
    scaled = reciprocal_integral(reference.vertices * HOMOGENEITY_FACTOR, shell.scaled(HOMOGENEITY_FACTOR), n,
                                 seed=config.seed, **options)
    expected = base.value * HOMOGENEITY_FACTOR ** (d * d)
    homogeneity_error = abs(scaled.value - expected) / abs(expected) if expected else abs(scaled.value)

    tier = 'slow' if d >= SLOW_TIER_DIM else 'standard'
    tolerance = 0.5 if d <= 3 else 0.7
    statement = f'w-exponent of the reciprocal integral equals d+1={d + 1} within {tolerance}'
    if tier == 'slow':
        statement += f' (slow tier: d={d} needs n >= 10^7 per thickness)'
    truncated = max(e.truncated_mass_fraction for _, e in estimates)
    criteria = [
        Criterion('thickness_exponent', statement, abs(fit.exponent - (d + 1)) <= tolerance,
                  config.is_soft('thickness_exponent'), fit.exponent, f'r^2={fit.r_squared:.5f}, tier={tier}'),
        Criterion('radius_exponent', f'r-exponent at fixed w/r equals d^2={d * d} within 0.7',
                  abs(radius_fit.exponent - d * d) <= 0.7, config.is_soft('radius_exponent'),
                  radius_fit.exponent, f'r^2={radius_fit.r_squared:.5f}'),
        Criterion('truncated_mass', 'eps_vol truncation discards less than 1% of accepted mass',
                  truncated < 0.01, config.is_soft('truncated_mass'), truncated),
        Criterion('total_homogeneity', f'rescaling everything by lambda scales the estimate by lambda^{d * d}',
                  homogeneity_error < 1e-9, config.is_soft('total_homogeneity'), homogeneity_error),
    ]
    if tier == 'slow' and config.samples < 10 ** 7:
        logger.warning("d=%d reciprocal scan with n=%d is below the slow-tier sample count", d, config.samples)
    summary = {'exponent': fit.exponent, 'exponent_error': fit.exponent_error, 'r_squared': fit.r_squared,
               'radius_exponent': radius_fit.exponent, 'tier': tier}
    return criteria, summary


@experiment('lower-bound')
def run_lower_bound(config: ExperimentConfig, run_dir: RunDirectory):
    d, r = config.dim, config.radius
    ws = config.thicknesses or DEFAULT_LOWER_BOUND_THICKNESSES
    rows = lower_bound_scan(d, r, ws, config.eps, config.samples, config.seed,
                            workers=config.workers, block_size=config.block_size)
    run_dir.write_csv(
        'lower_bound.csv',
        ['w [length]', 'estimate', 'std_error', 'ratio [estimate / (w^(d+1) r^(d^2-d-1))]'],
        [(w, e.value, e.std_error, ratio) for w, e, ratio in rows],
    )
    ratios = [ratio for _, _, ratio in rows]
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    criteria = [
        Criterion('lower_bound_band', 'cap-restricted estimate / (w^(d+1) r^(d^2-d-1)) stays within a factor 3',
                  spread <= 3.0, config.is_soft('lower_bound_band'), spread),
    ]
    return criteria, {'ratios': ratios}


@experiment('jacobian-check')
def run_jacobian_check(config: ExperimentConfig, run_dir: RunDirectory):
    result = jacobian_scan(config.dim, config.count, config.seed)
    run_dir.write_csv('jacobian.csv', ['d', 'configurations', 'max_relative_error', 'mean_relative_error'],
                      [(result['dim'], result['count'], result['max_error'], result['mean_error'])])
    criteria = [
        Criterion('jacobian', 'finite-difference Jacobian of the change of variables matches the closed form',
                  result['max_error'] < 1e-4, config.is_soft('jacobian'), result['max_error']),
    ]
    return criteria, {'max_error': result['max_error']}


@experiment('geometry-check')
def run_geometry_check(config: ExperimentConfig, run_dir: RunDirectory):
    d = config.dim
    location = location_lemma_trials(d, config.count, config.seed)
    run_dir.write_csv('location_lemma.csv', ['d', 'trials', 'violations', 'worst_ratio'],
                      [(d, location['trials'], location['violations'], location['worst_ratio'])])

    slices = shell_slice_grid((0.5, 1.0, 2.0, 4.0, 8.0), (0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 1.0),
                              offsets_per_shell=25)
    rows = []
    worst = 0.0
    for r, w, c, cut in slices:
        ratio = cut.r_star * cut.w_star / (2.0 * r * w)
        worst = max(worst, ratio)
        rows.append((r, w, c, cut.kind.value, cut.r_star, cut.w_star, ratio))
    run_dir.write_csv('shell_slices.csv',
                      ['r [length]', 'w [length]', 'c [length]', 'kind', 'r_star [length]', 'w_star [length]',
                       'ratio [r_star w_star / 2rw]'], rows)
    nonempty = sum(1 for *_, cut in slices if cut.kind is not SliceKind.EMPTY)
    criteria = [
        Criterion('location_lemma', f'min_k dist(B_k, base of A) <= {d + 1} dist(A_d, base of A)',
                  location['violations'] == 0, config.is_soft('location_lemma'), location['worst_ratio'],
                  f"{location['violations']} violations in {location['trials']} trials"),
        Criterion('shell_slice', 'hyperplane slices of a shell satisfy r_star w_star <= 2 r w',
                  worst <= 1.0 + 1e-12, config.is_soft('shell_slice'), worst,
                  f'{len(slices)} cases, {nonempty} non-empty'),
    ]
    return criteria, {'violations': location['violations'], 'worst_slice_ratio': worst}


@experiment('adjoint-check')
def run_adjoint_check(config: ExperimentConfig, run_dir: RunDirectory):
    d = config.dim
    profiles = _profiles(config, _smooth_family(d))
    rng = np.random.default_rng(config.seed)
    rows = []
    for index, profile in enumerate(profiles):
        center = tuple(float(v) for v in rng.uniform(-0.5, 0.5, d))
        f = GaussianField(center, float(rng.uniform(0.4, 0.8)))
        result = adjointness_check(f, profile, level=config.quadrature_level)
        rows.append((index, profile.kind, result.radon_side, result.adjoint_side, result.relative_error))
    run_dir.write_csv('adjointness.csv', ['pair', 'profile', '<Rf,G>', '<f,R*G>', 'relative_error'], rows)
    worst = max(row[-1] for row in rows)
    criteria = [
        Criterion('adjointness', '<Rf, G> and <f, R*G> agree within 1%', worst < 0.01,
                  config.is_soft('adjointness'), worst, f'{len(rows)} pairs'),
    ]
    return criteria, {'worst_relative_error': worst}


@experiment('decay')
def run_decay(config: ExperimentConfig, run_dir: RunDirectory):
    d = config.dim
    Rs = config.radii or DEFAULT_DECAY_RADII
    if config.profiles:
        profile = build_profile(config.profiles[0], d)
        if config.claim == 'translation':
            family = lambda R: profile.shifted(-R / 2.0)  # noqa: E731
        else:
            family = profile
    else:
        family = cap_family(d)
    result = decay_experiment(family, Rs, claim=config.claim, level=config.quadrature_level)
    run_dir.write_csv('decay.csv', ['R [length]', 'norm', 'tail_change', 'tail_flag', 'bound_ratio'],
                      [(row.R, row.norm, row.tail_change, row.tail_flag, row.bound_ratio) for row in result.rows])
    run_dir.write_plot('decay.svg', result.fit, 'R [length]', f'exterior L^{2 * d} norm',
                       f'd={d}, claim {result.claim}: slope {result.fit.exponent:.4f}')
    comparison = 'equals' if result.sharp else 'is at most'
    criteria = [
        Criterion('decay_slope', f'fitted slope {comparison} -(d-1)/(2d)={result.target:.4f} (tolerance 0.1)',
                  result.slope_ok, config.is_soft('decay_slope'), result.fit.exponent),
        Criterion('decay_tail', 'doubling rho_max changes every norm by less than 1%', result.tail_ok,
                  config.is_soft('decay_tail'), max(row.tail_change for row in result.rows)),
    ]
    return criteria, {'exponent': result.fit.exponent, 'target': result.target, 'sharp': result.sharp}


@experiment('layerwise')
def run_layerwise(config: ExperimentConfig, run_dir: RunDirectory):
    d = config.dim
    profiles = _profiles(config, [gaussian_bump(d, 0.0, 0.5), zonal_polynomial(d, 1, 0.0, 0.5),
                                  cap_witness(d, 1.0)])
    k_min, k_max = config.k_range
    doubled_max = k_min + 2 * (k_max - k_min) + 1
    rows = []
    changes = []
    for index, profile in enumerate(profiles):
        base = layerwise_sum(profile, config.gamma, (k_min, k_max), level=config.quadrature_level)
        doubled = layerwise_sum(profile, config.gamma, (k_min, doubled_max), level=config.quadrature_level)
        change = abs(doubled.ratio - base.ratio) / doubled.ratio if doubled.ratio > 0 else 0.0
        changes.append(change)
        rows.append((index, profile.kind, k_min, k_max, base.total, base.ratio))
        rows.append((index, profile.kind, k_min, doubled_max, doubled.total, doubled.ratio))
    run_dir.write_csv('layerwise.csv', ['profile', 'kind', 'k_min', 'k_max', 'layer_sum', 'ratio [sum / |G|^2]'],
                      rows)
    worst = max(changes)
    criteria = [
        Criterion('layerwise_stability', 'layer sum over |G|^2 changes by less than 5% when the range doubles',
                  worst < 0.05, config.is_soft('layerwise_stability'), worst),
    ]
    return criteria, {'worst_change': worst}


@experiment('wave-energy')
def run_wave_energy(config: ExperimentConfig, run_dir: RunDirectory):
    d = config.dim
    profiles = _profiles(config, _smooth_family(d))
    times = config.times or (0.0, 2.0)
    rows = []
    worst_isometry = 0.0
    worst_drift = 0.0
    for index, profile in enumerate(profiles):
        ratios = []
        for t in times:
            result = energy_norm(profile, t, level=config.quadrature_level)
            ratios.append(result.ratio)
            rows.append((index, profile.kind, t, result.energy, result.g_l2, result.ratio, result.tail_change))
            worst_isometry = max(worst_isometry, abs(result.ratio - 1.0))
        worst_drift = max(worst_drift, max(ratios) - min(ratios))
    run_dir.write_csv('energy.csv', ['profile', 'kind', 't [time]', 'energy', '|G|_L2', 'ratio', 'tail_change'],
                      rows)

    rng = np.random.default_rng(config.seed)
    directions = rng.standard_normal((config.count, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    points = directions * rng.uniform(0.2, 2.0, (config.count, 1))
    sample_times = rng.uniform(0.0, 2.0, config.count)
    residual = wave_residual(profiles[0], points, sample_times)
    run_dir.write_csv('residual.csv', ['point', 't [time]', 'u', 'u_tt', 'relative_residual'],
                      [(i, sample_times[i], residual['u'][i], residual['u_tt'][i], residual['relative'][i])
                       for i in range(config.count)])
    criteria = [
        Criterion('energy_isometry', 'energy of (u, u_t) equals 2|G|^2 within 2%', worst_isometry <= 0.02,
                  config.is_soft('energy_isometry'), worst_isometry, f'{len(profiles)} profiles'),
        Criterion('energy_conservation', 'the isometry ratio is constant in t within 0.01', worst_drift < 0.01,
                  config.is_soft('energy_conservation'), worst_drift),
        Criterion('wave_residual', 'finite-difference residual of u_tt - Laplacian u below 1e-4 relative',
                  residual['max_relative'] < 1e-4, config.is_soft('wave_residual'), residual['max_relative'],
                  f'{config.count} sample points'),
    ]
    return criteria, {'worst_isometry_error': worst_isometry, 'worst_drift': worst_drift}


@experiment('wave-radiation')
def run_wave_radiation(config: ExperimentConfig, run_dir: RunDirectory):
    d = config.dim
    profile = _profiles(config, [gaussian_bump(d, 0.0, 0.25)])[0]
    b = _reach(profile)
    times = config.times or tuple(factor * b for factor in (5.0, 10.0, 20.0, 40.0))
    rows = radiation_convergence(profile, times, level=config.quadrature_level)
    run_dir.write_csv('radiation.csv', ['t [time]', 'error_u_t', 'error_u_r', 'window_clipped'],
                      [(row.t, row.error_t, row.error_r, row.clipped) for row in rows])
    errors_t = [row.error_t for row in rows]
    errors_r = [row.error_r for row in rows]
    clipped = sum(row.clipped for row in rows)
    # in d=3 the u_t mismatch vanishes identically once the window clears the origin
    floor = RADIATION_FLOOR * max(1.0, profile.l2_norm())

    def decays(errors):
        return all(e <= floor for e in errors) or _strictly_decreasing(errors)

    criteria = [
        Criterion('radiation_u_t', '|r^mu u_t - G_+(r - t)| decreases along t', decays(errors_t),
                  config.is_soft('radiation_u_t'), errors_t[-1], f'{clipped} clipped windows'),
        Criterion('radiation_u_r', '|r^mu u_r + G_+(r - t)| decreases along t', decays(errors_r),
                  config.is_soft('radiation_u_r'), errors_r[-1]),
    ]
    return criteria, {'errors_t': errors_t, 'errors_r': errors_r}


@experiment('wave-exterior')
def run_wave_exterior(config: ExperimentConfig, run_dir: RunDirectory):
    d, R = config.dim, config.radius
    # profiles with vanishing s-mean; a nonzero mean leaves exterior energy of order width/|t|
    profiles = _profiles(config, [gaussian_bump(d, 0.0, R / 6.0, order=1),
                                  zonal_polynomial(d, 1, 0.0, R / 6.0, order=1)])
    times = config.times or (2.0 * R, 4.0 * R, 8.0 * R)
    rows = []
    final = []
    monotone = True
    inside = True
    for index, profile in enumerate(profiles):
        at_zero = exterior_energy(profile, 0.0, R, level=config.quadrature_level)
        inside = inside and at_zero.energy <= at_zero.total * (1.0 + 1e-9)
        fractions = []
        for t in times:
            result = exterior_energy(profile, t, R, level=config.quadrature_level)
            fractions.append(result.fraction)
            rows.append((index, profile.kind, t, result.energy, result.total, result.fraction, result.tail_change))
        monotone = monotone and _strictly_decreasing(fractions)
        final.append(fractions[-1])
    run_dir.write_csv('exterior_energy.csv',
                      ['profile', 'kind', 't [time]', 'exterior_energy', 'total_energy', 'fraction', 'tail_change'],
                      rows)
    criteria = [
        Criterion('exterior_decay', f'exterior energy over |x| > |t|+R is below 1% of the total at |t|={max(times):g}',
                  max(final) < 0.01, config.is_soft('exterior_decay'), max(final)),
        Criterion('exterior_monotone', 'the exterior energy fraction decreases in |t|', monotone,
                  config.is_soft('exterior_monotone')),
        Criterion('exterior_bounded', 'exterior energy at t=0 does not exceed the total', inside,
                  config.is_soft('exterior_bounded')),
    ]
    return criteria, {'final_fractions': final}


@experiment('strichartz')
def run_strichartz(config: ExperimentConfig, run_dir: RunDirectory):
    R = config.radius
    profile = _profiles(config, [gaussian_bump(5, 0.0, R / 6.0)])[0]
    r_list = config.radii or (2.0 * R, 4.0 * R, 8.0 * R)
    result = strichartz_exterior(profile, r_list, R, level=config.quadrature_level)
    run_dir.write_csv('strichartz.csv', ['r [length]', 'norm', 'time_tail', 'radial_tail'],
                      [(row.r, row.norm, row.time_tail, row.radial_tail) for row in result.rows])
    if result.fit is not None:
        run_dir.write_plot('strichartz.svg', result.fit, 'r [length]', 'L^{7/3}_t L^{14/3}_x norm',
                           f'd=5: slope {result.fit.exponent:.4f}')
    exponent = result.fit.exponent if result.fit is not None else None
    criteria = [
        Criterion('strichartz_monotone', 'the exterior Strichartz norm decreases in r', result.monotone,
                  config.is_soft('strichartz_monotone')),
        Criterion('strichartz_negative_slope', 'the fitted slope in r is negative',
                  exponent is not None and exponent < 0, config.is_soft('strichartz_negative_slope'), exponent),
        Criterion('strichartz_exponent', 'the fitted slope equals -2/35 within 0.04', result.exponent_ok,
                  config.is_soft('strichartz_exponent'), exponent, 'coarse reference grid'),
    ]
    return criteria, {'exponent': exponent, 'coarse_grid_warning': result.coarse_grid_warning}


# --------------------------------------------------------------------- run

def run(config: ExperimentConfig) -> RunManifest:
    """Execute one experiment and write its outputs and manifest."""
    try:
        runner = EXPERIMENTS[config.kind]
    except KeyError:
        raise InvalidInputError(f"unknown experiment kind {config.kind!r}") from None
    run_dir = RunDirectory(config.output_dir, config)
    started = timezone.now()
    clock = time.perf_counter()
    logger.info("run %s d=%d seed=%d into %s", config.kind, config.dim, config.seed, run_dir.path)
    criteria, summary = runner(config, run_dir)
    duration = time.perf_counter() - clock
    hard_failed = any(c.status == 'fail' for c in criteria)
    payload = {
        'config_hash': config.config_hash(),
        'kind': config.kind,
        'dim': config.dim,
        'seed': config.seed,
        'version': __version__,
        'started_at': started.isoformat(),
        'duration_seconds': duration,
        'config': config.to_dict(),
        'criteria': [c.to_dict() for c in criteria],
        'outputs': list(run_dir.outputs),
        'summary': json.loads(json.dumps(summary, default=float)),
        'soft_ok': config.soft_ok,
        'status': 'fail' if hard_failed else 'pass',
    }
    serializer = RunManifestSerializer(data=payload)
    serializer.is_valid(raise_exception=True)
    path = run_dir.path / MANIFEST_NAME
    write_json_atomic(path, payload)
    for criterion in criteria:
        level = logging.WARNING if criterion.status == 'fail' else logging.INFO
        logger.log(level, "%s: %s (%s)", criterion.name, criterion.status, criterion.value)
    return RunManifest(path=path, data=payload)


# ------------------------------------------------------------------ report

@dataclass
class ReportEntry:
    path: Path
    data: dict | None
    corrupt: bool
    problems: list = field(default_factory=list)


@dataclass
class Report:
    entries: list
    text: str

    @property
    def hard_failures(self) -> int:
        return sum(1 for e in self.entries if not e.corrupt for c in e.data['criteria'] if c['status'] == 'fail')

    @property
    def soft_failures(self) -> int:
        return sum(1 for e in self.entries if not e.corrupt for c in e.data['criteria'] if c['status'] == 'soft-fail')

    @property
    def corrupt(self) -> int:
        return sum(1 for e in self.entries if e.corrupt)


def _manifest_paths(paths) -> list:
    found = []
    for item in paths:
        item = Path(item)
        if item.is_dir():
            found.extend(sorted(item.rglob(MANIFEST_NAME)))
        else:
            found.append(item)
    return found


def load_manifest(path: Path) -> ReportEntry:
    try:
        with open(path) as handle:
            data = json.load(handle)
    except (OSError, ValueError) as exc:
        return ReportEntry(path, None, True, [f'unreadable manifest: {exc}'])
    serializer = RunManifestSerializer(data=data)
    if not serializer.is_valid():
        return ReportEntry(path, data if isinstance(data, dict) else None, True,
                           [f'invalid manifest: {json.dumps(serializer.errors, sort_keys=True)}'])
    missing = [name for name in data['outputs'] if not (path.parent / name).exists()]
    if missing:
        return ReportEntry(path, data, True, [f"missing output {name}" for name in missing])
    return ReportEntry(path, data, False)


def report(paths) -> Report:
    """Aggregate manifests into a text report with one section per dimension."""
    manifest_paths = _manifest_paths(paths)
    if not manifest_paths:
        raise InvalidInputError("no manifest.json found under the given paths")
    entries = [load_manifest(path) for path in manifest_paths]
    sections = {}
    for entry in entries:
        dim = entry.data.get('dim') if isinstance(entry.data, dict) else None
        if not isinstance(dim, int) or isinstance(dim, bool):
            dim = None
        sections.setdefault(dim, []).append(entry)

    lines = []
    for dim in sorted(sections, key=lambda value: (value is None, value or 0)):
        lines.append(f"== d={dim} ==" if dim is not None else "== unknown dimension ==")
        for entry in sections[dim]:
            if entry.corrupt:
                lines.append(f"  CORRUPT {entry.path.parent.name}: {'; '.join(entry.problems)}")
                continue
            data = entry.data
            lines.append(f"  {data['kind']} seed={data['seed']} hash={data['config_hash'][:12]} "
                         f"({data['duration_seconds']:.1f}s) {data['status'].upper()}")
            for criterion in data['criteria']:
                tag = {'pass': 'PASS', 'fail': 'FAIL', 'soft-fail': 'SOFT-FAIL'}[criterion['status']]
                value = '' if criterion['value'] is None else f" [{criterion['value']:.6g}]"
                lines.append(f"    {tag:9s} {criterion['name']}: {criterion['statement']}{value}")
    result = Report(entries=entries, text='')
    lines.append(f"{len(entries)} runs: {result.hard_failures} hard failures, {result.soft_failures} soft failures, "
                 f"{result.corrupt} corrupt")
    result.text = '\n'.join(lines) + '\n'
    return result


def validation_record(exc: serializers.ValidationError) -> dict:
    """Machine-readable error record for a rejected configuration."""
    return {'error': 'invalid-config', 'detail': json.loads(json.dumps(exc.detail, default=str))}
