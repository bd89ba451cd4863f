"""
Monte Carlo estimation of the reciprocal-simplex integral over a sphere shell.

Samples are drawn in fixed-size blocks. Block k draws from the k-th child of
``SeedSequence(seed)`` and returns plain sums; the sums are reduced in block
order, so an estimate depends on (seed, n, block_size) and never on the
number of worker processes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
from scipy import stats
from scipy.special import betainc, betaincinv

from .exceptions import InvalidInputError
from .geometry_core import (
    DEGENERACY_TOL,
    RELATIVE_TOL,
    Simplex,
    SphereShell,
    batch_partition_products,
    hyperplane_distances,
    regular_inscribed_simplex,
    simplex_volume,
    simplex_volumes,
    sphere_area,
)

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 16384
EPS_VOL_FACTOR = 1e-9


@dataclass(frozen=True)
class LayerSubtotal:
    index: int
    h_low: float
    h_high: float
    contribution: float
    std_error: float
    n_accepted: int


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n_samples: int
    n_accepted: int
    truncated_mass_fraction: float
    seed: int
    layers: tuple = ()

    @property
    def acceptance_fraction(self) -> float:
        return self.n_accepted / self.n_samples if self.n_samples else 0.0


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    intercept: float
    r_squared: float
    points: list = field(default_factory=list)
    exponent_error: float = 0.0


def sample_shell(shell: SphereShell, rng: np.random.Generator, size=None) -> np.ndarray:
    """Uniform points of the shell; shape (d,) or (size, d).

    The radius is r * ((1-w/r)^d + u (1 - (1-w/r)^d))^{1/d}, so rescaling the
    shell by a power of two rescales every sample exactly.
    """
    d = shell.dim
    count = 1 if size is None else int(size)
    r = shell.outer_radius
    inner_fraction = (shell.inner_radius / r) ** d
    u = rng.random(count)
    rho = r * (inner_fraction + u * (1.0 - inner_fraction)) ** (1.0 / d)
    rho = np.clip(rho, shell.inner_radius, r)
    directions = rng.standard_normal((count, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    points = rho[:, None] * directions
    return points[0] if size is None else points


def _layer_index(heights: np.ndarray, r: float, n_layers: int) -> np.ndarray:
    # layer k holds r/2^k <= h < r/2^{k-1}; the last layer takes everything below
    with np.errstate(divide='ignore'):
        k = np.ceil(np.log2(r / heights))
    k = np.where(np.isfinite(k), k, n_layers - 1)
    return np.clip(k, 0, n_layers - 1).astype(np.intp)


def _reduce(values: np.ndarray, accepted: np.ndarray, kept: np.ndarray, layer=None, n_layers: int = 0) -> dict:
    sums = {
        'count': int(values.size),
        'sum': float(np.sum(values)),
        'sum_sq': float(np.sum(values * values)),
        'accepted': int(np.count_nonzero(accepted)),
        'truncated': int(np.count_nonzero(accepted & ~kept)),
    }
    if n_layers:
        sums['layer_sum'] = np.bincount(layer, weights=values, minlength=n_layers)
        sums['layer_sum_sq'] = np.bincount(layer, weights=values * values, minlength=n_layers)
        sums['layer_accepted'] = np.bincount(layer, weights=kept.astype(float), minlength=n_layers)
    return sums


def _reciprocal_block(task) -> dict:
    vertices, r, w, eps_vol, count, seed_sequence, n_layers = task
    d = vertices.shape[1]
    rng = np.random.default_rng(seed_sequence)
    samples = sample_shell(SphereShell(r, w, d), rng, size=count * (d + 1)).reshape(count, d + 1, d)
    volumes = simplex_volumes(samples)
    combined = np.concatenate([np.broadcast_to(vertices, (count, d + 1, d)), samples], axis=1)
    products = batch_partition_products(combined)
    own = simplex_volume(vertices) * volumes
    accepted = own >= products.max(axis=1) * (1.0 - RELATIVE_TOL)
    kept = accepted & (volumes >= eps_vol)
    with np.errstate(divide='ignore'):
        values = np.where(kept, 1.0 / np.where(kept, volumes, 1.0), 0.0)
    layer = _layer_index(hyperplane_distances(samples), r, n_layers) if n_layers else None
    return _reduce(values, accepted, kept, layer, n_layers)


def _run_blocks(block, common: tuple, n: int, seed: int, block_size: int, workers: int) -> list:
    if n < 1:
        raise InvalidInputError(f"sample count must be >= 1, got {n}")
    if block_size < 1:
        raise InvalidInputError(f"block size must be >= 1, got {block_size}")
    n_blocks = math.ceil(n / block_size)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    tasks = []
    for index, child in enumerate(children):
        count = min(block_size, n - index * block_size)
        tasks.append(common[:-1] + (count, child, common[-1]))
    if workers > 1 and n_blocks > 1:
        with Pool(processes=min(workers, n_blocks)) as pool:
            return pool.map(block, tasks)
    return [block(task) for task in tasks]


def _combine(results: list, measure: float, seed: int, n_layers: int = 0, r: float = 1.0) -> MCEstimate:
    n = sum(result['count'] for result in results)
    total = 0.0
    total_sq = 0.0
    accepted = 0
    truncated = 0
    layer_sum = np.zeros(n_layers)
    layer_sum_sq = np.zeros(n_layers)
    layer_accepted = np.zeros(n_layers)
    for result in results:
        total += result['sum']
        total_sq += result['sum_sq']
        accepted += result['accepted']
        truncated += result['truncated']
        if n_layers:
            layer_sum += result['layer_sum']
            layer_sum_sq += result['layer_sum_sq']
            layer_accepted += result['layer_accepted']

    def standard_error(first, second):
        if n < 2:
            return 0.0
        mean = first / n
        variance = max(second / n - mean * mean, 0.0) * n / (n - 1)
        return measure * math.sqrt(variance / n)

    layers = tuple(
        LayerSubtotal(
            index=k,
            h_low=0.0 if k == n_layers - 1 else r / 2 ** k,
            h_high=2.0 * r if k == 0 else r / 2 ** (k - 1),
            contribution=measure * float(layer_sum[k]) / n,
            std_error=standard_error(float(layer_sum[k]), float(layer_sum_sq[k])),
            n_accepted=int(layer_accepted[k]),
        )
        for k in range(n_layers)
    )
    return MCEstimate(
        value=measure * total / n,
        std_error=standard_error(total, total_sq),
        n_samples=n,
        n_accepted=accepted,
        truncated_mass_fraction=truncated / accepted if accepted else 0.0,
        seed=seed,
        layers=layers,
    )


def _validate_reference(A, shell: SphereShell) -> np.ndarray:
    vertices = A.vertices if isinstance(A, Simplex) else Simplex(A).vertices
    if vertices.shape[1] != shell.dim:
        raise InvalidInputError(f"simplex of dimension {vertices.shape[1]} against a d={shell.dim} shell")
    if simplex_volume(vertices) <= DEGENERACY_TOL * max(1.0, float(np.ptp(vertices))) ** shell.dim:
        raise InvalidInputError("the reference simplex A is degenerate")
    return vertices


def reciprocal_integral(A, shell: SphereShell, n: int, eps_vol: float | None = None, seed: int = 0,
                        workers: int = 1, block_size: int = DEFAULT_BLOCK_SIZE,
                        n_layers: int = 0) -> MCEstimate:
    """|Omega|^{d+1} * mean of 1/|X| over shell tuples X reciprocal to A with |X| >= eps_vol."""
    vertices = _validate_reference(A, shell)
    d = shell.dim
    r = shell.outer_radius
    if eps_vol is None:
        eps_vol = EPS_VOL_FACTOR * r ** d
    results = _run_blocks(
        _reciprocal_block, (vertices, r, shell.thickness, eps_vol, n_layers), n, seed, block_size, workers
    )
    estimate = _combine(results, shell.volume() ** (d + 1), seed, n_layers, r)
    logger.info(
        "reciprocal integral d=%d r=%g w=%g n=%d: %.6g +- %.2g (acceptance %.3f, truncated %.2e)",
        d, r, shell.thickness, n, estimate.value, estimate.std_error,
        estimate.acceptance_fraction, estimate.truncated_mass_fraction,
    )
    if estimate.truncated_mass_fraction > 0.01:
        logger.warning("eps_vol truncation discards %.2f%% of accepted samples", 100 * estimate.truncated_mass_fraction)
    return estimate


def reciprocal_integral_layered(A, shell: SphereShell, n_per_layer: int, n_layers: int, seed: int = 0,
                                eps_vol: float | None = None, workers: int = 1,
                                block_size: int = DEFAULT_BLOCK_SIZE) -> MCEstimate:
    """Post-stratified estimate: accepted samples are binned by the height of X_d over X_0..X_{d-1}.

    This is one unstratified draw of ``n_per_layer * n_layers`` tuples binned
    after the fact; ``n_per_layer`` only sets the total, a layer gets however
    many tuples land in it. The subtotals therefore add up to the plain
    estimate from the same draw, and a layer nobody lands in contributes
    exactly 0 with a zero standard error.
    """
    if n_layers < 1:
        raise InvalidInputError(f"need at least one layer, got {n_layers}")
    estimate = reciprocal_integral(
        A, shell, n_per_layer * n_layers, eps_vol, seed, workers, block_size, n_layers=n_layers
    )
    for layer in estimate.layers:
        logger.debug("layer %d [%g, %g): %.6g +- %.2g (%d accepted)", layer.index, layer.h_low,
                     layer.h_high, layer.contribution, layer.std_error, layer.n_accepted)
    return estimate


def _as_point(item) -> tuple:
    param, estimate = item[0], item[1]
    if isinstance(estimate, MCEstimate):
        return float(param), estimate.value, estimate.std_error
    std_error = float(item[2]) if len(item) > 2 else 0.0
    return float(param), float(estimate), std_error


def fit_scaling(points) -> ScalingFit:
    """Least-squares slope of log(value) against log(param)."""
    rows = [_as_point(item) for item in points]
    if len(rows) < 3:
        raise InvalidInputError(f"need at least 3 points to fit an exponent, got {len(rows)}")
    params = np.array([row[0] for row in rows])
    values = np.array([row[1] for row in rows])
    errors = np.array([row[2] for row in rows])
    if np.any(params <= 0) or np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise InvalidInputError("exponent fits need positive parameters and values")
    x = np.log(params)
    y = np.log(values)
    if np.ptp(x) == 0:
        raise InvalidInputError("exponent fits need at least two distinct parameters")
    if np.ptp(y) == 0:
        exponent, intercept, r_squared = 0.0, float(y[0]), 1.0
    else:
        fit = stats.linregress(x, y)
        exponent, intercept = float(fit.slope), float(fit.intercept)
        r_squared = float(np.clip(fit.rvalue ** 2, 0.0, 1.0))
    centered = x - x.mean()
    relative = errors / values
    exponent_error = float(math.sqrt(np.sum(centered ** 2 * relative ** 2)) / np.sum(centered ** 2))
    logger.debug("fit exponent=%.4f +- %.4f r2=%.5f over %d points", exponent, exponent_error, r_squared, len(rows))
    return ScalingFit(exponent=exponent, intercept=intercept, r_squared=r_squared,
                      points=rows, exponent_error=exponent_error)


def thickness_scan(d: int, r: float, ws, n: int, seed: int = 0, A=None, **options) -> tuple[list, ScalingFit]:
    """Estimates over shell thicknesses at fixed r and the fitted w-exponent (target d+1)."""
    reference = A if A is not None else regular_inscribed_simplex(r, d)
    estimates = []
    for w in ws:
        estimates.append((w, reciprocal_integral(reference, SphereShell(r, w, d), n, seed=seed, **options)))
    fit = fit_scaling(estimates)
    logger.info("thickness scan d=%d: w-exponent %.3f (target %d)", d, fit.exponent, d + 1)
    return estimates, fit


def radius_scan(d: int, rs, ratio: float, n: int, seed: int = 0, **options) -> tuple[list, ScalingFit]:
    """Estimates over radii with w/r fixed; A scales with r, target exponent d^2."""
    estimates = []
    for r in rs:
        shell = SphereShell(r, ratio * r, d)
        estimates.append((r, reciprocal_integral(regular_inscribed_simplex(r, d), shell, n, seed=seed, **options)))
    fit = fit_scaling(estimates)
    logger.info("radius scan d=%d: r-exponent %.3f (target %d)", d, fit.exponent, d * d)
    return estimates, fit


# ------------------------------------------------------------ lower bound

def max_cap_angle(d: int) -> float:
    """Caps around the vertices of a regular simplex are disjoint below this angle."""
    return 0.5 * math.acos(-1.0 / d)


def cap_area(d: int, eps: float) -> float:
    """Area of a geodesic cap of angle eps <= pi/2 on S^{d-1}."""
    return 0.5 * sphere_area(d) * float(betainc((d - 1) / 2.0, 0.5, math.sin(eps) ** 2))


def sample_cap(center, eps: float, r: float, depth: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform points of {angle(X, center) < eps, r - depth <= |X| <= r}."""
    center = np.asarray(center, dtype=float)
    center = center / np.linalg.norm(center)
    d = center.size
    half = (d - 1) / 2.0
    # polar angle a from center: sin^2(a) ~ regularized incomplete beta law
    top = betainc(half, 0.5, math.sin(eps) ** 2)
    angle = np.arcsin(np.sqrt(betaincinv(half, 0.5, rng.random(size) * top)))
    tangent = rng.standard_normal((size, d))
    tangent -= np.outer(tangent @ center, center)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    directions = np.cos(angle)[:, None] * center + np.sin(angle)[:, None] * tangent
    inner_fraction = (1.0 - depth / r) ** d
    rho = r * (inner_fraction + rng.random(size) * (1.0 - inner_fraction)) ** (1.0 / d)
    return rho[:, None] * directions


def _lower_bound_block(task) -> dict:
    centers, eps, r, depth, eps_vol, count, seed_sequence, _ = task
    d = centers.shape[1]
    rng = np.random.default_rng(seed_sequence)
    x = np.stack([sample_cap(c, eps, r, depth, rng, count) for c in centers], axis=1)
    y = np.stack([sample_cap(c, eps, r, depth, rng, count) for c in centers], axis=1)
    volumes_x = simplex_volumes(x)
    volumes_y = simplex_volumes(y)
    products = batch_partition_products(np.concatenate([x, y], axis=1))
    accepted = volumes_x * volumes_y >= products.max(axis=1) * (1.0 - RELATIVE_TOL)
    kept = accepted & (volumes_y >= eps_vol)
    values = np.where(kept, 1.0 / np.where(kept, volumes_y, 1.0), 0.0)
    return _reduce(values, accepted, kept)


def lower_bound_experiment(shell: SphereShell, eps: float, n: int, seed: int = 0, eps_vol: float | None = None,
                           workers: int = 1, block_size: int = DEFAULT_BLOCK_SIZE) -> MCEstimate:
    """Cap-restricted integral prod |Omega_k| * E[psi(X; Y) / |Y|].

    X_k and Y_k are uniform in the cap Omega_k around the k-th vertex of the
    inscribed regular simplex, radius in [r - min(eps r, w), r].
    """
    d = shell.dim
    if not 0 < eps < max_cap_angle(d):
        raise InvalidInputError(
            f"caps overlap: eps must lie in (0, {max_cap_angle(d):.6f}) for d={d}, got {eps}"
        )
    r = shell.outer_radius
    depth = min(eps * r, shell.thickness)
    centers = regular_inscribed_simplex(r, d).vertices / r
    if eps_vol is None:
        eps_vol = EPS_VOL_FACTOR * r ** d
    cap_volume = cap_area(d, eps) * (r ** d - (r - depth) ** d) / d
    results = _run_blocks(_lower_bound_block, (centers, eps, r, depth, eps_vol, 0), n, seed, block_size, workers)
    estimate = _combine(results, cap_volume ** (d + 1), seed)
    logger.info("lower bound d=%d w=%g eps=%g: %.6g +- %.2g (acceptance %.3f)",
                d, shell.thickness, eps, estimate.value, estimate.std_error, estimate.acceptance_fraction)
    return estimate


def lower_bound_scan(d: int, r: float, ws, eps: float, n: int, seed: int = 0, **options) -> list:
    """(w, estimate, estimate / (w^{d+1} r^{d^2-d-1})) rows."""
    rows = []
    for w in ws:
        estimate = lower_bound_experiment(SphereShell(r, w, d), eps, n, seed=seed, **options)
        rows.append((w, estimate, estimate.value / (w ** (d + 1) * r ** (d * d - d - 1))))
    return rows
