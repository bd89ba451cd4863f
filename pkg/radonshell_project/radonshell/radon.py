"""
Radon transform, its adjoint and the exterior decay experiments.

Sphere integrals use product rules: Gauss-Jacobi in the cosine of each
polar angle (which absorbs the sin^{k} density exactly) and the trapezoid
rule in the azimuth. Separable profiles skip the sphere rule altogether:
their adjoint transform reduces to a one-dimensional integral in the angle
between omega and x (``zonal_adjoint_radon``).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import null_space
from scipy.special import beta as beta_fn
from scipy.special import betainc, roots_jacobi

from .exceptions import InvalidInputError, UnsupportedDimensionError
from .frames import unit_normal
from .geometry_core import sphere_area
from .mc_engine import ScalingFit, fit_scaling
from .profiles import Profile, SeparableProfile, cap_witness

logger = logging.getLogger(__name__)

SUPPORTED_DIMS = range(2, 7)
TAIL_TOLERANCE = 0.01
MAX_DOUBLINGS = 6
CHUNK = 4096
ZONAL_CHUNK = 512


# ---------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class SphereQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    level: int

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def _gauss_legendre(count: int) -> tuple:
    return leggauss(count)


@lru_cache(maxsize=None)
def _polar_rule(power: int, count: int) -> tuple:
    """Nodes cos(theta) and weights for int_0^pi f(theta) sin^power(theta) dtheta."""
    alpha = (power - 1) / 2.0
    return roots_jacobi(count, alpha, alpha)


def _check_dim(d: int):
    if d not in SUPPORTED_DIMS:
        raise UnsupportedDimensionError(f"sphere rules are available for d in 2..6, got d={d}")


def _assemble(polar: list, azimuth_count: int, d: int) -> tuple:
    """Tensor the polar factors (angles, weights) with a trapezoid azimuth."""
    azimuth = 2.0 * math.pi * np.arange(azimuth_count) / azimuth_count
    azimuth_weight = np.full(azimuth_count, 2.0 * math.pi / azimuth_count)
    factors = polar + [(azimuth, azimuth_weight)]
    grids = np.meshgrid(*[angles for angles, _ in factors], indexing='ij')
    weight_grids = np.meshgrid(*[weights for _, weights in factors], indexing='ij')
    angles = np.stack([grid.ravel() for grid in grids], axis=-1)
    weights = np.prod(np.stack([grid.ravel() for grid in weight_grids], axis=-1), axis=-1)
    return unit_normal(angles), weights


def _householder_to(axis, d: int) -> np.ndarray | None:
    """Orthogonal matrix sending e_d to axis, or None when axis is e_d."""
    if axis is None:
        return None
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    target = np.zeros(d)
    target[-1] = 1.0
    mirror = target - axis
    norm = np.linalg.norm(mirror)
    if norm < 1e-14:
        return None
    mirror /= norm
    return np.eye(d) - 2.0 * np.outer(mirror, mirror)


@lru_cache(maxsize=64)
def _sphere_rule(d: int, level: int) -> tuple:
    polar = []
    for j in range(1, d - 1):
        power = d - 1 - j
        cosines, weights = _polar_rule(power, level)
        polar.append((np.arccos(cosines), weights))
    nodes, weights = _assemble(polar, 2 * level, d)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def sphere_quadrature(d: int, level: int) -> SphereQuadrature:
    """Product rule on S^{d-1} with level^{d-2} * 2 level nodes."""
    _check_dim(d)
    if level < 1:
        raise InvalidInputError(f"quadrature level must be >= 1, got {level}")
    nodes, weights = _sphere_rule(d, level)
    return SphereQuadrature(nodes=nodes, weights=weights, level=level)


def _piece_measure(power: int, theta_a: float, theta_b: float) -> float:
    """int_{theta_a}^{theta_b} sin^power(theta) dtheta."""
    half = (power + 1) / 2.0
    upper = betainc(half, half, (1.0 - math.cos(theta_b)) / 2.0)
    lower = betainc(half, half, (1.0 - math.cos(theta_a)) / 2.0)
    return 2.0 ** power * float(beta_fn(half, half)) * float(upper - lower)


def band_quadrature(d: int, level: int, lo: float, hi: float, axis=None) -> SphereQuadrature:
    """Sphere rule whose first polar angle is split at arccos(hi) and arccos(lo).

    Every piece gets ``level`` Gauss-Legendre nodes in the angle, rescaled so
    the piece measure is exact; the indicator of lo < omega . axis < hi is
    therefore integrated exactly.
    """
    _check_dim(d)
    if d < 3:
        raise UnsupportedDimensionError("band rules need d >= 3")
    if not -1.0 <= lo < hi <= 1.0:
        raise InvalidInputError(f"band needs -1 <= lo < hi <= 1, got ({lo}, {hi})")
    power = d - 2
    edges = sorted({0.0, math.acos(hi), math.acos(lo), math.pi})
    t, w = _gauss_legendre(level)
    angles, weights = [], []
    for start, end in zip(edges[:-1], edges[1:]):
        if end - start <= 0:
            continue
        half = (end - start) / 2.0
        nodes = start + half * (t + 1.0)
        piece = half * w * np.sin(nodes) ** power
        piece *= _piece_measure(power, start, end) / piece.sum()
        angles.append(nodes)
        weights.append(piece)
    polar = [(np.concatenate(angles), np.concatenate(weights))]
    for j in range(2, d - 1):
        cosines, rule = _polar_rule(d - 1 - j, level)
        polar.append((np.arccos(cosines), rule))
    nodes, weights = _assemble(polar, 2 * level, d)
    rotation = _householder_to(axis, d)
    if rotation is not None:
        nodes = nodes @ rotation.T
    return SphereQuadrature(nodes=nodes, weights=weights, level=level)


def axial_quadrature(d: int, level: int, axis=None, depth: int = 16, ratio: float = 0.5) -> SphereQuadrature:
    """Meridian rule for fields axisymmetric about ``axis``.

    Nodes cos(b) axis + sin(b) e lie on one meridian, weights carry
    |S^{d-2}| sin^{d-2}(b). Panels shrink geometrically toward both poles.
    """
    _check_dim(d)
    if d < 3:
        raise UnsupportedDimensionError("axial rules need d >= 3")
    axis_vector = np.zeros(d)
    axis_vector[-1] = 1.0
    if axis is not None:
        axis_vector = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    across = null_space(axis_vector[None, :])[:, 0]
    half_pi = math.pi / 2.0
    cuts = [half_pi * ratio ** k for k in range(depth, 0, -1)]
    edges = np.array([0.0] + cuts + [half_pi] + [math.pi - c for c in reversed(cuts)] + [math.pi])
    t, w = _gauss_legendre(level)
    lows, highs = edges[:-1], edges[1:]
    half = (highs - lows)[:, None] / 2.0
    angles = (lows[:, None] + half * (t + 1.0)).ravel()
    weights = (half * w).ravel() * sphere_area(d - 1) * np.sin(angles) ** (d - 2)
    nodes = np.cos(angles)[:, None] * axis_vector + np.sin(angles)[:, None] * across
    return SphereQuadrature(nodes=nodes, weights=weights, level=level)


# ----------------------------------------------------------- adjoint transform

def _as_points(x, d: int) -> tuple:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = x[None, :] if single else x
    if points.ndim != 2 or points.shape[1] != d:
        raise InvalidInputError(f"points of shape {x.shape} do not live in R^{d}")
    return points, single


def adjoint_radon(G: Profile, x, q: SphereQuadrature, order: int = 0):
    """sum_i w_i G^{(order)}(x . omega_i, omega_i) for one point or an (N, d) batch."""
    if q.dim != G.dim:
        raise InvalidInputError(f"quadrature on S^{q.dim - 1} for a d={G.dim} profile")
    points, single = _as_points(x, G.dim)
    values = np.empty(points.shape[0])
    for start in range(0, points.shape[0], CHUNK):
        block = points[start:start + CHUNK]
        s = block @ q.nodes.T
        values[start:start + CHUNK] = G.evaluate(s, q.nodes[None, :, :], order) @ q.weights
    return float(values[0]) if single else values


def adjoint_radon_gradient(G: Profile, x, q: SphereQuadrature, order: int = 0) -> np.ndarray:
    """Gradient of the adjoint transform: sum_i w_i G^{(order+1)}(x . omega_i, omega_i) omega_i."""
    points, single = _as_points(x, G.dim)
    gradients = np.empty(points.shape)
    for start in range(0, points.shape[0], CHUNK):
        block = points[start:start + CHUNK]
        s = block @ q.nodes.T
        derivative = G.evaluate(s, q.nodes[None, :, :], order + 1) * q.weights
        gradients[start:start + CHUNK] = derivative @ q.nodes
    return gradients[0] if single else gradients


def supports_zonal(G: Profile) -> bool:
    return isinstance(G, SeparableProfile) and G.dim >= 3


def zonal_adjoint_radon(G: SeparableProfile, x, order: int = 0, nodes: int = 48, gradient: bool = False):
    """Adjoint transform of a separable profile by reduction to the angle theta between omega and x.

    R*G(x) = |S^{d-2}| int_0^pi e(|x| cos theta + shift) Hbar(cos theta) sin^{d-2} theta dtheta,
    where Hbar averages the direction factor over the (d-2)-sphere at angle
    theta from x. The theta interval is cut at the envelope support and at
    the kinks of Hbar. With ``gradient`` the pair (values, gradients) is
    returned; gradients need a Funk-Hecke direction factor.
    """
    if not supports_zonal(G):
        raise InvalidInputError("the zonal reduction needs a separable profile with d >= 3")
    d = G.dim
    direction = G.direction
    if gradient and not direction.separates:
        raise InvalidInputError("gradients of the zonal reduction need a uniform or zonal-harmonic factor")
    axis = np.zeros(d)
    axis[-1] = 1.0
    if direction.axis:
        axis = np.asarray(direction.axis, dtype=float)
    points, single = _as_points(x, d)
    k = G.order + order
    a, b = G.envelope.support
    t, w = _gauss_legendre(nodes)
    scale = G.amplitude * sphere_area(d - 1)
    values = np.empty(points.shape[0])
    gradients = np.empty(points.shape) if gradient else None

    for start in range(0, points.shape[0], ZONAL_CHUNK):
        stop = start + ZONAL_CHUNK
        block = points[start:stop]
        rho = np.linalg.norm(block, axis=1)
        safe = np.maximum(rho, 1e-300)
        direction_of_x = np.where(rho[:, None] > 0, block / safe[:, None], axis)
        cos_beta = np.clip(direction_of_x @ axis, -1.0, 1.0)
        with np.errstate(over='ignore', divide='ignore'):
            c_low = (a - G.shift) / safe
            c_high = (b - G.shift) / safe
        theta_start = np.arccos(np.clip(c_high, -1.0, 1.0))
        theta_end = np.arccos(np.clip(c_low, -1.0, 1.0))
        kinks = direction.kinks(np.arccos(cos_beta))
        kinks = np.where(np.isnan(kinks), theta_start[:, None],
                         np.clip(kinks, theta_start[:, None], theta_end[:, None]))
        edges = np.sort(np.concatenate([theta_start[:, None], kinks, theta_end[:, None]], axis=1), axis=1)
        half = np.diff(edges, axis=1) / 2.0
        theta = (edges[:, :-1] + half)[..., None] + half[..., None] * t
        weight = half[..., None] * w * np.sin(theta) ** (d - 2)
        c = np.cos(theta)
        argument = rho[:, None, None] * c + G.shift
        envelope = G.envelope.value(argument, k)
        if direction.separates:
            kernel = direction.kernel(c, d)
            radial = np.sum(weight * envelope * kernel, axis=(1, 2))
            angular = direction.angular(cos_beta, d)
            values[start:stop] = scale * angular * radial
            if gradient:
                slope = np.sum(weight * G.envelope.value(argument, k + 1) * c * kernel, axis=(1, 2))
                angular_slope = direction.angular(cos_beta, d, derivative=True)
                tangential = (axis - cos_beta[:, None] * direction_of_x) / safe[:, None]
                gradients[start:stop] = scale * (
                    (angular * slope)[:, None] * direction_of_x + (radial * angular_slope)[:, None] * tangential
                )
        else:
            average = direction.sphere_average(c, cos_beta[:, None, None], d)
            values[start:stop] = scale * np.sum(weight * envelope * average, axis=(1, 2))

    if gradient:
        return (float(values[0]), gradients[0]) if single else (values, gradients)
    return float(values[0]) if single else values


def adjoint_field(G: Profile, q: SphereQuadrature | None = None, order: int = 0) -> Callable:
    """x -> R*G^{(order)}(x), by the zonal reduction when available."""
    if supports_zonal(G):
        return lambda points: zonal_adjoint_radon(G, points, order=order)
    if q is None:
        raise InvalidInputError(f"a sphere quadrature is needed for {G.kind} profiles")
    return lambda points: adjoint_radon(G, points, q, order=order)


@dataclass(frozen=True)
class ConvergenceResult:
    levels: list
    values: list
    converged_level: int | None


def quadrature_convergence(G: Profile, x, levels, tol: float = 1e-6) -> ConvergenceResult:
    """First level after which consecutive adjoint values move by less than tol."""
    levels = list(levels)
    values = [adjoint_radon(G, x, sphere_quadrature(G.dim, level)) for level in levels]
    converged = None
    for index in range(1, len(levels)):
        if all(abs(values[j] - values[j - 1]) < tol for j in range(index, len(levels))):
            converged = levels[index - 1]
            break
    logger.debug("quadrature convergence at level %s: %s", converged, values)
    return ConvergenceResult(levels=levels, values=values, converged_level=converged)


# ----------------------------------------------------------- forward transform

@dataclass(frozen=True)
class GaussianField:
    """exp(-|x - center|^2 / width^2), truncated to a ball for hyperplane integrals."""
    center: tuple
    width: float = 1.0
    cutoff: float = 6.0

    @property
    def support_radius(self) -> float:
        return float(np.linalg.norm(self.center)) + self.cutoff * self.width

    def __call__(self, points) -> np.ndarray:
        offset = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.exp(-np.sum(offset * offset, axis=-1) / self.width ** 2)


def radon_forward(f: Callable, s: float, omega, method: str = 'grid', n: int = 64,
                  radius: float | None = None, seed: int = 0) -> float:
    """Integral of f over the hyperplane {x . omega = s}, f vanishing outside |x| <= radius."""
    omega = np.asarray(omega, dtype=float)
    d = omega.size
    if abs(np.linalg.norm(omega) - 1.0) > 1e-10:
        raise InvalidInputError("omega must be a unit vector")
    if radius is None:
        radius = getattr(f, 'support_radius', None)
    if radius is None:
        raise InvalidInputError("a bounding radius is required for the hyperplane integral")
    if abs(s) >= radius:
        return 0.0
    extent = math.sqrt(radius * radius - s * s)
    basis = null_space(omega[None, :])
    if method == 'grid':
        if d not in (2, 3):
            raise UnsupportedDimensionError(f"the grid method supports d in {{2, 3}}, got d={d}")
        t, w = _gauss_legendre(n)
        axes = [extent * t] * (d - 1)
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing='ij')], axis=-1)
        weights = np.prod(np.stack([g.ravel() for g in np.meshgrid(*[extent * w] * (d - 1), indexing='ij')],
                                   axis=-1), axis=-1)
        points = s * omega + grid @ basis.T
        return float(np.dot(weights, f(points)))
    if method == 'mc':
        rng = np.random.default_rng(seed)
        grid = rng.uniform(-extent, extent, size=(n, d - 1))
        points = s * omega + grid @ basis.T
        return float(np.mean(f(points)) * (2.0 * extent) ** (d - 1))
    raise InvalidInputError(f"unknown method {method!r}; expected 'grid' or 'mc'")


@dataclass(frozen=True)
class AdjointnessResult:
    radon_side: float
    adjoint_side: float

    @property
    def relative_error(self) -> float:
        return abs(self.radon_side - self.adjoint_side) / abs(self.adjoint_side)


def adjointness_check(f: GaussianField, G: Profile, level: int = 8, s_nodes: int = 24,
                      plane_nodes: int = 32, volume_nodes: int = 32) -> AdjointnessResult:
    """<Rf, G> by forward transforms and <f, R*G> by a Cartesian rule, for d = 3."""
    d = G.dim
    radius = f.support_radius
    q = sphere_quadrature(d, level)
    lo, hi = max(G.support[0], -radius), min(G.support[1], radius)
    t, w = _gauss_legendre(s_nodes)
    half = (hi - lo) / 2.0
    s_values = lo + half * (t + 1.0)
    radon_side = 0.0
    if hi > lo:
        for omega, weight in zip(q.nodes, q.weights):
            transform = np.array([radon_forward(f, s, omega, n=plane_nodes, radius=radius) for s in s_values])
            radon_side += weight * half * float(np.dot(w, transform * G.evaluate(s_values, omega)))
    t, w = _gauss_legendre(volume_nodes)
    center = np.asarray(f.center, dtype=float)
    span = f.cutoff * f.width
    axes = [center[i] + span * t for i in range(d)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing='ij')], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in np.meshgrid(*[span * w] * d, indexing='ij')], axis=-1), axis=-1)
    adjoint_side = float(np.dot(weights, f(grid) * adjoint_field(G, q)(grid)))
    result = AdjointnessResult(radon_side=radon_side, adjoint_side=adjoint_side)
    logger.info("adjointness d=%d: <Rf,G>=%.8g <f,R*G>=%.8g rel=%.2e", d, radon_side, adjoint_side,
                result.relative_error)
    return result


# ---------------------------------------------------------------- norms

@dataclass(frozen=True)
class NormResult:
    value: float
    tail_change: float
    tail_flag: bool
    rho_max: float


def _radial_edges(lo: float, hi: float, ratio: float = 2.0) -> list:
    edges = [lo]
    while edges[-1] * ratio < hi * (1.0 - 1e-12):
        edges.append(edges[-1] * ratio)
    edges.append(hi)
    return edges


def _evaluate(field_fn: Callable, points: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(field_fn(points[i:i + CHUNK]), dtype=float)
                           for i in range(0, points.shape[0], CHUNK)])


@dataclass(frozen=True)
class FieldGrid:
    """Radial Gauss-Legendre panels times an angular rule, with optional sampled values."""
    radii: np.ndarray
    radial_weights: np.ndarray
    panels: np.ndarray
    quadrature: SphereQuadrature
    values: np.ndarray | None = None

    @classmethod
    def dyadic(cls, R: float, rho_max: float, quadrature: SphereQuadrature, nodes_per_panel: int = 16,
               ratio: float = 2.0) -> 'FieldGrid':
        if not 0 < R < rho_max:
            raise InvalidInputError(f"need 0 < R < rho_max, got R={R}, rho_max={rho_max}")
        return cls.from_edges(_radial_edges(R, rho_max, ratio), quadrature, nodes_per_panel)

    @classmethod
    def from_edges(cls, edges, quadrature: SphereQuadrature, nodes_per_panel: int = 16) -> 'FieldGrid':
        """One Gauss-Legendre panel per consecutive pair of radial edges."""
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
            raise InvalidInputError("radial edges must be nonnegative and strictly increasing")
        t, w = _gauss_legendre(nodes_per_panel)
        half = np.diff(edges)[:, None] / 2.0
        radii = (edges[:-1, None] + half * (t + 1.0)).ravel()
        weights = (half * w).ravel()
        panels = np.repeat(np.arange(edges.size - 1), nodes_per_panel)
        return cls(radii, weights, panels, quadrature)

    @property
    def dim(self) -> int:
        return self.quadrature.dim

    def points(self) -> np.ndarray:
        return (self.radii[:, None, None] * self.quadrature.nodes[None, :, :]).reshape(-1, self.dim)

    def sample(self, field_fn: Callable) -> 'FieldGrid':
        values = _evaluate(field_fn, self.points()).reshape(self.radii.size, self.quadrature.size)
        return FieldGrid(self.radii, self.radial_weights, self.panels, self.quadrature, values)

    def panel_integrals(self, p: float) -> np.ndarray:
        if self.values is None:
            raise InvalidInputError("the field grid holds no sampled values")
        angular = np.abs(self.values) ** p @ self.quadrature.weights
        radial = self.radial_weights * self.radii ** (self.dim - 1) * angular
        return np.bincount(self.panels, weights=radial)

    def integral(self, p: float) -> float:
        return float(np.sum(self.panel_integrals(p)))

    def to_csv(self, path) -> None:
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(['rho [length]', 'angular_node', 'value'])
            for i, rho in enumerate(self.radii):
                for m in range(self.quadrature.size):
                    writer.writerow([repr(float(rho)), m, repr(float(self.values[i, m]))])


def _norm(integral: float, p: float) -> float:
    return max(integral, 0.0) ** (1.0 / p)


def exterior_Lp_norm(field_fn, p: float, R: float, rho_max: float, quadrature: SphereQuadrature | None = None,
                     nodes_per_panel: int = 16, adaptive: bool = False) -> NormResult:
    """(int_{R<|x|<rho_max} |field|^p dx)^{1/p} with a doubling diagnostic.

    The diagnostic is the relative change of the norm when rho_max doubles
    (for a sampled FieldGrid: when its outermost panel is dropped). With
    ``adaptive`` rho_max doubles until the change is below 1%.
    """
    if p < 1:
        raise InvalidInputError(f"p must be >= 1, got {p}")
    if not rho_max > R:
        raise InvalidInputError(f"rho_max must exceed R, got R={R}, rho_max={rho_max}")
    if isinstance(field_fn, FieldGrid):
        grid = field_fn
        if grid.values is None:
            raise InvalidInputError("the field grid holds no sampled values")
        keep = grid.radii > R
        trimmed = FieldGrid(grid.radii[keep], grid.radial_weights[keep], grid.panels[keep], grid.quadrature,
                            grid.values[keep])
        panels = trimmed.panel_integrals(p)
        total = _norm(float(np.sum(panels)), p)
        without_last = _norm(float(np.sum(panels[:-1])), p)
        change = abs(total - without_last) / total if total > 0 else 0.0
        return NormResult(total, change, change > TAIL_TOLERANCE, float(grid.radii.max()))

    if quadrature is None:
        raise InvalidInputError("a sphere quadrature is needed to integrate a callable field")

    def panel(lo, hi):
        grid = FieldGrid.dyadic(lo, hi, quadrature, nodes_per_panel, ratio=hi / lo).sample(field_fn)
        return grid.integral(p)

    edges = _radial_edges(R, rho_max)
    inner = sum(panel(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]))
    doublings = 0
    while True:
        outer = inner + panel(rho_max, 2.0 * rho_max)
        value, doubled = _norm(inner, p), _norm(outer, p)
        change = abs(doubled - value) / doubled if doubled > 0 else 0.0
        if not adaptive or change <= TAIL_TOLERANCE or doublings >= MAX_DOUBLINGS:
            break
        inner, rho_max = outer, 2.0 * rho_max
        doublings += 1
    flag = change > TAIL_TOLERANCE
    if flag:
        logger.warning("tail diagnostic %.2f%% above 1%% at R=%g rho_max=%g", 100 * change, R, rho_max)
    return NormResult(value=value, tail_change=change, tail_flag=flag, rho_max=rho_max)


def exterior_quadrature(G: Profile, level: int) -> SphereQuadrature:
    """Axial rule for axisymmetric adjoint fields, the plain product rule otherwise."""
    if supports_zonal(G):
        axis = getattr(G.direction, 'axis', None) or None
        return axial_quadrature(G.dim, level, axis=axis)
    return sphere_quadrature(G.dim, level)


# -------------------------------------------------------------- experiments

CLAIMS = ('a', 'b', 'translation')


def localized_ratio_bound(d: int) -> float:
    """Upper limit on b/a for the localized decay estimate."""
    return (d * d - 2 * d - 1) / (2.0 * (d - 1))


def decay_target(d: int) -> float:
    return -(d - 1) / (2.0 * d)


@dataclass(frozen=True)
class DecayRow:
    R: float
    norm: float
    tail_change: float
    tail_flag: bool
    bound_ratio: float


@dataclass(frozen=True)
class DecayResult:
    fit: ScalingFit
    rows: list
    claim: str
    target: float
    sharp: bool

    @property
    def slope_ok(self) -> bool:
        if self.sharp:
            return abs(self.fit.exponent - self.target) <= 0.1
        return self.fit.exponent <= self.target + 0.1

    @property
    def tail_ok(self) -> bool:
        return not any(row.tail_flag for row in self.rows)


def _bound(claim: str, G: Profile, R: float, p: float) -> float:
    d = G.dim
    a, b = G.support
    mass = G.l2_norm() ** p
    if claim == 'a':
        return (b - a) ** d / (a * max(R, a) ** (d - 1)) * mass
    if claim == 'b':
        return (max(abs(a), abs(b)) / R) ** (d - 1) * mass
    return ((b - a) / R) ** (d - 1) * mass


def decay_experiment(family, Rs, claim: str = 'b', quadrature: SphereQuadrature | None = None,
                     level: int = 8, p: float | None = None, rho_factor: float = 32.0,
                     nodes_per_panel: int = 16, adaptive: bool = True) -> DecayResult:
    """Exterior L^p norms (p = 2d by default) of R*G over R and the fitted slope.

    ``family`` is a profile or a callable R -> profile. The cap witness is
    the sharp case (slope -(d-1)/(2d)); for every other profile the slope is
    an upper bound.
    """
    if claim not in CLAIMS:
        raise InvalidInputError(f"claim must be one of {CLAIMS}, got {claim!r}")
    Rs = sorted(float(R) for R in Rs)
    rows = []
    sharp = True
    for R in Rs:
        G = family(R) if callable(family) else family
        d = G.dim
        exponent = p if p is not None else 2.0 * d
        a, b = G.support
        if claim == 'a':
            if not (b > a > 0 and b / a < localized_ratio_bound(d)):
                raise InvalidInputError(
                    f"the localized estimate needs b > a > 0 and b/a < {localized_ratio_bound(d):.4f}, got [{a}, {b}]"
                )
        elif claim == 'b' and R < max(abs(a), abs(b)):
            raise InvalidInputError(f"R={R} lies inside the support bound b={max(abs(a), abs(b))}")
        sharp = sharp and G.kind == 'cap'
        q = quadrature or exterior_quadrature(G, level)
        result = exterior_Lp_norm(adjoint_field(G, q), exponent, R, rho_factor * R, q,
                                  nodes_per_panel=nodes_per_panel, adaptive=adaptive)
        ratio = result.value ** exponent / _bound(claim, G, R, exponent) if result.value > 0 else 0.0
        rows.append(DecayRow(R, result.value, result.tail_change, result.tail_flag, ratio))
        logger.info("decay %s R=%g: norm %.6g (tail %.2e, bound ratio %.3g)", claim, R, result.value,
                    result.tail_change, ratio)
    fit = fit_scaling([(row.R, row.norm) for row in rows])
    decay = DecayResult(fit=fit, rows=rows, claim=claim, target=decay_target(d), sharp=sharp)
    logger.info("decay %s d=%d: slope %.4f (target %.4f)", claim, d, fit.exponent, decay.target)
    return decay


def cap_family(d: int) -> Callable:
    return lambda R: cap_witness(d, R)


@dataclass(frozen=True)
class LayerwiseResult:
    total: float
    ratio: float
    layer_norms: list
    g_l2: float
    gamma: float
    k_range: tuple
    dim: int = field(default=4)

    def coarsened(self) -> 'LayerwiseResult':
        """Merge consecutive layers pairwise: the same field measured on gamma^2 layers."""
        p = 2.0 * self.dim
        norms = list(self.layer_norms)
        merged = [
            (sum(n ** p for n in norms[i:i + 2])) ** (1.0 / p)
            for i in range(0, len(norms), 2)
        ]
        total = float(sum(n * n for n in merged))
        ratio = total / self.g_l2 ** 2 if self.g_l2 > 0 else 0.0
        return LayerwiseResult(total, ratio, merged, self.g_l2, self.gamma ** 2, self.k_range, self.dim)


def layerwise_sum(G: Profile, gamma: float, k_range: tuple, quadrature: SphereQuadrature | None = None,
                  level: int = 8, nodes_per_layer: int = 16) -> LayerwiseResult:
    """sum_k ||R*G||^2_{L^{2d}(gamma^k < |x| <= gamma^{k+1})} over k_min <= k <= k_max."""
    if gamma <= 1:
        raise InvalidInputError(f"gamma must exceed 1, got {gamma}")
    k_min, k_max = k_range
    if k_max < k_min:
        raise InvalidInputError(f"empty layer range {k_range}")
    d = G.dim
    p = 2.0 * d
    q = quadrature or exterior_quadrature(G, level)
    field_fn = adjoint_field(G, q)
    norms = []
    for k in range(k_min, k_max + 1):
        lo, hi = gamma ** k, gamma ** (k + 1)
        grid = FieldGrid.dyadic(lo, hi, q, nodes_per_layer, ratio=gamma).sample(field_fn)
        norms.append(_norm(grid.integral(p), p))
    total = float(sum(n * n for n in norms))
    g_l2 = G.l2_norm()
    ratio = total / g_l2 ** 2 if g_l2 > 0 else 0.0
    logger.info("layerwise d=%d gamma=%g k in [%d, %d]: sum %.6g, ratio %.6g", d, gamma, k_min, k_max, total, ratio)
    return LayerwiseResult(total, ratio, norms, g_l2, gamma, (k_min, k_max), d)
