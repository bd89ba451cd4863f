"""
Finite-dimensional geometry behind the reciprocal-simplex estimates.

Points are numpy arrays of shape (d,), simplexes are (d+1, d) vertex
arrays. Volumes use the determinant formula; the batch variants work on
stacked arrays of shape (..., d+1, d) and back the Monte Carlo engine.
"""
from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.stats import special_ortho_group

from .exceptions import DegenerateGeometryError, InvalidInputError

logger = logging.getLogger(__name__)

# absolute threshold on singular values / volumes for affine degeneracy
DEGENERACY_TOL = 1e-12
# relative tolerance for volume-product comparisons
RELATIVE_TOL = 1e-12


def sphere_area(d: int) -> float:
    """|S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)."""
    return 2.0 * math.pi ** (d / 2.0) / float(gamma_fn(d / 2.0))


@dataclass(frozen=True)
class Simplex:
    """A simplex given by its d+1 vertices in R^d."""
    vertices: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[0] != vertices.shape[1] + 1:
            raise InvalidInputError(
                f"a simplex in R^d needs d+1 vertices of dimension d, got shape {vertices.shape}"
            )
        if vertices.shape[1] < 1:
            raise InvalidInputError("simplex dimension must be positive")
        object.__setattr__(self, 'vertices', vertices)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def volume(self) -> float:
        return simplex_volume(self)


@dataclass(frozen=True)
class SphereShell:
    """Origin-centered shell {r - w <= |x| <= r} in R^d."""
    outer_radius: float
    thickness: float
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidInputError(f"shell dimension must be >= 2, got {self.dim}")
        if not (self.outer_radius > 0 and 0 < self.thickness <= self.outer_radius):
            raise InvalidInputError(
                f"shell needs 0 < w <= r, got r={self.outer_radius}, w={self.thickness}"
            )

    @property
    def inner_radius(self) -> float:
        return self.outer_radius - self.thickness

    def volume(self) -> float:
        d = self.dim
        return sphere_area(d) * (self.outer_radius ** d - self.inner_radius ** d) / d

    def contains(self, points) -> np.ndarray:
        norms = np.linalg.norm(np.asarray(points, dtype=float), axis=-1)
        return (norms >= self.inner_radius) & (norms <= self.outer_radius)

    def scaled(self, factor: float) -> 'SphereShell':
        return SphereShell(self.outer_radius * factor, self.thickness * factor, self.dim)


@dataclass(frozen=True)
class PartitionResult:
    group_a: tuple
    group_b: tuple
    product: float


class SliceKind(enum.Enum):
    SHELL = 'shell'
    SPHERE = 'sphere'
    POINT = 'point'
    EMPTY = 'empty'


@dataclass(frozen=True)
class ShellSlice:
    kind: SliceKind
    r_star: float
    w_star: float


def _vertices(simplex) -> np.ndarray:
    if isinstance(simplex, Simplex):
        return simplex.vertices
    return Simplex(simplex).vertices


def _as_points(points, count: int | None = None) -> np.ndarray:
    try:
        array = np.asarray(points, dtype=float)
    except ValueError as exc:
        # ragged input: vertices of different lengths
        raise InvalidInputError(f"points must share one dimension: {exc}") from exc
    if array.ndim != 2:
        raise InvalidInputError(f"expected a sequence of points, got shape {array.shape}")
    if count is not None and array.shape[0] != count:
        raise InvalidInputError(f"expected {count} points, got {array.shape[0]}")
    return array


def simplex_volume(simplex) -> float:
    """|det(v_1 - v_0, ..., v_d - v_0)| / d!"""
    vertices = _vertices(simplex)
    d = vertices.shape[1]
    edges = vertices[1:] - vertices[0]
    return abs(float(np.linalg.det(edges))) / math.factorial(d)


def simplex_volumes(batch) -> np.ndarray:
    """Volumes of stacked simplexes, shape (..., d+1, d) -> (...)."""
    batch = np.asarray(batch, dtype=float)
    d = batch.shape[-1]
    edges = batch[..., 1:, :] - batch[..., :1, :]
    return np.abs(np.linalg.det(edges)) / math.factorial(d)


def parallelepiped_volume(vectors) -> float:
    """|det| of the matrix whose columns are the d given vectors."""
    matrix = _as_points(vectors)
    if matrix.shape[0] != matrix.shape[1]:
        raise InvalidInputError(
            f"need exactly d vectors of dimension d, got {matrix.shape[0]} of dimension {matrix.shape[1]}"
        )
    return abs(float(np.linalg.det(matrix.T)))


def hyperplane_normal(plane_points) -> np.ndarray:
    """Unit normal of the hyperplane through d affinely independent points."""
    plane = _as_points(plane_points)
    d = plane.shape[1]
    if plane.shape[0] != d:
        raise InvalidInputError(f"a hyperplane in R^{d} needs {d} points, got {plane.shape[0]}")
    edges = plane[1:] - plane[0]
    # right singular vectors: the last one spans the orthogonal complement
    _, singular, vt = np.linalg.svd(edges, full_matrices=True)
    if d > 1 and singular[-1] <= DEGENERACY_TOL:
        raise DegenerateGeometryError("hyperplane points are affinely dependent")
    return vt[-1]


def point_hyperplane_distance(x, plane_points) -> float:
    plane = _as_points(plane_points)
    x = np.asarray(x, dtype=float)
    if x.shape != (plane.shape[1],):
        raise InvalidInputError(f"point of shape {x.shape} does not live in R^{plane.shape[1]}")
    normal = hyperplane_normal(plane)
    return abs(float(np.dot(x - plane[0], normal)))


def hyperplane_distances(batch) -> np.ndarray:
    """Distance of the last vertex from the hyperplane of the others, batched.

    Uses h = |det(all edges)| / sqrt(det(E E^T)) with E the base edges; a
    degenerate base gives h = 0.
    """
    batch = np.asarray(batch, dtype=float)
    edges = batch[..., 1:, :] - batch[..., :1, :]
    full = np.abs(np.linalg.det(edges))
    base = edges[..., :-1, :]
    gram = np.einsum('...ik,...jk->...ij', base, base)
    base_measure = np.sqrt(np.clip(np.linalg.det(gram), 0.0, None))
    with np.errstate(divide='ignore', invalid='ignore'):
        heights = np.where(base_measure > DEGENERACY_TOL, full / base_measure, 0.0)
    return heights


@lru_cache(maxsize=None)
def partition_table(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Index tables for the regroupings of 2d+2 points.

    Returns (subsets, pairs): subsets lists every (d+1)-subset of
    {0, ..., 2d+1} in lexicographic order, pairs[i] = (a, b) indexes the
    subsets forming the i-th unordered partition, with subset a containing 0.
    """
    n = 2 * d + 2
    subsets = list(itertools.combinations(range(n), d + 1))
    position = {subset: index for index, subset in enumerate(subsets)}
    pairs = []
    for subset in subsets:
        if subset[0] != 0:
            break
        complement = tuple(sorted(set(range(n)) - set(subset)))
        pairs.append((position[subset], position[complement]))
    subsets_array = np.array(subsets, dtype=np.intp)
    pairs_array = np.array(pairs, dtype=np.intp)
    subsets_array.setflags(write=False)
    pairs_array.setflags(write=False)
    return subsets_array, pairs_array


def batch_partition_products(points) -> np.ndarray:
    """Volume products of every unordered partition, (..., 2d+2, d) -> (..., P)."""
    points = np.asarray(points, dtype=float)
    d = points.shape[-1]
    subsets, pairs = partition_table(d)
    volumes = simplex_volumes(points[..., subsets, :])
    return volumes[..., pairs[:, 0]] * volumes[..., pairs[:, 1]]


def reciprocal_partition(points) -> PartitionResult:
    points = _as_points(points)
    d = points.shape[1]
    if points.shape[0] != 2 * d + 2:
        raise InvalidInputError(f"need 2d+2 = {2 * d + 2} points in R^{d}, got {points.shape[0]}")
    subsets, pairs = partition_table(d)
    products = batch_partition_products(points)
    best = products.max()
    # first partition in lexicographic order within tolerance of the maximum
    index = int(np.argmax(products >= best * (1.0 - RELATIVE_TOL)))
    group_a = tuple(int(i) for i in subsets[pairs[index, 0]])
    group_b = tuple(int(i) for i in subsets[pairs[index, 1]])
    product = simplex_volume(points[list(group_a)]) * simplex_volume(points[list(group_b)])
    return PartitionResult(group_a=group_a, group_b=group_b, product=product)


def is_reciprocal(a, b, gamma: float = 1.0) -> bool:
    """True iff |a||b| >= gamma * max over regroupings of the 2d+2 vertices."""
    if not 0 < gamma <= 1:
        raise InvalidInputError(f"gamma must lie in (0, 1], got {gamma}")
    va, vb = _vertices(a), _vertices(b)
    if va.shape != vb.shape:
        raise InvalidInputError("both simplexes must share the dimension")
    products = batch_partition_products(np.concatenate([va, vb]))
    own = simplex_volume(va) * simplex_volume(vb)
    return bool(own >= gamma * products.max() * (1.0 - RELATIVE_TOL))


def shell_hyperplane_slice(shell: SphereShell, c: float) -> ShellSlice:
    """Intersection of the shell with the hyperplane x_d = c."""
    r, inner = shell.outer_radius, shell.inner_radius
    offset = abs(float(c))
    if offset > r:
        return ShellSlice(SliceKind.EMPTY, 0.0, 0.0)
    if offset == r:
        return ShellSlice(SliceKind.POINT, 0.0, 0.0)
    r_star = math.sqrt(r * r - offset * offset)
    if offset >= inner:
        return ShellSlice(SliceKind.SPHERE, r_star, r_star)
    w_star = r_star - math.sqrt(inner * inner - offset * offset)
    return ShellSlice(SliceKind.SHELL, r_star, w_star)


def shell_slice_grid(radii, thickness_ratios, offsets_per_shell: int = 8) -> list[tuple]:
    """(r, w, c, slice) over a grid, including the boundary offsets |c| = r - w and r."""
    rows = []
    for r in radii:
        for ratio in thickness_ratios:
            shell = SphereShell(r, ratio * r, 2)
            interior = np.linspace(0.0, r * 1.25, offsets_per_shell)
            offsets = np.concatenate([interior, [shell.inner_radius, r, -shell.inner_radius, -r]])
            for c in offsets:
                rows.append((r, shell.thickness, float(c), shell_hyperplane_slice(shell, c)))
    return rows


def regular_inscribed_simplex(r: float, d: int) -> Simplex:
    """Regular simplex on the sphere of radius r with its first vertex at r e_d."""
    if d < 2 or r <= 0:
        raise InvalidInputError(f"need d >= 2 and r > 0, got d={d}, r={r}")
    # vertices e_i - centroid of the standard simplex in R^{d+1}, written in
    # an orthonormal basis of the sum-zero hyperplane
    centered = np.eye(d + 1) - 1.0 / (d + 1)
    basis = np.linalg.svd(centered)[2][:d]
    vertices = centered @ basis.T
    vertices *= r / np.linalg.norm(vertices[0])
    first = vertices[0] / r
    target = np.zeros(d)
    target[-1] = 1.0
    mirror = first - target
    norm = np.linalg.norm(mirror)
    if norm > DEGENERACY_TOL:
        mirror /= norm
        vertices = vertices - 2.0 * np.outer(vertices @ mirror, mirror)
    return Simplex(vertices)


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed rotation in SO(d)."""
    return special_ortho_group.rvs(d, random_state=rng)


def location_lemma_ratio(group_a, group_b) -> float:
    """min_k dist(B_k, A_0..A_{d-1}) / dist(A_d, A_0..A_{d-1})."""
    a, b = _as_points(group_a), _as_points(group_b)
    base = a[:-1]
    reference = point_hyperplane_distance(a[-1], base)
    if reference <= DEGENERACY_TOL:
        raise DegenerateGeometryError("A_d lies on the hyperplane of the other vertices")
    return min(point_hyperplane_distance(vertex, base) for vertex in b) / reference


def location_lemma_trials(d: int, trials: int, seed: int, tolerance: float = 1e-9) -> dict:
    """Count violations of min_k dist(B_k, .) <= (d+1) dist(A_d, .) over random reciprocal pairs."""
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for _ in range(trials):
        points = rng.standard_normal((2 * d + 2, d))
        result = reciprocal_partition(points)
        ratio = location_lemma_ratio(points[list(result.group_a)], points[list(result.group_b)])
        worst = max(worst, ratio)
        if ratio > (d + 1) * (1.0 + tolerance):
            violations += 1
    logger.info("location lemma d=%d: %d trials, %d violations, worst ratio %.4f",
                d, trials, violations, worst)
    return {'dim': d, 'trials': trials, 'violations': violations, 'worst_ratio': worst}
