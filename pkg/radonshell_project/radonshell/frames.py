"""
Spherical-angle frames and the change of variables of a simplex.

A simplex A_0 ... A_d is described by the angles omega of the unit normal of
the base hyperplane A_0 ... A_{d-1}, the base point A_0, the in-plane
coordinates of A_1 ... A_{d-1} and the frame coordinates of A_d. The frame
S(omega) has the normal Theta_0 as its first column.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateGeometryError, InvalidInputError, UnsupportedDimensionError
from .geometry_core import DEGENERACY_TOL, hyperplane_normal

logger = logging.getLogger(__name__)

ANGLE_TOL = 1e-12
UNIT_TOL = 1e-10


@dataclass(frozen=True)
class Frame:
    """Orthogonal matrix whose columns are Theta_0, ..., Theta_{d-1}."""
    columns: np.ndarray

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def normal(self) -> np.ndarray:
        return self.columns[:, 0]

    @property
    def tangents(self) -> np.ndarray:
        return self.columns[:, 1:]


@dataclass(frozen=True)
class NewCoords:
    omega: np.ndarray
    y0: np.ndarray
    y_mid: np.ndarray  # (d-1, d-1): row k-1 holds y^{(k)}
    yd: np.ndarray

    @property
    def dim(self) -> int:
        return self.y0.shape[0]

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.omega, self.y0, self.y_mid.ravel(), self.yd])

    @classmethod
    def unflatten(cls, vector, d: int) -> 'NewCoords':
        vector = np.asarray(vector, dtype=float)
        sizes = [d - 1, d, (d - 1) ** 2, d]
        if vector.shape != (sum(sizes),):
            raise InvalidInputError(f"expected {sum(sizes)} coordinates for d={d}, got {vector.shape}")
        omega, y0, y_mid, yd = np.split(vector, np.cumsum(sizes)[:-1])
        return cls(omega=omega, y0=y0, y_mid=y_mid.reshape(d - 1, d - 1), yd=yd)


def validate_angles(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or omega.size < 1:
        raise InvalidInputError(f"angles must be a non-empty vector, got shape {omega.shape}")
    polar, azimuth = omega[:-1], omega[-1]
    if np.any(polar < -ANGLE_TOL) or np.any(polar > math.pi + ANGLE_TOL):
        raise InvalidInputError(f"polar angles must lie in [0, pi], got {polar}")
    if azimuth < -ANGLE_TOL or azimuth >= 2 * math.pi + ANGLE_TOL:
        raise InvalidInputError(f"azimuth must lie in [0, 2pi), got {azimuth}")
    return omega


def unit_normal(omega) -> np.ndarray:
    """Theta_0(omega) for angle arrays of shape (..., d-1); returns (..., d).

    Theta_0 = (prod sin, cos w_{d-1} prod_{j<=d-2} sin, ..., cos w_2 sin w_1, cos w_1).
    """
    omega = np.asarray(omega, dtype=float)
    m = omega.shape[-1]
    sines = np.sin(omega)
    cosines = np.cos(omega)
    # running[..., k] = prod_{j<k} sin w_j (0-based angles)
    running = np.concatenate(
        [np.ones(omega.shape[:-1] + (1,)), np.cumprod(sines, axis=-1)], axis=-1
    )
    components = [running[..., m]]
    for position in range(1, m + 1):
        j = m - position  # 0-based angle index whose cosine appears
        components.append(cosines[..., j] * running[..., j])
    return np.stack(components, axis=-1)


def spherical_density(omega) -> np.ndarray:
    """prod_{j=1}^{d-2} sin^{d-1-j}(omega_j); works on (..., d-1) arrays."""
    omega = np.asarray(omega, dtype=float)
    m = omega.shape[-1]
    d = m + 1
    powers = np.arange(d - 2, 0, -1)
    if powers.size == 0:
        return np.ones(omega.shape[:-1])
    return np.prod(np.abs(np.sin(omega[..., :d - 2])) ** powers, axis=-1)


def _frame_matrix(omega: np.ndarray) -> np.ndarray:
    d = omega.size + 1
    sines = np.sin(omega)
    cosines = np.cos(omega)
    matrix = np.zeros((d, d))
    matrix[:, 0] = unit_normal(omega)

    def sin_product(low: int, high: int) -> float:
        # prod_{j=low}^{high} sin w_j with 1-based angle indices
        if high < low:
            return 1.0
        return float(np.prod(sines[low - 1:high]))

    for k in range(1, d):
        lead = d - k  # 1-based index of the angle whose cosine / sine enters Theta_k
        for m in range(1, d + 1):
            if m == 1:
                value = cosines[lead - 1] * sin_product(d + 1 - k, d - 1)
            elif m <= k:
                value = cosines[lead - 1] * cosines[d - m] * sin_product(d + 1 - k, d - m)
            elif m == k + 1:
                value = -sines[lead - 1]
            else:
                value = 0.0
            matrix[m - 1, k] = value
    return matrix


def frame_from_angles(omega, d: int) -> Frame:
    omega = validate_angles(omega)
    if d < 3:
        raise UnsupportedDimensionError(f"frames are defined for d >= 3, got d={d}")
    if omega.size != d - 1:
        raise InvalidInputError(f"expected {d - 1} angles for d={d}, got {omega.size}")
    return Frame(_frame_matrix(omega))


def angles_from_normal(n, d: int) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.shape != (d,):
        raise InvalidInputError(f"normal must have shape ({d},), got {n.shape}")
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"normal must be a unit vector, |n| = {np.linalg.norm(n)}")
    omega = np.zeros(d - 1)
    for j in range(1, d - 1):
        # coordinate d+1-j carries cos w_j, coordinates 1..d-j the rest of the sine chain
        rest = float(np.linalg.norm(n[:d - j]))
        omega[j - 1] = math.atan2(rest, n[d - j])
        if rest <= ANGLE_TOL:
            # pole: downstream angles stay 0
            return omega
    omega[d - 2] = math.atan2(n[0], n[1]) % (2 * math.pi)
    return omega


def _orient(points: np.ndarray) -> np.ndarray:
    normal = hyperplane_normal(points[:-1])
    height = float(np.dot(points[-1] - points[0], normal))
    if abs(height) <= DEGENERACY_TOL:
        raise DegenerateGeometryError("A_d lies on the base hyperplane; the orientation is undefined")
    return normal if height > 0 else -normal


def forward_change(points) -> NewCoords:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] != points.shape[1] + 1:
        raise InvalidInputError(f"expected d+1 points in R^d, got shape {points.shape}")
    d = points.shape[1]
    if d < 3:
        raise UnsupportedDimensionError(f"the change of variables needs d >= 3, got d={d}")
    normal = _orient(points)
    omega = angles_from_normal(normal, d)
    frame = _frame_matrix(omega)
    offsets = points[1:] - points[0]
    y_mid = offsets[:-1] @ frame[:, 1:]
    yd = frame.T @ offsets[-1]
    return NewCoords(omega=omega, y0=points[0].copy(), y_mid=y_mid, yd=yd)


def inverse_change(nc: NewCoords) -> np.ndarray:
    d = nc.dim
    frame = _frame_matrix(np.asarray(nc.omega, dtype=float))
    in_plane = nc.y0 + nc.y_mid @ frame[:, 1:].T
    last = nc.y0 + frame @ nc.yd
    return np.vstack([nc.y0[None, :], in_plane, last[None, :]]).reshape(d + 1, d)


def analytic_jacobian(nc: NewCoords) -> float:
    """|det Y| times the spherical density, Y the in-plane coordinate matrix."""
    return abs(float(np.linalg.det(nc.y_mid))) * float(spherical_density(nc.omega))


def numerical_jacobian(nc: NewCoords, steps) -> np.ndarray:
    """Central-difference Jacobian of the flattened inverse change, one step per coordinate."""
    d = nc.dim
    base = nc.flatten()
    steps = np.broadcast_to(np.asarray(steps, dtype=float), base.shape)
    jacobian = np.empty((base.size, base.size))
    for column in range(base.size):
        delta = np.zeros(base.size)
        delta[column] = steps[column]
        forward = inverse_change(NewCoords.unflatten(base + delta, d)).ravel()
        backward = inverse_change(NewCoords.unflatten(base - delta, d)).ravel()
        jacobian[:, column] = (forward - backward) / (2.0 * steps[column])
    return jacobian


def jacobian_check(points, step: float = 1e-5) -> float:
    """Relative error of |det J| against |det Y| * prod sin^{d-1-j} omega_j.

    Length coordinates are perturbed by step times the configuration scale,
    angles by step itself.
    """
    points = np.asarray(points, dtype=float)
    nc = forward_change(points)
    d = nc.dim
    scale = float(np.ptp(points)) or 1.0
    steps = np.concatenate([np.full(d - 1, step), np.full(d + (d - 1) ** 2 + d, step * scale)])
    numeric = abs(float(np.linalg.det(numerical_jacobian(nc, steps))))
    analytic = analytic_jacobian(nc)
    if analytic <= 0.0:
        raise DegenerateGeometryError("analytic Jacobian vanishes at this configuration")
    error = abs(numeric - analytic) / analytic
    logger.debug("jacobian d=%d numeric=%.12g analytic=%.12g rel=%.3e", d, numeric, analytic, error)
    return error


def jacobian_scan(d: int, count: int, seed: int) -> dict:
    """Worst relative Jacobian error over random configurations."""
    rng = np.random.default_rng(seed)
    errors = []
    while len(errors) < count:
        points = rng.standard_normal((d + 1, d))
        try:
            errors.append(jacobian_check(points))
        except DegenerateGeometryError:
            continue
    worst = max(errors)
    logger.info("jacobian scan d=%d: %d configurations, worst relative error %.3e", d, count, worst)
    return {'dim': d, 'count': count, 'max_error': worst, 'mean_error': float(np.mean(errors))}
