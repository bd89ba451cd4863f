"""
Profiles G(s, omega) on R x S^{d-1}.

Separable profiles are an s-envelope times a direction factor and support
exact evaluation, exact derivatives in s and the axisymmetric reduction of
the adjoint Radon transform. Sampled, rotated and cut-off profiles wrap
arbitrary data or other profiles.

Convention for every profile: ``evaluate(s, omega, order)`` broadcasts ``s``
against ``omega.shape[:-1]`` and returns the ``order``-th s-derivative.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import betainc, eval_gegenbauer, eval_hermite, roots_gegenbauer

from .exceptions import InvalidInputError, UnsupportedDimensionError
from .geometry_core import sphere_area

logger = logging.getLogger(__name__)

GAUSSIAN_CUTOFF = 6.0


def _unit_axis(axis, d: int) -> tuple:
    if axis is None:
        vector = np.zeros(d)
        vector[-1] = 1.0
    else:
        vector = np.asarray(axis, dtype=float)
        if vector.shape != (d,):
            raise InvalidInputError(f"axis must have shape ({d},), got {vector.shape}")
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise InvalidInputError("axis must be nonzero")
        vector = vector / norm
    return tuple(float(v) for v in vector)


# ---------------------------------------------------------------- envelopes

class Envelope(ABC):
    """The s-dependence of a separable profile."""

    support: tuple

    @abstractmethod
    def value(self, s, order: int = 0) -> np.ndarray:
        ...

    @abstractmethod
    def descriptor(self) -> dict:
        ...

    def l2_squared(self, order: int = 0) -> float:
        a, b = self.support
        result, _ = integrate.quad(lambda s: float(self.value(s, order)) ** 2, a, b, limit=200)
        return result

    def integral(self, weight=None, order: int = 0) -> float:
        """int weight(s) e^{(order)}(s) ds over the support."""
        a, b = self.support

        def integrand(s):
            base = float(self.value(s, order))
            return base * (weight(s) if weight is not None else 1.0)

        result, _ = integrate.quad(integrand, a, b, limit=200)
        return result


@dataclass(frozen=True)
class BoxEnvelope(Envelope):
    """Indicator of [-half_width, half_width]; not differentiable."""
    half_width: float = 1.0

    @property
    def support(self):
        return (-self.half_width, self.half_width)

    def value(self, s, order=0):
        if order:
            raise InvalidInputError("the box envelope has no s-derivatives")
        s = np.asarray(s, dtype=float)
        return (np.abs(s) <= self.half_width).astype(float)

    def l2_squared(self, order=0):
        if order:
            raise InvalidInputError("the box envelope has no s-derivatives")
        return 2.0 * self.half_width

    def descriptor(self):
        return {'kind': 'box', 'half_width': self.half_width}


@dataclass(frozen=True)
class GaussianEnvelope(Envelope):
    """exp(-((s - center)/width)^2), truncated at |s - center| = cutoff * width."""
    center: float = 0.0
    width: float = 1.0
    cutoff: float = GAUSSIAN_CUTOFF

    def __post_init__(self):
        if self.width <= 0:
            raise InvalidInputError(f"width must be positive, got {self.width}")

    @property
    def support(self):
        half = self.cutoff * self.width
        return (self.center - half, self.center + half)

    def value(self, s, order=0):
        s = np.asarray(s, dtype=float)
        z = (s - self.center) / self.width
        inside = np.abs(z) <= self.cutoff
        # d^k/ds^k exp(-z^2) = (-1)^k H_k(z) exp(-z^2) / width^k
        values = (-1.0) ** order * eval_hermite(order, z) * np.exp(-z * z) / self.width ** order
        return np.where(inside, values, 0.0)

    def l2_squared(self, order=0):
        if order == 0:
            return self.width * math.sqrt(math.pi / 2.0)
        return super().l2_squared(order)

    def descriptor(self):
        return {'kind': 'gaussian', 'center': self.center, 'width': self.width, 'cutoff': self.cutoff}


@dataclass(frozen=True)
class CutoffEnvelope(Envelope):
    """phi(s) [e^{(order)}(s + shift) - kappa]: the cut-off operator on a separable profile."""
    inner: Envelope
    phi: object
    kappa: float
    inner_shift: float = 0.0
    inner_order: int = 0

    @property
    def support(self):
        return self.phi.support

    def value(self, s, order=0):
        s = np.asarray(s, dtype=float)
        total = np.zeros(np.shape(s))
        for j in range(order + 1):
            total = total + math.comb(order, j) * self.phi.value(s, j) * self.inner.value(
                s + self.inner_shift, self.inner_order + order - j
            )
        return total - self.kappa * self.phi.value(s, order)

    def descriptor(self):
        return {
            'kind': 'cutoff',
            'inner': self.inner.descriptor(),
            'inner_shift': self.inner_shift,
            'inner_order': self.inner_order,
            'kappa': self.kappa,
        }


# ---------------------------------------------------------- direction factors

class DirectionFactor(ABC):
    """The omega-dependence h(omega . axis) of a separable profile."""

    axis: tuple
    # True when the sphere average factorizes as kernel(c) * angular(cos beta)
    separates = False

    @abstractmethod
    def value(self, omega) -> np.ndarray:
        ...

    @abstractmethod
    def sphere_average(self, c, cos_beta, d: int) -> np.ndarray:
        """Mean of h(c cos b + sqrt(1-c^2) sin b eta) over the (d-2)-sphere."""

    @abstractmethod
    def l2_squared(self, d: int) -> float:
        ...

    @abstractmethod
    def descriptor(self) -> dict:
        ...

    def kinks(self, beta) -> np.ndarray:
        """Polar angles theta in (0, pi) where the sphere average is not smooth."""
        beta = np.asarray(beta, dtype=float)
        return np.empty(beta.shape + (0,))

    def rotated(self, rotation) -> 'DirectionFactor':
        # h((rho omega) . a) = h(omega . rho^T a)
        axis = np.asarray(rotation, dtype=float).T @ np.asarray(self.axis)
        return dataclasses.replace(self, axis=tuple(float(v) for v in axis))

    def _projection(self, omega) -> np.ndarray:
        return np.asarray(omega, dtype=float) @ np.asarray(self.axis)


@dataclass(frozen=True)
class UniformDirection(DirectionFactor):
    axis: tuple = ()
    separates = True

    def value(self, omega):
        return np.ones(np.shape(omega)[:-1])

    def sphere_average(self, c, cos_beta, d):
        return np.ones(np.broadcast(np.asarray(c), np.asarray(cos_beta)).shape)

    def kernel(self, c, d):
        return np.ones(np.shape(c))

    def angular(self, cos_beta, d, derivative=False):
        return np.zeros(np.shape(cos_beta)) if derivative else np.ones(np.shape(cos_beta))

    def l2_squared(self, d):
        return sphere_area(d)

    def rotated(self, rotation):
        return self

    def descriptor(self):
        return {'kind': 'uniform'}


@dataclass(frozen=True)
class BandDirection(DirectionFactor):
    """Indicator of lo < omega . axis < hi."""
    lo: float
    hi: float
    axis: tuple

    def __post_init__(self):
        if not -1.0 <= self.lo < self.hi <= 1.0:
            raise InvalidInputError(f"band needs -1 <= lo < hi <= 1, got ({self.lo}, {self.hi})")

    def value(self, omega):
        projection = self._projection(omega)
        return ((projection > self.lo) & (projection < self.hi)).astype(float)

    def sphere_average(self, c, cos_beta, d):
        if d < 3:
            raise UnsupportedDimensionError("the band reduction needs d >= 3")
        c = np.asarray(c, dtype=float)
        cos_beta = np.asarray(cos_beta, dtype=float)
        sin_beta = np.sqrt(np.clip(1.0 - cos_beta ** 2, 0.0, None))
        spread = np.sqrt(np.clip(1.0 - c ** 2, 0.0, None)) * sin_beta
        spread = np.maximum(spread, 1e-300)
        center = c * cos_beta
        half = (d - 2) / 2.0
        # first coordinate eta of a uniform point of S^{d-2}: (1 + eta)/2 ~ Beta(half, half)
        upper = betainc(half, half, np.clip((1.0 + (self.hi - center) / spread) / 2.0, 0.0, 1.0))
        lower = betainc(half, half, np.clip((1.0 + (self.lo - center) / spread) / 2.0, 0.0, 1.0))
        return np.clip(upper - lower, 0.0, 1.0)

    def kinks(self, beta):
        beta = np.asarray(beta, dtype=float)[..., None]
        values = np.array([self.lo, self.hi])
        alpha = np.arccos(np.clip(values, -1.0, 1.0))
        candidates = np.concatenate(
            [beta + alpha, beta - alpha, alpha - beta, 2 * math.pi - alpha - beta], axis=-1
        )
        return np.where((candidates > 0) & (candidates < math.pi), candidates, np.nan)

    def l2_squared(self, d):
        half = (d - 1) / 2.0
        fraction = betainc(half, half, (1.0 + self.hi) / 2.0) - betainc(half, half, (1.0 + self.lo) / 2.0)
        return sphere_area(d) * float(fraction)

    def descriptor(self):
        return {'kind': 'band', 'lo': self.lo, 'hi': self.hi, 'axis': list(self.axis)}


@dataclass(frozen=True)
class ZonalHarmonic(DirectionFactor):
    """C_n^{lambda}(omega . axis) / C_n^{lambda}(1) with lambda = (d-2)/2."""
    degree: int
    axis: tuple
    separates = True

    def _lambda(self):
        d = len(self.axis)
        if d < 3:
            raise UnsupportedDimensionError("zonal harmonics need d >= 3")
        return (d - 2) / 2.0

    def _normalized(self, t):
        lam = self._lambda()
        return eval_gegenbauer(self.degree, lam, t) / eval_gegenbauer(self.degree, lam, 1.0)

    def value(self, omega):
        return self._normalized(self._projection(omega))

    def kernel(self, c, d):
        return self._normalized(np.asarray(c, dtype=float))

    def angular(self, cos_beta, d, derivative=False):
        cos_beta = np.asarray(cos_beta, dtype=float)
        if not derivative:
            return self._normalized(cos_beta)
        if self.degree == 0:
            return np.zeros(cos_beta.shape)
        lam = self._lambda()
        # d/dt C_n^lam(t) = 2 lam C_{n-1}^{lam+1}(t)
        return 2.0 * lam * eval_gegenbauer(self.degree - 1, lam + 1.0, cos_beta) / eval_gegenbauer(
            self.degree, lam, 1.0
        )

    def sphere_average(self, c, cos_beta, d):
        # addition theorem for zonal harmonics
        return self.kernel(c, d) * self.angular(cos_beta, d)

    def l2_squared(self, d):
        lam = self._lambda()
        nodes, weights = roots_gegenbauer(self.degree + 1, lam)
        return sphere_area(d - 1) * float(np.sum(weights * self._normalized(nodes) ** 2))

    def descriptor(self):
        return {'kind': 'zonal', 'degree': self.degree, 'axis': list(self.axis)}


# ------------------------------------------------------------------ profiles

@dataclass(frozen=True)
class Profile(ABC):
    """G(s, omega) with amplitude, time shift s -> s + shift and a base derivative order."""
    dim: int
    amplitude: float = 1.0
    shift: float = 0.0
    order: int = 0

    kind = 'profile'

    def __post_init__(self):
        if self.dim < 2:
            raise UnsupportedDimensionError(f"profiles live on R x S^{{d-1}} with d >= 2, got {self.dim}")
        if self.order < 0:
            raise InvalidInputError("derivative order must be nonnegative")

    def evaluate(self, s, omega, order: int = 0) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if omega.shape[-1] != self.dim:
            raise InvalidInputError(f"directions of dimension {omega.shape[-1]} for a d={self.dim} profile")
        s = np.asarray(s, dtype=float) + self.shift
        if self.amplitude == 0.0:
            return np.zeros(np.broadcast(s, omega[..., 0]).shape)
        return self.amplitude * self._evaluate(s, omega, self.order + order)

    @abstractmethod
    def _evaluate(self, s, omega, order) -> np.ndarray:
        ...

    @property
    @abstractmethod
    def base_support(self) -> tuple:
        ...

    @property
    def support(self) -> tuple:
        a, b = self.base_support
        return (a - self.shift, b - self.shift)

    @abstractmethod
    def _l2_squared(self) -> float:
        ...

    def l2_norm(self) -> float:
        return abs(self.amplitude) * math.sqrt(max(self._l2_squared(), 0.0))

    def scaled(self, factor: float) -> 'Profile':
        return dataclasses.replace(self, amplitude=self.amplitude * factor)

    def shifted(self, t: float) -> 'Profile':
        """The profile s -> G(s + t, omega)."""
        return dataclasses.replace(self, shift=self.shift + t)

    def derivative(self, k: int = 1) -> 'Profile':
        return dataclasses.replace(self, order=self.order + k)

    def descriptor(self) -> dict:
        return {
            'kind': self.kind,
            'dim': self.dim,
            'support': list(self.support),
            'amplitude': self.amplitude,
            'shift': self.shift,
            'order': self.order,
            'params': self._params(),
        }

    @abstractmethod
    def _params(self) -> dict:
        ...


@dataclass(frozen=True)
class SeparableProfile(Profile):
    """amplitude * e^{(order)}(s + shift) * h(omega)."""
    envelope: Envelope = field(default_factory=GaussianEnvelope)
    direction: DirectionFactor = field(default_factory=UniformDirection)
    kind_name: str = 'separable'

    @property
    def kind(self):
        return self.kind_name

    def _evaluate(self, s, omega, order):
        return self.envelope.value(s, order) * self.direction.value(omega)

    @property
    def base_support(self):
        return self.envelope.support

    def _l2_squared(self):
        return self.envelope.l2_squared(self.order) * self.direction.l2_squared(self.dim)

    def rotated(self, rotation) -> 'SeparableProfile':
        return dataclasses.replace(self, direction=self.direction.rotated(rotation))

    def _params(self):
        return {'envelope': self.envelope.descriptor(), 'direction': self.direction.descriptor()}


def cap_witness(d: int, R: float) -> SeparableProfile:
    """R^{1/2} on s in [-1, 1] and 0 < omega_d < 1/(4R)."""
    if R <= 0.25:
        raise InvalidInputError(f"the cap witness needs R > 1/4, got {R}")
    return SeparableProfile(
        dim=d,
        amplitude=math.sqrt(R),
        envelope=BoxEnvelope(1.0),
        direction=BandDirection(0.0, 1.0 / (4.0 * R), _unit_axis(None, d)),
        kind_name='cap',
    )


def gaussian_bump(d: int, center: float = 0.0, width: float = 1.0, amplitude: float = 1.0,
                  order: int = 0) -> SeparableProfile:
    return SeparableProfile(
        dim=d,
        amplitude=amplitude,
        order=order,
        envelope=GaussianEnvelope(center, width),
        direction=UniformDirection(_unit_axis(None, d)),
        kind_name='gaussian_bump',
    )


def zonal_polynomial(d: int, degree: int, center: float = 0.0, width: float = 1.0, axis=None,
                     amplitude: float = 1.0, order: int = 0) -> SeparableProfile:
    if degree < 0:
        raise InvalidInputError("degree must be nonnegative")
    return SeparableProfile(
        dim=d,
        amplitude=amplitude,
        order=order,
        envelope=GaussianEnvelope(center, width),
        direction=ZonalHarmonic(degree, _unit_axis(axis, d)),
        kind_name='zonal_polynomial',
    )


@dataclass(frozen=True)
class SampledGridProfile(Profile):
    """Values on s-nodes x direction nodes; linear in s, nearest node in direction.

    Derivatives are centered differences with step equal to the smallest
    s-grid spacing.
    """
    s_nodes: np.ndarray = None
    directions: np.ndarray = None
    values: np.ndarray = None
    weights: np.ndarray = None

    kind = 'sampled_grid'

    def __post_init__(self):
        super().__post_init__()
        s_nodes = np.asarray(self.s_nodes, dtype=float)
        directions = np.asarray(self.directions, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if s_nodes.ndim != 1 or s_nodes.size < 2 or np.any(np.diff(s_nodes) <= 0):
            raise InvalidInputError("s_nodes must be strictly increasing with at least two nodes")
        if directions.ndim != 2 or directions.shape[1] != self.dim:
            raise InvalidInputError(f"directions must have shape (M, {self.dim})")
        if values.shape != (s_nodes.size, directions.shape[0]):
            raise InvalidInputError(
                f"values must have shape ({s_nodes.size}, {directions.shape[0]}), got {values.shape}"
            )
        weights = self.weights
        if weights is None:
            weights = np.full(directions.shape[0], sphere_area(self.dim) / directions.shape[0])
        object.__setattr__(self, 's_nodes', s_nodes)
        object.__setattr__(self, 'directions', directions / np.linalg.norm(directions, axis=1, keepdims=True))
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'weights', np.asarray(weights, dtype=float))

    @classmethod
    def from_profile(cls, profile: Profile, s_nodes, quadrature) -> 'SampledGridProfile':
        s_nodes = np.asarray(s_nodes, dtype=float)
        values = profile.evaluate(s_nodes[:, None], quadrature.nodes[None, :, :])
        return cls(dim=profile.dim, s_nodes=s_nodes, directions=quadrature.nodes,
                   values=values, weights=quadrature.weights)

    @property
    def step(self) -> float:
        return float(np.min(np.diff(self.s_nodes)))

    def _interpolate(self, s, column):
        nodes = self.s_nodes
        index = np.clip(np.searchsorted(nodes, s) - 1, 0, nodes.size - 2)
        left, right = nodes[index], nodes[index + 1]
        fraction = (s - left) / (right - left)
        lower = self.values[index, column]
        upper = self.values[index + 1, column]
        inside = (s >= nodes[0]) & (s <= nodes[-1])
        return np.where(inside, lower + fraction * (upper - lower), 0.0)

    def _evaluate(self, s, omega, order):
        column = np.argmax(omega @ self.directions.T, axis=-1)
        s, column = np.broadcast_arrays(s, column)
        if order == 0:
            return self._interpolate(s, column)
        h = self.step
        return (self._evaluate(s + h, omega, order - 1) - self._evaluate(s - h, omega, order - 1)) / (2 * h)

    @property
    def base_support(self):
        return (float(self.s_nodes[0]), float(self.s_nodes[-1]))

    def _l2_squared(self):
        if self.order:
            s = np.linspace(self.s_nodes[0], self.s_nodes[-1], 4 * self.s_nodes.size)
            samples = self._evaluate(s[:, None], self.directions[None, :, :], self.order)
            per_direction = integrate.trapezoid(samples ** 2, s, axis=0)
        else:
            f = self.values
            h = np.diff(self.s_nodes)[:, None]
            # exact integral of the squared linear interpolant
            per_direction = np.sum(h / 3.0 * (f[:-1] ** 2 + f[:-1] * f[1:] + f[1:] ** 2), axis=0)
        return float(np.sum(self.weights * per_direction))

    def _params(self):
        return {
            's_nodes': self.s_nodes.tolist(),
            'directions': self.directions.tolist(),
            'values': self.values.tolist(),
            'weights': self.weights.tolist(),
        }


@dataclass(frozen=True)
class RotatedProfile(Profile):
    """(G o rho)(s, omega) = G(s, rho omega)."""
    base: Profile = None
    rotation: np.ndarray = None

    kind = 'rotated'

    def __post_init__(self):
        super().__post_init__()
        rotation = np.asarray(self.rotation, dtype=float)
        if rotation.shape != (self.dim, self.dim):
            raise InvalidInputError(f"rotation must be {self.dim}x{self.dim}")
        if not np.allclose(rotation.T @ rotation, np.eye(self.dim), atol=1e-10):
            raise InvalidInputError("rotation must be orthogonal")
        object.__setattr__(self, 'rotation', rotation)

    def _evaluate(self, s, omega, order):
        return self.base.evaluate(s, omega @ self.rotation.T, order) / self.base.amplitude \
            if self.base.amplitude else np.zeros(np.broadcast(s, omega[..., 0]).shape)

    @property
    def base_support(self):
        return self.base.support

    def _l2_squared(self):
        if self.base.amplitude == 0.0:
            return 0.0
        return (self.base.l2_norm() / abs(self.base.amplitude)) ** 2

    def _params(self):
        return {'base': self.base.descriptor(), 'rotation': self.rotation.tolist()}


def rotate_profile(profile: Profile, rotation) -> Profile:
    """G o rho, kept separable when the profile is."""
    if isinstance(profile, SeparableProfile):
        return profile.rotated(rotation)
    return RotatedProfile(dim=profile.dim, base=profile, rotation=rotation)
