"""
Free waves synthesized from radiation profiles in odd dimensions.

For d = 2 mu + 1 the wave with radiation profile G is

    u(x, t) = (2 pi)^{-mu} int_{S^{d-1}} G^{(mu-1)}(x . omega + t, omega) d omega,

i.e. (2 pi)^{-mu} times the adjoint Radon transform of the time-shifted
profile. Energies here are int |grad u|^2 + |u_t|^2 without the factor 1/2,
so the isometry reads energy = 2 ||G||^2.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .exceptions import InvalidInputError, UnsupportedDimensionError
from .mc_engine import ScalingFit, fit_scaling
from .profiles import CutoffEnvelope, Profile, SeparableProfile
from .radon import (
    FieldGrid,
    SphereQuadrature,
    adjoint_radon,
    adjoint_radon_gradient,
    axial_quadrature,
    sphere_quadrature,
    supports_zonal,
    zonal_adjoint_radon,
)

logger = logging.getLogger(__name__)

ENERGY_TAIL_TOLERANCE = 0.02
STRICHARTZ_TARGET = -2.0 / 35.0
STRICHARTZ_TOLERANCE = 0.04


def half_order(d: int) -> int:
    """mu = (d-1)/2 for odd d >= 3."""
    if d < 3 or d % 2 == 0:
        raise UnsupportedDimensionError(f"wave synthesis needs an odd dimension d >= 3, got d={d}")
    return (d - 1) // 2


# ------------------------------------------------------------------ cut-off

def _psi_polynomials(count: int) -> list:
    # psi^{(k)}(x) = exp(-u) P_k(u), u = 1/x, with P_{k+1} = u^2 (P_k - P_k')
    polys = [Polynomial([1.0])]
    square = Polynomial([0.0, 0.0, 1.0])
    for _ in range(count):
        current = polys[-1]
        polys.append(square * (current - current.deriv()))
    return polys


def _psi(x: np.ndarray, k: int, polys: list) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    inside = x > 1e-3
    u = 1.0 / np.where(inside, x, 1.0)
    return np.where(inside, np.exp(-u) * polys[k](u), 0.0)


@dataclass(frozen=True)
class CutoffPhi:
    """phi(s) = S(2 - |s|) with the smoothstep S(x) = psi(x) / (psi(x) + psi(1 - x)), psi(t) = exp(-1/t)."""
    max_order: int = 6
    l1_norm: float = field(init=False)
    l2_norm: float = field(init=False)

    support = (-2.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, '_polys', _psi_polynomials(self.max_order + 1))
        l1, _ = integrate.quad(lambda s: float(self.value(s)), -2.0, 2.0, points=[-1.0, 1.0])
        l2, _ = integrate.quad(lambda s: float(self.value(s)) ** 2, -2.0, 2.0, points=[-1.0, 1.0])
        object.__setattr__(self, 'l1_norm', l1)
        object.__setattr__(self, 'l2_norm', math.sqrt(l2))

    def smoothstep(self, x, order: int = 0) -> np.ndarray:
        """S^{(order)}(x); S = 0 for x <= 0 and 1 for x >= 1."""
        if order > self.max_order:
            raise InvalidInputError(f"cut-off derivatives are tabulated up to order {self.max_order}")
        x = np.asarray(x, dtype=float)
        inner = np.clip(x, 0.0, 1.0)
        numerator = [_psi(inner, j, self._polys) for j in range(order + 1)]
        mirrored = [(-1.0) ** j * _psi(1.0 - inner, j, self._polys) for j in range(order + 1)]
        denominator = [n + m for n, m in zip(numerator, mirrored)]
        derivatives = []
        for k in range(order + 1):
            # quotient rule: N^{(k)} = sum_j C(k, j) S^{(j)} D^{(k-j)}
            total = numerator[k] - sum(math.comb(k, j) * derivatives[j] * denominator[k - j] for j in range(k))
            derivatives.append(total / denominator[0])
        result = derivatives[order]
        if order == 0:
            return np.where(x >= 1.0, 1.0, np.where(x <= 0.0, 0.0, result))
        return np.where((x > 0.0) & (x < 1.0), result, 0.0)

    def value(self, s, order: int = 0) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return (-np.sign(s)) ** order * self.smoothstep(2.0 - np.abs(s), order)

    def descriptor(self) -> dict:
        return {'kind': 'smoothstep', 'l1_norm': self.l1_norm, 'l2_norm': self.l2_norm}


def _composite_rule(lo: float, hi: float, panels: int = 16, nodes: int = 16) -> tuple:
    t, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges)[:, None] / 2.0
    return (edges[:-1, None] + half * (t + 1.0)).ravel(), (half * w).ravel()


@dataclass(frozen=True)
class CutoffProfile(Profile):
    """phi(s) [G(s, omega) - m(omega)], m(omega) = int phi G(., omega) ds / ||phi||_1, for any G."""
    base: Profile = None
    phi: CutoffPhi = None

    kind = 'cutoff'

    def _mean(self, omega) -> np.ndarray:
        s, w = _composite_rule(-2.0, 2.0)
        shape = omega.shape[:-1]
        samples = self.base.evaluate(s.reshape((-1,) + (1,) * len(shape)), omega)
        weighted = (w * self.phi.value(s)).reshape((-1,) + (1,) * len(shape))
        return np.sum(weighted * samples, axis=0) / self.phi.l1_norm

    def _evaluate(self, s, omega, order):
        total = -self.phi.value(s, order) * self._mean(omega)
        for j in range(order + 1):
            total = total + math.comb(order, j) * self.phi.value(s, j) * self.base.evaluate(s, omega, order - j)
        return total

    @property
    def base_support(self):
        return self.phi.support

    def _l2_squared(self):
        q = sphere_quadrature(self.dim, 8)
        s, w = _composite_rule(-2.0, 2.0)
        values = self._evaluate(s[:, None], q.nodes[None, :, :], self.order)
        return float(w @ (values ** 2) @ q.weights)

    def _params(self):
        return {'base': self.base.descriptor(), 'phi': self.phi.descriptor()}


def modified_cutoff(G: Profile, phi: CutoffPhi) -> Profile:
    """P G = phi(s) [G(s, omega) - ||phi||_1^{-1} int phi(s') G(s', omega) ds']; supported in [-2, 2]."""
    if isinstance(G, SeparableProfile):
        kappa, _ = integrate.quad(
            lambda s: float(phi.value(s) * G.envelope.value(s + G.shift, G.order)),
            -2.0, 2.0, points=[-1.0, 1.0], limit=200,
        )
        envelope = CutoffEnvelope(inner=G.envelope, phi=phi, kappa=kappa / phi.l1_norm,
                                  inner_shift=G.shift, inner_order=G.order)
        return SeparableProfile(dim=G.dim, amplitude=G.amplitude, envelope=envelope,
                                direction=G.direction, kind_name='cutoff')
    return CutoffProfile(dim=G.dim, base=G, phi=phi)


# ---------------------------------------------------------------- synthesis

@dataclass(frozen=True)
class RadiationProfile:
    """A profile on R x S^{d-1} used as radiation data, d odd."""
    base: Profile

    def __post_init__(self):
        half_order(self.base.dim)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def mu(self) -> int:
        return half_order(self.base.dim)

    def derivative(self, k: int) -> Profile:
        return self.base.derivative(k)


def _profile(G) -> Profile:
    return G.base if isinstance(G, RadiationProfile) else G


def _funk_hecke(G: Profile) -> bool:
    return supports_zonal(G) and G.direction.separates


@dataclass(frozen=True)
class WaveEvaluation:
    u: np.ndarray
    u_t: np.ndarray
    u_r: np.ndarray
    gradient: np.ndarray
    level: int | None


def synthesize_wave(G, x, t: float, q: SphereQuadrature | None = None, nodes: int = 48) -> WaveEvaluation:
    """u, u_t, u_r and grad u at points x (shape (N, d) or (d,)) and time t.

    Separable profiles with a uniform or zonal-harmonic direction factor
    use the Funk-Hecke reduction; everything else needs a sphere rule.
    """
    G = _profile(G)
    d = G.dim
    mu = half_order(d)
    scale = (2.0 * math.pi) ** (-mu)
    shifted = G.shifted(t)
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if _funk_hecke(G):
        u, gradient = zonal_adjoint_radon(shifted, points, order=mu - 1, nodes=nodes, gradient=True)
        u_t = zonal_adjoint_radon(shifted, points, order=mu, nodes=nodes)
        level = None
    else:
        if q is None:
            raise InvalidInputError(f"a sphere quadrature is needed to synthesize waves from {G.kind} profiles")
        u = adjoint_radon(shifted, points, q, order=mu - 1)
        u_t = adjoint_radon(shifted, points, q, order=mu)
        gradient = adjoint_radon_gradient(shifted, points, q, order=mu - 1)
        level = q.level
    rho = np.linalg.norm(points, axis=1)
    radial = np.where(rho[:, None] > 0, points / np.maximum(rho, 1e-300)[:, None], 0.0)
    u_r = np.sum(gradient * radial, axis=1)
    evaluation = WaveEvaluation(
        u=scale * np.asarray(u), u_t=scale * np.asarray(u_t), u_r=scale * u_r,
        gradient=scale * np.asarray(gradient), level=level,
    )
    if single:
        return WaveEvaluation(float(evaluation.u[0]), float(evaluation.u_t[0]), float(evaluation.u_r[0]),
                              evaluation.gradient[0], level)
    return evaluation


def wave_value(G, x, t: float, q: SphereQuadrature | None = None, nodes: int = 48) -> np.ndarray:
    """u alone, without the derivative integrals."""
    G = _profile(G)
    mu = half_order(G.dim)
    shifted = G.shifted(t)
    points = np.atleast_2d(np.asarray(x, dtype=float))
    if supports_zonal(G):
        values = zonal_adjoint_radon(shifted, points, order=mu - 1, nodes=nodes)
    elif q is None:
        raise InvalidInputError(f"a sphere quadrature is needed to synthesize waves from {G.kind} profiles")
    else:
        values = adjoint_radon(shifted, points, q, order=mu - 1)
    return (2.0 * math.pi) ** (-mu) * np.asarray(values)


def wave_residual(G, points, times, h: float = 1e-2, q: SphereQuadrature | None = None) -> dict:
    """Fourth-order finite-difference residual of u_tt - Laplacian u at (points[i], times[i]).

    Residuals are relative to the largest |u_tt| over the sample points.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    times = np.broadcast_to(np.asarray(times, dtype=float), (points.shape[0],))
    d = points.shape[1]
    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    coefficients = np.array([-1.0, 16.0, 16.0, -1.0])
    # all spatial neighbours of one sample point: (offset, axis) pairs
    steps = (offsets[:, None, None] * h * np.eye(d)[None, :, :]).reshape(-1, d)
    center = np.empty(points.shape[0])
    u_tt = np.empty(points.shape[0])
    laplacian = np.empty(points.shape[0])
    for index, (point, t) in enumerate(zip(points, times)):
        center[index] = wave_value(G, point, t, q)[0]
        shifted = np.array([wave_value(G, point, t + offset * h, q)[0] for offset in offsets])
        u_tt[index] = coefficients @ shifted - 30.0 * center[index]
        neighbours = wave_value(G, point + steps, t, q).reshape(offsets.size, d)
        laplacian[index] = coefficients @ neighbours.sum(axis=1) - 30.0 * d * center[index]
    u_tt /= 12.0 * h * h
    laplacian /= 12.0 * h * h
    residual = np.abs(u_tt - laplacian)
    scale = float(np.max(np.abs(u_tt))) if points.shape[0] else 0.0
    relative = residual / scale if scale > 0 else residual
    logger.info("wave residual d=%d over %d points: max relative %.3e", d, points.shape[0], float(np.max(relative)))
    return {'u': center, 'u_tt': u_tt, 'laplacian': laplacian, 'relative': relative,
            'max_relative': float(np.max(relative))}


# ------------------------------------------------------------------- energy

def energy_quadrature(G: Profile, level: int = 8) -> SphereQuadrature:
    """Meridian rule for Funk-Hecke profiles, the product rule otherwise."""
    if _funk_hecke(G):
        axis = G.direction.axis or None
        return axial_quadrature(G.dim, level, axis=axis, depth=3)
    return sphere_quadrature(G.dim, level)


def _energy_edges(inner: float, outer_core: float, rho_max: float, width: float) -> np.ndarray:
    """Linear panels of the given width on [inner, outer_core], dyadic beyond up to rho_max."""
    count = max(1, math.ceil((outer_core - inner) / width))
    edges = list(np.linspace(inner, outer_core, count + 1))
    while edges[-1] * 2.0 < rho_max * (1.0 + 1e-12):
        edges.append(edges[-1] * 2.0)
    return np.asarray(edges)


def _energy_density(G: Profile, t: float, q: SphereQuadrature | None):
    def density(points):
        evaluation = synthesize_wave(G, points, t, None if _funk_hecke(G) else q)
        return np.sum(evaluation.gradient ** 2, axis=1) + evaluation.u_t ** 2
    return density


def _panel_energies(G: Profile, t: float, inner: float, q: SphereQuadrature, rho_max: float | None,
                    panel_width: float | None, nodes_per_panel: int) -> np.ndarray:
    a, b = G.support
    reach = max(abs(a), abs(b))
    width = panel_width or max(min(1.0, (b - a) / 8.0), 1e-3)
    core = max(inner, abs(t) + reach) + 2.0 * width
    rho_max = rho_max or 64.0 * (abs(t) + reach + 1.0)
    edges = _energy_edges(inner, core, max(rho_max, 2.0 * core), width)
    grid = FieldGrid.from_edges(edges, q, nodes_per_panel).sample(_energy_density(G, t, q))
    return grid.panel_integrals(1.0)


@dataclass(frozen=True)
class EnergyResult:
    energy: float
    g_l2: float
    ratio: float
    tail_change: float
    tail_flag: bool


def energy_norm(G, t: float = 0.0, q: SphereQuadrature | None = None, level: int = 8,
                rho_max: float | None = None, panel_width: float | None = None,
                nodes_per_panel: int = 12) -> EnergyResult:
    """||(u, u_t)(t)||^2 in H^1 x L^2 against 2 ||G||^2."""
    G = _profile(G)
    half_order(G.dim)
    q = q or energy_quadrature(G, level)
    panels = _panel_energies(G, t, 0.0, q, rho_max, panel_width, nodes_per_panel)
    energy = float(np.sum(panels))
    g_l2 = G.l2_norm()
    ratio = energy / (2.0 * g_l2 ** 2) if g_l2 > 0 else 1.0
    tail = float(panels[-1] / energy) if energy > 0 else 0.0
    flag = tail > ENERGY_TAIL_TOLERANCE
    if flag:
        logger.warning("energy tail %.2f%% above 2%% at t=%g", 100 * tail, t)
    logger.info("energy d=%d t=%g: %.8g vs 2||G||^2 = %.8g (ratio %.5f)", G.dim, t, energy, 2 * g_l2 ** 2, ratio)
    return EnergyResult(energy=energy, g_l2=g_l2, ratio=ratio, tail_change=tail, tail_flag=flag)


@dataclass(frozen=True)
class ExteriorEnergyResult:
    energy: float
    total: float
    fraction: float
    tail_change: float
    tail_flag: bool


def exterior_energy(G, t: float, R: float, q: SphereQuadrature | None = None, level: int = 8,
                    rho_max: float | None = None, nodes_per_panel: int = 12) -> ExteriorEnergyResult:
    """Energy of (grad u, u_t) over |x| > |t| + R, with the total energy for reference."""
    G = _profile(G)
    half_order(G.dim)
    a, b = G.support
    if a < -R * (1 + 1e-12) or b > R * (1 + 1e-12):
        raise InvalidInputError(f"profile support [{a}, {b}] is not inside [-{R}, {R}]")
    q = q or energy_quadrature(G, level)
    total = float(np.sum(_panel_energies(G, t, 0.0, q, rho_max, None, nodes_per_panel)))
    panels = _panel_energies(G, t, abs(t) + R, q, rho_max, None, nodes_per_panel)
    energy = float(np.sum(panels))
    fraction = energy / total if total > 0 else 0.0
    tail = float(panels[-1] / energy) if energy > 0 else 0.0
    logger.info("exterior energy t=%g R=%g: %.6g of %.6g (%.3f%%)", t, R, energy, total, 100 * fraction)
    return ExteriorEnergyResult(energy, total, fraction, tail, tail > ENERGY_TAIL_TOLERANCE)


# --------------------------------------------------------------- radiation

def outgoing_profile(G, s, theta, order: int = 0) -> np.ndarray:
    """G_+(s, theta) = (-1)^mu G(-s, -theta)."""
    G = _profile(G)
    mu = half_order(G.dim)
    theta = np.asarray(theta, dtype=float)
    return (-1.0) ** mu * G.evaluate(-np.asarray(s, dtype=float), -theta, order)


@dataclass(frozen=True)
class RadiationRow:
    t: float
    error_t: float
    error_r: float
    clipped: bool


def radiation_convergence(G, t_list, q: SphereQuadrature | None = None, level: int = 8,
                          margin: float | None = None, nodes_per_panel: int = 16) -> list:
    """L^2(dr dtheta) mismatch of r^mu u_t - G_+(r - t) and r^mu u_r + G_+(r - t) on the light-cone window."""
    G = _profile(G)
    mu = half_order(G.dim)
    q = q or energy_quadrature(G, level)
    a, b = G.support
    margin = margin if margin is not None else max((b - a) / 2.0, 1.0)
    rows = []
    for t in t_list:
        lo, hi = t - b - margin, t - a + margin
        clipped = lo < 0
        if clipped:
            logger.warning("radiation window clipped at r=0 for t=%g", t)
        lo = max(lo, 0.0)
        if hi <= lo:
            rows.append(RadiationRow(float(t), 0.0, 0.0, True))
            continue
        panels = max(1, math.ceil((hi - lo) / max((b - a) / 8.0, 0.25)))
        grid = FieldGrid.from_edges(np.linspace(lo, hi, panels + 1), q, nodes_per_panel)
        points = grid.points()
        r = np.repeat(grid.radii, q.size)
        theta = np.tile(q.nodes, (grid.radii.size, 1))
        evaluation = synthesize_wave(G, points, t, None if _funk_hecke(G) else q)
        target = outgoing_profile(G, r - t, theta)
        mismatch_t = (r ** mu * evaluation.u_t - target).reshape(grid.radii.size, q.size)
        mismatch_r = (r ** mu * evaluation.u_r + target).reshape(grid.radii.size, q.size)
        weights = grid.radial_weights[:, None] * q.weights[None, :]
        error_t = math.sqrt(float(np.sum(weights * mismatch_t ** 2)))
        error_r = math.sqrt(float(np.sum(weights * mismatch_r ** 2)))
        rows.append(RadiationRow(float(t), error_t, error_r, clipped))
        logger.info("radiation t=%g: |r^mu u_t - G_+| = %.3e, |r^mu u_r + G_+| = %.3e", t, error_t, error_r)
    return rows


# -------------------------------------------------------------- strichartz

@dataclass(frozen=True)
class StrichartzRow:
    r: float
    norm: float
    time_tail: float
    radial_tail: float


@dataclass(frozen=True)
class StrichartzResult:
    fit: ScalingFit | None
    rows: list
    coarse_grid_warning: bool = True

    @property
    def monotone(self) -> bool:
        norms = [row.norm for row in self.rows]
        return all(later < earlier for earlier, later in zip(norms, norms[1:]))

    @property
    def exponent_ok(self) -> bool:
        return self.fit is not None and abs(self.fit.exponent - STRICHARTZ_TARGET) <= STRICHARTZ_TOLERANCE


def strichartz_exterior(G, r_list, R: float | None = None, q: SphereQuadrature | None = None, level: int = 8,
                        time_panels: int = 8, time_nodes: int = 8, nodes_per_panel: int = 8) -> StrichartzResult:
    """||u||_{L^{7/3}_t L^{14/3}_x(|x| > r)} for each r, over |t| <= 8R (the reference grid)."""
    G = _profile(G)
    if G.dim != 5:
        raise UnsupportedDimensionError(f"the exterior Strichartz estimate is a d=5 statement, got d={G.dim}")
    a, b = G.support
    reach = max(abs(a), abs(b))
    R = R if R is not None else reach
    if reach > R * (1 + 1e-12):
        raise InvalidInputError(f"profile support [{a}, {b}] is not inside [-{R}, {R}]")
    q = q or energy_quadrature(G, level)
    p_space, p_time = 14.0 / 3.0, 7.0 / 3.0
    t_max = 8.0 * R
    times, time_weights = _composite_rule(-t_max, t_max, time_panels, time_nodes)
    inner_times = np.abs(times) <= t_max / 2.0
    width = max(min(1.0, (b - a) / 4.0), 1e-3)
    rows = []
    for r in sorted(float(value) for value in r_list):
        space_norms = np.empty(times.size)
        radial_tails = np.empty(times.size)
        for index, t in enumerate(times):
            core = max(r, abs(t) + R + 4.0 * reach) + width
            edges = _energy_edges(r, core, 8.0 * core, width)
            grid = FieldGrid.from_edges(edges, q, nodes_per_panel)
            grid = grid.sample(lambda points, t=t: wave_value(G, points, t, None if supports_zonal(G) else q))
            panels = grid.panel_integrals(p_space)
            total = float(np.sum(panels))
            space_norms[index] = total ** (1.0 / p_space)
            radial_tails[index] = float(panels[-1] / total) if total > 0 else 0.0
        integrand = time_weights * space_norms ** p_time
        full = float(np.sum(integrand))
        norm = full ** (1.0 / p_time)
        half = float(np.sum(integrand[inner_times])) ** (1.0 / p_time)
        time_tail = abs(norm - half) / norm if norm > 0 else 0.0
        rows.append(StrichartzRow(r, norm, time_tail, float(np.max(radial_tails))))
        logger.info("strichartz r=%g: %.6g (time tail %.2e)", r, norm, time_tail)
    fit = None
    if len(rows) >= 3 and all(row.norm > 0 for row in rows):
        fit = fit_scaling([(row.r, row.norm) for row in rows])
        logger.info("strichartz slope %.4f (target %.4f)", fit.exponent, STRICHARTZ_TARGET)
    logger.warning("strichartz norms use the coarse reference grid (%d time nodes)", times.size)
    return StrichartzResult(fit=fit, rows=rows, coarse_grid_warning=True)


# -------------------------------------------------------------- utilities

def translation_identity_gap(G, points, t: float, q: SphereQuadrature) -> float:
    """max |u(x, t) - (2 pi)^{-mu} R*(G^{(mu-1)}(. + t))(x)| between the reduced and the quadrature paths."""
    G = _profile(G)
    mu = half_order(G.dim)
    if not supports_zonal(G):
        raise InvalidInputError(f"the reduced synthesis path is not available for {G.kind} profiles")
    synthesized = wave_value(G, points, t)
    direct = (2.0 * math.pi) ** (-mu) * adjoint_radon(G.shifted(t).derivative(mu - 1), np.atleast_2d(points), q)
    return float(np.max(np.abs(synthesized - direct)))


def snapshot_csv(G, t_list, grid: FieldGrid, path, q: SphereQuadrature | None = None) -> None:
    """Rows (t, rho, angular_node, u, u_t) over the grid points at each time."""
    G = _profile(G)
    if q is None and not _funk_hecke(G):
        q = sphere_quadrature(G.dim, 8)
    points = grid.points()
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(['t [time]', 'rho [length]', 'angular_node', 'u', 'u_t'])
        for t in t_list:
            evaluation = synthesize_wave(G, points, t, q)
            u = evaluation.u.reshape(grid.radii.size, grid.quadrature.size)
            u_t = evaluation.u_t.reshape(grid.radii.size, grid.quadrature.size)
            for i, rho in enumerate(grid.radii):
                for m in range(grid.quadrature.size):
                    writer.writerow([repr(float(t)), repr(float(rho)), m, repr(float(u[i, m])),
                                     repr(float(u_t[i, m]))])
