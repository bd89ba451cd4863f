import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy import integrate

from radonshell.exceptions import InvalidInputError, UnsupportedDimensionError
from radonshell.profiles import SampledGridProfile, gaussian_bump, zonal_polynomial
from radonshell.radon import FieldGrid, sphere_quadrature
from radonshell.wave import (
    CutoffPhi,
    CutoffProfile,
    RadiationProfile,
    energy_norm,
    exterior_energy,
    half_order,
    modified_cutoff,
    outgoing_profile,
    radiation_convergence,
    snapshot_csv,
    strichartz_exterior,
    synthesize_wave,
    translation_identity_gap,
    wave_residual,
    wave_value,
)


class CutoffTestCase(SimpleTestCase):
    def setUp(self):
        self.phi = CutoffPhi()

    def test_plateau_and_support(self):
        """phi is 1 on [-1, 1], 1/2 at |s| = 3/2 and 0 beyond 2"""
        np.testing.assert_allclose(self.phi.value(np.array([-1.0, 0.0, 0.5, 1.0])), 1.0)
        self.assertAlmostEqual(float(self.phi.value(1.5)), 0.5)
        self.assertAlmostEqual(float(self.phi.value(-1.5)), 0.5)
        np.testing.assert_array_equal(self.phi.value(np.array([-2.5, 2.0, 3.0])), 0.0)

    def test_l1_norm(self):
        """The ramps are mirror images, so ||phi||_1 = 3"""
        self.assertAlmostEqual(self.phi.l1_norm, 3.0, places=8)
        self.assertLess(self.phi.l2_norm ** 2, 3.0)
        self.assertGreater(self.phi.l2_norm ** 2, 2.0)

    def test_derivatives_match_differences(self):
        """Tabulated derivatives agree with centered differences"""
        h = 1e-5
        for s in (-1.7, 1.2, 1.5, 1.8):
            for order in (1, 2, 3):
                numeric = (self.phi.value(s + h, order - 1) - self.phi.value(s - h, order - 1)) / (2 * h)
                self.assertAlmostEqual(float(self.phi.value(s, order)), float(numeric),
                                       delta=1e-4 * max(1.0, abs(float(numeric))))

    def test_order_limit(self):
        with self.assertRaises(InvalidInputError):
            self.phi.smoothstep(0.5, order=7)


class ModifiedCutoffTestCase(SimpleTestCase):
    def setUp(self):
        self.phi = CutoffPhi()
        self.G = zonal_polynomial(3, 1, center=0.3, width=0.6)
        self.omega = np.array([0.6, 0.0, 0.8])

    def test_support(self):
        """PG lives in [-2, 2]"""
        PG = modified_cutoff(self.G, self.phi)
        self.assertEqual(PG.support, (-2.0, 2.0))
        self.assertEqual(float(PG.evaluate(2.5, self.omega)), 0.0)

    def test_mean_zero_in_s(self):
        """int PG(s, omega) ds = 0 for every direction"""
        PG = modified_cutoff(self.G, self.phi)
        for omega in (self.omega, np.array([0.0, 1.0, 0.0])):
            total, _ = integrate.quad(lambda s: float(PG.evaluate(s, omega)), -2.0, 2.0, points=[-1.0, 1.0])
            self.assertAlmostEqual(total, 0.0, places=8)

    def test_constant_profile_is_annihilated(self):
        """A profile constant in s on [-2, 2] maps to 0"""
        flat = gaussian_bump(3, width=1e4)
        PG = modified_cutoff(flat, self.phi)
        s = np.linspace(-2.0, 2.0, 9)
        np.testing.assert_allclose(PG.evaluate(s, self.omega), 0.0, atol=1e-7)

    def test_separable_and_general_paths_agree(self):
        """The separable envelope and the generic wrapper give the same PG"""
        separable = modified_cutoff(self.G, self.phi)
        general = CutoffProfile(dim=3, base=self.G, phi=self.phi)
        s = np.array([-1.6, -0.4, 0.9, 1.7])
        for order in (0, 1):
            np.testing.assert_allclose(general.evaluate(s, self.omega, order),
                                       separable.evaluate(s, self.omega, order), atol=1e-8)

    def test_applying_twice(self):
        """P(PG) = phi (PG - m') with m' the phi-weighted mean of PG"""
        PG = modified_cutoff(self.G, self.phi)
        PPG = modified_cutoff(PG, self.phi)
        weighted, _ = integrate.quad(lambda s: float(self.phi.value(s) * PG.evaluate(s, self.omega)),
                                     -2.0, 2.0, points=[-1.0, 1.0])
        mean = weighted / self.phi.l1_norm
        for s in (-1.5, 0.2, 1.3):
            expected = float(self.phi.value(s)) * (float(PG.evaluate(s, self.omega)) - mean)
            self.assertAlmostEqual(float(PPG.evaluate(s, self.omega)), expected, places=8)

    def test_sampled_profiles_use_the_wrapper(self):
        q = sphere_quadrature(3, 4)
        sampled = SampledGridProfile.from_profile(self.G, np.linspace(-4.0, 4.0, 81), q)
        self.assertIsInstance(modified_cutoff(sampled, self.phi), CutoffProfile)


class SynthesisTestCase(SimpleTestCase):
    def setUp(self):
        self.G = gaussian_bump(3, width=0.5)

    def test_half_order(self):
        self.assertEqual(half_order(3), 1)
        self.assertEqual(half_order(5), 2)
        for d in (2, 4, 6):
            with self.assertRaises(UnsupportedDimensionError):
                half_order(d)

    def test_even_dimension_rejected(self):
        """Radiation data needs an odd dimension"""
        with self.assertRaises(UnsupportedDimensionError):
            wave_value(gaussian_bump(4), np.zeros(4), 0.0)
        with self.assertRaises(UnsupportedDimensionError):
            RadiationProfile(gaussian_bump(4))

    def test_value_at_origin(self):
        """In d=3, u(0, t) = 2 g(t) for a uniform direction factor"""
        for t in (0.0, 0.3, -0.7):
            self.assertAlmostEqual(float(wave_value(self.G, np.zeros(3), t)[0]), 2 * math.exp(-t * t / 0.25),
                                   places=10)

    def test_zero_profile(self):
        """G = 0 gives u = 0"""
        points = np.random.default_rng(0).standard_normal((5, 3))
        np.testing.assert_array_equal(wave_value(self.G.scaled(0.0), points, 0.4), 0.0)

    def test_radiation_profile_wrapper(self):
        """RadiationProfile is accepted wherever a profile is"""
        x = np.array([0.2, 0.1, -0.3])
        self.assertEqual(wave_value(RadiationProfile(self.G), x, 0.5)[0], wave_value(self.G, x, 0.5)[0])

    def test_single_point_evaluation(self):
        """One point gives scalars and a gradient vector"""
        evaluation = synthesize_wave(self.G, np.array([0.3, 0.0, 0.4]), 0.2)
        self.assertIsInstance(evaluation.u, float)
        self.assertEqual(evaluation.gradient.shape, (3,))
        self.assertIsNone(evaluation.level)

    def test_time_derivative(self):
        """u_t agrees with a centered difference in t"""
        x = np.array([0.3, -0.2, 0.5])
        h = 1e-5
        numeric = (wave_value(self.G, x, 0.4 + h)[0] - wave_value(self.G, x, 0.4 - h)[0]) / (2 * h)
        self.assertAlmostEqual(synthesize_wave(self.G, x, 0.4).u_t, numeric, places=6)

    def test_quadrature_required_for_sampled_profiles(self):
        q = sphere_quadrature(3, 4)
        sampled = SampledGridProfile.from_profile(self.G, np.linspace(-3.0, 3.0, 31), q)
        with self.assertRaises(InvalidInputError):
            synthesize_wave(sampled, np.zeros(3), 0.0)
        self.assertEqual(synthesize_wave(sampled, np.zeros((2, 3)), 0.0, q).level, 4)

    def test_wave_equation_residual(self):
        """u_tt - Laplacian u vanishes to finite-difference accuracy"""
        G = gaussian_bump(3, width=0.5, order=1)
        points = np.array([[0.5, 0.2, 0.1], [-0.3, 0.8, 0.4], [1.0, -0.5, 0.2]])
        result = wave_residual(G, points, [0.0, 0.4, 0.9])
        self.assertLess(result['max_relative'], 1e-4)
        self.assertEqual(result['relative'].shape, (3,))

    def test_wave_equation_residual_in_five_dimensions(self):
        """The d=5 synthesis solves the wave equation too"""
        G = gaussian_bump(5, width=0.5, order=1)
        points = np.array([[0.5, 0.2, 0.1, -0.3, 0.2], [-0.4, 0.6, 0.3, 0.1, -0.2]])
        result = wave_residual(G, points, [0.2, 0.7])
        self.assertLess(result['max_relative'], 1e-3)

    def test_translation_identity(self):
        """The reduced and quadrature syntheses agree"""
        G = zonal_polynomial(3, 2, width=0.5)
        points = np.random.default_rng(6).uniform(-0.6, 0.6, (8, 3))
        self.assertLess(translation_identity_gap(G, points, 0.3, sphere_quadrature(3, 32)), 1e-7)

    def test_translation_identity_needs_reduction(self):
        q = sphere_quadrature(3, 4)
        sampled = SampledGridProfile.from_profile(self.G, np.linspace(-3.0, 3.0, 31), q)
        with self.assertRaises(InvalidInputError):
            translation_identity_gap(sampled, np.zeros((1, 3)), 0.0, q)


class EnergyTestCase(SimpleTestCase):
    def setUp(self):
        # mean zero in s: the far field carries no slowly decaying 1/|x| part
        self.G = gaussian_bump(3, width=0.5, order=1)

    def test_isometry(self):
        """Energy equals 2 ||G||^2"""
        result = energy_norm(self.G)
        self.assertAlmostEqual(result.ratio, 1.0, delta=5e-3)
        self.assertFalse(result.tail_flag)

    def test_conservation(self):
        """Energy does not depend on t"""
        first = energy_norm(self.G, t=0.0).energy
        later = energy_norm(self.G, t=1.5).energy
        self.assertAlmostEqual(later / first, 1.0, delta=1e-3)

    def test_isometry_in_five_dimensions(self):
        """Energy equals 2 ||G||^2 in d=5"""
        result = energy_norm(gaussian_bump(5, width=0.5, order=1), level=4)
        self.assertAlmostEqual(result.ratio, 1.0, delta=5e-3)

    def test_energy_scales_quadratically(self):
        """Scaling G by c scales the energy by c^2"""
        base = energy_norm(self.G, level=4)
        scaled = energy_norm(self.G.scaled(-3.0), level=4)
        self.assertAlmostEqual(scaled.energy / base.energy, 9.0, places=8)
        self.assertAlmostEqual(scaled.g_l2, 3.0 * base.g_l2)
        self.assertAlmostEqual(scaled.ratio, base.ratio, places=8)

    def test_exterior_energy_leaves_in_five_dimensions(self):
        """A mean-zero profile on [-R, R] keeps under 1% of its energy beyond |t| + R by |t| = 8R"""
        G = gaussian_bump(5, width=1.0 / 6.0, order=1)
        early = exterior_energy(G, 2.0, 1.0, level=4)
        late = exterior_energy(G, 8.0, 1.0, level=4)
        self.assertLess(late.fraction, 0.01)
        self.assertLess(late.fraction, early.fraction)

    def test_exterior_energy(self):
        """Energy outside the light cone is a fraction of the total"""
        G = gaussian_bump(3, width=0.25, order=1)
        result = exterior_energy(G, 2.0, 1.5)
        self.assertGreaterEqual(result.fraction, 0.0)
        self.assertLessEqual(result.fraction, 1.0)
        self.assertLess(result.energy, result.total)

    def test_exterior_energy_support_check(self):
        """The profile support must sit inside [-R, R]"""
        with self.assertRaises(InvalidInputError):
            exterior_energy(gaussian_bump(3, width=0.5), 1.0, 1.0)


class RadiationTestCase(SimpleTestCase):
    def setUp(self):
        self.G = gaussian_bump(3, center=0.2, width=0.25)

    def test_outgoing_profile(self):
        """G_+(s, theta) = (-1)^mu G(-s, -theta)"""
        theta = np.array([0.0, 0.0, 1.0])
        expected = -float(self.G.evaluate(-0.1, -theta))
        self.assertAlmostEqual(float(outgoing_profile(self.G, 0.1, theta)), expected)
        G5 = gaussian_bump(5, center=0.2, width=0.25)
        theta5 = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
        self.assertAlmostEqual(float(outgoing_profile(G5, 0.1, theta5)), float(G5.evaluate(-0.1, -theta5)))

    def test_convergence(self):
        """The radiation field of u_t is exact in d=3 and the u_r mismatch shrinks"""
        rows = radiation_convergence(self.G, [5.0, 10.0], level=4, nodes_per_panel=8)
        self.assertEqual(len(rows), 2)
        self.assertFalse(any(row.clipped for row in rows))
        self.assertTrue(all(row.error_t < 1e-6 for row in rows))
        self.assertLess(rows[1].error_r, rows[0].error_r)


class StrichartzTestCase(SimpleTestCase):
    def test_needs_five_dimensions(self):
        with self.assertRaises(UnsupportedDimensionError):
            strichartz_exterior(gaussian_bump(3, width=0.25), [1.0, 2.0, 4.0])

    def test_support_inside_R(self):
        with self.assertRaises(InvalidInputError):
            strichartz_exterior(gaussian_bump(5, width=0.5), [4.0, 8.0, 16.0], R=1.0)

    def test_coarse_run(self):
        """Two radii give norms but no fit"""
        G = gaussian_bump(5, width=0.25, order=1)
        result = strichartz_exterior(G, [3.0, 6.0], level=2, time_panels=1, time_nodes=2, nodes_per_panel=2)
        self.assertEqual(len(result.rows), 2)
        self.assertIsNone(result.fit)
        self.assertFalse(result.exponent_ok)
        self.assertTrue(all(row.norm > 0 for row in result.rows))


    def test_norms_fall_with_r(self):
        """The exterior norm decreases in r and the fitted slope is negative"""
        G = gaussian_bump(5, width=1.0 / 6.0)
        result = strichartz_exterior(G, [2.0, 4.0, 8.0], R=1.0, level=2, time_panels=2, time_nodes=4,
                                     nodes_per_panel=4)
        self.assertTrue(result.monotone)
        self.assertIsNotNone(result.fit)
        self.assertLess(result.fit.exponent, 0.0)


class SnapshotTestCase(SimpleTestCase):
    def test_snapshot_rows(self):
        """One row per time, radius and angular node"""
        q = sphere_quadrature(3, 2)
        grid = FieldGrid.from_edges([0.5, 1.0], q, nodes_per_panel=2)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'snapshot.csv'
            snapshot_csv(gaussian_bump(3, width=0.5), [0.0, 1.0], grid, path)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 't [time],rho [length],angular_node,u,u_t')
        self.assertEqual(len(lines), 1 + 2 * 2 * q.size)
