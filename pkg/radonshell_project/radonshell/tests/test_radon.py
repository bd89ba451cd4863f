import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy.special import erf

from radonshell.exceptions import InvalidInputError, UnsupportedDimensionError
from radonshell.geometry_core import random_rotation, sphere_area
from radonshell.profiles import (
    BandDirection,
    SampledGridProfile,
    cap_witness,
    gaussian_bump,
    rotate_profile,
    zonal_polynomial,
)
from radonshell.radon import (
    FieldGrid,
    GaussianField,
    adjoint_field,
    adjoint_radon,
    adjointness_check,
    axial_quadrature,
    band_quadrature,
    cap_family,
    decay_experiment,
    decay_target,
    exterior_Lp_norm,
    layerwise_sum,
    localized_ratio_bound,
    radon_forward,
    sphere_quadrature,
    zonal_adjoint_radon,
)


class QuadratureTestCase(SimpleTestCase):
    def test_constants_integrate_to_area(self):
        """Weights sum to |S^{d-1}|"""
        for d in range(2, 7):
            q = sphere_quadrature(d, 6)
            self.assertAlmostEqual(q.integrate(np.ones(q.size)), sphere_area(d), places=10)

    def test_second_moment(self):
        """int omega_d^2 = |S^{d-1}| / d"""
        for d in (3, 4, 5):
            q = sphere_quadrature(d, 6)
            self.assertAlmostEqual(q.integrate(q.nodes[:, -1] ** 2), sphere_area(d) / d, places=10)
            self.assertAlmostEqual(q.integrate(q.nodes[:, 0] ** 2), sphere_area(d) / d, places=10)

    def test_band_rule_is_exact_for_the_indicator(self):
        """The split rule integrates a band indicator exactly"""
        axis = (0.0, 0.0, 0.0, 1.0)
        band = BandDirection(0.0, 0.1, axis)
        q = band_quadrature(4, 8, 0.0, 0.1, axis=axis)
        self.assertAlmostEqual(q.integrate(band.value(q.nodes)), band.l2_squared(4), places=10)
        self.assertAlmostEqual(q.integrate(np.ones(q.size)), sphere_area(4), places=10)

    def test_axial_rule_area(self):
        """The meridian rule carries the whole sphere measure"""
        for d in (3, 5):
            q = axial_quadrature(d, 8)
            self.assertAlmostEqual(q.integrate(np.ones(q.size)) / sphere_area(d), 1.0, places=10)

    def test_unsupported_dimension(self):
        with self.assertRaises(UnsupportedDimensionError):
            sphere_quadrature(7, 4)

    def test_level_must_be_positive(self):
        with self.assertRaises(InvalidInputError):
            sphere_quadrature(3, 0)


class AdjointTransformTestCase(SimpleTestCase):
    def setUp(self):
        self.width = 0.5
        self.G = gaussian_bump(3, width=self.width)

    def test_origin_value(self):
        """R*G(0) = |S^2| e(0)"""
        self.assertAlmostEqual(zonal_adjoint_radon(self.G, np.zeros(3)), 4 * math.pi, places=10)

    def test_closed_form_in_three_dimensions(self):
        """R*G(x) = 2 pi / |x| int_{-|x|}^{|x|} e(s) ds for a uniform direction"""
        for rho in (0.3, 1.0, 2.5):
            x = np.array([0.0, rho, 0.0])
            expected = 2 * math.pi / rho * self.width * math.sqrt(math.pi) * erf(rho / self.width)
            self.assertAlmostEqual(zonal_adjoint_radon(self.G, x) / expected, 1.0, places=9)

    def test_zonal_matches_quadrature(self):
        """The axisymmetric reduction agrees with a fine sphere rule"""
        G = zonal_polynomial(3, 2, center=0.2, width=0.4, axis=(1.0, 1.0, 0.0))
        points = np.random.default_rng(3).uniform(-1.0, 1.0, (20, 3))
        np.testing.assert_allclose(zonal_adjoint_radon(G, points),
                                   adjoint_radon(G, points, sphere_quadrature(3, 40)), rtol=1e-6, atol=1e-9)

    def test_band_profile_matches_band_rule(self):
        """The cap witness reduction agrees with the split sphere rule"""
        G = cap_witness(4, 2.0)
        q = band_quadrature(4, 24, 0.0, 1.0 / 8.0)
        points = np.random.default_rng(4).uniform(-0.45, 0.45, (10, 4))
        np.testing.assert_allclose(zonal_adjoint_radon(G, points), adjoint_radon(G, points, q),
                                   rtol=1e-4, atol=1e-6)

    def test_gradient_matches_differences(self):
        """Zonal gradients agree with centered differences"""
        G = zonal_polynomial(3, 1, width=0.6)
        x = np.array([0.3, -0.4, 0.5])
        _, gradient = zonal_adjoint_radon(G, x, gradient=True)
        h = 1e-5
        numeric = [(zonal_adjoint_radon(G, x + h * e) - zonal_adjoint_radon(G, x - h * e)) / (2 * h)
                   for e in np.eye(3)]
        np.testing.assert_allclose(gradient, numeric, rtol=1e-5, atol=1e-7)

    def test_gradient_needs_separating_direction(self):
        with self.assertRaises(InvalidInputError):
            zonal_adjoint_radon(cap_witness(3, 1.0), np.ones(3), gradient=True)

    def test_adjoint_field_needs_quadrature(self):
        """Sampled profiles have no zonal reduction"""
        q = sphere_quadrature(3, 4)
        sampled = SampledGridProfile.from_profile(self.G, np.linspace(-3.0, 3.0, 31), q)
        with self.assertRaises(InvalidInputError):
            adjoint_field(sampled)
        self.assertEqual(adjoint_field(sampled, q)(np.zeros((2, 3))).shape, (2,))

    def test_quadrature_dimension_mismatch(self):
        with self.assertRaises(InvalidInputError):
            adjoint_radon(self.G, np.zeros(3), sphere_quadrature(4, 4))

    def test_vanishes_inside_the_support_gap(self):
        """R*G(x) = 0 for |x| < a when G lives on s in [a, b] with a > 0"""
        G = gaussian_bump(3, center=2.0, width=0.2)
        self.assertAlmostEqual(G.support[0], 0.8)
        directions = np.random.default_rng(5).standard_normal((12, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        points = np.linspace(0.0, 0.79, 12)[:, None] * directions
        np.testing.assert_array_equal(zonal_adjoint_radon(G, points), np.zeros(12))
        np.testing.assert_array_equal(adjoint_radon(G, points, sphere_quadrature(3, 12)), np.zeros(12))
        self.assertGreater(zonal_adjoint_radon(G, np.array([0.0, 0.0, 2.0])), 0.0)

    def test_rotation_equivariance(self):
        """R*(G o rho)(x) = R*G(rho x)"""
        rng = np.random.default_rng(6)
        for G, extent in ((zonal_polynomial(3, 2, center=0.2, width=0.4, axis=(1.0, 1.0, 0.0)), 1.0),
                          (cap_witness(4, 2.0), 0.45)):
            d = G.dim
            rotation = random_rotation(d, rng)
            points = rng.uniform(-extent, extent, (10, d))
            rotated = rotate_profile(G, rotation)
            np.testing.assert_allclose(zonal_adjoint_radon(rotated, points),
                                       zonal_adjoint_radon(G, points @ rotation.T), rtol=1e-9, atol=1e-12)

    def test_rotation_equivariance_on_the_sphere_rule(self):
        """The rotated profile on a fine sphere rule matches the reduction at rho x"""
        G = zonal_polynomial(3, 2, center=0.2, width=0.4, axis=(1.0, 1.0, 0.0))
        rotation = random_rotation(3, np.random.default_rng(7))
        points = np.random.default_rng(3).uniform(-1.0, 1.0, (20, 3))
        np.testing.assert_allclose(adjoint_radon(rotate_profile(G, rotation), points, sphere_quadrature(3, 40)),
                                   zonal_adjoint_radon(G, points @ rotation.T), rtol=1e-6, atol=1e-9)

    def test_odd_profile_has_vanishing_adjoint(self):
        """G(s, omega) = s on [-2, 2] integrates to zero against every direction rule"""
        q = sphere_quadrature(3, 8)
        s_nodes = np.linspace(-2.0, 2.0, 5)
        G = SampledGridProfile(dim=3, s_nodes=s_nodes, directions=q.nodes,
                               values=np.repeat(s_nodes[:, None], q.size, axis=1), weights=q.weights)
        points = np.random.default_rng(8).uniform(-1.0, 1.0, (6, 3))
        np.testing.assert_allclose(adjoint_radon(G, points, q), np.zeros(6), atol=1e-12)
        odd = gaussian_bump(3, center=0.0, width=0.5, order=1)
        np.testing.assert_allclose(zonal_adjoint_radon(odd, points), np.zeros(6), atol=1e-12)

    def test_cap_witness_value_in_the_cylinder(self):
        """Near the axis within |x_d| <= 4R every band direction counts: R*G = R^{1/2} |band|"""
        R = 16.0
        G = cap_witness(4, R)
        band = G.direction.l2_squared(4)
        for x in ([0.0, 0.0, 0.0, R], [0.1, 0.0, 0.0, R / 2]):
            self.assertAlmostEqual(zonal_adjoint_radon(G, np.array(x)) / (math.sqrt(R) * band), 1.0, places=6)
        approximate = sphere_area(3) / (4.0 * math.sqrt(R))
        self.assertAlmostEqual(zonal_adjoint_radon(G, np.array([0.0, 0.0, 0.0, R])) / approximate, 1.0, delta=1e-3)


class ForwardTransformTestCase(SimpleTestCase):
    def test_gaussian_plane_integral(self):
        """A Gaussian integrates to pi w^2 exp(-s^2/w^2) over a plane at distance s"""
        f = GaussianField((0.0, 0.0, 0.0), 0.5)
        value = radon_forward(f, 0.3, np.array([0.0, 0.0, 1.0]))
        self.assertAlmostEqual(value, math.pi * 0.25 * math.exp(-0.36), places=8)

    def test_monte_carlo_plane_integral(self):
        """The sampled estimate lands near the exact value"""
        f = GaussianField((0.0, 0.0, 0.0), 0.5)
        value = radon_forward(f, 0.3, np.array([0.0, 1.0, 0.0]), method='mc', n=1000000, seed=1)
        self.assertAlmostEqual(value / (math.pi * 0.25 * math.exp(-0.36)), 1.0, delta=0.05)

    def test_planes_outside_the_support(self):
        f = GaussianField((0.0, 0.0, 0.0), 0.5)
        self.assertEqual(radon_forward(f, 10.0, np.array([1.0, 0.0, 0.0])), 0.0)

    def test_unknown_method(self):
        f = GaussianField((0.0, 0.0, 0.0), 0.5)
        with self.assertRaises(InvalidInputError):
            radon_forward(f, 0.0, np.array([1.0, 0.0, 0.0]), method='simpson')

    def test_adjointness(self):
        """<Rf, G> and <f, R*G> agree within 1% for five field and profile pairs"""
        pairs = [
            (GaussianField((0.2, 0.0, 0.1), 0.5), gaussian_bump(3, center=0.1, width=0.4)),
            (GaussianField((0.0, 0.0, 0.0), 0.6), gaussian_bump(3, center=0.0, width=0.5)),
            (GaussianField((0.1, 0.1, -0.1), 0.4), gaussian_bump(3, center=-0.2, width=0.6)),
            (GaussianField((0.3, -0.2, 0.0), 0.4), zonal_polynomial(3, 1, width=0.6, axis=(1.0, 0.0, 0.0))),
            (GaussianField((0.0, 0.2, 0.2), 0.5), zonal_polynomial(3, 2, center=0.3, width=0.4)),
        ]
        for f, G in pairs:
            with self.subTest(center=f.center, profile=G.kind):
                self.assertLess(adjointness_check(f, G).relative_error, 0.01)


class NormTestCase(SimpleTestCase):
    def setUp(self):
        self.q = sphere_quadrature(3, 4)

    def test_constant_field_gives_shell_volume(self):
        """int_{1<|x|<4} 1 dx = 4 pi (64 - 1) / 3"""
        grid = FieldGrid.dyadic(1.0, 4.0, self.q).sample(lambda points: np.ones(len(points)))
        self.assertAlmostEqual(grid.integral(2.0), 4 * math.pi * 63 / 3, places=8)
        self.assertEqual(len(grid.panel_integrals(2.0)), 2)

    def test_inverse_square_field(self):
        """||x|^{-2}|_{L^2(R<|x|<rho)} = sqrt(4 pi (1/R - 1/rho))"""
        def field(points):
            return 1.0 / np.sum(points * points, axis=1)

        result = exterior_Lp_norm(field, 2.0, 1.0, 8.0, self.q)
        self.assertAlmostEqual(result.value, math.sqrt(4 * math.pi * (1.0 - 1.0 / 8.0)), places=8)
        self.assertAlmostEqual(result.tail_change, 1.0 - math.sqrt(7.0 / 8.0 / (1.0 - 1.0 / 16.0)), places=8)

    def test_adaptive_doubling_settles_the_tail(self):
        """Doubling rho_max drives the diagnostic below 1%"""
        def field(points):
            return 1.0 / np.sum(points * points, axis=1)

        result = exterior_Lp_norm(field, 2.0, 1.0, 2.0, self.q, adaptive=True)
        self.assertFalse(result.tail_flag)
        self.assertGreater(result.rho_max, 2.0)

    def test_sampled_grid_norm(self):
        """A sampled FieldGrid gives the same norm as the callable"""
        def field(points):
            return np.exp(-np.sum(points * points, axis=1))

        grid = FieldGrid.dyadic(1.0, 8.0, self.q).sample(field)
        direct = exterior_Lp_norm(field, 4.0, 1.0, 8.0, self.q)
        self.assertAlmostEqual(exterior_Lp_norm(grid, 4.0, 1.0, 8.0).value / direct.value, 1.0, places=8)

    def test_grid_csv(self):
        """to_csv writes one row per radius and angular node"""

        grid = FieldGrid.from_edges([1.0, 2.0], self.q, nodes_per_panel=2).sample(lambda p: p[:, 0])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'field.csv'
            grid.to_csv(path)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'rho [length],angular_node,value')
        self.assertEqual(len(lines), 1 + 2 * self.q.size)

    def test_p_below_one(self):
        with self.assertRaises(InvalidInputError):
            exterior_Lp_norm(lambda p: p[:, 0], 0.5, 1.0, 2.0, self.q)


class DecayTestCase(SimpleTestCase):
    def test_constants(self):
        """Decay target and the localized ratio bound in d=3"""
        self.assertAlmostEqual(decay_target(3), -1.0 / 3.0)
        self.assertAlmostEqual(localized_ratio_bound(3), 0.5)
        self.assertAlmostEqual(localized_ratio_bound(5), 7.0 / 4.0)

    def test_cap_norms_decay(self):
        """Exterior norms of the cap witness fall with R"""
        result = decay_experiment(cap_family(3), [2.0, 4.0, 8.0], claim='b', level=6,
                                  rho_factor=8.0, nodes_per_panel=8, adaptive=False)
        self.assertTrue(result.sharp)
        self.assertEqual(len(result.rows), 3)
        self.assertLess(result.fit.exponent, 0.0)
        self.assertTrue(all(row.norm > 0 for row in result.rows))

    def test_cap_decay_rate_in_four_dimensions(self):
        """The cap witness exterior L^8 norm falls like R^{-3/8}"""
        result = decay_experiment(cap_family(4), [4.0, 8.0, 16.0], claim='b', level=6,
                                  rho_factor=8.0, nodes_per_panel=8, adaptive=False)
        self.assertTrue(result.sharp)
        self.assertAlmostEqual(result.target, -0.375)
        self.assertAlmostEqual(result.fit.exponent, -0.375, delta=0.1)
        self.assertTrue(result.slope_ok)

    def test_radius_inside_support(self):
        """Claim b needs R beyond the support"""
        with self.assertRaises(InvalidInputError):
            decay_experiment(gaussian_bump(3, width=0.5), [1.0, 2.0, 4.0], claim='b')

    def test_unknown_claim(self):
        with self.assertRaises(InvalidInputError):
            decay_experiment(cap_family(3), [2.0, 4.0, 8.0], claim='c')


class LayerwiseTestCase(SimpleTestCase):
    def test_layer_sum(self):
        """Layer norms are positive and merging layers never increases the sum"""
        G = gaussian_bump(3, width=0.5)
        result = layerwise_sum(G, 2.0, (0, 3), level=6, nodes_per_layer=8)
        self.assertEqual(len(result.layer_norms), 4)
        self.assertTrue(all(norm > 0 for norm in result.layer_norms))
        self.assertAlmostEqual(result.g_l2, G.l2_norm())
        coarse = result.coarsened()
        self.assertEqual(coarse.gamma, 4.0)
        self.assertLessEqual(coarse.total, result.total * (1 + 1e-12))

    def test_gamma_must_exceed_one(self):
        with self.assertRaises(InvalidInputError):
            layerwise_sum(gaussian_bump(3), 1.0, (0, 2))
