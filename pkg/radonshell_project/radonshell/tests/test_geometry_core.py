import math

import numpy as np
from django.test import SimpleTestCase

from radonshell.exceptions import DegenerateGeometryError, InvalidInputError
from radonshell.geometry_core import (
    SliceKind,
    SphereShell,
    batch_partition_products,
    hyperplane_distances,
    is_reciprocal,
    location_lemma_trials,
    parallelepiped_volume,
    partition_table,
    point_hyperplane_distance,
    random_rotation,
    reciprocal_partition,
    regular_inscribed_simplex,
    shell_hyperplane_slice,
    shell_slice_grid,
    simplex_volume,
    simplex_volumes,
    sphere_area,
)


class VolumeTestCase(SimpleTestCase):
    def setUp(self):
        self.unit = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)

    def test_unit_simplex_volume(self):
        """The unit simplex in R^3 has volume 1/6"""
        self.assertAlmostEqual(simplex_volume(self.unit), 1.0 / 6.0, places=14)

    def test_coplanar_points_have_zero_volume(self):
        """Four coplanar points span no volume"""
        flat = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
        self.assertEqual(simplex_volume(flat), 0.0)

    def test_volume_scales_with_dimension_power(self):
        """Scaling by 2 multiplies a 3-simplex volume by 8"""
        self.assertAlmostEqual(simplex_volume(2 * self.unit), 8.0 / 6.0, places=13)

    def test_ragged_vertices_are_rejected(self):
        """Vertices of different lengths raise an invalid-input error"""
        with self.assertRaises(InvalidInputError):
            simplex_volume([[0, 0, 0], [1, 0], [0, 1, 0], [0, 0, 1]])

    def test_batch_volumes_match_single(self):
        """simplex_volumes agrees with simplex_volume on a random batch"""
        batch = np.random.default_rng(3).standard_normal((20, 4, 3))
        expected = [simplex_volume(simplex) for simplex in batch]
        np.testing.assert_allclose(simplex_volumes(batch), expected, rtol=1e-12)

    def test_parallelepiped_examples(self):
        """Identity, shear and repeated-vector parallelepipeds"""
        self.assertAlmostEqual(parallelepiped_volume(np.eye(3)), 1.0)
        self.assertAlmostEqual(parallelepiped_volume([[1, 0], [1, 1]]), 1.0)
        self.assertAlmostEqual(parallelepiped_volume([[1, 2, 3], [1, 2, 3], [0, 0, 1]]), 0.0)

    def test_parallelepiped_wrong_count(self):
        """Two vectors in R^3 do not make a parallelepiped"""
        with self.assertRaises(InvalidInputError):
            parallelepiped_volume([[1, 0, 0], [0, 1, 0]])

    def test_sphere_area(self):
        """|S^1| = 2 pi and |S^2| = 4 pi"""
        self.assertAlmostEqual(sphere_area(2), 2 * math.pi)
        self.assertAlmostEqual(sphere_area(3), 4 * math.pi)

    def test_shell_volume(self):
        """Shell volume is the difference of ball volumes"""
        shell = SphereShell(2.0, 0.5, 3)
        self.assertAlmostEqual(shell.volume(), 4.0 / 3.0 * math.pi * (8.0 - 1.5 ** 3))
        self.assertAlmostEqual(shell.scaled(2.0).volume(), 8.0 * shell.volume())

    def test_shell_rejects_thickness_above_radius(self):
        """w must not exceed r"""
        with self.assertRaises(InvalidInputError):
            SphereShell(1.0, 1.5, 3)


class HyperplaneTestCase(SimpleTestCase):
    def test_distance_to_coordinate_plane(self):
        """(0,0,5) lies 5 above the xy-plane"""
        plane = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
        self.assertAlmostEqual(point_hyperplane_distance([0, 0, 5], plane), 5.0)
        self.assertAlmostEqual(point_hyperplane_distance([0.3, 0.2, 0], plane), 0.0)

    def test_distance_to_oblique_plane(self):
        """(1,1,1) lies sqrt(3) from x+y+z=0"""
        plane = [[1, -1, 0], [0, 1, -1], [1, 0, -1]]
        self.assertAlmostEqual(point_hyperplane_distance([1, 1, 1], plane), math.sqrt(3.0), places=12)

    def test_degenerate_plane(self):
        """Collinear plane points raise a degenerate-geometry error"""
        with self.assertRaises(DegenerateGeometryError):
            point_hyperplane_distance([0, 0, 1], [[0, 0, 0], [1, 0, 0], [2, 0, 0]])

    def test_batched_heights_match_single(self):
        """hyperplane_distances matches point_hyperplane_distance"""
        batch = np.random.default_rng(5).standard_normal((10, 4, 3))
        expected = [point_hyperplane_distance(s[-1], s[:-1]) for s in batch]
        np.testing.assert_allclose(hyperplane_distances(batch), expected, rtol=1e-10)


class ReciprocalPartitionTestCase(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(20240601)

    def test_partition_table_counts(self):
        """2d+2 points split into C(2d+2, d+1)/2 unordered partitions"""
        subsets, pairs = partition_table(2)
        self.assertEqual(len(subsets), 20)
        self.assertEqual(len(pairs), 10)
        self.assertTrue(all(subsets[a][0] == 0 for a, _ in pairs))

    def test_duplicate_separating_partition(self):
        """Two copies of a triangle split into the copies with product 1/4"""
        points = [[0, 0], [1, 0], [0, 1], [0, 0], [1, 0], [0, 1]]
        result = reciprocal_partition(points)
        self.assertAlmostEqual(result.product, 0.25)
        self.assertEqual(result.group_a, (0, 1, 2))
        self.assertEqual(result.group_b, (3, 4, 5))

    def test_triple_point_forces_zero_product(self):
        """Three copies of one point put two copies in one triangle"""
        points = [[0, 0], [0, 0], [0, 0], [1, 0], [0, 1], [1, 1]]
        self.assertEqual(reciprocal_partition(points).product, 0.0)

    def test_returned_partition_is_maximal(self):
        """No regrouping exceeds the returned product"""
        for d in (2, 3, 4):
            points = self.rng.standard_normal((2 * d + 2, d))
            result = reciprocal_partition(points)
            self.assertGreaterEqual(result.product, batch_partition_products(points).max() * (1 - 1e-12))
            self.assertTrue(is_reciprocal(points[list(result.group_a)], points[list(result.group_b)]))

    def test_scaling_and_rigid_motion(self):
        """Scaling multiplies the product by lambda^{2d}; rigid motions keep the groups"""
        d = 3
        points = self.rng.standard_normal((2 * d + 2, d))
        result = reciprocal_partition(points)
        scaled = reciprocal_partition(3.0 * points)
        self.assertAlmostEqual(scaled.product / result.product, 3.0 ** (2 * d), places=8)
        self.assertEqual(scaled.group_a, result.group_a)
        moved = points @ random_rotation(d, self.rng).T + np.array([0.5, -1.0, 2.0])
        self.assertEqual(reciprocal_partition(moved).group_a, result.group_a)

    def test_tiny_triangle_is_not_reciprocal(self):
        """A tiny triangle far from a unit triangle loses to a mixed regrouping"""
        a = [[0, 0], [0.01, 0], [0, 0.01]]
        b = [[10, 10], [11, 10], [10, 11]]
        self.assertFalse(is_reciprocal(a, b))

    def test_weaker_gamma_accepts_more(self):
        """gamma=0.5 accepts every pair gamma=1 accepts"""
        for _ in range(200):
            points = self.rng.standard_normal((6, 2))
            a, b = points[:3], points[3:]
            if is_reciprocal(a, b, 1.0):
                self.assertTrue(is_reciprocal(a, b, 0.5))

    def test_gamma_out_of_range(self):
        """gamma must lie in (0, 1]"""
        with self.assertRaises(InvalidInputError):
            is_reciprocal(np.eye(3)[:, :2], np.eye(3)[:, :2] + 1, 1.5)

    def test_location_lemma_has_no_violations(self):
        """The constant d+1 holds on random reciprocal pairs"""
        for d in (2, 3):
            result = location_lemma_trials(d, 300, seed=d)
            self.assertEqual(result['violations'], 0)
            self.assertLessEqual(result['worst_ratio'], (d + 1) * (1 + 1e-9))


class ShellSliceTestCase(SimpleTestCase):
    def setUp(self):
        self.shell = SphereShell(2.0, 0.5, 3)

    def test_shell_slice(self):
        """c=1 cuts a thinner shell"""
        cut = shell_hyperplane_slice(self.shell, 1.0)
        self.assertIs(cut.kind, SliceKind.SHELL)
        self.assertAlmostEqual(cut.r_star, math.sqrt(3.0), places=12)
        self.assertAlmostEqual(cut.w_star, math.sqrt(3.0) - math.sqrt(1.25), places=12)
        self.assertLessEqual(cut.r_star * cut.w_star, 2 * 2.0 * 0.5)

    def test_sphere_slice(self):
        """r-w <= |c| < r cuts a sphere"""
        cut = shell_hyperplane_slice(self.shell, 1.8)
        self.assertIs(cut.kind, SliceKind.SPHERE)
        self.assertAlmostEqual(cut.r_star, math.sqrt(0.76), places=12)
        self.assertEqual(cut.r_star, cut.w_star)

    def test_empty_and_point_slices(self):
        """|c| > r misses the shell, |c| = r touches it"""
        self.assertIs(shell_hyperplane_slice(self.shell, 3.0).kind, SliceKind.EMPTY)
        self.assertIs(shell_hyperplane_slice(self.shell, -2.0).kind, SliceKind.POINT)

    def test_slice_bound_on_grid(self):
        """r_star w_star <= 2 r w on a grid including the boundary offsets"""
        rows = shell_slice_grid((0.5, 1.0, 3.0), (0.01, 0.5, 1.0))
        self.assertTrue(any(abs(abs(c) - (r - w)) < 1e-15 for r, w, c, _ in rows))
        for r, w, c, cut in rows:
            self.assertLessEqual(cut.r_star * cut.w_star, 2 * r * w * (1 + 1e-12))


class RegularSimplexTestCase(SimpleTestCase):
    def test_triangle_side(self):
        """Inscribed equilateral triangle in the unit circle has side sqrt(3)"""
        vertices = regular_inscribed_simplex(1.0, 2).vertices
        distances = [np.linalg.norm(vertices[i] - vertices[j]) for i in range(3) for j in range(i + 1, 3)]
        np.testing.assert_allclose(distances, math.sqrt(3.0), rtol=1e-12)

    def test_tetrahedron_edges(self):
        """All six tetrahedron edges have length sqrt(8/3)"""
        vertices = regular_inscribed_simplex(1.0, 3).vertices
        distances = [np.linalg.norm(vertices[i] - vertices[j]) for i in range(4) for j in range(i + 1, 4)]
        np.testing.assert_allclose(distances, math.sqrt(8.0 / 3.0), rtol=1e-12)

    def test_vertices_on_sphere(self):
        """Every vertex lies on the sphere of radius r"""
        for d in (2, 3, 4, 5):
            vertices = regular_inscribed_simplex(2.5, d).vertices
            np.testing.assert_allclose(np.linalg.norm(vertices, axis=1), 2.5, atol=1e-12)
            np.testing.assert_allclose(vertices[0], 2.5 * np.eye(d)[-1], atol=1e-12)
