from django.test import SimpleTestCase, override_settings

from radonshell.profiles import SeparableProfile
from radonshell.serializers import ExperimentConfigSerializer, ProfileSerializer, build_profile

TEST_SETTINGS = {
    'OUTPUT_DIR': 'test-results',
    'SEED': 7,
    'WORKERS': 1,
    'BLOCK_SIZE': 512,
    'QUADRATURE_LEVEL': 6,
    'SOFT_OK': False,
}


@override_settings(RADONSHELL=TEST_SETTINGS)
class ExperimentConfigSerializerTestCase(SimpleTestCase):
    def errors_for(self, **data):
        serializer = ExperimentConfigSerializer(data=data)
        self.assertFalse(serializer.is_valid())
        return serializer.errors

    def test_defaults_come_from_settings(self):
        """Seed, quadrature level and output directory fall back to RADONSHELL"""
        serializer = ExperimentConfigSerializer(data={'kind': 'jacobian-check', 'dim': 3})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        data = serializer.validated_data
        self.assertEqual(data['seed'], 7)
        self.assertEqual(data['quadrature_level'], 6)
        self.assertEqual(data['output_dir'], 'test-results')
        self.assertEqual(data['block_size'], 512)
        self.assertEqual(data['k_range'], [0, 6])
        self.assertEqual(data['soft_criteria'], [])

    def test_strichartz_exponent_is_soft_by_default(self):
        serializer = ExperimentConfigSerializer(data={'kind': 'strichartz', 'dim': 5})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['soft_criteria'], ['strichartz_exponent'])

    def test_explicit_soft_criteria_replace_defaults(self):
        serializer = ExperimentConfigSerializer(data={'kind': 'strichartz', 'dim': 5, 'soft_criteria': []})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['soft_criteria'], [])

    def test_unknown_kind(self):
        self.assertIn('kind', self.errors_for(kind='teleport', dim=3))

    def test_dimension_range(self):
        self.assertIn('dim', self.errors_for(kind='jacobian-check', dim=9))

    def test_sampled_kinds_need_samples(self):
        """Monte Carlo experiments require a sample count"""
        self.assertIn('samples', self.errors_for(kind='reciprocal-scan', dim=3))

    def test_thickness_above_radius(self):
        errors = self.errors_for(kind='reciprocal-scan', dim=3, samples=10, radius=1.0, thicknesses=[0.5, 2.0])
        self.assertIn('thicknesses', errors)

    def test_negative_thickness(self):
        errors = self.errors_for(kind='reciprocal-scan', dim=3, samples=10, thicknesses=[-0.1])
        self.assertIn('thicknesses', errors)

    def test_cap_angle_range(self):
        """Caps around the simplex vertices must stay disjoint"""
        self.assertIn('eps', self.errors_for(kind='lower-bound', dim=3, samples=10, eps=1.2))

    def test_adjoint_check_dimension(self):
        self.assertIn('dim', self.errors_for(kind='adjoint-check', dim=4))

    def test_wave_dimensions(self):
        """Wave experiments need d=3 or d=5; Strichartz needs d=5"""
        self.assertIn('dim', self.errors_for(kind='wave-energy', dim=4))
        self.assertIn('dim', self.errors_for(kind='strichartz', dim=3))

    def test_decay_needs_three_radii(self):
        self.assertIn('radii', self.errors_for(kind='decay', dim=3, radii=[2.0, 4.0]))

    def test_layer_range_order(self):
        self.assertIn('k_range', self.errors_for(kind='layerwise', dim=3, k_range=[4, 1]))

    def test_gamma_above_one(self):
        self.assertIn('gamma', self.errors_for(kind='layerwise', dim=3, gamma=1.0))

    def test_cap_profile_rejected_for_five_dimensional_waves(self):
        errors = self.errors_for(kind='wave-energy', dim=5, profiles=[{'kind': 'cap', 'R': 2.0}])
        self.assertIn('profiles', errors)


class ProfileSerializerTestCase(SimpleTestCase):
    def test_width_must_be_positive(self):
        serializer = ProfileSerializer(data={'kind': 'gaussian_bump', 'width': 0.0})
        self.assertFalse(serializer.is_valid())
        self.assertIn('width', serializer.errors)

    def test_cap_radius(self):
        serializer = ProfileSerializer(data={'kind': 'cap', 'R': 0.2})
        self.assertFalse(serializer.is_valid())
        self.assertIn('non_field_errors', serializer.errors)

    def test_build_profiles(self):
        """Validated payloads turn into profiles of the requested kind"""
        for payload, kind in (
            ({'kind': 'gaussian_bump', 'center': 0.5, 'width': 0.3}, 'gaussian_bump'),
            ({'kind': 'zonal_polynomial', 'degree': 2, 'axis': [1.0, 0.0, 0.0]}, 'zonal_polynomial'),
            ({'kind': 'cap', 'R': 2.0}, 'cap'),
        ):
            serializer = ProfileSerializer(data=payload)
            self.assertTrue(serializer.is_valid(), serializer.errors)
            profile = build_profile(serializer.validated_data, 3)
            self.assertIsInstance(profile, SeparableProfile)
            self.assertEqual(profile.kind, kind)
            self.assertEqual(profile.dim, 3)

    def test_order_is_carried(self):
        serializer = ProfileSerializer(data={'kind': 'gaussian_bump', 'order': 1})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(build_profile(serializer.validated_data, 5).order, 1)
