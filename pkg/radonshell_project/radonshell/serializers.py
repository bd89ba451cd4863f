from django.conf import settings
from rest_framework import serializers

from .mc_engine import max_cap_angle
from .profiles import cap_witness, gaussian_bump, zonal_polynomial
from .radon import CLAIMS


EXPERIMENT_KINDS = [
    'reciprocal-scan',
    'lower-bound',
    'jacobian-check',
    'geometry-check',
    'adjoint-check',
    'decay',
    'layerwise',
    'wave-energy',
    'wave-radiation',
    'wave-exterior',
    'strichartz',
]

WAVE_KINDS = {'wave-energy', 'wave-radiation', 'wave-exterior', 'strichartz'}
SAMPLED_KINDS = {'reciprocal-scan', 'lower-bound'}

# criteria reported but never gating unless the config says otherwise
DEFAULT_SOFT_CRITERIA = {
    'strichartz': ['strichartz_exponent'],
}

PROFILE_KINDS = ['gaussian_bump', 'zonal_polynomial', 'cap']

CRITERION_STATUSES = ['pass', 'fail', 'soft-fail']


def _setting(name):
    return lambda: settings.RADONSHELL[name]


class ProfileSerializer(serializers.Serializer):
    """Serializer for one radiation / adjoint profile description"""
    kind = serializers.ChoiceField(choices=PROFILE_KINDS)
    center = serializers.FloatField(default=0.0)
    width = serializers.FloatField(default=1.0)
    amplitude = serializers.FloatField(default=1.0)
    order = serializers.IntegerField(default=0, min_value=0, max_value=4)
    degree = serializers.IntegerField(default=0, min_value=0, max_value=8)
    axis = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True, default=None)
    R = serializers.FloatField(required=False)

    def validate_width(self, value):
        if value <= 0:
            raise serializers.ValidationError("Width must be positive")
        return value

    def validate(self, attrs):
        if attrs['kind'] == 'cap' and attrs.get('R', 1.0) <= 0.25:
            raise serializers.ValidationError("The cap witness needs R > 1/4")
        return attrs


def build_profile(data: dict, d: int):
    """Profile instance for a validated ProfileSerializer payload in dimension d."""
    kind = data['kind']
    if kind == 'cap':
        return cap_witness(d, data.get('R', 1.0))
    if kind == 'zonal_polynomial':
        return zonal_polynomial(d, data.get('degree', 0), data.get('center', 0.0), data.get('width', 1.0),
                                data.get('axis'), data.get('amplitude', 1.0), data.get('order', 0))
    return gaussian_bump(d, data.get('center', 0.0), data.get('width', 1.0), data.get('amplitude', 1.0),
                         data.get('order', 0))


class ExperimentConfigSerializer(serializers.Serializer):
    """Serializer for experiment configurations read from JSON files and flags"""
    kind = serializers.ChoiceField(choices=EXPERIMENT_KINDS)
    dim = serializers.IntegerField(min_value=2, max_value=6)
    seed = serializers.IntegerField(min_value=0, default=_setting('SEED'))
    samples = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    radius = serializers.FloatField(default=1.0)
    thicknesses = serializers.ListField(child=serializers.FloatField(), required=False, default=list)
    radii = serializers.ListField(child=serializers.FloatField(), required=False, default=list)
    times = serializers.ListField(child=serializers.FloatField(), required=False, default=list)
    eps = serializers.FloatField(default=0.5)
    profiles = ProfileSerializer(many=True, required=False, default=list)
    quadrature_level = serializers.IntegerField(min_value=1, max_value=64, default=_setting('QUADRATURE_LEVEL'))
    gamma = serializers.FloatField(default=2.0)
    k_range = serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2,
                                    required=False, default=lambda: [0, 6])
    claim = serializers.ChoiceField(choices=list(CLAIMS), default='b')
    count = serializers.IntegerField(min_value=1, default=100)
    workers = serializers.IntegerField(min_value=1, default=_setting('WORKERS'))
    block_size = serializers.IntegerField(min_value=1, default=_setting('BLOCK_SIZE'))
    soft_criteria = serializers.ListField(child=serializers.CharField(), required=False, allow_null=True,
                                         default=None)
    soft_ok = serializers.BooleanField(default=_setting('SOFT_OK'))
    output_dir = serializers.CharField(default=_setting('OUTPUT_DIR'))

    def validate_radius(self, value):
        if value <= 0:
            raise serializers.ValidationError("Radius must be positive")
        return value

    def validate_thicknesses(self, value):
        if any(w <= 0 for w in value):
            raise serializers.ValidationError("Thicknesses must be positive")
        return value

    def validate_radii(self, value):
        if any(r <= 0 for r in value):
            raise serializers.ValidationError("Radii must be positive")
        return value

    def validate_gamma(self, value):
        if value <= 1:
            raise serializers.ValidationError("Layer ratio gamma must exceed 1")
        return value

    def validate(self, attrs):
        kind = attrs['kind']
        d = attrs['dim']
        errors = {}

        if kind in SAMPLED_KINDS and not attrs.get('samples'):
            errors['samples'] = f"{kind} needs a positive sample count"
        if kind in SAMPLED_KINDS and any(w > attrs['radius'] for w in attrs['thicknesses']):
            errors['thicknesses'] = "Every thickness must satisfy 0 < w <= radius"
        if kind == 'lower-bound' and not 0 < attrs['eps'] < max_cap_angle(d):
            errors['eps'] = f"Cap angle must lie in (0, {max_cap_angle(d):.6f}) for d={d}"
        if kind == 'adjoint-check' and d != 3:
            errors['dim'] = "The adjointness check runs in d=3"
        if kind in {'decay', 'layerwise'} and d < 3:
            errors['dim'] = f"{kind} needs d >= 3"
        if kind in WAVE_KINDS and d not in (3, 5):
            errors['dim'] = "Wave experiments run in odd dimensions d=3 or d=5"
        if kind == 'strichartz' and d != 5:
            errors['dim'] = "The exterior Strichartz estimate is a d=5 experiment"
        if kind == 'decay' and attrs['radii'] and len(attrs['radii']) < 3:
            errors['radii'] = "A decay fit needs at least 3 radii"
        k_min, k_max = attrs['k_range']
        if k_max < k_min:
            errors['k_range'] = "Layer range must satisfy k_min <= k_max"
        if kind in WAVE_KINDS and d == 5 and any(p['kind'] == 'cap' for p in attrs['profiles']):
            errors['profiles'] = "Wave synthesis needs differentiable profiles; the cap witness is not"

        if errors:
            raise serializers.ValidationError(errors)
        if attrs.get('soft_criteria') is None:
            attrs['soft_criteria'] = list(DEFAULT_SOFT_CRITERIA.get(kind, []))
        return attrs


class CriterionSerializer(serializers.Serializer):
    """Serializer for one acceptance criterion outcome"""
    name = serializers.CharField()
    statement = serializers.CharField()
    status = serializers.ChoiceField(choices=CRITERION_STATUSES)
    soft = serializers.BooleanField()
    value = serializers.FloatField(allow_null=True)
    detail = serializers.CharField(allow_blank=True, default='')


class RunManifestSerializer(serializers.Serializer):
    """Serializer for manifest.json, the record every run ends with"""
    config_hash = serializers.RegexField(r'^[0-9a-f]{64}$')
    kind = serializers.ChoiceField(choices=EXPERIMENT_KINDS)
    dim = serializers.IntegerField()
    seed = serializers.IntegerField(min_value=0)
    version = serializers.CharField()
    started_at = serializers.DateTimeField()
    duration_seconds = serializers.FloatField(min_value=0)
    config = serializers.DictField()
    criteria = CriterionSerializer(many=True)
    outputs = serializers.ListField(child=serializers.CharField())
    summary = serializers.DictField(default=dict)
    soft_ok = serializers.BooleanField()
    status = serializers.ChoiceField(choices=['pass', 'fail'])
