import os
import pathlib

from django.conf import settings
from rest_framework.serializers import (
    BooleanField,
    ChoiceField,
    DictField,
    FloatField,
    IntegerField,
    JSONField,
    ListField,
    ModelSerializer,
    Serializer,
    ValidationError,
)

from ..physics.drivers import FieldDistributionSpec, FieldKind
from ..physics.errors import SphereLabError
from ..physics.model import FieldScaling, ModelParams
from ..physics.sampler import ChainConfig
from .models import KINDS, ExperimentRun, ResultFile, ResultRecord

MAX_SEED = 2**64 - 1


class ModelParamsSerializer(Serializer):  # pylint: disable=W0223
    d = IntegerField(min_value=1)
    beta = FloatField()
    field_scaling = ChoiceField(
        choices=[s.value for s in FieldScaling],
        default=FieldScaling.UNIT.value,
    )

    def validate(self, attrs):
        try:
            return ModelParams(**attrs)
        except SphereLabError as e:
            raise ValidationError(str(e))


class FieldSerializer(Serializer):  # pylint: disable=W0223
    kind = ChoiceField(choices=[k.value for k in FieldKind])
    scale = JSONField()

    def validate(self, attrs):
        try:
            return FieldDistributionSpec(attrs['kind'], attrs['scale'])
        except (SphereLabError, TypeError, ValueError) as e:
            raise ValidationError(str(e))


class ChainSerializer(Serializer):  # pylint: disable=W0223
    proposal_stdev = FloatField(required=False, allow_null=True)
    burn_in = IntegerField(min_value=1, default=2000)
    thinning = IntegerField(min_value=1, default=5)
    chains = IntegerField(min_value=1, default=4)
    orbit_moves = BooleanField(default=True)

    def validate(self, attrs):
        try:
            return ChainConfig(**attrs)
        except SphereLabError as e:
            raise ValidationError(str(e))


class SizesSerializer(Serializer):  # pylint: disable=W0223
    n = IntegerField(min_value=3, required=False)
    volumes = ListField(child=IntegerField(min_value=3), required=False)
    N = IntegerField(min_value=1, required=False)
    pairs = IntegerField(min_value=1, required=False)
    disorders = IntegerField(min_value=2, required=False)
    replicas = IntegerField(min_value=1, required=False)
    paths = IntegerField(min_value=1, required=False)
    steps = IntegerField(min_value=1000, required=False)
    triples = IntegerField(min_value=1000, required=False)
    cells = IntegerField(min_value=2, required=False)
    draws = IntegerField(min_value=1, required=False)
    window = IntegerField(min_value=1, required=False)


class ExperimentConfigSerializer(Serializer):  # pylint: disable=W0223
    kind = ChoiceField(choices=KINDS)
    seed = IntegerField(min_value=0, max_value=MAX_SEED)
    model = ModelParamsSerializer(required=False)
    field = FieldSerializer(required=False)
    chain = ChainSerializer(required=False)
    sizes = SizesSerializer(required=False)
    options = DictField(child=FloatField(), required=False)
    output = JSONField(required=False)
    workers = IntegerField(min_value=1, required=False)

    @staticmethod
    def validate_output(value):
        path = pathlib.Path(str(value)).expanduser()
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ValidationError('{}: {}'.format(path, e))
        if not os.access(str(path), os.W_OK):
            raise ValidationError('{} is not writable'.format(path))
        return path

    def validate(self, attrs):
        if 'output' not in attrs:
            attrs['output'] = self.validate_output(settings.OUTPUT_DIR)
        attrs.setdefault('workers', settings.WORKERS)
        attrs.setdefault('chain', ChainConfig())
        attrs.setdefault('sizes', {})
        attrs.setdefault('options', {})
        if attrs['kind'] not in ('partition_check', ) and 'model' not in attrs:
            raise ValidationError({'model': 'required for {}'.format(
                attrs['kind'])})
        if attrs['kind'] not in ('partition_check', 'ultrametricity') and \
                'field' not in attrs:
            raise ValidationError({'field': 'required for {}'.format(
                attrs['kind'])})
        model, field = attrs.get('model'), attrs.get('field')
        if model is not None and field is not None and field.d != model.d:
            raise ValidationError('field has d={}, model has d={}'.format(
                field.d, model.d))
        return attrs


class ResultFileSerializer(ModelSerializer):
    class Meta:
        model = ResultFile
        fields = ('name', 'path', 'fmt', 'digest')


class ResultRecordSerializer(ModelSerializer):
    class Meta:
        model = ResultRecord
        fields = (
            'criterion',
            'metric',
            'value',
            'comparator',
            'tolerance',
            'rule',
            'citation',
            'passed',
        )


class ManifestSerializer(ModelSerializer):
    files = ResultFileSerializer(many=True, read_only=True)

    class Meta:
        model = ExperimentRun
        fields = (
            'id',
            'kind',
            'seed',
            'config',
            'code_version',
            'output_dir',
            'stage_seeds',
            'status',
            'failed_stage',
            'error',
            'wall_clock',
            'digest',
            'files',
        )


class ReportSerializer(ModelSerializer):
    records = ResultRecordSerializer(many=True, read_only=True)

    class Meta:
        model = ExperimentRun
        fields = ('id', 'kind', 'seed', 'status', 'digest', 'records')
