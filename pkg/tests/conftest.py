# pylint: disable=W0621
import numpy as np
from pytest import fixture

from spherelab.lab import persistence
from spherelab.lab.models import ExperimentRun, ResultFile
from spherelab.physics.drivers import FieldDistributionSpec, generate_disorder
from spherelab.physics.model import FieldScaling, ModelParams
from spherelab.physics.sampler import ChainConfig


@fixture
def lattice():
    return FieldDistributionSpec.two_point([0.5])


@fixture
def planar_field():
    return FieldDistributionSpec.gaussian(np.diag([0.1, 0.4]))


@fixture
def ordered():
    return ModelParams(1, 4.0)


@fixture
def scaled():
    return ModelParams(1, 4.0, FieldScaling.INVERSE_SQRT_VOLUME)


@fixture
def quick_chain():
    return ChainConfig(burn_in=300, thinning=2, chains=4, seed=7)


@fixture
def disorder(planar_field):
    return generate_disorder(planar_field, 200, 11)


@fixture
def output(tmp_path, settings):
    settings.OUTPUT_DIR = tmp_path / 'runs'
    return tmp_path / 'runs'


@fixture
def make_run(tmp_path):
    def make(kind='ultrametricity', metrics=None, d=1):
        run = ExperimentRun.objects.create(
            kind=kind,
            seed='1',
            config={'kind': kind, 'model': {'d': d, 'beta': 4.0}},
            code_version='unknown',
            output_dir=str(tmp_path / '{}-manual'.format(kind)),
        )
        if metrics is not None:
            persistence.persist_results(run, 'metrics', metrics,
                                        ResultFile.JSON)
        return run

    return make
