# pylint: disable=W0621
import pathlib

from pytest import approx, fixture, mark, raises

from spherelab.lab import experiments, persistence
from spherelab.lab.experiments import (
    ExperimentConfig,
    ExperimentError,
    run_experiment,
)
from spherelab.lab.models import ExperimentRun
from spherelab.physics import streams
from spherelab.physics.errors import ParameterError

QUICK_CHAIN = {'burn_in': 200, 'thinning': 1, 'chains': 2}
LATTICE = {'kind': 'two_point', 'scale': [0.5]}
PLANAR = {'kind': 'gaussian', 'scale': [[0.1, 0.0], [0.0, 0.4]]}


@fixture
def partition_config(tmp_path):
    def make(name='out', seed=5):
        return ExperimentConfig.from_data({
            'kind': 'partition_check',
            'seed': seed,
            'output': str(tmp_path / name),
            'sizes': {
                'draws': 20000
            },
        })

    return make


def _metrics(run):
    return persistence.read_json(run.files.get(name='metrics').path)


def _manifest(run):
    return persistence.read_json(
        pathlib.Path(run.output_dir) / 'manifest.json')


@mark.django_db
def test_partition_check(partition_config):
    run = run_experiment(partition_config())
    assert run.status == ExperimentRun.COMPLETED
    assert run.wall_clock >= 0
    assert [f.name for f in run.files.all()] == [
        'metrics',
        'partition_areas',
        'uniform_histogram',
    ]
    metrics = _metrics(run)
    assert metrics['area_error']['value'] <= 1e-10
    assert metrics['diameter_ratio']['comparator'] == 1
    assert set(metrics) == {
        'area_error', 'diameter_ratio', 'uniform_histogram_error'
    }

    manifest = persistence.read_json(
        pathlib.Path(run.output_dir) / 'manifest.json')
    assert manifest['id'] == run.pk
    assert manifest['status'] == 'completed'
    assert manifest['digest'] == run.digest
    assert len(manifest['files']) == 3


@mark.django_db
def test_stage_seeds(partition_config):
    run = run_experiment(partition_config(seed=9))
    assert run.stage_seeds == {
        'areas': str(streams.child_seed(9, streams.STAGE, 1)),
        'uniform_histogram': str(streams.child_seed(9, streams.STAGE, 2)),
    }


@mark.django_db
def test_reproducible(partition_config):
    first = run_experiment(partition_config('a'))
    second = run_experiment(partition_config('b'))
    for a, b in zip(first.files.all(), second.files.all()):
        assert a.name == b.name
        assert a.digest == b.digest
    assert first.digest == second.digest


@mark.django_db
def test_manifest_volatile_fields(partition_config):
    def stable(run):
        manifest = _manifest(run)
        for key in ('id', 'wall_clock', 'output_dir'):
            manifest.pop(key)
        manifest['config'].pop('output')
        for f in manifest['files']:
            f.pop('path')
        return manifest

    first = run_experiment(partition_config('a'))
    second = run_experiment(partition_config('b'))
    assert _manifest(first)['id'] != _manifest(second)['id']
    assert stable(first) == stable(second)


@mark.django_db
def test_failed_stage(mocker, partition_config):
    mocker.patch.object(experiments,
                        'eq_partition',
                        side_effect=ParameterError('no partition'))
    with raises(ExperimentError) as e:
        run_experiment(partition_config())
    assert e.value.stage == 'areas'
    assert isinstance(e.value.cause, ParameterError)

    run = ExperimentRun.objects.get()
    assert run.status == ExperimentRun.FAILED
    assert run.failed_stage == 'areas'
    assert run.error == 'no partition'
    assert _metrics(run) == {}
    manifest = persistence.read_json(
        pathlib.Path(run.output_dir) / 'manifest.json')
    assert manifest['status'] == 'failed'


@mark.django_db
def test_ultrametricity(tmp_path):
    cfg = ExperimentConfig.from_data({
        'kind': 'ultrametricity',
        'seed': 1,
        'output': str(tmp_path),
        'model': {
            'd': 1,
            'beta': 4
        },
        'sizes': {
            'triples': 2000
        },
    })
    metrics = _metrics(run_experiment(cfg))
    assert metrics['violation_rate_d1'] == {'value': 0.0, 'comparator': 0.0}
    assert metrics['violation_rate_d2']['value'] > 0
    assert metrics['witness_violation'] == {'value': 1.0, 'comparator': 1.0}


@mark.django_db
def test_gibbs_sample(tmp_path):
    cfg = ExperimentConfig.from_data({
        'kind': 'gibbs_sample',
        'seed': 4,
        'output': str(tmp_path),
        'model': {
            'd': 1,
            'beta': 4
        },
        'field': LATTICE,
        'chain': QUICK_CHAIN,
        'sizes': {
            'n': 50,
            'draws': 200,
            'pairs': 10,
            'volumes': [20],
        },
    })
    run = run_experiment(cfg)
    metrics = _metrics(run)
    assert set(metrics) == {
        'maximizer_error',
        'oracle_max_z',
        'constraint_max_deviation',
        'microcanonical_scaled_gap',
    }
    assert metrics['constraint_max_deviation']['value'] <= 1e-9
    assert len(persistence.read_jsonl(
        run.files.get(name='latent').path)) == 200
    rows = persistence.read_csv(run.files.get(name='microcanonical').path)
    assert [int(r['n']) for r in rows] == [100, 1000, 10000]
    assert float(rows[0]['predicted']) == approx(-0.2 + 0.06)


@mark.django_db
def test_overlap_unscaled(tmp_path):
    cfg = ExperimentConfig.from_data({
        'kind': 'overlap_unscaled',
        'seed': 6,
        'output': str(tmp_path),
        'model': {
            'd': 1,
            'beta': 4
        },
        'field': LATTICE,
        'chain': QUICK_CHAIN,
        'sizes': {
            'n': 100,
            'pairs': 10,
            'disorders': 3,
            'draws': 5,
        },
    })
    run = run_experiment(cfg)
    metrics = _metrics(run)
    assert set(metrics) == {
        'overlap_mean',
        'overlap_stdev',
        'paramagnetic_overlap_mean',
        'disorder_mean_stdev',
    }
    assert metrics['overlap_mean']['comparator'] == approx(0.75)
    assert len(persistence.read_csv(
        run.files.get(name='disorders').path)) == 3


def _planar_config(tmp_path, kind, sizes, scaling='unit', seed=2):
    return ExperimentConfig.from_data({
        'kind': kind,
        'seed': seed,
        'output': str(tmp_path),
        'model': {
            'd': 2,
            'beta': 8,
            'field_scaling': scaling
        },
        'field': PLANAR,
        'chain': QUICK_CHAIN,
        'sizes': sizes,
    })


@mark.django_db
def test_overlap_scaled(tmp_path):
    cfg = ExperimentConfig.from_data({
        'kind': 'overlap_scaled',
        'seed': 3,
        'output': str(tmp_path),
        'model': {
            'd': 1,
            'beta': 4
        },
        'field': LATTICE,
        'chain': QUICK_CHAIN,
        'sizes': {
            'n': 100,
            'pairs': 10,
            'disorders': 2,
            'draws': 5,
        },
    })
    run = run_experiment(cfg)
    assert run.status == ExperimentRun.COMPLETED
    metrics = _metrics(run)
    assert set(metrics) == {
        'rho_distance', 'conditional_mean', 'disorder_mean_stdev'
    }
    assert metrics['disorder_mean_stdev']['comparator'] == approx(
        experiments.NSA_FLOOR)
    assert metrics['rho_distance']['comparator'] == 0
    assert -1 <= metrics['conditional_mean']['comparator'] <= 1
    assert len(persistence.read_jsonl(
        run.files.get(name='overlaps').path)) == 10
    assert len(persistence.read_csv(
        run.files.get(name='disorders').path)) == 2

    manifest = _manifest(run)
    assert manifest['kind'] == 'overlap_scaled'
    assert manifest['seed'] == '3'
    assert manifest['config']['model']['field_scaling'] == 'unit'
    assert set(manifest['stage_seeds']) == {'law', 'non_self_averaging'}
    assert {f['name'] for f in manifest['files']} == {
        'metrics', 'overlaps', 'rho_table', 'disorders'
    }


@mark.django_db
def test_metastate_aw(tmp_path):
    cfg = _planar_config(tmp_path, 'metastate_aw', {
        'n': 50,
        'replicas': 4,
        'draws': 100,
        'window': 4,
        'cells': 4,
    })
    run = run_experiment(cfg)
    assert run.status == ExperimentRun.COMPLETED
    metrics = _metrics(run)
    assert set(metrics) == {'aw_tv', 'isotropic_tv'}
    for record in metrics.values():
        assert record['comparator'] == 0
        assert 0 <= record['value'] <= 1

    isotropic = persistence.read_csv(
        run.files.get(name='isotropic_histogram').path)
    assert [float(r['predicted']) for r in isotropic] == approx([0.25] * 4,
                                                               abs=1e-3)
    aw = persistence.read_csv(run.files.get(name='aw_histogram').path)
    assert sum(float(r['predicted']) for r in aw) == approx(1)
    assert sum(int(r['count']) for r in aw) <= 4

    manifest = _manifest(run)
    assert manifest['status'] == 'completed'
    assert manifest['config']['model']['field_scaling'] == 'unit'
    assert list(manifest['stage_seeds']) == ['partition', 'aw', 'isotropic']


@mark.django_db
def test_metastate_aw_rejects_scaled_fields(tmp_path):
    cfg = _planar_config(tmp_path, 'metastate_aw', {'cells': 4},
                         scaling='inverse_sqrt_volume')
    with raises(ExperimentError) as e:
        run_experiment(cfg)
    assert e.value.stage == 'partition'
    assert ExperimentRun.objects.get().status == ExperimentRun.FAILED


@mark.django_db
def test_metastate_ns(tmp_path):
    cfg = _planar_config(tmp_path, 'metastate_ns', {
        'N': 200,
        'paths': 3,
        'steps': 1000,
        'cells': 4,
        'draws': 100,
        'window': 4,
    })
    run = run_experiment(cfg)
    metrics = _metrics(run)
    assert set(metrics) == {'occupation_max_difference', 'proxy_match_fraction'}
    assert metrics['proxy_match_fraction']['comparator'] == approx(
        experiments.MATCH_FRACTION)
    assert 0 <= metrics['proxy_match_fraction']['value'] <= 1
    occupation = persistence.read_csv(run.files.get(name='occupation').path)
    assert len(occupation) == 4
    assert sum(float(r['walk']) for r in occupation) == approx(1, abs=1e-9)
    assert sum(float(r['brownian']) for r in occupation) == approx(1,
                                                                   abs=1e-9)
    proxy = persistence.read_csv(run.files.get(name='proxy').path)
    assert [int(r['n']) for r in proxy] == list(range(20, 201, 20))
    assert set(_manifest(run)['stage_seeds']) == {
        'walk_occupation', 'brownian_occupation', 'gibbs_proxy'
    }


@mark.django_db
def test_metastate_ns_arcsine(tmp_path):
    cfg = ExperimentConfig.from_data({
        'kind': 'metastate_ns',
        'seed': 8,
        'output': str(tmp_path),
        'model': {
            'd': 1,
            'beta': 4
        },
        'field': LATTICE,
        'chain': QUICK_CHAIN,
        'sizes': {
            'N': 100,
            'paths': 5,
            'draws': 100,
            'window': 4,
        },
    })
    metrics = _metrics(run_experiment(cfg))
    assert set(metrics) == {'arcsine_ks', 'proxy_match_fraction'}
    assert 0 <= metrics['arcsine_ks']['value'] <= 1


@mark.django_db
def test_walk_diagnostics(tmp_path):
    cfg = _planar_config(tmp_path, 'walk_diagnostics', {
        'N': 400,
        'paths': 3,
        'replicas': 2,
        'draws': 100,
        'window': 4,
        'volumes': [50],
    })
    run = run_experiment(cfg)
    assert run.status == ExperimentRun.COMPLETED
    metrics = _metrics(run)
    assert set(metrics) == {
        'conditioning_fraction',
        'recurrence_fraction',
        'tilt_exceed_fraction',
        'pure_match_fraction',
    }
    assert metrics['tilt_exceed_fraction']['comparator'] == approx(
        experiments.TRANSIENCE_FRACTION)
    assert len(persistence.read_csv(
        run.files.get(name='conditioning').path)) == 3
    transience = persistence.read_csv(run.files.get(name='transience').path)
    assert [int(r['n']) for r in transience] == [50, 50]
    assert list(_manifest(run)['stage_seeds']) == [
        'conditioning', 'recurrence', 'transience'
    ]
