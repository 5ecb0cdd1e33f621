import io
import json

from django.core.management import call_command
from django.core.management.base import CommandError
from pytest import mark, raises

from spherelab.lab import persistence
from spherelab.lab.models import ExperimentRun

PASSING = {
    'violation_rate_d1': {
        'value': 0,
        'comparator': 0
    },
    'violation_rate_d2': {
        'value': 0.3,
        'comparator': 0.05
    },
    'witness_violation': {
        'value': 1,
        'comparator': 1
    },
}


@mark.django_db
def test_experiment(tmp_path):
    config = persistence.write_json(tmp_path / 'config.json',
                                    {'sizes': {
                                        'draws': 20000
                                    }})
    out = io.StringIO()
    call_command('experiment',
                 'partition_check',
                 '--config',
                 str(config),
                 '--seed',
                 '5',
                 '--out',
                 str(tmp_path / 'runs'),
                 stdout=out)
    manifest = json.loads(out.getvalue())
    assert manifest['status'] == 'completed'
    assert manifest['seed'] == '5'
    assert manifest['config']['sizes'] == {'draws': 20000}
    assert manifest['output_dir'] == str(tmp_path / 'runs' /
                                         'partition_check-5')
    assert ExperimentRun.objects.get().pk == manifest['id']


@mark.django_db
def test_experiment_errors(tmp_path):
    with raises(CommandError):
        call_command('experiment', 'partition_check', '--config',
                     str(tmp_path / 'missing.json'), '--seed', '1')

    config = persistence.write_json(tmp_path / 'config.json',
                                    {'model': {
                                        'd': 0,
                                        'beta': 1
                                    }})
    with raises(CommandError):
        call_command('experiment', 'ultrametricity', '--config', str(config),
                     '--seed', '1', '--out', str(tmp_path))
    assert not ExperimentRun.objects.exists()


@mark.django_db
def test_verify(tmp_path, make_run):
    run = make_run(metrics=PASSING)
    out = io.StringIO()
    call_command('verify', str(run.pk), stdout=out)
    assert '4 of 4 checks passed' in out.getvalue()

    persistence.write_json(tmp_path / 'manifest.json', {'id': run.pk})
    out = io.StringIO()
    call_command('verify', str(tmp_path), '--json', stdout=out)
    report = json.loads(out.getvalue())
    assert report['id'] == run.pk
    assert all(r['passed'] for r in report['records'])


@mark.django_db
def test_verify_errors(tmp_path, make_run):
    run = make_run(metrics=dict(PASSING,
                                witness_violation={
                                    'value': 0,
                                    'comparator': 1
                                }))
    with raises(CommandError, match='1 of 4 checks failed'):
        call_command('verify', str(run.pk), stdout=io.StringIO())

    with raises(CommandError, match='no run'):
        call_command('verify', str(run.pk + 1))

    with raises(CommandError, match='not a manifest'):
        call_command('verify', str(tmp_path / 'nowhere'))
