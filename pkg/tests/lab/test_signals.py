import hashlib
from types import SimpleNamespace

from pytest import mark

from spherelab.lab import persistence
from spherelab.lab.models import ExperimentRun, ResultFile
from spherelab.lab.signals import file_digest, manifest_digest


def test_file_digest(tmp_path):
    path = tmp_path / 'blob'
    path.write_bytes(b'\x00' * 100000 + b'tail')
    assert file_digest(path) == hashlib.sha256(path.read_bytes()).hexdigest()


def test_manifest_digest_order():
    a = SimpleNamespace(name='a', digest='1')
    b = SimpleNamespace(name='b', digest='2')
    assert manifest_digest([a, b]) == manifest_digest([b, a])
    assert manifest_digest([a]) != manifest_digest([a, b])
    assert manifest_digest([]) == hashlib.sha256().hexdigest()


@mark.django_db
def test_run_digest(make_run):
    run = make_run()
    assert not run.digest

    persistence.persist_results(run, 'metrics', {}, ResultFile.JSON)
    persistence.persist_results(run, 'rows', [{'x': 1}], ResultFile.JSONL)
    run = ExperimentRun.objects.get(pk=run.pk)
    assert run.digest == manifest_digest(run.files.all())

    run.files.get(name='rows').delete()
    run = ExperimentRun.objects.get(pk=run.pk)
    assert run.digest == manifest_digest(run.files.all())
    assert [f.name for f in run.files.all()] == ['metrics']
