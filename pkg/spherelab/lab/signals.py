import hashlib
import pathlib

from django.db.models.signals import post_delete, post_save, pre_save
from django.dispatch import receiver

from .models import ExperimentRun, ResultFile


def file_digest(path):
    """
    SHA-256 of the file at `path`, in hex.
    """
    sha = hashlib.sha256()
    with pathlib.Path(path).open('rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            sha.update(block)
    return sha.hexdigest()


def manifest_digest(files):
    """
    SHA-256 over the sorted (name, digest) pairs of a run's files.
    """
    sha = hashlib.sha256()
    for name, digest in sorted((f.name, f.digest) for f in files):
        sha.update('{}\0{}\n'.format(name, digest).encode())
    return sha.hexdigest()


@receiver(pre_save, sender=ResultFile, dispatch_uid='resultfile_digest')
def result_file_digest(instance, **_kwargs):
    instance.digest = file_digest(instance.path)


def run_digest(signal, sender):
    """
    Register a receiver that keeps the run's manifest digest in step with
    its files.

    :param signal: Signal to act on.
    :param sender: Model whose instances carry a `run`.
    :returns: Receiver function.
    """
    dispatch_uid = 'run_digest_{}'.format(sender._meta.model_name)  # pylint: disable=W0212

    @receiver(signal, sender=sender, dispatch_uid=dispatch_uid)
    def fun(instance, **_kwargs):
        run = ExperimentRun.objects.filter(pk=instance.run_id).first()
        if run is None:
            return
        digest = manifest_digest(run.files.all())
        ExperimentRun.objects.filter(pk=run.pk).update(digest=digest)

    return fun


saved = run_digest(signal=post_save, sender=ResultFile)
deleted = run_digest(signal=post_delete, sender=ResultFile)
