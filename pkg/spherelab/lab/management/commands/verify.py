import pathlib

from django.core.management.base import BaseCommand, CommandError

from ...acceptance import verify_acceptance
from ...models import ExperimentRun
from ...persistence import PersistenceError, dumps, read_json


def resolve_run(target):
    """
    The run named by a run id or by the path of its manifest.
    """
    if target.isdigit():
        pk = int(target)
    else:
        path = pathlib.Path(target)
        if path.is_dir():
            path = path / 'manifest.json'
        try:
            pk = read_json(path)['id']
        except (PersistenceError, KeyError, TypeError) as e:
            raise CommandError('{} is not a manifest: {}'.format(target, e))
    try:
        return ExperimentRun.objects.get(pk=pk)
    except ExperimentRun.DoesNotExist:
        raise CommandError('no run with id {}'.format(pk))


class Command(BaseCommand):
    help = 'Check a finished run against its acceptance criteria.'

    def add_arguments(self, parser):
        parser.add_argument('run', help='run id or manifest path')
        parser.add_argument('--json', action='store_true')

    def handle(self, *_args, **options):
        report = verify_acceptance(resolve_run(options['run']))
        if options['json']:
            self.stdout.write(dumps(report.as_dict()))
        else:
            self.stdout.write(report.render())
        if not report.passed:
            raise CommandError('{} of {} checks failed'.format(
                len(report.failures), len(report.records)))
