from django.core.management.base import BaseCommand, CommandError

from ...experiments import ConfigError, ExperimentConfig, ExperimentError, \
    run_experiment
from ...models import KINDS
from ...persistence import PersistenceError, dumps, read_json
from ...serializers import ManifestSerializer


class Command(BaseCommand):
    help = 'Run an experiment and print its manifest.'

    def add_arguments(self, parser):
        parser.add_argument('kind', choices=KINDS)
        parser.add_argument('--config', help='JSON configuration file')
        parser.add_argument('--seed', type=int, required=True)
        parser.add_argument('--out', help='output directory')
        parser.add_argument('--workers', type=int)

    def handle(self, *_args, **options):
        data = {}
        if options['config']:
            try:
                data = read_json(options['config'])
            except PersistenceError as e:
                raise CommandError(e)
        data['kind'] = options['kind']
        data['seed'] = options['seed']
        if options['out']:
            data['output'] = options['out']
        if options['workers']:
            data['workers'] = options['workers']

        try:
            cfg = ExperimentConfig.from_data(data)
            run = run_experiment(cfg)
        except (ConfigError, ExperimentError) as e:
            raise CommandError(e)
        self.stdout.write(dumps(ManifestSerializer(run).data))
