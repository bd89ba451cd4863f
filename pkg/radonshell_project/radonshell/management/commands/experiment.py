"""
Run a verification experiment or summarize finished runs.

    python manage.py experiment reciprocal-scan --config scan.json --seed 7
    python manage.py experiment report results/
"""
import argparse
import json

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from radonshell.exceptions import RadonShellError
from radonshell.runner import ExperimentConfig, report, run, validation_record
from radonshell.serializers import EXPERIMENT_KINDS


class Command(BaseCommand):
    help = 'Run radonshell verification experiments and report on their manifests'

    def add_arguments(self, parser):
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--config', help='JSON experiment configuration')
        common.add_argument('--seed', type=int, help='Random seed (default RADONSHELL_SEED)')
        common.add_argument('--out', help='Output directory (default RADONSHELL_OUTPUT_DIR)')
        common.add_argument('--workers', type=int, help='Parallel Monte Carlo workers')
        common.add_argument('--dim', type=int, help='Ambient dimension d')
        common.add_argument('--soft-ok', action='store_true', default=None,
                            help='Record that soft criteria failures are accepted')

        subcommands = parser.add_subparsers(dest='subcommand', required=True)
        for kind in EXPERIMENT_KINDS:
            subcommands.add_parser(kind, parents=[common], help=f'Run the {kind} experiment')
        report_parser = subcommands.add_parser('report', help='Summarize run manifests')
        report_parser.add_argument('paths', nargs='+', help='Manifest files or directories holding runs')

    def handle(self, *args, **options):
        if options['subcommand'] == 'report':
            return self.handle_report(options['paths'])
        return self.handle_run(options['subcommand'], options)

    def _fail_validation(self, record):
        self.stderr.write(json.dumps(record, sort_keys=True))
        raise CommandError('invalid experiment configuration', returncode=2)

    def _load(self, kind, options):
        data = {}
        if options.get('config'):
            try:
                with open(options['config']) as handle:
                    data = json.load(handle)
            except (OSError, ValueError) as exc:
                self._fail_validation({'error': 'unreadable-config', 'detail': str(exc)})
            if not isinstance(data, dict):
                self._fail_validation({'error': 'invalid-config', 'detail': 'configuration must be a JSON object'})
            if data.get('kind', kind) != kind:
                self._fail_validation({'error': 'invalid-config',
                                       'detail': f"config kind {data['kind']!r} does not match {kind!r}"})
        data['kind'] = kind
        # flag > config file > RADONSHELL_ environment / settings default
        overrides = {'seed': options.get('seed'), 'output_dir': options.get('out'),
                     'workers': options.get('workers'), 'dim': options.get('dim'),
                     'soft_ok': options.get('soft_ok')}
        data.update({key: value for key, value in overrides.items() if value is not None})
        data.setdefault('output_dir', settings.RADONSHELL['OUTPUT_DIR'])
        return ExperimentConfig.from_data(data)

    def handle_run(self, kind, options):
        try:
            config = self._load(kind, options)
        except serializers.ValidationError as exc:
            self._fail_validation(validation_record(exc))

        try:
            manifest = run(config)
        except RadonShellError as exc:
            self._fail_validation({'error': type(exc).__name__, 'detail': str(exc)})

        for criterion in manifest.data['criteria']:
            line = f"{criterion['status'].upper():9s} {criterion['name']}: {criterion['statement']}"
            if criterion['status'] == 'pass':
                self.stdout.write(self.style.SUCCESS(line))
            elif criterion['status'] == 'soft-fail':
                if not config.soft_ok:
                    self.stdout.write(self.style.WARNING(line))
            else:
                self.stdout.write(self.style.ERROR(line))
        self.stdout.write(f'Manifest: {manifest.path}')

        if manifest.hard_failures:
            raise CommandError(f"hard criteria failed: {', '.join(manifest.hard_failures)}", returncode=1)
        self.stdout.write(self.style.SUCCESS(f'{kind} finished: all hard criteria passed'))

    def handle_report(self, paths):
        try:
            summary = report(paths)
        except RadonShellError as exc:
            self._fail_validation({'error': type(exc).__name__, 'detail': str(exc)})
        self.stdout.write(summary.text, ending='')
        if summary.corrupt or summary.hard_failures:
            self.stdout.write(self.style.WARNING(
                f'{summary.hard_failures} hard failures, {summary.corrupt} corrupt runs'
            ))
        else:
            self.stdout.write(self.style.SUCCESS('No hard failures'))
