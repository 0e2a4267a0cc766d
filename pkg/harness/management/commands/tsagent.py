"""
The tsagent command line:

    manage.py tsagent ask --question "..." --series "name=path.csv" [--backend scripted --fixture f.json]
    manage.py tsagent bench --synthetic trend×20 --seed 7 --policy ideal --out reports/trend
    manage.py tsagent gen --synthetic anomaly_location×50 --seed 3 --out data/anomaly.jsonl
    manage.py tsagent tools [--family det]
    manage.py tsagent trace show traces/ask-0a1b2c3d4e5f.json [--check]

Exit status: 0 on success, 1 when the agent fails to answer (or a trace
fails its grounding check), 2 on usage and backend errors.
"""
import argparse
import hashlib
import json
import logging
import re
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from agent.exceptions import AgentError, AgentTransportError, TraceFormatError
from agent.services import run_agent
from agent.tracing import check_grounding, load_trace, render_trace, write_trace
from harness.datasets import dump_dataset, load_dataset
from harness.exceptions import HarnessError
from harness.generators import CATEGORIES, generate_synthetic
from harness.policies import POLICIES
from harness.services import record_benchmark, run_benchmark
from llm.backends import BackendConfig
from llm.exceptions import LLMConfigError
from llm.serializers import BACKEND_KINDS
from series.exceptions import SeriesError
from series.services import SeriesService
from series.store import SeriesStore
from toolkit.registry import FAMILIES
from toolkit.tools import build_registry

logger = logging.getLogger(__name__)

AGENT_FAILURE = 1
USAGE = 2
SYNTHETIC_SPEC = re.compile(r'^\s*([a-z_]+)\s*[×x*:]\s*(\d+)\s*$')


def synthetic_spec(value):
    """argparse type for "category×count" (x, * and : also separate the two)."""
    match = SYNTHETIC_SPEC.match(value)
    if not match:
        raise argparse.ArgumentTypeError(f'expected category×count, got {value!r}')
    category, count = match.group(1), int(match.group(2))
    if category not in CATEGORIES:
        raise argparse.ArgumentTypeError(f"unknown category {category!r}; choose from {', '.join(CATEGORIES)}")
    return category, count


def series_spec(value):
    """argparse type for "name=path"."""
    name, sep, path = value.partition('=')
    if not sep or not name.strip() or not path.strip():
        raise argparse.ArgumentTypeError(f'expected name=path, got {value!r}')
    return name.strip(), Path(path.strip())


def add_backend_arguments(parser):
    group = parser.add_argument_group('backend')
    group.add_argument('--backend', choices=BACKEND_KINDS, help='Backend kind (default: TSAGENT LLM KIND).')
    group.add_argument('--endpoint', help='OpenAI-compatible base URL.')
    group.add_argument('--model', help='Model name.')
    group.add_argument('--fixture', help='Scripted fixture file (with --backend scripted).')
    group.add_argument('--budget', type=int, help='Step budget per question (default: TSAGENT DEFAULT_BUDGET).')
    group.add_argument('--critic-llm', action=argparse.BooleanOptionalAction, default=None,
                       help='Run the LLM layer of the critic.')


class Command(BaseCommand):
    help = 'Ask questions about time series, run benchmarks and inspect traces.'
    requires_system_checks = []

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='subcommand', required=True)

        ask = subparsers.add_parser('ask', help='Answer one question about one or more series.')
        ask.add_argument('--question', required=True)
        ask.add_argument('--series', type=series_spec, action='append', required=True, metavar='NAME=PATH',
                         help='A series file (csv or json); repeat for more series.')
        ask.add_argument('--format', choices=('text', 'json'), default='text')
        ask.add_argument('--trace-out', help='Trace file (default: TRACE_DIR/ask-<hash>.json).')
        add_backend_arguments(ask)

        bench = subparsers.add_parser('bench', help='Run a benchmark and print its report.')
        source = bench.add_mutually_exclusive_group(required=True)
        source.add_argument('--dataset', help='JSONL dataset file.')
        source.add_argument('--synthetic', type=synthetic_spec, action='append', metavar='CATEGORY×COUNT')
        bench.add_argument('--seed', type=int, default=0)
        bench.add_argument('--policy', choices=POLICIES, help='Scripted policy instead of a backend.')
        bench.add_argument('--parallelism', type=int)
        bench.add_argument('--out', help='Directory for report.json, report.txt and traces/.')
        bench.add_argument('--withhold-series', action='store_true',
                           help='Give the agent the series names only, none of the data.')
        bench.add_argument('--record', action='store_true', help='Store the report as a BenchmarkRun.')
        bench.add_argument('--label', default='')
        add_backend_arguments(bench)

        gen = subparsers.add_parser('gen', help='Write synthetic questions as JSONL.')
        gen.add_argument('--synthetic', type=synthetic_spec, action='append', required=True,
                         metavar='CATEGORY×COUNT')
        gen.add_argument('--seed', type=int, default=0)
        gen.add_argument('--out', help='Output file (default: stdout).')

        tools = subparsers.add_parser('tools', help='Print the tool catalog as JSON.')
        tools.add_argument('--family', choices=FAMILIES)

        trace = subparsers.add_parser('trace', help='Inspect trace files.')
        trace_commands = trace.add_subparsers(dest='trace_command', required=True)
        show = trace_commands.add_parser('show', help='Pretty-print a trace file.')
        show.add_argument('path')
        show.add_argument('--check', action='store_true', help='Also audit the trace for grounding.')

    def handle(self, *args, **options):
        handler = getattr(self, f"handle_{options['subcommand']}")
        return handler(options)

    def backend_config(self, options):
        if options.get('fixture') and not options.get('backend'):
            options['backend'] = 'scripted'
        overrides = {
            'kind': options.get('backend'),
            'endpoint': options.get('endpoint'),
            'model': options.get('model'),
            'fixture': options.get('fixture'),
        }
        try:
            return BackendConfig.from_settings(**overrides)
        except LLMConfigError as exc:
            raise CommandError(f'backend configuration: {exc}', returncode=USAGE)

    def handle_ask(self, options):
        store = SeriesStore()
        try:
            for name, path in options['series']:
                SeriesService.load_series(path, SeriesService.guess_format(path), name, store=store)
        except SeriesError as exc:
            raise CommandError(str(exc), returncode=USAGE)
        backend = self.backend_config(options)
        try:
            result = run_agent(
                options['question'], store, backend,
                budget=options.get('budget'), critic_llm=options.get('critic_llm'),
            )
        except AgentTransportError as exc:
            raise CommandError(f'backend failure: {exc}', returncode=USAGE)
        except AgentError as exc:
            raise CommandError(str(exc), returncode=USAGE)

        trace_path = options.get('trace_out')
        if not trace_path:
            key = options['question'] + '\n' + '\n'.join(name for name, _ in options['series'])
            digest = hashlib.sha1(key.encode('utf-8')).hexdigest()[:12]
            trace_path = Path(settings.TSAGENT['TRACE_DIR']) / f'ask-{digest}.json'
        trace_path = write_trace(result, trace_path)

        if options['format'] == 'json':
            self.stdout.write(json.dumps({
                'outcome': result.outcome,
                'answer': result.answer,
                'reasons': [reason.to_dict() for reason in result.reasons],
                'trace': str(trace_path),
            }, sort_keys=True, indent=2))
        elif result.succeeded:
            self.stdout.write(f'Answer: {result.answer}')
            self.stdout.write(f'Trace: {trace_path}')
        if not result.succeeded:
            raise CommandError(
                f'Agent failure: {result.render_reasons()}\nTrace: {trace_path}',
                returncode=AGENT_FAILURE,
            )

    def handle_bench(self, options):
        try:
            if options.get('dataset'):
                questions = load_dataset(options['dataset'])
            else:
                questions = []
                for category, count in options['synthetic']:
                    questions += generate_synthetic(category, count, options['seed'])
        except HarnessError as exc:
            raise CommandError(str(exc), returncode=USAGE)

        policy = options.get('policy')
        backend = None if policy else self.backend_config(options)
        try:
            report = run_benchmark(
                questions,
                backend=backend,
                policy=policy,
                budget=options.get('budget'),
                parallelism=options.get('parallelism'),
                out_dir=options.get('out'),
                withhold_series=options['withhold_series'],
                critic_llm=options.get('critic_llm'),
                label=options['label'] or policy or backend.kind,
            )
        except HarnessError as exc:
            raise CommandError(str(exc), returncode=USAGE)

        if options['record']:
            run = record_benchmark(report, seed=None if options.get('dataset') else options['seed'])
            logger.info('Recorded benchmark run %s', run.pk)
        self.stdout.write(report.render_table())
        if options.get('out'):
            self.stdout.write(f"Report: {Path(options['out']) / 'report.json'}")

    def handle_gen(self, options):
        questions = []
        for category, count in options['synthetic']:
            questions += generate_synthetic(category, count, options['seed'])
        text = dump_dataset(questions, options.get('out'))
        if options.get('out'):
            self.stdout.write(f"Wrote {len(questions)} question(s) to {options['out']}")
        else:
            self.stdout.write(text, ending='')

    def handle_tools(self, options):
        catalog = build_registry().catalog()
        if options.get('family'):
            catalog = [entry for entry in catalog if entry['family'] == options['family']]
        self.stdout.write(json.dumps(catalog, indent=2))

    def handle_trace(self, options):
        try:
            document = json.loads(Path(options['path']).read_text(encoding='utf-8'))
            result = load_trace(document)
        except (OSError, ValueError, TraceFormatError) as exc:
            raise CommandError(f"cannot read trace {options['path']}: {exc}", returncode=USAGE)
        self.stdout.write(render_trace(result))
        if options['check']:
            problems = check_grounding(document)
            if problems:
                raise CommandError('Grounding check failed:\n' + '\n'.join(f'- {p}' for p in problems),
                                   returncode=AGENT_FAILURE)
            self.stdout.write('Grounding check passed.')
