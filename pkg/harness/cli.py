"""
In-process entry point for the tsagent management command.

`cli(argv)` parses and runs the same command as `manage.py tsagent ...`
and returns its exit status instead of exiting.
"""
import sys

from django.core.management.base import CommandError

from harness.management.commands.tsagent import USAGE, Command


def cli(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = sys.argv[1:] if argv is None else list(argv)

    command = Command(stdout=stdout, stderr=stderr)
    parser = command.create_parser('manage.py', 'tsagent')
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as exc:
        # --help
        if not exc.code:
            return 0
        parser.print_help(stderr)
        return USAGE
    except CommandError as exc:
        if str(exc):
            stderr.write(f'{exc}\n')
        parser.print_help(stderr)
        return USAGE

    options = vars(namespace)
    args = options.pop('args', ())
    try:
        command.execute(*args, **options)
    except CommandError as exc:
        stderr.write(f'{exc}\n')
        return exc.returncode
    return 0
