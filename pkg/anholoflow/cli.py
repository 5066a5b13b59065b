"""
Command-line front end.

    anholoflow gen-metric  --config run.json [--seed N] [--out DIR]
    anholoflow flow        --config run.json [--seed N] [--out DIR]
    anholoflow spde        --config run.json [--seed N] [--out DIR]
    anholoflow functionals --config run.json [--seed N] [--out DIR]
    anholoflow report RUN_DIR [RUN_DIR ...] [--out DIR]

The exit status is 0 on success, 2 for configuration errors, 3 for numerical
failures and 4 for integrity failures of run directories.
"""

import argparse
import logging
from typing import List, Optional

from . import __version__
from .errors import ConfigError, ExitCode, create_default_error_handler
from .runs import COMMANDS, execute, report
from .schema import load_config

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='anholoflow',
        description="Anholonomic Ricci flows, Perelman-type functionals and stochastic "
                    "porous-media runs")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help="logging level (default: INFO)")
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} command from a run file")
        cmd.add_argument('--config', required=True, help="JSON run file")
        cmd.add_argument('--seed', type=int, help="override the run file's seed")
        cmd.add_argument('--out', help="output root (default: $ANHOLOFLOW_OUTPUT_ROOT or ./runs)")
    rep = sub.add_parser('report', help="merge and verify finished run directories")
    rep.add_argument('run_dirs', nargs='+', help="run directories to merge")
    rep.add_argument('--out', help="output root for the report directory")
    return parser


def run(args: argparse.Namespace) -> None:
    if args.command == 'report':
        target = report(args.run_dirs, args.out)
        print(target)
        return
    cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
    if cfg.command != args.command:
        raise ConfigError(f"run file is for '{cfg.command}', not '{args.command}'")
    print(execute(cfg))


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the ``anholoflow`` console script."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    handler = create_default_error_handler()
    try:
        run(args)
    except Exception as e:
        return int(handler.handle(e, args.command))
    return int(ExitCode.OK)
