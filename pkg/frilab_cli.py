#!/usr/bin/env python3

"""
frilab CLI
Command-line interface for running finitary random interlacement experiments.

Usage:
    frilab <kind> --config experiment.json [--seed N] [--out DIR]
    frilab fri-sample --d 5 --rho geometric:4 --u 0.5 --window 8 --seed 1
    frilab threshold --d 5 --rho geometric:8 --L 32 --replicas 64 --target 0.5
    frilab sweep --config sweep.json
    frilab verify --run-dir results/alg --replica 0
    frilab schema
"""

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional

from frilab import __version__
from frilab.config import load_experiment_config
from frilab.errors import ConfigValidationError, FrilabError, InvariantViolation
from frilab.harness import run_experiment, run_sweep, verify_algorithm_run
from frilab.models.experiment import KINDS, set_dotted
from frilab.validation import export_schema, require_experiment, require_sweep, validate_experiment
from frilab.workers import WorkerPool

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = ConfigValidationError.exit_code
EXIT_INTERRUPTED = 130

# (flag, dotted config path, type, help)
KIND_FLAGS: Dict[str, List[tuple]] = {
    'capacity': [
        ('--quantity', 'params.quantity', str, 'Quantity to estimate (capacity, kappa, phi, ...)'),
        ('--shape', 'params.set.shape', str, 'Test set shape: ball, segment, points, origin'),
        ('--radius', 'params.set.radius', int, 'Test set radius'),
        ('--cutoff', 'params.cutoff_steps', int, 'Step cutoff for truncated quantities'),
    ],
    'fri-sample': [
        ('--u', 'params.u', float, 'Intensity'),
        ('--window', 'params.window', int, 'Window radius'),
        ('--margin', 'params.margin', int, 'Window padding'),
        ('--dump', 'params.dump', bool, 'Write the sampled clouds as NDJSON'),
    ],
    'threshold': [
        ('--L', 'params.L', int, 'Box radius'),
        ('--target', 'params.target', float, 'Crossing proxy level'),
        ('--epsilon-d', 'params.epsilon_d', float, 'Capacity constant for d >= 5'),
    ],
    'explore': [
        ('--u', 'params.u', float, 'Intensity'),
        ('--max-layers', 'params.max_layers', int, 'Layer limit'),
        ('--mode', 'params.mode', str, 'layers, coupled or recursion'),
    ],
    'algorithm': [
        ('--u', 'algorithm.u', float, 'Intensity'),
        ('--window-radius', 'params.window_radius', int, 'Coarse window radius'),
        ('--epsilon-d', 'params.epsilon_d', float, 'Capacity constant for d >= 5'),
    ],
    'chain': [
        ('--alpha', 'params.alpha', int, 'Chain length'),
        ('--variant', 'params.variant', str, 'full, diamond, square or direct'),
        ('--n', 'params.n', int, 'Chains per replica'),
        ('--epsilon-d', 'params.epsilon_d', float, 'Capacity constant for d >= 5'),
    ],
    'epsilon': [
        ('--T', 'params.T', int, 'Walk length'),
    ],
    'omega': [
        ('--q', 'params.q', float, 'Mark probability'),
        ('--gamma', 'params.gamma', float, 'Dependence range'),
        ('--radius', 'params.radius', int, 'Coarse window radius'),
        ('--n-sites', 'params.n_sites', int, 'Independent sites for the frequency estimate'),
    ],
    'branching': [
        ('--u', 'params.u', float, 'Intensity'),
        ('--generations', 'params.generations', int, 'Number of generations'),
        ('--seed-size', 'params.seed_size', int, 'Trajectories in generation 0'),
        ('--epsilon-d', 'params.epsilon_d', float, 'Capacity constant for d >= 5'),
    ],
}


def _dest(flag: str) -> str:
    return 'kind_' + flag.lstrip('-').replace('-', '_')


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


class FrilabCLI:
    """Command-line interface for frilab experiments."""

    def __init__(self, verbose: bool = False, threads: Optional[int] = None):
        self.verbose = verbose
        self.pool = WorkerPool(threads) if threads is not None else None

    def load_json_file(self, file_path: str) -> Any:
        path = Path(file_path)
        if not path.suffix.lower() == '.json':
            raise ConfigValidationError(f"config file must have .json extension: {file_path}")
        try:
            data = load_experiment_config(path)
        except FileNotFoundError as e:
            raise ConfigValidationError(str(e))
        except json.JSONDecodeError as e:
            raise ConfigValidationError(f"invalid JSON in {file_path}: {e}")
        if self.verbose:
            print(f"✓ Loaded config: {file_path}")
        return data

    def build_experiment(self, kind: str, args: argparse.Namespace) -> Dict[str, Any]:
        """Config file (if any) overlaid with the command-line flags."""
        data = self.load_json_file(args.config) if args.config else {'id': kind, 'kind': kind}
        if data.get('kind', kind) != kind:
            raise ConfigValidationError(f"config describes a {data['kind']!r} experiment, not {kind!r}")
        data['kind'] = kind
        for key in ('id', 'd', 'rho', 'seed', 'replicas'):
            value = getattr(args, key, None)
            if value is not None:
                data[key] = value
        if args.out is not None:
            data['output'] = str(args.out)
        for flag, path, _, _ in KIND_FLAGS.get(kind, []):
            value = getattr(args, _dest(flag), None)
            if value is not None:
                set_dotted(data, path, value)
        for assignment in args.param or []:
            path, sep, raw = assignment.partition('=')
            if not sep:
                raise ConfigValidationError(f"--param expects path=value, got {assignment!r}")
            set_dotted(data, path, _parse_value(raw))
        return data

    def run_kind(self, kind: str, args: argparse.Namespace) -> int:
        config = require_experiment(self.build_experiment(kind, args))
        print(f"\nRunning {kind} experiment {config.id} (d={config.d}, replicas={config.replicas})...")
        output = run_experiment(config, args.out, self.pool)
        print(f"✓ {len(output.rows)} rows written to {output.out_dir}")
        self.print_rows(output.rows)
        return EXIT_OK

    def print_rows(self, rows) -> None:
        shown = rows if self.verbose else [r for r in rows if r.replica is None]
        for row in shown[:40]:
            extra = {k: v for k, v in row.params.items() if k in ('k', 'u', 'generation', 'iteration')}
            label = f"{row.quantity}{extra if extra else ''}"
            replica = f"[{row.replica}] " if row.replica is not None else ''
            print(f"  {replica}{label}: {row.estimate:.6g} ± {row.stderr:.3g}")
        if len(shown) > 40:
            print(f"  ... {len(shown) - 40} more rows")

    def run_sweep(self, args: argparse.Namespace) -> int:
        sweep = require_sweep(self.load_json_file(args.config))
        print(f"\nRunning sweep {sweep.id} ({sweep.n_cells} cells)...")
        result = run_sweep(sweep, args.out, self.pool, resume=not args.no_resume)
        icon = "✓" if not result.failed else "⚠"
        print(f"{icon} {len(result.cells) - len(result.failed)}/{len(result.cells)} cells completed "
              f"→ {result.out_dir}")
        for cell in result.failed:
            print(f"  ✗ cell {cell.index} {cell.values}: {cell.error['message']}")
        return EXIT_OK

    def verify(self, args: argparse.Namespace) -> int:
        ok, mismatches = verify_algorithm_run(args.run_dir, args.replica)
        if ok:
            print(f"✓ Round record of replica {args.replica} replays to the stored status map")
            return EXIT_OK
        print(f"✗ Replay differs at {len(mismatches)} coarse vertices")
        for m in mismatches[:20]:
            print(f"    • {m['x']}: stored {m['stored']}, replayed {m['replayed']}")
        return InvariantViolation.exit_code

    def validate(self, args: argparse.Namespace) -> int:
        result = validate_experiment(self.load_json_file(args.config))
        if result.is_valid:
            print(f"✓ {args.config} is a valid {result.config.kind} experiment")
            return EXIT_OK
        print(f"✗ {args.config} is invalid:")
        for error in result.errors:
            print(f"    • {error}")
        return EXIT_VALIDATION

    def schema(self, args: argparse.Namespace) -> int:
        text = json.dumps(export_schema(), indent=2, sort_keys=True)
        if args.output:
            Path(args.output).write_text(text + '\n', encoding='utf-8')
            print(f"✓ Schema written to {args.output}")
        else:
            print(text)
        return EXIT_OK


def _add_run_flags(parser: argparse.ArgumentParser, kind: str) -> None:
    parser.add_argument('--config', '-c', help='Experiment configuration JSON file')
    parser.add_argument('--id', help='Experiment id')
    parser.add_argument('--d', type=int, help='Dimension (>= 4)')
    parser.add_argument('--rho', help='Length law: geometric:T, dirac:n or a JSON spec')
    parser.add_argument('--seed', type=int, help='Root seed')
    parser.add_argument('--replicas', type=int, help='Number of replicas')
    parser.add_argument('--out', '-o', type=Path, help='Output directory')
    parser.add_argument('--param', action='append', metavar='PATH=VALUE',
                        help='Set any config field, e.g. typicality.events=["E1"] (repeatable)')
    for flag, _, type_, help_text in KIND_FLAGS.get(kind, []):
        if type_ is bool:
            parser.add_argument(flag, dest=_dest(flag), action='store_true', default=None, help=help_text)
        else:
            parser.add_argument(flag, dest=_dest(flag), type=type_, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='frilab',
        description="Monte Carlo laboratory for finitary random interlacements on Z^d",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  frilab epsilon --d 4 --T 100000 --replicas 100 --seed 7
  frilab capacity --d 4 --radius 8 --replicas 4
  frilab fri-sample --d 5 --rho geometric:4 --u 0.5 --window 8
  frilab threshold --config threshold.json --seed 3 --out results/thr
  frilab sweep --config sweep.json
  frilab verify --run-dir results/alg

Environment:
  FRILAB_THREADS       worker processes (default 1)
  FRILAB_OUTPUT_DIR    default output directory (default results)

Exit codes: 0 ok, 2 validation, 3 budget or memory cap, 4 invariant violated,
1 unexpected error, 130 interrupted.
        """
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose output and debug logging')
    parser.add_argument('--threads', type=int, help='Worker processes (overrides FRILAB_THREADS)')
    parser.add_argument('--version', action='version', version=f"frilab {__version__}")
    sub = parser.add_subparsers(dest='command', metavar='command')

    for kind in KINDS:
        _add_run_flags(sub.add_parser(kind, help=f"Run a {kind} experiment"), kind)

    sweep = sub.add_parser('sweep', help='Run a parameter sweep')
    sweep.add_argument('--config', '-c', required=True, help='Sweep configuration JSON file')
    sweep.add_argument('--out', '-o', type=Path, help='Output directory')
    sweep.add_argument('--no-resume', action='store_true', help='Rerun cells that are already complete')

    verify = sub.add_parser('verify', help='Replay an algorithm round record')
    verify.add_argument('--run-dir', required=True, type=Path, help='Output directory of an algorithm experiment')
    verify.add_argument('--replica', type=int, default=0, help='Replica to verify')

    validate = sub.add_parser('validate', help='Validate an experiment configuration')
    validate.add_argument('--config', '-c', required=True, help='Experiment configuration JSON file')

    schema = sub.add_parser('schema', help='Print the configuration JSON schema')
    schema.add_argument('--output', help='Write the schema to a file instead of stdout')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    if not args.command:
        parser.print_help()
        return EXIT_VALIDATION

    try:
        cli = FrilabCLI(verbose=args.verbose, threads=args.threads)
        if args.command in KINDS:
            return cli.run_kind(args.command, args)
        if args.command == 'sweep':
            return cli.run_sweep(args)
        if args.command == 'verify':
            return cli.verify(args)
        if args.command == 'validate':
            return cli.validate(args)
        return cli.schema(args)
    except ConfigValidationError as e:
        print(f"✗ {e.message}")
        for error in e.errors:
            print(f"    • {error}")
        return e.exit_code
    except FrilabError as e:
        print(f"✗ {e.kind} error: {e.message}")
        for diagnostic in e.diagnostics:
            print(f"    ⚠ {diagnostic.sampler}: {diagnostic.reason}")
        return e.exit_code
    except KeyboardInterrupt:
        print("\n\nOperation cancelled by user")
        return EXIT_INTERRUPTED
    except ValueError as e:
        print(f"✗ {e}")
        return EXIT_VALIDATION
    except Exception as e:
        print(f"✗ Unexpected error: {e}")
        if args.verbose:
            print(f"Traceback:\n{traceback.format_exc()}")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
