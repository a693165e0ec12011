#!/usr/bin/env python3
"""
Brinkman DG Solver
Run a single solve, a convergence study or the self-checks.

Usage:
    python run_brinkman.py                                      # First row of the k=1 diagonal study
    python run_brinkman.py convergence --k 1 --mesh diagonal --levels 6
    python run_brinkman.py solve --mesh crisscross:8 --k 2      # Solve and write VTK
    python run_brinkman.py verify --k 2 --mesh crisscross:4     # Self-checks, exit 1 on failure
    python run_brinkman.py --list                               # List available commands
    python run_brinkman.py --config run.yaml solve              # Settings from YAML
"""
import argparse
import importlib
import sys

from brinkman.config import load_config
from brinkman.errors import ConfigError
from brinkman.mesh import MESH_FAMILIES

# Registry of available commands
COMMANDS = {
    'solve': ('commands.solve', 'SolveCommand'),
    'convergence': ('commands.convergence', 'ConvergenceCommand'),
    'verify': ('commands.verify', 'VerifyCommand'),
}

# Command to run when none is specified
DEFAULT_COMMAND = 'convergence'

# Exit statuses for a bad command line or unreadable config file
EXIT_CONFIG = 2
EXIT_IO = 5


def get_command_class(command_key: str):
    """Dynamically import and return a command class."""
    if command_key not in COMMANDS:
        print(f"Error: Unknown command '{command_key}'")
        print(f"Available commands: {', '.join(COMMANDS.keys())}")
        sys.exit(EXIT_CONFIG)

    module_name, class_name = COMMANDS[command_key]

    try:
        module = importlib.import_module(module_name)
        return getattr(module, class_name)
    except Exception as e:
        print(f"Error loading command '{command_key}': {e}")
        sys.exit(1)


def list_commands():
    """Print available commands."""
    print("Available commands:")
    for key, (module, cls) in COMMANDS.items():
        default_marker = " (default)" if key == DEFAULT_COMMAND else ""
        print(f"  {key}{default_marker}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Pure-stress DG solver for the Brinkman equations"
    )
    parser.add_argument('command', nargs='?', default=None,
                        help=f"Command to run (default: {DEFAULT_COMMAND})")
    parser.add_argument('--list', '-l', action='store_true', help='List available commands')
    parser.add_argument('--quiet', '-q', action='store_true', help='Quiet mode (log file only)')
    parser.add_argument('--config', '-c', help='YAML file with run settings')

    problem = parser.add_argument_group('problem')
    problem.add_argument('--mesh', help="<family>:<n>, file:<path>[:trisect]; a bare family for convergence")
    problem.add_argument('--levels', type=int, help='Refinement levels of a convergence study')
    problem.add_argument('--start', type=int, help='Subdivisions on the coarsest level')
    problem.add_argument('--k', type=int, help='Stress polynomial degree (1-4)')
    problem.add_argument('--mu', type=float, help='Viscosity (>= 0)')
    problem.add_argument('--kappa', help='constant:<v>, contrast:<c>, file:<path> or inclusions:<seed>')
    problem.add_argument('--a-star', dest='a_star', type=float, help='Penalty factor, a = a* k^2')
    problem.add_argument('--boundary', help='Boundary layout: mixed, all-dirichlet or channel')
    problem.add_argument('--case', help='smooth, heterogeneous, polynomial, polynomial2, channel or zero')

    solver = parser.add_argument_group('solver')
    solver.add_argument('--solver', help='cg or direct')
    solver.add_argument('--preconditioner', help='block-jacobi, jacobi or none')
    solver.add_argument('--tol', type=float, help='Relative residual tolerance')
    solver.add_argument('--quad-bump', dest='quad_bump', type=int, help='Extra quadrature degree for data')
    solver.add_argument('--threads', type=int, help='Assembly threads')
    solver.add_argument('--no-reconstruct', dest='reconstruct', action='store_false', default=None,
                        help='Skip the divergence-free velocity')

    output = parser.add_argument_group('output')
    output.add_argument('--output', '-o', help='Output file (VTK for solve, CSV for convergence)')
    output.add_argument('--data-dir', dest='data_dir', help='Directory for logs and results')
    return parser


def overrides_from(args) -> dict:
    """Command-line values for load_config; a bare family name sets the study family."""
    overrides = {key: getattr(args, key) for key in
                 ('levels', 'start', 'k', 'mu', 'kappa', 'a_star', 'boundary', 'case', 'solver',
                  'preconditioner', 'tol', 'quad_bump', 'threads', 'reconstruct', 'output', 'data_dir')}
    overrides['command'] = args.command
    if args.mesh in MESH_FAMILIES:
        overrides['family'] = args.mesh
    else:
        overrides['mesh'] = args.mesh
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.list:
        list_commands()
        return 0

    try:
        config = load_config(overrides_from(args), args.config)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO

    CommandClass = get_command_class(config.command)

    if not args.quiet:
        print(f"\n{'='*50}")
        print(f"Running: {config.command}")
        print(f"{'='*50}")

    command = CommandClass(config, quiet=args.quiet)
    return command.run()


if __name__ == "__main__":
    sys.exit(main())
