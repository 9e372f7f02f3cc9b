"""
### main.py
#### Functions:
    - build_parser
    - collect_overrides
    - main

    brainvidpy <command> [--config run.yaml] [--set section.key=value ...] [--section.key value ...]

Commands are the pipeline stages, ``run`` (every stage in order), ``ablate`` and ``report``.
Exit codes: 0 success, 2 bad config, 3 missing upstream artifact, 4 numerical abort.
"""

import argparse
import logging
import sys

from brainvidpy.cli.ablate import AXES, ablate, report
from brainvidpy.cli.config import load_config, run_root
from brainvidpy.cli.logs import setup_logging
from brainvidpy.cli.pipeline import PIPELINE, RunContext, run_pipeline, run_stage
from brainvidpy.errors import BrainVidError, ConfigError

LOGGER = logging.getLogger(__name__)

COMMANDS = PIPELINE + ('run', 'ablate', 'report')

# Shortcut flag -> dotted config key.
SHORTCUTS = {
    'gamma_spa': 'augment.gamma_spa',
    'gamma_tem': 'augment.gamma_tem',
    'mu_spa': 'phase1.mu_spa',
    'mu_tem': 'phase1.mu_tem',
    'beta': 'diffusion.beta',
    'schedule': 'diffusion.schedule',
    'ddim_steps': 'decode.ddim_steps',
    'eta': 'decode.eta',
    'seed': 'seed',
    'name': 'name',
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brainvidpy", description="Synthetic fMRI-to-video decoding pipeline")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="YAML run config; defaults apply when omitted")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, repeatable")
    parser.add_argument("--run-root", help="directory holding runs (default $BRAINVIDPY_RUN_ROOT or ./runs)")
    parser.add_argument("--force", action="store_true", help="rerun stages even when up to date")
    parser.add_argument("--log-level", default="INFO")
    for flag in SHORTCUTS:
        parser.add_argument(f"--{flag.replace('_', '-')}", dest=flag, default=None)
    parser.add_argument("--axis", choices=sorted(AXES), help="ablate: config axis to sweep")
    parser.add_argument("--values", help="ablate: comma separated values")
    parser.add_argument("--workers", type=int, default=1, help="ablate: parallel grid points")
    return parser


def collect_overrides(args: argparse.Namespace, extra: list[str]) -> list[str]:
    """`--set` items, shortcut flags and ``--section.key value`` leftovers as KEY=VALUE strings."""
    overrides = list(args.overrides)
    overrides += [f"{key}={getattr(args, flag)}" for flag, key in SHORTCUTS.items() if getattr(args, flag) is not None]
    i = 0
    while i < len(extra):
        item = extra[i]
        if not item.startswith("--") or "." not in item:
            raise ConfigError(f"unrecognised argument '{item}'")
        if "=" in item:
            overrides.append(item[2:])
            i += 1
        elif i + 1 < len(extra):
            overrides.append(f"{item[2:]}={extra[i + 1]}")
            i += 2
        else:
            raise ConfigError(f"flag '{item}' needs a value")
    return overrides


def main(argv: list[str] | None=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    setup_logging(args.log_level)
    try:
        config = load_config(args.config, collect_overrides(args, extra))
        ctx = RunContext(config, run_root(args.run_root) / config.name)
        if args.command == 'run':
            run_pipeline(ctx, force=args.force)
        elif args.command == 'ablate':
            if args.axis is None:
                raise ConfigError("ablate needs --axis")
            values = args.values.split(",") if args.values else None
            ablate(ctx, args.axis, values, workers=args.workers, force=args.force, log_level=args.log_level)
        elif args.command == 'report':
            report(ctx)
        else:
            run_stage(ctx, args.command, force=args.force)
    except BrainVidError as exc:
        LOGGER.error(str(exc), extra={"error": type(exc).__name__, "exit_code": exc.exit_code})
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
