"""Command-line entry point. Logs go to stderr, a one-line JSON summary goes to stdout.

Exit codes: 0 success, 1 I/O error, 2 configuration or validation error, 3 numerical
failure or a result flagged as not converged.
"""
import argparse
import json
import math
import sys
from typing import Any, List, Optional

import numpy as np
import yaml

from hvfwi.utils.config import RunConfig
from hvfwi.utils.errors import ConfigError, NumericalError
from hvfwi.utils.runner import WORKFLOWS

METRICS = {"l2": "L2", "hv": "HV", "w2": "W2"}
# Subcommands whose main output is not paths.output.
OUT_KEYS = {"forward": "data"}

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hvfwi", description="Frequency-domain FWI with the HV misfit.")
    parser.add_argument("command", choices=list(WORKFLOWS.keys()))
    parser.add_argument("--config", "-c", type=str, default=None, help="Path to a YAML run config")
    parser.add_argument("--metric", "-m", choices=list(METRICS.keys()), default=None)
    parser.add_argument("--snr-db", type=float, default=None, help="Noise level; inf disables noise")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", "-o", type=str, default=None, help="Main output path")
    parser.add_argument("--max-iters", type=int, default=None, help="Optimizer iterations per frequency")
    parser.add_argument(
        "--override",
        metavar="KEY=VALUE",
        nargs="+",
        default=[],
        help="Set config values, with '.' separating nested keys.",
    )
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig() if args.config is None else RunConfig.load(args.config)
    for override in args.override:
        config.apply_override(override)
    if args.metric is not None:
        config["metric"] = METRICS[args.metric]
    if args.snr_db is not None:
        config["noise_kwargs"]["snr_db"] = args.snr_db
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out is not None:
        config["paths"][OUT_KEYS.get(args.command, "output")] = args.out
    if args.max_iters is not None:
        config["optim_kwargs"]["max_iters_per_freq"] = args.max_iters
    return config


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    elif isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    elif isinstance(value, (np.floating, np.integer, np.bool_)):
        return _jsonable(value.item())
    elif isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def cli(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        summary = WORKFLOWS[args.command](config)
    except NumericalError as e:
        print("[hvfwi] Numerical failure:", e, file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, yaml.YAMLError, ValueError, TypeError) as e:
        print("[hvfwi] Invalid configuration:", e, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print("[hvfwi] I/O error:", e, file=sys.stderr)
        return EXIT_IO

    print(json.dumps(_jsonable(summary), allow_nan=False))
    if len(summary.get("flags", [])) > 0:
        print("[hvfwi] Warning: result flagged:", ", ".join(summary["flags"]), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
