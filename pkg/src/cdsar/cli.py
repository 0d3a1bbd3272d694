"""Command-line entry point: ``cdsar <subcommand> [--config ...] [--seed ...] [--out ...] [--jobs ...]``."""

import argparse
import sys
import warnings

from cdsar import experiments
from cdsar.config import ConfigError, ExperimentConfig, load_config
from cdsar.io import DatasetFormatError
from cdsar.statmodel import CovarianceError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit), overrides config")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = argparse.ArgumentParser(prog="cdsar", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("psf-table", parents=[common], help="aperture function and mean-intensity maps")
    sub.add_parser("simulate", parents=[common], help="simulate ensembles and image fields")
    d = sub.add_parser("discriminate", parents=[common], help="ML discrimination of datasets")
    d.add_argument("--dataset", help="dataset CSV or JSON container (default: simulate inline)")
    d.add_argument("--thresholds", help="thresholds.json from the thresholds command")
    sub.add_parser("thresholds", parents=[common], help="train contrast-independent thresholds")
    sub.add_parser("sweep", parents=[common], help="kappa / zeta_max sweep")
    return p


def resolve_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.replace(seed=args.seed)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg


def run(args):
    cfg = resolve_config(args)
    if args.command == "psf-table":
        experiments.run_psf_table(cfg, args.out)
    elif args.command == "simulate":
        experiments.run_simulate(cfg, args.out)
    elif args.command == "discriminate":
        experiments.run_discriminate(cfg, args.out, args.dataset, args.thresholds, args.jobs)
    elif args.command == "thresholds":
        experiments.run_thresholds(cfg, args.out, args.jobs)
    elif args.command == "sweep":
        if cfg.sweep is None:
            raise ConfigError("sweep needs a 'sweep' block in the config")
        experiments.run_sweep(cfg, args.out, args.jobs)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetFormatError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CovarianceError, ArithmeticError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
