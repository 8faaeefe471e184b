"""Command-line front end: ``spinsense run | figure | sweep``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

import argparse
import csv
import logging
import os
import sys

from .config import FIELD_TYPES, ConfigError, coerce_value, load_config
from .ensemble import SWEEP_AXES, run_experiment, sweep
from .presets import FIGURES, SCALES, run_figure

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _assignment(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _common(parser):
    parser.add_argument("--config", metavar="PATH", help="key = value configuration file")
    parser.add_argument("--set", dest="overrides", metavar="KEY=VALUE", action="append",
                        type=_assignment, default=[], help="override one configuration key")
    parser.add_argument("--out", metavar="DIR", default=".", help="output directory")
    parser.add_argument("--seed", metavar="U64", help="master seed")
    parser.add_argument("--threads", metavar="N", help="worker threads")
    parser.add_argument("--serial", action="store_true",
                        help="deterministic single-threaded mode")
    parser.add_argument("--quiet", action="store_true", help="no progress line")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spinsense",
        description="Cluster Monte Carlo for the energy resolution of dipolar spin ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="one experiment; writes result.json and result.csv")
    _common(run)
    fig = sub.add_parser("figure", help="figure-reproduction preset")
    fig.add_argument("name", choices=FIGURES)
    fig.add_argument("--scale", choices=SCALES, default="desk")
    _common(fig)
    sw = sub.add_parser("sweep", help="independent experiments along one axis")
    sw.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sw.add_argument("--values", required=True, help="comma-separated axis values")
    _common(sw)
    return parser


def resolve_config(args):
    overrides = dict(args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.serial:
        overrides["threads"] = "1"
    return load_config(args.config, overrides)


class Progress:
    """A single overwritten status line on stderr."""

    def __init__(self, label, enabled=True):
        self.label = label
        self.enabled = enabled and sys.stderr is not None

    def chunks(self, done, total):
        self.message(f"{done}/{total} chunks")

    def message(self, text):
        if self.enabled:
            sys.stderr.write(f"\r[{self.label}] {text}\033[K")
            sys.stderr.flush()

    def close(self):
        if self.enabled:
            sys.stderr.write("\n")


def cmd_run(args, config):
    progress = Progress("run", not args.quiet)
    result = run_experiment(config, progress.chunks)
    progress.close()
    json_path = os.path.join(args.out, "result.json")
    csv_path = os.path.join(args.out, "result.csv")
    result.write_json(json_path)
    result.write_csv(csv_path)
    c = result.curve
    print(f"er_min = {c.er_min:.6g} +- {c.er_min_stderr:.2g} at tau_opt = {c.tau_opt:.4g}"
          + (" (grid boundary)" if c.boundary else ""))
    print(f"wrote {json_path} and {csv_path}")
    return EXIT_OK


def _parse_values(axis, text, config):
    values = [coerce_value(axis, FIELD_TYPES[axis], v) for v in text.split(",") if v.strip()]
    if not values:
        raise ConfigError("values: empty list")
    for value in values:  # validate every point before any work
        config.replace(**{axis: value})
    return values


def cmd_sweep(args, config):
    values = _parse_values(args.axis, args.values, config)
    progress = Progress("sweep", not args.quiet)
    points = sweep(config, args.axis, values,
                   lambda i, n: progress.message(f"{i}/{n} points"))
    progress.close()
    path = os.path.join(args.out, "sweep.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([args.axis, "seed", "er_min", "er_min_stderr", "tau_opt", "error"])
        for i, p in enumerate(points):
            if p.result is None:
                writer.writerow([p.value, "", "nan", "nan", "nan", p.error])
                continue
            c = p.result.curve
            writer.writerow([p.value, p.config.seed, repr(float(c.er_min)),
                             repr(float(c.er_min_stderr)), repr(float(c.tau_opt)), ""])
            p.result.write_json(os.path.join(args.out, f"sweep_{i:03d}.json"))
            p.result.write_csv(os.path.join(args.out, f"sweep_{i:03d}.csv"))
    failed = [p for p in points if p.error]
    for p in failed:
        print(f"{args.axis}={p.value}: {p.error}", file=sys.stderr)
    print(f"wrote {path} ({len(points) - len(failed)}/{len(points)} points succeeded)")
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_figure(args, config):
    progress = Progress(args.name, not args.quiet)
    _, results, _ = run_figure(args.name, args.scale, config, args.out, progress.message)
    progress.close()
    failed = [r for r in results if isinstance(r, Exception)]
    print(f"wrote {os.path.join(args.out, args.name)}.csv/.json "
          f"({len(results) - len(failed)}/{len(results)} points succeeded)")
    return EXIT_RUNTIME if failed else EXIT_OK


COMMANDS = {"run": cmd_run, "figure": cmd_figure, "sweep": cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        config = resolve_config(args)
        os.makedirs(args.out, exist_ok=True)
        if not os.access(args.out, os.W_OK):
            raise ConfigError(f"--out: directory {args.out!r} is not writable")
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
