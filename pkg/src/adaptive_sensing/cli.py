"""Command-line entry point: ``asl <subcommand> ...`` (or ``python3 -m adaptive_sensing``).

Exit status is 0 on success, 1 for invalid configs or arguments, 2 for
file-system problems (missing config, unreadable or truncated metrics).
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .core import SpecError

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

# small built-in configs for ``demo``; a few seconds each
DEMOS = {
    "conventional": "env.kind = balance\nframework = conventional\nlearner.epsilon = 0.05\n"
                    "learner.initial_value = 12.0\nrun.episodes = 20\n",
    "single-shot": "env.kind = scene-classification\nframework = single-shot\nk = 8\n"
                   "run.episodes = 200\n",
    "perception-only": "env.kind = drifting-perception\nframework = perception-only\n"
                       "learner.alpha_schedule = inverse-visits\nrun.episodes = 10\n",
    "sensorimotor": "env.kind = balance\nframework = sensorimotor\nreward.lambda = 0.1\n"
                    "learner.epsilon = 0.05\nlearner.initial_value = 12.0\nsense.gamma = 0.5\n"
                    "sense.alpha_schedule = inverse-visits\nsense.initial_value = 3.0\n"
                    "sense.buckets = 1\nrun.episodes = 20\n",
    "multimodal-sparse": "env.kind = grip\nframework = multimodal-sparse\nreward.lambda_tact = 0.1\n"
                         "reward.lambda_vis = 0.1\nrun.episodes = 20\n",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route it to the validation code instead
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master seed (overrides run.master_seed)")
    p.add_argument("--episodes", type=int, help="episode count (overrides run.episodes)")
    p.add_argument("--out", help="output directory (default: config out_dir, $ASL_OUT_DIR, or .)")
    p.add_argument("--format", choices=harness.FORMATS, help="metrics file format")
    p.add_argument("--quiet", action="store_true", help="print only the aggregate line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asl", description="Adaptive-sensing experiment runner.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="run one experiment from a config file")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("sweep", help="re-run a config over values of one key")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="dotted config key, e.g. k or reward.lambda")
    p.add_argument("--values", required=True, help="comma-separated values")
    _common(p)

    p = sub.add_parser("compare", help="paired sign-test comparison of two metrics files")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--metric", help="metric column (default: return)")
    p.add_argument("--json", action="store_true", help="also print the JSON record")

    p = sub.add_parser("enumerate-options", help="print the sensor option grid of a config")
    p.add_argument("config")

    p = sub.add_parser("demo", help="run a small built-in experiment")
    p.add_argument("framework", choices=sorted(DEMOS))
    _common(p)
    return parser


def _apply_flags(config: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    if args.seed is not None:
        if config.seeds is not None:
            raise harness.ConfigError("run.seeds", "--seed conflicts with an explicit seed list")
        config = config.with_value("run.master_seed", str(args.seed))
    if args.episodes is not None:
        config = config.with_value("run.episodes", str(args.episodes))
    if args.out is not None:
        config = config.with_value("out_dir", args.out)
    if args.format is not None:
        config = config.with_value("format", args.format)
    return config


def _aggregate_line(name: str, report: harness.MetricsReport) -> str:
    parts = [f"{m}={report.aggregate[m]['mean']:.6f}" for m in harness.AGGREGATED
             if report.aggregate[m]["count"]]
    return f"{name}: episodes={len(report.rows)} " + " ".join(parts)


def _run_one(config, quiet: bool, out) -> harness.MetricsReport:
    def progress(row):
        out.write(f"  episode {row.episode:>5d} seed {row.seed:>20d} return {row.ret:.6f}\n")

    report = harness.run_experiment(config, progress=None if quiet else progress)
    out.write(_aggregate_line(config.run_name, report) + "\n")
    if not quiet:
        out.write(f"wrote {report.path}\n")
    return report


def _enumerate(config: harness.ExperimentConfig, out) -> None:
    spec = config.env_spec()
    for modality, space, fixed in zip(spec.modalities, spec.option_spaces, spec.fixed_options):
        out.write(f"{modality}: {space.total_size} options over ({', '.join(space.names)})\n")
        for i in range(space.total_size):
            vals = ", ".join(f"{v:.6g}" for v in space.option(i).values)
            mark = "  (fixed)" if i == fixed else ""
            out.write(f"  {i:>4d}  {vals}{mark}\n")


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        if args.command == "compare":
            a, b = harness.read_metrics(args.report_a), harness.read_metrics(args.report_b)
            summary = harness.compare(a, b, args.metric or "return")
            out.write(summary.table() + "\n")
            if args.json:
                out.write(summary.to_json() + "\n")
            return EXIT_OK
        if args.command == "demo":
            config = harness.parse_config(DEMOS[args.framework], f"demo:{args.framework}")
        else:
            config = harness.load_config(args.config)
        if args.command == "enumerate-options":
            _enumerate(config, out)
            return EXIT_OK
        config = _apply_flags(config, args)
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if not values:
                raise harness.ConfigError(args.param, "--values is empty")
            for v in values:
                cfg = config.with_value(args.param, v)
                cfg = cfg.with_value("run.name", f"{config.run_name}-{args.param}={v}")
                _run_one(cfg, args.quiet, out)
            return EXIT_OK
        _run_one(config, args.quiet, out)
        return EXIT_OK
    except UsageError as exc:
        err.write(str(exc))
        return EXIT_INVALID
    except (SpecError, ValueError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INVALID
    except OSError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
