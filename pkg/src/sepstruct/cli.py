"""Command-line front end.

Subcommands: simulate, build-nulls, analyze, report. Flags can also be
set from a flat key=value config file via --config; explicit flags win.

Exit codes: 0 success, 2 configuration error, 3 missing input (shot
file or null cache), 4 numerical failure (an RDM reconstruction hit its
iteration budget without converging).
"""

import argparse
import json
import os
import sys

from .filtering import values_per_pass
from .pipeline import (ConfigError, MissingInputError, PipelineConfig, analyze,
                       build_standard_nulls, simulate, summarize_report)
from .tomography import MleConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_NUMERICAL = 4


def _read_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment, blank lines are skipped."""
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} does not exist")
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


_INT_KEYS = {"shots", "k_max", "null_samples", "seed", "null_seed", "workers", "jobs",
             "mle_max_iters"}
_FLOAT_KEYS = {"p_thr", "noise_p", "mle_dilution", "mle_tol", "mle_prob_floor"}
_BOOL_KEYS = {"require_cached_nulls"}


def _coerce(key: str, value: str):
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _BOOL_KEYS:
        return value.lower() in ("1", "true", "yes", "on")
    return value


def _merge_args(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset CLI options from the config file; CLI flags win."""
    if not getattr(args, "config", None):
        return args
    file_values = _read_config_file(args.config)
    for key, raw in file_values.items():
        if not hasattr(args, key):
            raise ConfigError(f"unknown config key {key!r}")
        if key in args._explicit:
            continue
        setattr(args, key, _coerce(key, raw))
    return args


class _TrackingParser(argparse.ArgumentParser):
    """Records which destinations were set explicitly on the command line."""

    def parse_args(self, argv=None, namespace=None):
        args = super().parse_args(argv, namespace)
        explicit = set()
        argv = sys.argv[1:] if argv is None else list(argv)
        for action in self._all_actions():
            if any(opt in argv for opt in action.option_strings):
                explicit.add(action.dest)
        args._explicit = explicit
        return args

    def _all_actions(self):
        actions = list(self._actions)
        for action in self._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub in action.choices.values():
                    actions.extend(sub._actions)
        return actions


def _add_common(parser):
    parser.add_argument("--config", help="flat key=value config file; flags override it")
    parser.add_argument("--shots", dest="shots", type=int, default=163840,
                        help="number of copies M")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="process-pool size for independent tasks")
    parser.add_argument("--out", dest="out", default="runs", help="output directory")
    parser.add_argument("--null-cache-dir", dest="null_cache_dir", default=None)
    parser.add_argument("--null-samples", dest="null_samples", type=int, default=10_000)
    parser.add_argument("--null-seed", dest="null_seed", type=int, default=0,
                        help="seed of the null-distribution cache (kept independent of "
                             "the master seed so caches stay warm across runs)")
    parser.add_argument("--p-thr", dest="p_thr", type=float, default=0.05)
    parser.add_argument("--mle-max-iters", dest="mle_max_iters", type=int, default=None)
    parser.add_argument("--mle-dilution", dest="mle_dilution", type=float, default=None)
    parser.add_argument("--mle-tol", dest="mle_tol", type=float, default=None,
                        help="per-shot log-likelihood gain below which the MLE stops")
    parser.add_argument("--mle-prob-floor", dest="mle_prob_floor", type=float, default=None)


def _mle_config(args) -> MleConfig:
    base = MleConfig()
    overrides = {}
    if args.mle_max_iters is not None:
        overrides["max_iters"] = args.mle_max_iters
    if args.mle_dilution is not None:
        overrides["dilution"] = args.mle_dilution
    if args.mle_tol is not None:
        overrides["convergence_tol"] = args.mle_tol
    if args.mle_prob_floor is not None:
        overrides["prob_floor"] = args.mle_prob_floor
    if overrides:
        from dataclasses import replace

        return replace(base, **overrides)
    return base


def _pipeline_config(args, **extra) -> PipelineConfig:
    return PipelineConfig(
        n_shots=args.shots,
        p_thr=args.p_thr,
        n_null_samples=args.null_samples,
        null_seed=args.null_seed,
        seed=args.seed,
        out_dir=args.out,
        null_cache_dir=args.null_cache_dir,
        workers=args.workers,
        mle=_mle_config(args),
        **extra,
    )


def build_parser() -> _TrackingParser:
    parser = _TrackingParser(prog="sepstruct",
                             description="Separability-structure detection from IC-POVM shots")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="sample shots from a named state")
    _add_common(p_sim)
    p_sim.add_argument("--state", required=False, default=None,
                       help="smolin | bell | w:N | product:N | cc:rho1|rho2|rho3 | ginibre:DIM:RANK")
    p_sim.add_argument("--noise-p", dest="noise_p", type=float, default=0.0,
                       help="global depolarizing strength applied before sampling")
    p_sim.add_argument("--shot-file", dest="shot_file", default=None,
                       help="output path (default <out>/shots.txt)")
    p_sim.add_argument("--jobs", type=int, default=1,
                       help="additionally split the stream into this many per-job files")

    p_nulls = sub.add_parser("build-nulls", help="generate the spurious-entanglement caches")
    _add_common(p_nulls)

    p_an = sub.add_parser("analyze", help="run the full pipeline on a shot file")
    _add_common(p_an)
    p_an.add_argument("--shot-file", dest="shot_file", required=False, default=None)
    p_an.add_argument("--k-max", dest="k_max", type=int, default=2,
                      help="largest reconstructed subsystem size (2..4)")
    p_an.add_argument("--require-cached-nulls", dest="require_cached_nulls",
                      action="store_true", default=False,
                      help="fail instead of building missing null distributions")

    p_rep = sub.add_parser("report", help="render a report.json as text")
    p_rep.add_argument("report_path")
    return parser


def cmd_simulate(args) -> int:
    config = _pipeline_config(args, state=args.state, noise_p=args.noise_p)
    if not config.state:
        raise ConfigError("simulate needs a --state")
    os.makedirs(config.out_dir, exist_ok=True)
    path = args.shot_file or os.path.join(config.out_dir, "shots.txt")
    record = simulate(config, path=path, jobs=args.jobs)
    print(f"wrote {record.n_shots} shots of {record.n_parties} parties to {path}")
    return EXIT_OK


def cmd_build_nulls(args) -> int:
    config = _pipeline_config(args)
    nulls = build_standard_nulls(config)
    for key in sorted(nulls, key=lambda k: (k.k, k.shape)):
        null = nulls[key]
        print(
            f"{key}: n={null.n_samples} source={null.source_state} "
            f"mean={null.samples.mean():.5f} std={null.samples.std():.5f} "
            f"max={null.samples.max():.5f} ({values_per_pass(key)} values/pass)"
        )
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = _pipeline_config(
        args,
        shot_file=args.shot_file,
        k_max=args.k_max,
        build_missing_nulls=not args.require_cached_nulls,
    )
    if not config.shot_file:
        raise ConfigError("analyze needs a --shot-file")
    report = analyze(config)
    print(summarize_report(report))
    print(f"report written to {os.path.join(config.out_dir, 'report.json')}")
    unconverged = [r["subset"] for r in report["rdms"] if not r["converged"]]
    if unconverged:
        print(f"error: reconstruction did not converge for subsets {unconverged}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_report(args) -> int:
    if not os.path.exists(args.report_path):
        raise MissingInputError(f"report {args.report_path!r} does not exist")
    try:
        with open(args.report_path, "r", encoding="utf-8") as fh:
            report = json.load(fh)
        print(summarize_report(report))
    except (json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"malformed report {args.report_path!r}: {exc}") from exc
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_args(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "build-nulls":
            return cmd_build_nulls(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "report":
            return cmd_report(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT


if __name__ == "__main__":
    sys.exit(main())
