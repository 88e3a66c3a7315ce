"""Command-line interface.

Subcommands: run (execute one optimization and write its log), report
(summarize one log), compare (table across several logs), importance
(re-estimate weights/probabilities from a log).

Exit codes: 0 success, 1 runtime failure (failed run, unreadable or
degenerate log), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys

from .engine import (
    STRATEGIES,
    AllTrialsFailedError,
    ConfigError,
    EngineError,
    RngBundle,
    RunConfig,
    execute_run,
)
from .importance import (
    ForestConfig,
    ImportanceError,
    fit_forest,
    main_effect_fractions,
    render_importance_csv,
    render_importance_text,
    weights_to_probabilities,
)
from .objectives import ObjectiveError, make_objective, parse_objective_spec
from .reporting import (
    ComparisonTable,
    ReportError,
    compare,
    fit_to_dict,
    render_report_text,
    render_table_csv,
    render_table_text,
    summarize,
)
from .space import SpaceError, load_space, space_from_dict
from .triallog import LogError, read_log, write_log


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _non_negative_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def _assignment(text: str, conv, flag: str):
    if "=" not in text:
        raise ConfigError(f"{flag} expects NAME=VALUE, got {text!r}")
    name, raw = text.split("=", 1)
    name = name.strip()
    if not name:
        raise ConfigError(f"{flag} expects NAME=VALUE, got {text!r}")
    try:
        return name, conv(raw.strip())
    except ValueError:
        raise ConfigError(f"{flag}: cannot parse value in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wrsopt", description="Derivative-free hyperparameter search with importance-weighted resampling.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one optimization run and write its trial log")
    run.add_argument("--space", required=True, help="YAML search-space file")
    run.add_argument("--objective", required=True, help="objective spec, e.g. builtin:rastrigin or 'external:python train.py?timeout=600'")
    run.add_argument("--strategy", required=True, choices=STRATEGIES)
    run.add_argument("--budget", required=True, type=_positive_int, help="total number of trials N")
    run.add_argument("--init", type=_non_negative_int, default=0, help="length of the initial uniform phase (wrs only)")
    run.add_argument("--seed", type=int, default=None, help="run seed; generated and echoed when omitted")
    run.add_argument("--out", default=None, help="log path (default STRATEGY-seedSEED.jsonl)")
    run.add_argument("--set-prob", action="append", default=[], metavar="NAME=P", help="override a change probability; NAME may be '*'")
    run.add_argument("--set-kmin", action="append", default=[], metavar="NAME=K", help="override a minimum fresh-sample count; NAME may be '*'")
    run.add_argument("--opt", action="append", default=[], metavar="KEY=VALUE", help="sampler option (pso: swarm/omega/c1/c2; nelder-mead: alpha/gamma/rho/sigma/init_step)")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser("report", help="summarize one trial log")
    report.add_argument("log")
    report.add_argument("--window", type=_positive_int, default=100)
    report.add_argument("--degree", type=_non_negative_int, default=5)
    report.add_argument("--csv", default=None, help="also write the summary row as CSV")
    report.add_argument("--fit", default=None, help="also write the polynomial fit as JSON")
    report.set_defaults(func=cmd_report)

    cmp_ = sub.add_parser("compare", help="side-by-side table across logs")
    cmp_.add_argument("logs", nargs="+")
    cmp_.add_argument("--window", type=_positive_int, default=100)
    cmp_.add_argument("--csv", default=None)
    cmp_.set_defaults(func=cmd_compare)

    imp = sub.add_parser("importance", help="estimate per-dimension weights and probabilities from a log")
    imp.add_argument("log")
    imp.add_argument("--trees", type=_positive_int, default=30)
    imp.add_argument("--max-depth", type=_positive_int, default=64)
    imp.add_argument("--min-leaf", type=_positive_int, default=2)
    imp.add_argument("--no-bootstrap", action="store_true")
    imp.add_argument("--seed", type=int, default=None, help="forest seed (default: the log's run seed)")
    imp.add_argument("--csv", default=None)
    imp.set_defaults(func=cmd_importance)

    return parser


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_run(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else secrets.randbits(32)
    try:
        space = load_space(args.space)
        spec = parse_objective_spec(args.objective)
        objective = make_objective(spec, space)
        config = RunConfig(
            strategy=args.strategy,
            budget=args.budget,
            init=args.init,
            seed=seed,
            prob_overrides=tuple(_assignment(s, float, "--set-prob") for s in args.set_prob),
            kmin_overrides=tuple(_assignment(s, int, "--set-kmin") for s in args.set_kmin),
            sampler_options=tuple(_assignment(s, float, "--opt") for s in args.opt),
        )
        config.validate(space)
    except OSError as exc:
        return _fail(f"cannot read space file: {exc}", 2)
    except (SpaceError, ObjectiveError, ConfigError) as exc:
        return _fail(str(exc), 2)

    print(f"seed: {seed}")
    try:
        result = execute_run(space, objective, config)
    except ConfigError as exc:
        return _fail(str(exc), 2)
    except AllTrialsFailedError as exc:
        return _fail(f"{exc}; no log written", 1)
    except EngineError as exc:
        return _fail(str(exc), 1)

    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)

    out = args.out or f"{config.strategy}-seed{seed}.jsonl"
    try:
        write_log(out, result.header, result.records)
    except OSError as exc:
        return _fail(f"cannot write log {out}: {exc}", 1)

    best = result.best
    n_eval = sum(1 for r in result.records if r.status == "evaluated")
    n_cached = sum(1 for r in result.records if r.status == "cached-hit")
    n_failed = sum(1 for r in result.records if r.status == "failed")
    print(f"log: {out}")
    if best.candidate is not None:
        pairs = " ".join(f"{n}={v}" for n, v in zip(space.names, best.candidate))
        # first iteration reaching the best score, so this line agrees with
        # `report` even when a later duplicate re-ties the incumbent
        first = min(r.iteration for r in result.records if r.score == best.score)
        print(f"best: {best.score:.6g} at iteration {first} ({pairs})")
    print(f"trials: {len(result.records)} (evaluated {n_eval}, cached {n_cached}, failed {n_failed})")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        header, records = read_log(args.log)
    except LogError as exc:
        return _fail(str(exc), 1)
    if args.window > len(records):
        print(f"warning: window {args.window} exceeds {len(records)} trials; clamped", file=sys.stderr)
    try:
        report = summarize(header, records, window=args.window, degree=args.degree, source=args.log)
    except ReportError as exc:
        return _fail(str(exc), 1)

    sys.stdout.write(render_report_text(report))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(render_table_csv(ComparisonTable(rows=(report,), budget_mismatch=False)))
    if args.fit:
        if report.fit is None:
            print("warning: no fit produced; fit file not written", file=sys.stderr)
        else:
            with open(args.fit, "w", encoding="utf-8") as fh:
                json.dump(fit_to_dict(report.fit), fh, indent=2)
                fh.write("\n")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    reports = []
    for path in args.logs:
        try:
            header, records = read_log(path)
            reports.append(summarize(header, records, window=args.window, source=path))
        except (LogError, ReportError) as exc:
            return _fail(str(exc), 1)
    table = compare(reports)
    sys.stdout.write(render_table_text(table))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(render_table_csv(table))
    return 0


def cmd_importance(args: argparse.Namespace) -> int:
    try:
        header, records = read_log(args.log)
        space = space_from_dict(header.space)
    except (LogError, SpaceError) as exc:
        return _fail(str(exc), 1)
    seed = args.seed if args.seed is not None else header.seed
    config = ForestConfig(
        n_trees=args.trees,
        max_depth=args.max_depth,
        min_leaf=args.min_leaf,
        bootstrap=not args.no_bootstrap,
    )
    # same stream a run's own importance fit uses, so an rs log of length n0
    # reproduces the profile a wrs run with init=n0 and this seed would compute
    rng = RngBundle.from_seed(seed).forest
    try:
        forest = fit_forest(records, space, config, rng)
        if forest.degenerate:
            return _fail("scores carry no variance; weights undefined", 1)
        weights = main_effect_fractions(forest, space)
        probs = weights_to_probabilities(weights)
    except ImportanceError as exc:
        return _fail(str(exc), 1)

    sys.stdout.write(render_importance_text(space, weights.fractions, probs))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(render_importance_csv(space, weights.fractions, probs))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
