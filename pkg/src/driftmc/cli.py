"""Command line interface.

Subcommands: validate, sample-params, price, train, price-is, compare, run.
Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 validation failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import (build_grid, build_model, build_payoff, dump_config,
                     load_config, resolve_config)
from .covariation import CovariationSpec
from .engine import (REPORT_FIELDS, estimate_plain, report_from_dict,
                     report_to_dict, compare, comparison_to_dict, rows_to_csv,
                     COMPARISON_FIELDS)
from .errors import (ConfigError, DriftmcError, ModelValidationError,
                     NonFiniteError, SimulationError, WeightOverflowError)
from .models import validate
from .pipeline import price_with_checkpoint, run, run_label, train_drift
from .training import variance_ratio

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4


def _add_config(parser):
    parser.add_argument("--config", required=True, help="run config JSON file")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="driftmc",
        description="Monte Carlo option pricing with learned drift "
                    "importance sampling")
    parser.add_argument("--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check model invariants")
    _add_config(p)

    p = sub.add_parser("sample-params", help="sample and print model parameters")
    _add_config(p)
    p.add_argument("--seed", type=int, default=None,
                   help="override the model sampling seed")

    p = sub.add_parser("price", help="plain Monte Carlo estimate")
    _add_config(p)
    p.add_argument("--n", type=int, default=None,
                   help="sample size (default: first configured size)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out", default=None, help="report file (default stdout)")
    p.add_argument("--dump-paths", default=None, metavar="FILE",
                   help="also dump simulated trajectories as CSV")

    p = sub.add_parser("train", help="train the drift network")
    _add_config(p)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("price-is", help="importance-sampled estimate from a checkpoint")
    _add_config(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out", default=None)
    p.add_argument("--dump-paths", default=None, metavar="FILE")

    p = sub.add_parser("compare", help="combine two report files into a table row")
    p.add_argument("--mc-report", required=True)
    p.add_argument("--is-report", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out", default=None)

    p = sub.add_parser("run", help="full pipeline: price, train, price-is, compare")
    _add_config(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the estimation seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="restrict report output to one format")
    p.add_argument("--dry-run", action="store_true",
                   help="resolve and write the config, simulate nothing")
    p.add_argument("--dump-paths", action="store_true",
                   help="dump trajectories of every estimate (debugging)")
    return parser


def _emit(payload, fields, fmt, out):
    if fmt == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    else:
        rows = payload if isinstance(payload, list) else [payload]
        if out:
            rows_to_csv(rows, fields, out)
        else:
            sys.stdout.write(",".join(fields) + "\n")
            for row in rows:
                sys.stdout.write(",".join(
                    "" if row[f] is None else repr(row[f])
                    if isinstance(row[f], float) else str(row[f])
                    for f in fields) + "\n")


def _load_report(path):
    with open(path, "r", encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def _cmd_validate(args):
    cfg = resolve_config(load_config(args.config))
    violations = validate(build_model(cfg))
    if violations:
        for v in violations:
            print(str(v))
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def _cmd_sample_params(args):
    raw = load_config(args.config)
    if args.seed is not None:
        raw.setdefault("model", {})["seed"] = args.seed
        raw["model"]["params"] = None
    cfg = resolve_config(raw)
    print(json.dumps(cfg["model"], indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_price(args):
    cfg = resolve_config(load_config(args.config))
    model = build_model(cfg)
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    payoff = build_payoff(cfg)
    grid = build_grid(cfg)
    cov = CovariationSpec(model.sigma, grid)
    n = args.n or int(cfg["estimation"]["sample_sizes"][0])
    seed = args.seed if args.seed is not None else int(cfg["estimation"]["seed"])
    report = estimate_plain(model, payoff, grid, cov, seed=seed, n=n,
                            label=run_label(cfg), threads=args.threads,
                            dump_path=args.dump_paths)
    _emit(report_to_dict(report), REPORT_FIELDS, args.format, args.out)
    return EXIT_OK


def _cmd_train(args):
    cfg = resolve_config(load_config(args.config))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out_dir / "resolved_config.json")
    model = build_model(cfg)
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    payoff = build_payoff(cfg)
    _, trace = train_drift(cfg, model, payoff, out_dir=out_dir)
    if trace.halted_reason:
        raise NonFiniteError(trace.halted_reason)
    print(f"checkpoint written to {out_dir / 'checkpoint.json'}")
    return EXIT_OK


def _cmd_price_is(args):
    cfg = resolve_config(load_config(args.config))
    n = args.n or int(cfg["estimation"]["sample_sizes"][0])
    seed = args.seed if args.seed is not None else int(cfg["estimation"]["seed"]) + 1
    report = price_with_checkpoint(cfg, args.checkpoint, n=n, seed=seed,
                                   threads=args.threads,
                                   dump_path=args.dump_paths)
    _emit(report_to_dict(report), REPORT_FIELDS, args.format, args.out)
    return EXIT_OK


def _cmd_compare(args):
    report_mc = _load_report(args.mc_report)
    report_is = _load_report(args.is_report)
    row = compare(report_mc, report_is)
    vr = variance_ratio(report_mc, report_is)
    payload = comparison_to_dict(row)
    payload["vr"] = vr
    _emit(payload, COMPARISON_FIELDS, args.format, args.out)
    return EXIT_OK


def _cmd_run(args):
    raw = load_config(args.config)
    if args.seed is not None:
        raw.setdefault("estimation", {})["seed"] = args.seed
    formats = [args.format] if args.format else None
    run(raw, args.out_dir, threads=args.threads, dry_run=args.dry_run,
        dump_paths=args.dump_paths, formats=formats)
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "sample-params": _cmd_sample_params,
    "price": _cmd_price,
    "train": _cmd_train,
    "price-is": _cmd_price_is,
    "compare": _cmd_compare,
    "run": _cmd_run,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ModelValidationError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (WeightOverflowError, SimulationError, NonFiniteError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, DriftmcError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
