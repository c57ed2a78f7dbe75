"""Command line entry point: hem-lab {train,eval,lab,check}."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, HemError

log = logging.getLogger("hindsight_em")


def _cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    cfg.validate()
    from .runner import run_experiment

    path = run_experiment(cfg)
    print(path)
    return 0


def _cmd_eval(args) -> int:
    from .rollout import evaluate
    from .runner import load_checkpoint

    policy, env = load_checkpoint(args.checkpoint)
    rate = evaluate(policy, env, args.episodes, np.random.default_rng(args.seed))
    print(f"success_rate {rate:.6f}")
    return 0


def _parse_ks(text: str) -> list[int]:
    try:
        ks = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"ks: expected comma-separated integers, got {text!r}") from exc
    if not ks or any(k < 2 for k in ks):
        raise ConfigError("ks: every k must be >= 2")
    return ks


def _cmd_lab(args) -> int:
    from .estimator_lab import CSV_COLUMNS, lab_table, scaling_experiment

    ks = _parse_ks(args.ks)
    rows = lab_table(ks)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.csv_row())
    finally:
        if args.out:
            out.close()
    if len(ks) > 1:
        for est in ("reinforce", "hindsight"):
            log.info("%s log-log slope %.4f", est, scaling_experiment(ks, est)[1])
    return 0


def _cmd_check(args) -> int:
    from .selfcheck import run_all

    failed = 0
    for res in run_all(args.seed):
        status = "ok" if res.ok else "FAIL"
        failed += not res.ok
        print(f"{status:4s} {res.name}: {res.value:.3e} (tol {res.tol:.0e})")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hem-lab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training experiment to its env-step budget")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="greedy success rate of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("lab", help="estimator moments table for the one-step MDP")
    p.add_argument("--ks", default="2,4,8,16,32,64,128,256")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(fn=_cmd_lab)

    p = sub.add_parser("check", help="gradient and oracle self-tests")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (HemError, OSError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
