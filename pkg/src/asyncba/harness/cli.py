"""Command line entry point: ``asyncba run | verify-sampling | fit | replay``.

``run`` exits with status 1 iff some trial had a safety violation while no
S-property failure was logged for it.  Usage and configuration errors exit
with status 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..params import ParameterError, derive_params
from ..simnet.adversaries import ADVERSARIES
from ..simnet.trace import replay
from ..simnet.trial import ENGINES
from .campaign import load_rows, run_campaign
from .config import CAMPAIGN_PROTOCOLS, INPUT_RULES, ConfigError, ExperimentConfig
from .fit import FitError, fit_complexity, mean_words_by_n
from .sampling import verify_sampling_properties


def _add_model_args(p: argparse.ArgumentParser, n_many: bool = False) -> None:
    if n_many:
        p.add_argument("--n", type=int, nargs="+", default=[250, 500, 1000, 2000])
    else:
        p.add_argument("--n", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--d", type=float, default=0.05)
    p.add_argument("--full-participation", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="base seed; trial i uses seed + i")
    p.add_argument("--out", default=None, help="output directory for trials.csv and campaign.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asyncba", description="Asynchronous BA simulator and experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo campaign")
    run.add_argument("--protocol", choices=CAMPAIGN_PROTOCOLS, required=True)
    _add_model_args(run)
    run.add_argument("--adversary", choices=ADVERSARIES, default="uniform_random")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--inputs", choices=INPUT_RULES, default="all-1")
    run.add_argument("--engine", choices=ENGINES, default="batch")
    run.add_argument("--committees", type=int, default=1000, help="committees for sampling_only")
    run.add_argument("--trace-dir", default=None, help="write one trace per trial (event engine)")

    ver = sub.add_parser("verify-sampling", help="check S1..S6 on sampled committees")
    _add_model_args(ver)
    ver.add_argument("--committees", type=int, default=1000)
    ver.add_argument("--randomized-corruption", action="store_true")

    fit = sub.add_parser("fit", help="compare n ln^2 n and n^2 word-complexity models")
    _add_model_args(fit, n_many=True)
    fit.add_argument("--csv", nargs="+", default=None, help="fit existing per-trial CSV files instead of running")
    fit.add_argument("--protocol", choices=CAMPAIGN_PROTOCOLS[:-1], default="agreement")
    fit.add_argument("--adversary", choices=ADVERSARIES, default="uniform_random")
    fit.add_argument("--trials", type=int, default=3)
    fit.add_argument("--inputs", choices=INPUT_RULES, default="all-1")

    rep = sub.add_parser("replay", help="replay a trace and compare its report digest")
    rep.add_argument("trace")
    return parser


def _emit(obj, out) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    print(text)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "result.json").write_text(text + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    cfg = ExperimentConfig(
        protocol=args.protocol, n=args.n, epsilon=args.epsilon, d=args.d,
        full_participation=args.full_participation, adversary=args.adversary, trials=args.trials,
        base_seed=args.seed, inputs=args.inputs, engine=args.engine, committees=args.committees,
        out=args.out, trace_dir=args.trace_dir,
    )
    report = run_campaign(cfg)
    print(report.to_json(), end="")
    if report.exit_code:
        print(f"{report.unexplained_safety} safety violation(s) without a logged S-property failure",
              file=sys.stderr)
    return report.exit_code


def cmd_verify(args) -> int:
    params = derive_params(args.n, args.epsilon, args.d, args.full_participation)
    res = verify_sampling_properties(params, args.committees, args.seed, args.randomized_corruption)
    res.pop("rows")
    _emit(res, args.out)
    return 0


def cmd_fit(args) -> int:
    if args.csv:
        rows = [r for path in args.csv for r in load_rows(path)]
    else:
        rows = []
        for n in args.n:
            cfg = ExperimentConfig(protocol=args.protocol, n=n, epsilon=args.epsilon, d=args.d,
                                   full_participation=args.full_participation, adversary=args.adversary,
                                   trials=args.trials, base_seed=args.seed, inputs=args.inputs)
            rows += run_campaign(cfg).rows
    ns, words = mean_words_by_n(rows)
    _emit(fit_complexity(ns, words).to_dict(), args.out)
    return 0


def cmd_replay(args) -> int:
    report, recorded = replay(args.trace)
    ok = recorded is not None and report.digest == recorded
    print(json.dumps({"digest": report.digest, "recorded": recorded, "match": ok}, sort_keys=True))
    return 0 if ok else 1


COMMANDS = {"run": cmd_run, "verify-sampling": cmd_verify, "fit": cmd_fit, "replay": cmd_replay}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError, FitError, FileNotFoundError) as exc:
        print(f"asyncba: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
