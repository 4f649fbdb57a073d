"""Command-line interface.

Subcommands mirror the experiment stages: gen-data, fit-transform, train,
sample-eval, report, run-all.  Exit codes: 0 success, 1 invalid
configuration or arguments, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config, restrict
from .pipeline import (
    cmd_fit_transform, cmd_gen_data, cmd_report, cmd_run_all, cmd_sample_eval, cmd_train,
)

__all__ = ["main", "entry"]


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; the CLI contract reserves 2
    # for runtime failures, so argument errors map to 1 instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(parser: argparse.ArgumentParser, with_job_flags: bool) -> None:
    parser.add_argument("--config", metavar="PATH", help="experiment config JSON")
    parser.add_argument("--seed", type=int, metavar="N", help="base experiment seed")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    if with_job_flags:
        parser.add_argument("--width", type=int, metavar="N",
                            help="network width configuration (16/32/64/128)")
        parser.add_argument("--pipeline", choices=("baseline", "gaussianized"),
                            help="which pipeline to operate on")


def _build_parser() -> _Parser:
    parser = _Parser(prog="gaussdiff",
                     description="Gaussianization preprocessing experiments for diffusion models")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    specs = [
        ("gen-data", "generate the mixture spec, training and held-out data", False),
        ("fit-transform", "fit the Gaussianization stack on the training data", False),
        ("train", "train one noise predictor", True),
        ("sample-eval", "sample the reverse process and score snapshots", True),
        ("report", "render SVG figures and the summary JSON", False),
        ("run-all", "run every stage for all configured pipelines and widths", True),
    ]
    for name, help_text, with_job_flags in specs:
        _add_common(sub.add_parser(name, help=help_text), with_job_flags)
    return parser


def _resolve_config(args):
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
    if getattr(args, "width", None) is not None or getattr(args, "pipeline", None) is not None:
        if args.command in ("train", "sample-eval"):
            if args.width is None or args.pipeline is None:
                raise ConfigError(f"'{args.command}' needs both --width and --pipeline")
        cfg = restrict(cfg, getattr(args, "width", None), getattr(args, "pipeline", None))
    elif args.command in ("train", "sample-eval"):
        raise ConfigError(f"'{args.command}' needs --width and --pipeline")
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "gen-data":
            cmd_gen_data(cfg)
        elif args.command == "fit-transform":
            cmd_fit_transform(cfg)
        elif args.command == "train":
            cmd_train(cfg, cfg.pipelines[0], cfg.widths[0])
        elif args.command == "sample-eval":
            cmd_sample_eval(cfg, cfg.pipelines[0], cfg.widths[0])
        elif args.command == "report":
            cmd_report(cfg)
        elif args.command == "run-all":
            cmd_run_all(cfg)
    except ConfigError as exc:
        print(f"gaussdiff: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure: missing files, divergence, I/O
        print(f"gaussdiff: {exc}", file=sys.stderr)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
