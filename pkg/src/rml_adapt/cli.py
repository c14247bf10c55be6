"""``rml-adapt <subcommand> --config <path> [--seed N] [--sequential]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .harness import STAGES, ConfigError, Run, StageError, load_config

COMMANDS = {"synth": "data", "ingest": "data", **{s: s for s in STAGES if s != "data"}}
HELP = {
    "synth": "generate the synthetic cipher corpora, vocabulary and meta split",
    "ingest": "read parallel corpus files, build the vocabulary and meta split",
    "train-classifier": "train the sentence domain classifier on the meta-train pool",
    "score": "score every meta-train sentence with the classifier",
    "split": "build curriculum task manifests for the meta-learned baselines",
    "pretrain-mix": "pretrain the domain-mixing model and the plain reference models",
    "meta-train": "meta-train every meta-learned baseline",
    "finetune": "fine-tune each baseline on the support sets",
    "evaluate": "decode the test sets and score BLEU and chrF",
    "robustness": "cross-domain BLEU matrices against the vanilla model",
    "report": "assemble the seen/unseen results table",
    "all": "run every stage in order (finished stages are skipped)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rml-adapt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, help="experiment YAML file")
        p.add_argument("--seed", type=int, default=None, help="overrides the seed in the config")
        p.add_argument("--sequential", action="store_true",
                       help="deterministic sequential execution (the only mode; accepted for scripts)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed)
    except FileNotFoundError as exc:
        print(f"rml-adapt: config not found: {exc.filename}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"rml-adapt: {exc}", file=sys.stderr)
        return 2
    run = Run(cfg, sequential=True)
    try:
        if args.command == "all":
            run.run_all()
        else:
            if args.command in ("synth", "ingest"):
                synthetic = cfg.corpus.synthetic is not None
                if synthetic != (args.command == "synth"):
                    other = "synth" if synthetic else "ingest"
                    print(f"rml-adapt: corpus: this config needs `rml-adapt {other}`", file=sys.stderr)
                    return 2
            did = run.run_stage(COMMANDS[args.command])
            if not did:
                print(f"{args.command}: up to date", file=sys.stderr)
    except StageError as exc:
        print(f"rml-adapt {args.command}: {exc}", file=sys.stderr)
        return 3
    print(run.dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
