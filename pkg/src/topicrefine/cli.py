"""Command-line entry point wrapping the pipeline stages."""

from __future__ import annotations

import argparse
import os
import sys

from . import pipeline
from .config import load_config
from .errors import (
    ConfigError,
    NumericError,
    StalenessError,
    TopicRefineError,
    TransportError,
)

EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_NUMERIC = 4
EXIT_STALE = 5
EXIT_OTHER = 1

STAGES = ("generate-topics", "embed", "similarity", "build-graph", "train",
          "extract", "evaluate", "validate", "sensitivity", "run")


def _parse_deltas(text):
    return tuple(float(x) for x in text.split(","))


def build_parser():
    parser = argparse.ArgumentParser(prog="topicrefine",
                                     description="Topic refinement pipeline")
    parser.add_argument("command", choices=STAGES)
    parser.add_argument("--config", required=True, help="TOML config path")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--force", action="store_true",
                        help="ignore stale upstream artifacts")
    parser.add_argument("--replications", type=int, default=5)
    parser.add_argument("--deltas", type=_parse_deltas, default=(0.01, 0.05),
                        help="comma-separated sensitivity deltas")
    parser.add_argument("--backend", choices=("http", "fixture"), default=None)
    parser.add_argument("--ablation", choices=("original", "refined"),
                        default="refined")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.k is not None:
        overrides["extraction.k"] = args.k
    if args.backend is not None:
        overrides["backends.mode"] = args.backend
    try:
        cfg = load_config(args.config, overrides)
        directory = pipeline.run_dir(cfg)
        os.makedirs(directory, exist_ok=True)
        manifest = pipeline.Manifest(directory, cfg)
        if args.command == "run":
            out = pipeline.run_all(cfg, ablation=args.ablation)
            print(f"run complete: {out}")
        elif args.command == "generate-topics":
            pipeline.stage_generate_topics(cfg, directory, manifest)
        elif args.command == "embed":
            pipeline.stage_embed(cfg, directory, manifest, force=args.force)
        elif args.command == "similarity":
            pipeline.stage_similarity(cfg, directory, manifest,
                                      force=args.force)
        elif args.command == "build-graph":
            pipeline.stage_build_graph(cfg, directory, manifest,
                                       force=args.force)
        elif args.command == "train":
            report = pipeline.stage_train(cfg, directory, manifest,
                                          force=args.force)
            print(f"final loss: {report.final_loss:.6f}")
        elif args.command == "extract":
            pipeline.stage_extract(cfg, directory, manifest,
                                   source=args.ablation, force=args.force)
        elif args.command == "evaluate":
            method, composites = pipeline.stage_evaluate(
                cfg, directory, manifest, source=args.ablation,
                force=args.force)
            print(f"selected method: {method}  composites: {composites}")
        elif args.command == "validate":
            pipeline.stage_validate(cfg, directory, manifest,
                                    n=args.replications, force=args.force)
        elif args.command == "sensitivity":
            pipeline.stage_sensitivity(cfg, directory, manifest,
                                       deltas=args.deltas,
                                       source=args.ablation, force=args.force)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, TimeoutError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except StalenessError as exc:
        print(f"staleness error: {exc}", file=sys.stderr)
        return EXIT_STALE
    except TopicRefineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return 0


if __name__ == "__main__":
    sys.exit(main())
