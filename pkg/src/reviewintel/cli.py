"""Command-line entry point: ``reviewintel <stage> --config project.json``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from reviewintel import __version__
from reviewintel.config import ProjectConfig, load_config, validate
from reviewintel.errors import ReviewIntelError, ValidationError
from reviewintel.insights import CompetitorMatrix, color_enabled
from reviewintel.pipeline import MATRIX_CSV_FILE, STAGES, Workspace, run_pipeline, run_stage
from reviewintel.topic_models.base import ALGORITHMS

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="project config (JSON)")
    common.add_argument("--out", type=Path, help="output directory (overrides paths.output_dir)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="recorded in the manifest; fits are single-threaded")
    common.add_argument("-v", "--verbose", action="store_true")

    models = common.add_argument_group("topic models")
    models.add_argument("--algorithm", choices=ALGORITHMS, action="append",
                        help="restrict to this algorithm (repeatable)")
    models.add_argument("--k", type=int)
    models.add_argument("--alpha", type=float)
    models.add_argument("--beta", type=float)
    models.add_argument("--max-iter", type=int)
    models.add_argument("--tol", type=float)
    models.add_argument("--burn-in", type=int)
    models.add_argument("--lag", type=int)
    models.add_argument("--k-min", type=int)
    models.add_argument("--k-max", type=int)
    models.add_argument("--step", type=int)
    models.add_argument("--seeds", type=int, nargs="+", help="average select-k coherence over these seeds")

    other = common.add_argument_group("classification and reports")
    other.add_argument("--gamma", type=float, help="aspect confidence threshold")
    other.add_argument("--margin", type=float, help="strength/weakness margin")
    other.add_argument("--bigram-threshold", type=float)

    parser = argparse.ArgumentParser(prog="reviewintel", description="Aspect and sentiment mining of reviews.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "pipeline"):
        sub.add_parser(name, parents=[common])
    return parser


_MODEL_FLAGS = {"k": "k", "alpha": "alpha", "beta": "beta", "max_iter": "max_iterations",
                "tol": "tolerance", "burn_in": "burn_in", "lag": "sample_lag"}


def apply_overrides(cfg: ProjectConfig, args: argparse.Namespace) -> ProjectConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.algorithm:
        missing = [a for a in args.algorithm if a not in cfg.models]
        if missing:
            raise ValidationError(f"no model section for {', '.join(missing)} in config")
        cfg.models = {a: cfg.models[a] for a in args.algorithm}
    changes = {field: getattr(args, flag) for flag, field in _MODEL_FLAGS.items()
               if getattr(args, flag) is not None}
    if changes:
        cfg.models = {a: dataclasses.replace(m, **changes) for a, m in cfg.models.items()}
    for flag, field in (("k_min", "k_min"), ("k_max", "k_max"), ("step", "step")):
        if getattr(args, flag) is not None:
            setattr(cfg.select_k, field, getattr(args, flag))
    if args.seeds:
        cfg.select_k.seeds = list(args.seeds)
    if args.gamma is not None:
        cfg.aspects.gamma = args.gamma
    if args.margin is not None:
        cfg.insights.margin = args.margin
    if args.bigram_threshold is not None:
        cfg.insights.bigram_threshold = args.bigram_threshold
    if args.out is not None:
        cfg.paths.output_dir = args.out
    validate(cfg)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "pipeline":
            run_pipeline(cfg)
        else:
            run_stage(args.command, cfg)
        if args.command in ("matrix", "pipeline"):
            _echo_matrix(cfg)
    except ReviewIntelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _echo_matrix(cfg: ProjectConfig) -> None:
    path = Workspace(cfg).root / MATRIX_CSV_FILE
    if path.exists():
        matrix = CompetitorMatrix.from_csv(path.read_text("utf-8"), cfg.insights.margin)
        sys.stdout.write(matrix.render_text(color=color_enabled(sys.stdout)))


if __name__ == "__main__":
    sys.exit(main())
