"""Command-line entry point.

Subcommands run the pipeline stages (gen, train, eval, report) or the whole
thing (all). Every command takes the same flags: --config (required),
--seed and --out as overrides, --resume to pick up from cached artifacts
and checkpoints. Exit code 0 on success; failures print one categorized
line to stderr and exit nonzero (2 config, 3 data/numeric, 4 io,
1 anything else).
"""

import argparse
import os
import sys

from .errors import ConfigError, CouplingError, DataError, MarginalError, \
    ShapeError, StateError
from .experiment import Paths, SYSTEMS, emit_plot_data, load_config, \
    run_experiment, stage_adapt, stage_eval, stage_gen, stage_pretrain, \
    write_comparison_tables
from .metrics import EvalReport
from .nets import Network

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dotn",
        description="Transport-aligned domain adaptation experiments for "
                    "spectral enhancement",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "generate and cache the corpus"),
        ("train", "train the source-only baseline and the adapted model"),
        ("eval", "evaluate cached checkpoints on the held-out target split"),
        ("report", "write comparison tables and plot data from evaluations"),
        ("all", "run every stage in order"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment YAML")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--resume", action="store_true",
                       help="reuse finished artifacts and training checkpoints")
    return parser


def _require(path, what):
    if not os.path.exists(path):
        raise StateError(f"{what} not found at {path}; run the earlier stages first")


def _dispatch(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
    paths = Paths(cfg.out_dir)
    os.makedirs(cfg.out_dir, exist_ok=True)

    if args.command == "all":
        run_experiment(cfg, resume=args.resume)
        print(f"experiment complete: {cfg.out_dir}")
        return 0

    if args.command == "gen":
        stage_gen(cfg, paths)
        print(f"corpus ready: {paths.corpus_dir}")
        return 0

    if args.command == "train":
        corpus = stage_gen(cfg, paths)
        baseline = stage_pretrain(cfg, paths, corpus, args.resume)
        stage_adapt(cfg, paths, corpus, baseline, args.resume)
        print(f"checkpoints written: {paths.source_net}, {paths.adapt_f}")
        return 0

    if args.command == "eval":
        corpus = stage_gen(cfg, paths)
        _require(paths.source_net, "baseline checkpoint")
        _require(paths.adapt_f, "adapted checkpoint")
        baseline = Network.load(paths.source_net)
        adapted = Network.load(paths.adapt_f)
        stage_eval(cfg, paths, corpus, baseline, adapted)
        print(f"evaluation reports written under {cfg.out_dir}")
        return 0

    if args.command == "report":
        reports = {}
        for system in SYSTEMS:
            _require(paths.eval_json(system), f"evaluation report for {system}")
            reports[system] = EvalReport.from_json(paths.eval_json(system))
        write_comparison_tables(reports, paths.tables_dir)
        emit_plot_data([reports[s] for s in SYSTEMS], paths.plots_dir,
                       labels=list(SYSTEMS))
        print(f"tables in {paths.tables_dir}, plot data in {paths.plots_dir}")
        return 0

    raise ConfigError(f"command: unknown command {args.command!r}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as e:
        print(f"error[config]: {e}", file=sys.stderr)
        return 2
    except (DataError, ShapeError, MarginalError, CouplingError, StateError) as e:
        print(f"error[data]: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return 4
    except Exception as e:  # last resort: keep the contract of one error line
        print(f"error[internal]: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
