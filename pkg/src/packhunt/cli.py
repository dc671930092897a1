"""Command-line entry point: train, eval, compare, and plot subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .harness import compare, load_experiment_config, run_experiment, write_eval_csv
from .maddpg import MaddpgTrainer, evaluate
from .plots import emit_plots


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="packhunt",
        description=(
            "Predator-prey multi-agent actor-critic training with a team "
            "cooperation bonus."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run an experiment from a config file")
    p.add_argument("--config", required=True, help="TOML experiment config path")
    p.add_argument("--seed", type=int, default=None, help="override seeds with one seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of a trained checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint file to load")
    p.add_argument("--episodes", type=int, default=100, help="evaluation episodes")
    p.add_argument("--seed", type=int, default=0, help="evaluation reset seed")
    p.add_argument(
        "--config", default=None, help="evaluate on this config's world instead"
    )
    p.add_argument("--out", default=None, help="directory for an eval CSV")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="run baseline and variant arms and report")
    p.add_argument("--baseline", required=True, help="baseline TOML config path")
    p.add_argument("--variant", required=True, help="variant TOML config path")
    p.add_argument(
        "--seed", type=int, default=None, help="override both arms with one seed"
    )
    p.add_argument("--out", default=None, help="directory for the comparison report")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("plot", help="emit SVG reward curves from metrics CSVs")
    p.add_argument("csvs", nargs="+", help="metrics CSV files to plot")
    p.add_argument("--config", default=None, help="config supplying window and team size")
    p.add_argument("--window", type=int, default=None, help="smoothing window (episodes)")
    p.add_argument("--out", default=".", help="output directory for SVG files")
    p.set_defaults(func=_cmd_plot)
    return parser


def _cmd_train(args) -> int:
    config = load_experiment_config(
        args.config, seed_override=args.seed, output_override=args.out
    )
    result = run_experiment(config)
    print(f"wrote {len(result['artifacts'])} artifacts to {result['output_dir']}")
    print(f"manifest: {result['manifest']}")
    return 0


def _cmd_eval(args) -> int:
    snapshot = load_checkpoint(args.checkpoint)
    trainer = MaddpgTrainer.from_snapshot(snapshot)
    world = trainer.world_config
    if args.config is not None:
        world = load_experiment_config(args.config).world
    result = evaluate(trainer.learners, world, args.episodes, args.seed)
    print(f"greedy evaluation over {args.episodes} episodes (seed {args.seed}):")
    for i, value in enumerate(result.mean_agent_rewards):
        team = "red" if i < result.num_red else "green"
        print(f"  agent_{i} ({team}): {value:.4f}")
    print(f"  red team:   {result.red_team_mean:.4f}")
    print(f"  green team: {result.green_team_mean:.4f}")
    print(f"  total:      {result.total_mean:.4f}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = write_eval_csv(
            out / f"eval_{args.seed}.csv", [(args.episodes, result)], world.num_agents
        )
        print(f"wrote {path}")
    return 0


def _cmd_compare(args) -> int:
    baseline = load_experiment_config(args.baseline, seed_override=args.seed)
    variant = load_experiment_config(args.variant, seed_override=args.seed)
    report = compare(baseline, variant, out_dir=args.out)
    print(report["verdict"])
    print(f"report: {report['report_path']}")
    return 0


def _cmd_plot(args) -> int:
    window = args.window
    num_red = None
    if args.config is not None:
        config = load_experiment_config(args.config)
        num_red = config.world.num_red
        if window is None:
            window = config.smoothing_window
    if window is None:
        window = 100
    written = emit_plots(args.csvs, window, args.out, num_red=num_red)
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: report and exit nonzero
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
