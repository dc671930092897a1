"""Experiment orchestration: config files, seed fan-out, metrics and
checkpoint persistence, and the baseline-vs-variant comparison report.

Each seed trains as an isolated worker writing to seed-suffixed paths;
the coordinator writes a manifest of artifact hashes once all seeds
finish.  Reruns with the same config reproduce every trajectory byte
(wall-clock diagnostics aside).
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .checkpoint import save_checkpoint
from .env import WorldConfig
from .maddpg import MaddpgTrainer, TrainConfig, evaluate
from .metrics import read_metrics_csv, write_metrics_csv

BONUS_FIELDS = {
    "bonus_enabled",
    "bonus_threshold",
    "bonus_scale",
    "bonus_red_team",
    "bonus_green_team",
}


class ConfigError(ValueError):
    """A config file is missing, malformed, or carries unknown keys."""


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs/experiment"
    eval_every: int = 500  # episodes between greedy evaluations
    eval_episodes: int = 10
    smoothing_window: int = 100
    checkpoint_every: int = 0  # mid-run checkpoint cadence; 0 = final only
    workers: int = 1

    def validate(self) -> None:
        self.world.validate()
        self.train.validate()
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if any(int(s) < 0 for s in self.seeds):
            raise ValueError("seeds must be nonnegative")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.eval_episodes < 0:
            raise ValueError("eval_episodes must be >= 0")
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "world": asdict(self.world),
            "train": asdict(self.train),
            "experiment": {
                "seeds": list(self.seeds),
                "output_dir": self.output_dir,
                "eval_every": self.eval_every,
                "eval_episodes": self.eval_episodes,
                "smoothing_window": self.smoothing_window,
                "checkpoint_every": self.checkpoint_every,
                "workers": self.workers,
            },
        }


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    """Build a validated config from the nested dict / TOML shape."""
    known_sections = {"world", "train", "experiment"}
    unknown = set(data) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def build(section, cls):
        fields = {f.name for f in cls.__dataclass_fields__.values()}
        values = dict(data.get(section, {}))
        bad = set(values) - fields
        if bad:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(bad)}")
        return values

    world = WorldConfig(**build("world", WorldConfig))
    train_values = build("train", TrainConfig)
    if "hidden_sizes" in train_values:
        train_values["hidden_sizes"] = tuple(train_values["hidden_sizes"])
    train = TrainConfig(**train_values)

    exp_fields = {
        "seeds",
        "output_dir",
        "eval_every",
        "eval_episodes",
        "smoothing_window",
        "checkpoint_every",
        "workers",
    }
    exp_values = dict(data.get("experiment", {}))
    bad = set(exp_values) - exp_fields
    if bad:
        raise ConfigError(f"unknown keys in [experiment]: {sorted(bad)}")
    if "seeds" in exp_values:
        exp_values["seeds"] = tuple(int(s) for s in exp_values["seeds"])
    config = ExperimentConfig(world=world, train=train, **exp_values)
    config.validate()
    return config


def load_experiment_config(
    path,
    seed_override: int | None = None,
    output_override: str | None = None,
) -> ExperimentConfig:
    """Read a TOML experiment config; flags override file values."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    config = experiment_config_from_dict(data)
    if seed_override is not None:
        config = replace(config, seeds=(int(seed_override),))
    if output_override is not None:
        config = replace(config, output_dir=str(output_override))
    config.validate()
    return config


# ----------------------------------------------------------------------
# single-seed worker

def _eval_seed_for(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


def write_eval_csv(path, records, num_agents: int) -> Path:
    """Greedy-evaluation summaries: one row per (episode, EvalResult) pair."""
    path = Path(path)
    header = (
        ["episode"]
        + [f"agent_{i}" for i in range(num_agents)]
        + ["red_team", "green_team", "total"]
    )
    lines = [",".join(header)]
    for episode, result in records:
        fields = (
            [str(episode)]
            + [repr(float(v)) for v in result.mean_agent_rewards]
            + [
                repr(result.red_team_mean),
                repr(result.green_team_mean),
                repr(result.total_mean),
            ]
        )
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def _run_seed(config: ExperimentConfig, seed: int) -> list[str]:
    """Train one seed to completion; returns artifact names it wrote."""
    out = Path(config.output_dir)
    trainer = MaddpgTrainer(config.world, replace(config.train, seed=seed))
    episodes = config.train.episodes
    config_echo = config.to_dict()
    rows = []
    eval_records = []
    artifacts: list[str] = []
    while trainer.episode < episodes:
        boundaries = [episodes]
        boundaries.append(
            ((trainer.episode // config.eval_every) + 1) * config.eval_every
        )
        if config.checkpoint_every:
            boundaries.append(
                ((trainer.episode // config.checkpoint_every) + 1)
                * config.checkpoint_every
            )
        target = min(boundaries)
        rows.extend(trainer.run_episodes(target - trainer.episode))
        at = trainer.episode
        if config.eval_episodes and (at % config.eval_every == 0 or at == episodes):
            result = evaluate(
                trainer.learners,
                config.world,
                config.eval_episodes,
                _eval_seed_for(seed, at),
            )
            eval_records.append((at, result))
        if config.checkpoint_every and at % config.checkpoint_every == 0 and at < episodes:
            name = f"checkpoint_{seed}_ep{at}.ckpt"
            save_checkpoint(trainer.snapshot(experiment=config_echo), out / name)
            artifacts.append(name)

    name = f"metrics_{seed}.csv"
    write_metrics_csv(out / name, rows, num_agents=config.world.num_agents)
    artifacts.append(name)
    if eval_records:
        name = f"eval_{seed}.csv"
        write_eval_csv(out / name, eval_records, config.world.num_agents)
        artifacts.append(name)
    name = f"checkpoint_{seed}_final.ckpt"
    save_checkpoint(trainer.snapshot(experiment=config_echo), out / name)
    artifacts.append(name)
    return artifacts


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def run_experiment(config: ExperimentConfig) -> dict:
    """Train every seed, then write manifest.txt with artifact hashes."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_bytes(b"")  # fail before any training if the path is unwritable
    probe.unlink()

    artifacts: list[str] = []
    workers = min(config.workers, len(config.seeds))
    if workers > 1:
        # single-threaded BLAS inside workers; they spawn with this env
        saved = {
            k: os.environ.get(k)
            for k in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
        }
        for k in saved:
            os.environ[k] = "1"
        try:
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                futures = [
                    pool.submit(_run_seed, config, seed) for seed in config.seeds
                ]
                for future in futures:
                    artifacts.extend(future.result())
        finally:
            for k, v in saved.items():
                if v is None:
                    del os.environ[k]
                else:
                    os.environ[k] = v
    else:
        for seed in config.seeds:
            artifacts.extend(_run_seed(config, seed))

    artifacts = sorted(artifacts)
    manifest_lines = [f"{_sha256(out / name)}  {name}" for name in artifacts]
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    return {
        "output_dir": str(out),
        "artifacts": artifacts,
        "manifest": str(manifest),
    }


# ----------------------------------------------------------------------
# baseline-vs-variant comparison

def paired_sign_test(differences) -> dict:
    """Exact one-sided sign test for paired differences, ties excluded."""
    wins = int(sum(1 for d in differences if d > 0))
    losses = int(sum(1 for d in differences if d < 0))
    ties = len(list(differences)) - wins - losses
    m = wins + losses
    if m:
        p_value = sum(math.comb(m, k) for k in range(wins, m + 1)) / (2.0**m)
    else:
        p_value = 1.0
    return {"wins": wins, "losses": losses, "ties": ties, "p_value_one_sided": p_value}


def _arm_stats(config: ExperimentConfig) -> dict[int, dict[str, float]]:
    """Per-seed mean team rewards over the final 20% of episodes."""
    tail = max(1, config.train.episodes // 5)
    out = Path(config.output_dir)
    stats = {}
    for seed in config.seeds:
        header, matrix = read_metrics_csv(out / f"metrics_{seed}.csv")
        if matrix.shape[0] == 0:
            raise ValueError(f"metrics for seed {seed} contain no episodes")
        agent_count = len(header) - 5
        window = matrix[-tail:]
        stats[seed] = {
            "red_team": float(window[:, 1 + agent_count].mean()),
            "green_team": float(window[:, 2 + agent_count].mean()),
            "total": float(window[:, 3 + agent_count].mean()),
        }
    return stats


def compare(
    baseline: ExperimentConfig,
    variant: ExperimentConfig,
    out_dir=None,
) -> dict:
    """Run both arms and produce a descriptive comparison report.

    The arms must share the world and the seed list and may differ only in
    bonus settings, otherwise the comparison would be confounded.
    """
    baseline.validate()
    variant.validate()
    if baseline.world != variant.world:
        raise ValueError("comparison confounded: world configs differ")
    if tuple(baseline.seeds) != tuple(variant.seeds):
        raise ValueError("comparison confounded: seed lists differ")
    base_train = asdict(baseline.train)
    var_train = asdict(variant.train)
    for key in BONUS_FIELDS:
        base_train.pop(key)
        var_train.pop(key)
    if base_train != var_train:
        diff = [k for k in base_train if base_train[k] != var_train[k]]
        raise ValueError(
            f"comparison confounded: train configs differ beyond bonus settings: {diff}"
        )
    if Path(baseline.output_dir).resolve() == Path(variant.output_dir).resolve():
        raise ValueError("baseline and variant need distinct output directories")

    run_experiment(baseline)
    run_experiment(variant)

    base_stats = _arm_stats(baseline)
    var_stats = _arm_stats(variant)
    metrics = ("red_team", "green_team", "total")
    per_seed = []
    for seed in baseline.seeds:
        per_seed.append(
            {
                "seed": seed,
                "baseline": base_stats[seed],
                "variant": var_stats[seed],
                "difference": {
                    m: var_stats[seed][m] - base_stats[seed][m] for m in metrics
                },
            }
        )
    pooled = {
        "baseline": {
            m: float(np.mean([base_stats[s][m] for s in baseline.seeds]))
            for m in metrics
        },
        "variant": {
            m: float(np.mean([var_stats[s][m] for s in baseline.seeds]))
            for m in metrics
        },
    }
    pooled["difference"] = {
        m: pooled["variant"][m] - pooled["baseline"][m] for m in metrics
    }
    sign_tests = {
        m: paired_sign_test([row["difference"][m] for row in per_seed])
        for m in metrics
    }
    n_seeds = len(baseline.seeds)
    red = sign_tests["red_team"]
    verdict = (
        f"variant red-team mean exceeded baseline in {red['wins']}/{n_seeds} seeds "
        f"(ties {red['ties']}; pooled difference {pooled['difference']['red_team']:+.4f}); "
        f"green-team pooled difference {pooled['difference']['green_team']:+.4f} "
        f"(reported without threshold); "
        f"total pooled difference {pooled['difference']['total']:+.4f}"
    )
    report = {
        "baseline_config": baseline.to_dict(),
        "variant_config": variant.to_dict(),
        "tail_episodes": max(1, baseline.train.episodes // 5),
        "per_seed": per_seed,
        "pooled": pooled,
        "sign_test": sign_tests,
        "verdict": verdict,
    }
    if out_dir is None:
        out_dir = Path(variant.output_dir).parent
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "comparison_report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    report["report_path"] = str(report_path)
    return report
