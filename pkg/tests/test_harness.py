import hashlib
import json
from dataclasses import replace

import numpy as np
import pytest

from packhunt.env import WorldConfig
from packhunt.harness import (
    ConfigError,
    ExperimentConfig,
    compare,
    experiment_config_from_dict,
    load_experiment_config,
    paired_sign_test,
    run_experiment,
)
from packhunt.checkpoint import load_checkpoint
from packhunt.maddpg import MaddpgTrainer, TrainConfig
from packhunt.metrics import read_metrics_csv, trajectory_bytes

from conftest import small_train_config, small_world_config


def tiny_experiment(tmp_path, name="run", **overrides):
    defaults = dict(
        world=small_world_config(),
        train=small_train_config(episodes=10),
        seeds=(0, 1),
        output_dir=str(tmp_path / name),
        eval_every=5,
        eval_episodes=2,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


CONFIG_TOML = """
[experiment]
seeds = [3]
output_dir = "{out}"
eval_every = 5
eval_episodes = 1
smoothing_window = 4

[world]
num_red = 2
num_green = 1
num_obstacles = 1
episode_length = 10

[train]
episodes = 6
batch_size = 16
warmup = 16
update_every = 10
hidden_sizes = [8, 8]
"""


class TestRunExperiment:
    def test_csv_has_one_row_per_episode(self, tmp_path):
        config = tiny_experiment(tmp_path, seeds=(0,))
        result = run_experiment(config)
        header, matrix = read_metrics_csv(tmp_path / "run" / "metrics_0.csv")
        assert matrix.shape[0] == 10
        assert matrix[:, 0].tolist() == list(range(10))

    def test_two_seeds_fan_out(self, tmp_path):
        result = run_experiment(tiny_experiment(tmp_path))
        names = set(result["artifacts"])
        assert {
            "metrics_0.csv",
            "metrics_1.csv",
            "checkpoint_0_final.ckpt",
            "checkpoint_1_final.ckpt",
            "eval_0.csv",
            "eval_1.csv",
        } <= names
        assert (tmp_path / "run" / "manifest.txt").exists()

    def test_manifest_hashes_match_contents(self, tmp_path):
        config = tiny_experiment(tmp_path, seeds=(0,))
        result = run_experiment(config)
        for line in (tmp_path / "run" / "manifest.txt").read_text().splitlines():
            digest, name = line.split("  ", 1)
            actual = hashlib.sha256((tmp_path / "run" / name).read_bytes()).hexdigest()
            assert digest == actual

    def test_rerun_reproduces_trajectory_bytes(self, tmp_path):
        config_a = tiny_experiment(tmp_path, name="a", seeds=(0,))
        config_b = tiny_experiment(tmp_path, name="b", seeds=(0,))
        run_experiment(config_a)
        run_experiment(config_b)
        assert trajectory_bytes(tmp_path / "a" / "metrics_0.csv") == trajectory_bytes(
            tmp_path / "b" / "metrics_0.csv"
        )

    def test_unwritable_output_fails_before_training(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        config = tiny_experiment(tmp_path, output_dir=str(blocker / "sub"))
        with pytest.raises(OSError):
            run_experiment(config)

    def test_periodic_checkpoint_resumes_identically(self, tmp_path):
        config = tiny_experiment(tmp_path, seeds=(4,), checkpoint_every=5)
        run_experiment(config)
        mid = tmp_path / "run" / "checkpoint_4_ep5.ckpt"
        assert mid.exists()
        resumed = MaddpgTrainer.from_snapshot(load_checkpoint(mid))
        rows_tail = resumed.run_episodes(5)
        _, matrix = read_metrics_csv(tmp_path / "run" / "metrics_4.csv")
        for row, csv_row in zip(rows_tail, matrix[5:]):
            assert row.agent_rewards == tuple(csv_row[1:4])

    def test_parallel_workers_match_serial(self, tmp_path):
        serial = tiny_experiment(tmp_path, name="serial", workers=1)
        parallel = tiny_experiment(tmp_path, name="parallel", workers=2)
        run_experiment(serial)
        run_experiment(parallel)
        for seed in (0, 1):
            assert trajectory_bytes(
                tmp_path / "serial" / f"metrics_{seed}.csv"
            ) == trajectory_bytes(tmp_path / "parallel" / f"metrics_{seed}.csv")

    def test_zero_episodes_yields_header_only_csv(self, tmp_path):
        config = tiny_experiment(
            tmp_path, seeds=(0,), train=small_train_config(episodes=0)
        )
        run_experiment(config)
        header, matrix = read_metrics_csv(tmp_path / "run" / "metrics_0.csv")
        assert matrix.shape[0] == 0

    def test_eval_csv_schema(self, tmp_path):
        run_experiment(tiny_experiment(tmp_path, seeds=(0,)))
        lines = (tmp_path / "run" / "eval_0.csv").read_text().splitlines()
        assert lines[0] == "episode,agent_0,agent_1,agent_2,red_team,green_team,total"
        assert len(lines) == 3  # evals at episodes 5 and 10


class TestConfigLoading:
    def test_toml_round_trip(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text(CONFIG_TOML.format(out=tmp_path / "out"))
        config = load_experiment_config(path)
        assert config.seeds == (3,)
        assert config.world.num_red == 2
        assert config.train.hidden_sizes == (8, 8)
        assert config.smoothing_window == 4

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_experiment_config(tmp_path / "missing.toml")
        assert "missing.toml" in str(err.value)

    def test_overrides(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text(CONFIG_TOML.format(out=tmp_path / "out"))
        config = load_experiment_config(path, seed_override=9, output_override="else")
        assert config.seeds == (9,)
        assert config.output_dir == "else"

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("[train]\nepisods = 5\n")
        with pytest.raises(ConfigError) as err:
            load_experiment_config(path)
        assert "episods" in str(err.value)

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            experiment_config_from_dict({"banana": {}})

    def test_malformed_toml_rejected(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("[experiment\nseeds=[")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_validation_runs(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("[experiment]\nseeds = []\n")
        with pytest.raises(ValueError):
            load_experiment_config(path)


class TestSignTest:
    def test_all_wins(self):
        result = paired_sign_test([1.0, 2.0, 0.5, 3.0, 0.1])
        assert result["wins"] == 5 and result["losses"] == 0
        assert result["p_value_one_sided"] == pytest.approx(1 / 32)

    def test_split_decision(self):
        result = paired_sign_test([1.0, -1.0, 2.0, -2.0])
        assert result["wins"] == 2 and result["losses"] == 2
        assert result["p_value_one_sided"] == pytest.approx(11 / 16)

    def test_ties_excluded(self):
        result = paired_sign_test([0.0, 0.0, 1.0])
        assert result["ties"] == 2 and result["wins"] == 1
        assert result["p_value_one_sided"] == pytest.approx(0.5)

    def test_empty_is_vacuous(self):
        assert paired_sign_test([])["p_value_one_sided"] == 1.0


class TestCompare:
    def arms(self, tmp_path, **variant_overrides):
        base_train = small_train_config(episodes=10)
        baseline = tiny_experiment(
            tmp_path, name="baseline", train=base_train, eval_episodes=0
        )
        variant_train = replace(base_train, **variant_overrides)
        variant = tiny_experiment(
            tmp_path, name="variant", train=variant_train, eval_episodes=0
        )
        return baseline, variant

    def test_identical_arms_have_zero_differences(self, tmp_path):
        baseline, variant = self.arms(tmp_path)  # bonus off in both
        report = compare(baseline, variant, out_dir=tmp_path)
        for row in report["per_seed"]:
            for metric in ("red_team", "green_team", "total"):
                assert row["difference"][metric] == 0.0
        assert report["sign_test"]["red_team"]["ties"] == 2

    def test_report_totals_match_csv_recomputation(self, tmp_path):
        baseline, variant = self.arms(
            tmp_path, bonus_enabled=True, bonus_threshold=1, bonus_scale=2.0
        )
        report = compare(baseline, variant, out_dir=tmp_path)
        tail = report["tail_episodes"]
        for row in report["per_seed"]:
            _, matrix = read_metrics_csv(
                tmp_path / "variant" / f"metrics_{row['seed']}.csv"
            )
            agent_count = matrix.shape[1] - 5
            expected = float(matrix[-tail:, 1 + agent_count].mean())
            assert row["variant"]["red_team"] == expected

    def test_report_embeds_both_configs(self, tmp_path):
        baseline, variant = self.arms(
            tmp_path, bonus_enabled=True, bonus_threshold=1, bonus_scale=2.0
        )
        report = compare(baseline, variant, out_dir=tmp_path)
        assert report["baseline_config"]["train"]["bonus_enabled"] is False
        assert report["variant_config"]["train"]["bonus_enabled"] is True
        on_disk = json.loads((tmp_path / "comparison_report.json").read_text())
        assert on_disk["pooled"] == report["pooled"]

    def test_mismatched_seeds_rejected(self, tmp_path):
        baseline, variant = self.arms(tmp_path)
        variant = replace(variant, seeds=(5, 6))
        with pytest.raises(ValueError) as err:
            compare(baseline, variant, out_dir=tmp_path)
        assert "confound" in str(err.value)

    def test_mismatched_world_rejected(self, tmp_path):
        baseline, variant = self.arms(tmp_path)
        variant = replace(variant, world=WorldConfig(num_red=3, num_green=1))
        with pytest.raises(ValueError):
            compare(baseline, variant, out_dir=tmp_path)

    def test_non_bonus_train_difference_rejected(self, tmp_path):
        baseline, variant = self.arms(tmp_path)
        variant = replace(variant, train=replace(variant.train, gamma=0.5))
        with pytest.raises(ValueError) as err:
            compare(baseline, variant, out_dir=tmp_path)
        assert "gamma" in str(err.value)

    def test_shared_output_dir_rejected(self, tmp_path):
        baseline, variant = self.arms(tmp_path)
        variant = replace(variant, output_dir=baseline.output_dir)
        with pytest.raises(ValueError):
            compare(baseline, variant, out_dir=tmp_path)
