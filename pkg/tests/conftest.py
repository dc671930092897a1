import numpy as np
import pytest

from packhunt.env import WorldConfig, WorldState
from packhunt.maddpg import TrainConfig


def small_train_config(**overrides) -> TrainConfig:
    """Desk-sized training config: tiny nets and frequent updates so unit
    tests exercise the full learning path in milliseconds."""
    defaults = dict(
        episodes=10,
        batch_size=16,
        warmup=16,
        update_every=10,
        hidden_sizes=(8, 8),
        seed=0,
    )
    defaults.update(overrides)
    return TrainConfig(**defaults)


def small_world_config(**overrides) -> WorldConfig:
    defaults = dict(num_red=2, num_green=1, num_obstacles=1, episode_length=10)
    defaults.update(overrides)
    return WorldConfig(**defaults)


def manual_state(config: WorldConfig, agent_pos, obstacle_pos=None, water=(0.0, 0.0),
                 agent_vel=None, step=0) -> WorldState:
    """Hand-placed world state for reward/observation arithmetic tests."""
    agent_pos = np.asarray(agent_pos, dtype=np.float64)
    if agent_vel is None:
        agent_vel = np.zeros_like(agent_pos)
    if obstacle_pos is None:
        obstacle_pos = np.empty((0, 2))
    return WorldState(
        agent_pos=agent_pos,
        agent_vel=np.asarray(agent_vel, dtype=np.float64),
        obstacle_pos=np.asarray(obstacle_pos, dtype=np.float64),
        water=np.asarray(water, dtype=np.float64),
        step=step,
        rng=np.random.default_rng(0),
    )


def random_batch(trainer, size, rng):
    """Synthetic minibatch with one-hot actions, shaped for the trainer."""
    from packhunt.maddpg import Minibatch

    n, d = trainer.num_agents, trainer.obs_dim
    actions = np.zeros((size, n, 4))
    actions[
        np.arange(size)[:, None], np.arange(n)[None, :], rng.integers(0, 4, (size, n))
    ] = 1.0
    return Minibatch(
        obs=rng.normal(size=(size, n, d)),
        actions=actions,
        rewards=rng.normal(size=(size, n)),
        next_obs=rng.normal(size=(size, n, d)),
        done=(rng.random(size) < 0.2).astype(float),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
