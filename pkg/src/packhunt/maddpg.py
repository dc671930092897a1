"""Centralized-critic multi-agent actor-critic training with a team
cooperation bonus.

Each agent owns a local-observation actor and a centralized critic that
sees every agent's observation and action.  Critic targets optionally
scale an agent's sampled reward whenever strictly more than a threshold
number of its teammates earned a strictly positive reward in the same
transition, so collective successes are reinforced harder than solo ones.
The bonus only ever touches training targets; environment rewards and all
reported metrics stay raw.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, asdict

import numpy as np

from .env import NUM_ACTIONS, PredatorPreyWorld, WorldConfig
from .metrics import MetricsRow, make_row
from .nets import (
    AdamState,
    Mlp,
    adam_step,
    gumbel_softmax_sample,
    mlp_backward,
    mlp_forward,
    mlp_init,
    soft_update,
    softmax,
)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 25_000
    max_episode_length: int = 25
    gamma: float = 0.95
    tau: float = 0.01
    batch_size: int = 1024
    buffer_capacity: int = 1_000_000
    update_every: int = 100  # environment steps between learning rounds
    warmup: int = 1024  # stored transitions required before learning
    bonus_enabled: bool = False
    bonus_threshold: int = 1  # strictly more teammates than this must profit
    bonus_scale: float = 2.0
    bonus_red_team: bool = True
    bonus_green_team: bool = True
    bootstrap_on_timeout: bool = True
    temperature: float = 1.0
    actor_lr: float = 1e-2
    critic_lr: float = 1e-2
    hidden_sizes: tuple[int, ...] = (64, 64)
    seed: int = 0

    def validate(self) -> None:
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.max_episode_length < 1:
            raise ValueError("max_episode_length must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 1 <= self.batch_size <= self.buffer_capacity:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if self.update_every < 1:
            raise ValueError("update_every must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.bonus_threshold < 0:
            raise ValueError("bonus_threshold must be >= 0")
        if not self.bonus_scale > 0:
            raise ValueError("bonus_scale must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.actor_lr < 0 or self.critic_lr < 0:
            raise ValueError("learning rates must be nonnegative")
        if not self.hidden_sizes:
            raise ValueError("hidden_sizes must be nonempty")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def cooperation_bonus(team_rewards, threshold: int, scale: float) -> float:
    """Reward multiplier for one stored transition.

    Returns ``scale`` when strictly more than ``threshold`` members of the
    team (the agent included) earned a strictly positive reward, else 1.
    """
    rewards = np.asarray(team_rewards, dtype=np.float64)
    if rewards.size == 0:
        raise ValueError("team_rewards must be nonempty")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    if not scale > 0:
        raise ValueError("scale must be positive")
    positives = int(np.count_nonzero(rewards > 0.0))
    return float(scale) if positives > threshold else 1.0


@dataclass
class Transition:
    """One stored experience; carries every agent's reward so the team
    bonus can be evaluated for any agent at sampling time."""

    obs: np.ndarray  # (num_agents, obs_dim)
    actions: np.ndarray  # (num_agents, NUM_ACTIONS) one-hot
    rewards: np.ndarray  # (num_agents,)
    next_obs: np.ndarray  # (num_agents, obs_dim)
    done: bool


@dataclass
class Minibatch:
    obs: np.ndarray  # (S, num_agents, obs_dim)
    actions: np.ndarray  # (S, num_agents, NUM_ACTIONS)
    rewards: np.ndarray  # (S, num_agents)
    next_obs: np.ndarray  # (S, num_agents, obs_dim)
    done: np.ndarray  # (S,)


class BufferNotReady(RuntimeError):
    """Sampling was requested before enough transitions were stored."""


class ReplayBuffer:
    """Fixed-capacity FIFO ring sampled uniformly with replacement."""

    def __init__(self, capacity: int, num_agents: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.size = 0
        self.cursor = 0
        self._obs = np.zeros((capacity, num_agents, obs_dim))
        self._actions = np.zeros((capacity, num_agents, NUM_ACTIONS))
        self._rewards = np.zeros((capacity, num_agents))
        self._next_obs = np.zeros((capacity, num_agents, obs_dim))
        self._done = np.zeros(capacity)

    def push(self, transition: Transition) -> None:
        if transition.obs.shape != self._obs.shape[1:]:
            raise ValueError(
                f"transition obs shape {transition.obs.shape} does not match "
                f"buffer shape {self._obs.shape[1:]}"
            )
        i = self.cursor
        self._obs[i] = transition.obs
        self._actions[i] = transition.actions
        self._rewards[i] = transition.rewards
        self._next_obs[i] = transition.next_obs
        self._done[i] = float(transition.done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Minibatch:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.size < batch_size:
            raise BufferNotReady(
                f"buffer holds {self.size} transitions, need {batch_size}"
            )
        idx = rng.integers(0, self.size, size=batch_size)
        return Minibatch(
            obs=self._obs[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_obs=self._next_obs[idx],
            done=self._done[idx],
        )

    def __len__(self) -> int:
        return self.size


@dataclass
class AgentLearner:
    """One agent's networks: online and target actor/critic plus optimizers."""

    actor: Mlp
    critic: Mlp
    target_actor: Mlp
    target_critic: Mlp
    actor_opt: AdamState
    critic_opt: AdamState
    team: str  # "red" | "green"


class MaddpgTrainer:
    """Runs the episode loop: explore, store, and periodically update every
    agent from its own uniformly sampled minibatch, then soft-update all
    target networks.  Fully deterministic given the config seed."""

    def __init__(
        self,
        world_config: WorldConfig | None = None,
        train_config: TrainConfig | None = None,
    ):
        self.world_config = world_config if world_config is not None else WorldConfig()
        self.train_config = train_config if train_config is not None else TrainConfig()
        self.world_config.validate()
        self.train_config.validate()
        self.env = PredatorPreyWorld(self.world_config)

        n = self.world_config.num_agents
        num_red = self.world_config.num_red
        obs_dim = self.world_config.obs_dim
        self.num_agents = n
        self.obs_dim = obs_dim
        self._obs_flat_dim = n * obs_dim
        self.teams = ["red"] * num_red + ["green"] * (n - num_red)
        self.team_indices = {
            "red": np.arange(num_red),
            "green": np.arange(num_red, n),
        }

        root = np.random.SeedSequence(self.train_config.seed)
        net_ss, reset_ss, explore_ss, sample_ss = root.spawn(4)
        self._reset_rng = np.random.default_rng(reset_ss)
        self._explore_rng = np.random.default_rng(explore_ss)
        self._sample_rng = np.random.default_rng(sample_ss)

        hidden = self.train_config.hidden_sizes
        critic_in = self._obs_flat_dim + n * NUM_ACTIONS
        self.learners: list[AgentLearner] = []
        for i, agent_ss in enumerate(net_ss.spawn(n)):
            actor_ss, critic_ss = agent_ss.spawn(2)
            actor = mlp_init((obs_dim, *hidden, NUM_ACTIONS), np.random.default_rng(actor_ss))
            critic = mlp_init((critic_in, *hidden, 1), np.random.default_rng(critic_ss))
            self.learners.append(
                AgentLearner(
                    actor=actor,
                    critic=critic,
                    target_actor=actor.copy(),
                    target_critic=critic.copy(),
                    actor_opt=AdamState.zeros_like(actor),
                    critic_opt=AdamState.zeros_like(critic),
                    team=self.teams[i],
                )
            )

        self.buffer = ReplayBuffer(self.train_config.buffer_capacity, n, obs_dim)
        self.episode = 0
        self.total_steps = 0

    # ------------------------------------------------------------------
    # acting

    def select_actions(self, observations, explore: bool) -> tuple[np.ndarray, np.ndarray]:
        """Per-agent action ids and one-hot vectors.

        explore=True draws one categorical sample per agent via the gumbel
        relaxation; explore=False is the greedy argmax and consumes no
        randomness.
        """
        ids = np.zeros(self.num_agents, dtype=int)
        onehots = np.zeros((self.num_agents, NUM_ACTIONS))
        for k, learner in enumerate(self.learners):
            logits, _ = mlp_forward(learner.actor, observations[k])
            if explore:
                hard, _ = gumbel_softmax_sample(
                    logits, self.train_config.temperature, self._explore_rng
                )
            else:
                hard, _ = gumbel_softmax_sample(
                    logits, self.train_config.temperature, noise=False
                )
            ids[k] = int(np.argmax(hard))
            onehots[k] = hard
        return ids, onehots

    # ------------------------------------------------------------------
    # learning

    def _bonus_factors(self, rewards: np.ndarray, agent_index: int) -> np.ndarray:
        """Per-sample reward multipliers from the stored team rewards."""
        cfg = self.train_config
        team = self.teams[agent_index]
        enabled = cfg.bonus_enabled and (
            cfg.bonus_red_team if team == "red" else cfg.bonus_green_team
        )
        if not enabled:
            return np.ones(rewards.shape[0])
        members = self.team_indices[team]
        positives = np.count_nonzero(rewards[:, members] > 0.0, axis=1)
        return np.where(positives > cfg.bonus_threshold, cfg.bonus_scale, 1.0)

    def compute_targets(self, batch: Minibatch, agent_index: int) -> np.ndarray:
        """Detached per-sample critic targets.

        Every agent's next action is the greedy indicator of its target
        actor; the bootstrap value comes from the target critic.  The
        sampled reward is scaled by the cooperation bonus when enabled.
        """
        cfg = self.train_config
        s = batch.obs.shape[0]
        next_actions = np.zeros((s, self.num_agents, NUM_ACTIONS))
        rows = np.arange(s)
        for k, learner in enumerate(self.learners):
            logits, _ = mlp_forward(learner.target_actor, batch.next_obs[:, k, :])
            next_actions[rows, k, np.argmax(logits, axis=1)] = 1.0
        critic_in = np.concatenate(
            [batch.next_obs.reshape(s, -1), next_actions.reshape(s, -1)], axis=1
        )
        q_next, _ = mlp_forward(self.learners[agent_index].target_critic, critic_in)
        factors = self._bonus_factors(batch.rewards, agent_index)
        if cfg.bootstrap_on_timeout:
            carry = np.ones(s)
        else:
            carry = 1.0 - batch.done
        return factors * batch.rewards[:, agent_index] + cfg.gamma * carry * q_next[:, 0]

    def critic_update(self, agent_index: int, batch: Minibatch, targets: np.ndarray) -> float:
        """One Adam step on the mean-squared critic loss; returns the
        pre-update loss.  Targets are constants: no gradient flows into them."""
        learner = self.learners[agent_index]
        s = batch.obs.shape[0]
        critic_in = np.concatenate(
            [batch.obs.reshape(s, -1), batch.actions.reshape(s, -1)], axis=1
        )
        q, cache = mlp_forward(learner.critic, critic_in)
        residual = q[:, 0] - targets
        loss = float(np.mean(residual**2))
        grads = mlp_backward(learner.critic, cache, (2.0 / s) * residual[:, None])
        learner.critic, learner.critic_opt = adam_step(
            learner.critic, grads, learner.critic_opt, self.train_config.critic_lr
        )
        return loss

    def actor_update(self, agent_index: int, batch: Minibatch) -> float:
        """Ascend the critic value with the agent's own action replaced by
        its differentiable (tempered softmax) policy output; other agents'
        stored actions stay fixed.  Returns the actor gradient norm."""
        cfg = self.train_config
        learner = self.learners[agent_index]
        s = batch.obs.shape[0]
        logits, actor_cache = mlp_forward(learner.actor, batch.obs[:, agent_index, :])
        relaxed = softmax(logits / cfg.temperature, axis=1)
        actions = batch.actions.copy()
        actions[:, agent_index, :] = relaxed
        critic_in = np.concatenate(
            [batch.obs.reshape(s, -1), actions.reshape(s, -1)], axis=1
        )
        q, critic_cache = mlp_forward(learner.critic, critic_in)
        del q  # only the gradient of its mean is needed
        critic_grads = mlp_backward(
            learner.critic, critic_cache, np.full((s, 1), -1.0 / s)
        )
        offset = self._obs_flat_dim + agent_index * NUM_ACTIONS
        g_relaxed = critic_grads.inputs[:, offset : offset + NUM_ACTIONS]
        inner = np.sum(g_relaxed * relaxed, axis=1, keepdims=True)
        g_logits = relaxed * (g_relaxed - inner) / cfg.temperature
        actor_grads = mlp_backward(learner.actor, actor_cache, g_logits)
        norm = float(
            np.sqrt(
                sum(float((g**2).sum()) for g in actor_grads.weights)
                + sum(float((g**2).sum()) for g in actor_grads.biases)
            )
        )
        learner.actor, learner.actor_opt = adam_step(
            learner.actor, actor_grads, learner.actor_opt, cfg.actor_lr
        )
        return norm

    def _learning_round(self) -> None:
        cfg = self.train_config
        for i in range(self.num_agents):
            batch = self.buffer.sample(cfg.batch_size, self._sample_rng)
            targets = self.compute_targets(batch, i)
            self.critic_update(i, batch, targets)
            self.actor_update(i, batch)
        for learner in self.learners:
            learner.target_actor = soft_update(learner.target_actor, learner.actor, cfg.tau)
            learner.target_critic = soft_update(
                learner.target_critic, learner.critic, cfg.tau
            )

    # ------------------------------------------------------------------
    # episode loop

    def run_episodes(self, count: int) -> list[MetricsRow]:
        """Advance training by `count` episodes, one metrics row each."""
        cfg = self.train_config
        num_red = self.world_config.num_red
        rows = []
        for _ in range(count):
            start = time.perf_counter()
            state, obs = self.env.reset(int(self._reset_rng.integers(0, 2**63)))
            episode_rewards = np.zeros(self.num_agents)
            done = False
            steps = 0
            while not done and steps < cfg.max_episode_length:
                ids, onehots = self.select_actions(obs, explore=True)
                state, rewards, next_obs, done = self.env.step(state, ids)
                self.buffer.push(Transition(obs, onehots, rewards, next_obs, done))
                episode_rewards += rewards
                obs = next_obs
                steps += 1
                self.total_steps += 1
                if self.total_steps % cfg.update_every == 0 and len(self.buffer) >= max(
                    cfg.warmup, cfg.batch_size
                ):
                    self._learning_round()
            wall_ms = (time.perf_counter() - start) * 1000.0
            rows.append(make_row(self.episode, episode_rewards, num_red, wall_ms))
            self.episode += 1
        return rows

    # ------------------------------------------------------------------
    # checkpointing

    def snapshot(self, experiment: dict | None = None) -> dict:
        """Everything needed to resume bit-exactly: configs, networks,
        optimizer states, RNG states, counters, and the filled part of the
        replay buffer."""
        buf = self.buffer
        snap = {
            "config": {
                "world": asdict(self.world_config),
                "train": asdict(self.train_config),
            },
            "episode": self.episode,
            "total_steps": self.total_steps,
            "rng": {
                "reset": self._reset_rng.bit_generator.state,
                "explore": self._explore_rng.bit_generator.state,
                "sample": self._sample_rng.bit_generator.state,
            },
            "learners": [
                {
                    "team": l.team,
                    "actor": _mlp_state(l.actor),
                    "critic": _mlp_state(l.critic),
                    "target_actor": _mlp_state(l.target_actor),
                    "target_critic": _mlp_state(l.target_critic),
                    "actor_opt": _adam_state(l.actor_opt),
                    "critic_opt": _adam_state(l.critic_opt),
                }
                for l in self.learners
            ],
            "buffer": {
                "capacity": buf.capacity,
                "size": buf.size,
                "cursor": buf.cursor,
                "obs": buf._obs[: buf.size].copy(),
                "actions": buf._actions[: buf.size].copy(),
                "rewards": buf._rewards[: buf.size].copy(),
                "next_obs": buf._next_obs[: buf.size].copy(),
                "done": buf._done[: buf.size].copy(),
            },
        }
        if experiment is not None:
            snap["config"]["experiment"] = experiment
        return snap

    @classmethod
    def from_snapshot(cls, snap: dict) -> "MaddpgTrainer":
        world = WorldConfig(**snap["config"]["world"])
        train_fields = dict(snap["config"]["train"])
        train_fields["hidden_sizes"] = tuple(train_fields["hidden_sizes"])
        train = TrainConfig(**train_fields)
        trainer = cls(world, train)
        trainer.episode = int(snap["episode"])
        trainer.total_steps = int(snap["total_steps"])
        trainer._reset_rng.bit_generator.state = snap["rng"]["reset"]
        trainer._explore_rng.bit_generator.state = snap["rng"]["explore"]
        trainer._sample_rng.bit_generator.state = snap["rng"]["sample"]
        for learner, rec in zip(trainer.learners, snap["learners"]):
            learner.team = rec["team"]
            learner.actor = _mlp_from_state(rec["actor"])
            learner.critic = _mlp_from_state(rec["critic"])
            learner.target_actor = _mlp_from_state(rec["target_actor"])
            learner.target_critic = _mlp_from_state(rec["target_critic"])
            learner.actor_opt = _adam_from_state(rec["actor_opt"])
            learner.critic_opt = _adam_from_state(rec["critic_opt"])
        buf_rec = snap["buffer"]
        buf = ReplayBuffer(int(buf_rec["capacity"]), trainer.num_agents, trainer.obs_dim)
        size = int(buf_rec["size"])
        buf._obs[:size] = buf_rec["obs"]
        buf._actions[:size] = buf_rec["actions"]
        buf._rewards[:size] = buf_rec["rewards"]
        buf._next_obs[:size] = buf_rec["next_obs"]
        buf._done[:size] = buf_rec["done"]
        buf.size = size
        buf.cursor = int(buf_rec["cursor"])
        trainer.buffer = buf
        return trainer


def _mlp_state(net: Mlp) -> dict:
    return {
        "weights": [w.copy() for w in net.weights],
        "biases": [b.copy() for b in net.biases],
    }


def _mlp_from_state(rec: dict) -> Mlp:
    return Mlp(
        [np.asarray(w, dtype=np.float64) for w in rec["weights"]],
        [np.asarray(b, dtype=np.float64) for b in rec["biases"]],
    )


def _adam_state(opt: AdamState) -> dict:
    return {
        "weight_m": [a.copy() for a in opt.weight_m],
        "weight_v": [a.copy() for a in opt.weight_v],
        "bias_m": [a.copy() for a in opt.bias_m],
        "bias_v": [a.copy() for a in opt.bias_v],
        "t": opt.t,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "eps": opt.eps,
    }


def _adam_from_state(rec: dict) -> AdamState:
    return AdamState(
        weight_m=[np.asarray(a, dtype=np.float64) for a in rec["weight_m"]],
        weight_v=[np.asarray(a, dtype=np.float64) for a in rec["weight_v"]],
        bias_m=[np.asarray(a, dtype=np.float64) for a in rec["bias_m"]],
        bias_v=[np.asarray(a, dtype=np.float64) for a in rec["bias_v"]],
        t=int(rec["t"]),
        beta1=float(rec["beta1"]),
        beta2=float(rec["beta2"]),
        eps=float(rec["eps"]),
    )


def train(
    world_config: WorldConfig | None = None,
    train_config: TrainConfig | None = None,
) -> tuple[list[AgentLearner], list[MetricsRow]]:
    """Train for the configured number of episodes from scratch."""
    trainer = MaddpgTrainer(world_config, train_config)
    rows = trainer.run_episodes(trainer.train_config.episodes)
    return trainer.learners, rows


@dataclass
class EvalResult:
    """Greedy-policy rollout statistics; rewards are raw, never bonus-scaled."""

    episode_rewards: np.ndarray  # (episodes, num_agents)
    num_red: int

    @property
    def mean_agent_rewards(self) -> np.ndarray:
        return self.episode_rewards.mean(axis=0)

    @property
    def red_team_mean(self) -> float:
        return float(self.episode_rewards[:, : self.num_red].sum(axis=1).mean())

    @property
    def green_team_mean(self) -> float:
        return float(self.episode_rewards[:, self.num_red :].sum(axis=1).mean())

    @property
    def total_mean(self) -> float:
        return float(self.episode_rewards.sum(axis=1).mean())


def evaluate(
    learners: list[AgentLearner],
    world_config: WorldConfig,
    episodes: int,
    seed: int,
) -> EvalResult:
    """Run greedy (argmax, noise-free) episodes and report raw rewards."""
    env = PredatorPreyWorld(world_config)
    reset_rng = np.random.default_rng(seed)
    n = world_config.num_agents
    rows = np.zeros((episodes, n))
    for ep in range(episodes):
        state, obs = env.reset(int(reset_rng.integers(0, 2**63)))
        done = False
        while not done:
            ids = np.zeros(n, dtype=int)
            for k, learner in enumerate(learners):
                logits, _ = mlp_forward(learner.actor, obs[k])
                ids[k] = int(np.argmax(logits))
            state, rewards, obs, done = env.step(state, ids)
            rows[ep] += rewards
    return EvalResult(episode_rewards=rows, num_red=world_config.num_red)
