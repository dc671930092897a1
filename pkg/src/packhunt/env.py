"""Deterministic 2-D predator-prey particle world.

Slower red pursuers chase faster green evaders among static circular
obstacles.  Green agents are additionally drawn toward a fixed water
landmark and pay a soft-wall cost for leaving the arena.  Every operation
is a pure function of its inputs: stepping never mutates the incoming
state, and resets are fully determined by the seed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

AGENT_MASS = 1.0
CONTACT_STIFFNESS = 100.0  # obstacle repulsion spring constant
MAX_SPAWN_ATTEMPTS = 10_000


class ConfigurationError(ValueError):
    """The world configuration cannot produce a valid spawn."""


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


# Unit force directions indexed by Action.
ACTION_DIRECTIONS = np.array(
    [[0.0, 1.0], [0.0, -1.0], [-1.0, 0.0], [1.0, 0.0]], dtype=np.float64
)
NUM_ACTIONS = len(Action)


@dataclass(frozen=True)
class WorldConfig:
    """Physical and reward parameters of the pursuit world."""

    num_red: int = 4
    num_green: int = 2
    num_obstacles: int = 3
    arena_half_width: float = 1.0
    dt: float = 0.1
    damping: float = 0.25
    red_max_speed: float = 1.0  # pursuers are slower than evaders
    green_max_speed: float = 1.3
    force_magnitude: float = 5.0
    red_radius: float = 0.075
    green_radius: float = 0.05
    obstacle_radius: float = 0.2
    episode_length: int = 25
    shared_catch_reward: bool = True
    catch_reward: float = 10.0
    caught_penalty: float = -10.0
    chase_shaping: float = 0.1
    water_shaping: float = 0.1
    boundary_weight: float = 1.0

    def validate(self) -> None:
        if self.num_red < 1:
            raise ValueError("num_red must be >= 1")
        if self.num_green < 1:
            raise ValueError("num_green must be >= 1")
        if self.num_obstacles < 0:
            raise ValueError("num_obstacles must be >= 0")
        if not self.arena_half_width > 0:
            raise ValueError("arena_half_width must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if not (self.red_max_speed > 0 and self.green_max_speed > 0):
            raise ValueError("max speeds must be positive")
        for name in ("red_radius", "green_radius", "obstacle_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")
        if not self.force_magnitude >= 0:
            raise ValueError("force_magnitude must be nonnegative")

    @property
    def num_agents(self) -> int:
        return self.num_red + self.num_green

    @property
    def obs_dim(self) -> int:
        # own velocity, own position, obstacle offsets, water offset,
        # other-agent offsets, all green velocities
        n = self.num_agents
        return 2 + 2 + 2 * self.num_obstacles + 2 + 2 * (n - 1) + 2 * self.num_green

    def agent_radii(self) -> np.ndarray:
        return np.array(
            [self.red_radius] * self.num_red + [self.green_radius] * self.num_green
        )

    def agent_max_speeds(self) -> np.ndarray:
        return np.array(
            [self.red_max_speed] * self.num_red
            + [self.green_max_speed] * self.num_green
        )


@dataclass
class WorldState:
    """Complete simulation state; agent arrays ordered red first, then green."""

    agent_pos: np.ndarray  # (num_agents, 2)
    agent_vel: np.ndarray  # (num_agents, 2)
    obstacle_pos: np.ndarray  # (num_obstacles, 2), never moves
    water: np.ndarray  # (2,) goal landmark for the green team
    step: int
    rng: np.random.Generator


def boundary_penalty(position, half_width: float) -> float:
    """Soft-wall cost: zero inside 90% of the arena, ramping up hard outside.

    Summed per coordinate; monotone nondecreasing in each |coordinate|.
    """
    total = 0.0
    for coord in np.asarray(position, dtype=np.float64):
        x = abs(coord)
        if x < 0.9 * half_width:
            continue
        if x <= half_width:
            total += (x - 0.9 * half_width) * 10.0
        else:
            total += min(math.exp(2.0 * (x - half_width)), 10.0) + 1.0
    return total


def _clamp_speed(vel: np.ndarray, max_speed: np.ndarray) -> np.ndarray:
    """Rescale rows of vel until every row norm is <= max_speed exactly.

    A single rescale can leave the recomputed norm an ulp above the limit;
    iterate until the bound holds under the same norm used by the check.
    """
    vel = vel.copy()
    for _ in range(8):
        speed = np.linalg.norm(vel, axis=1)
        over = speed > max_speed
        if not np.any(over):
            break
        vel[over] *= (max_speed[over] / speed[over])[:, None]
    return vel


class PredatorPreyWorld:
    """Pursuit world with MPE-style semi-implicit Euler physics."""

    def __init__(self, config: WorldConfig | None = None):
        self.config = config if config is not None else WorldConfig()
        self.config.validate()
        self._radii = self.config.agent_radii()
        self._max_speed = self.config.agent_max_speeds()

    def reset(self, seed: int) -> tuple[WorldState, np.ndarray]:
        """Spawn all entities without overlap; velocities zero; step 0.

        Placement order is agents, then obstacles, then the water point.
        Each entity is rejection-sampled uniformly over the arena against
        everything already placed.
        """
        cfg = self.config
        rng = np.random.default_rng(seed)
        h = cfg.arena_half_width
        radii = np.concatenate(
            [self._radii, np.full(cfg.num_obstacles, cfg.obstacle_radius), [0.0]]
        )
        placed = np.empty((len(radii), 2))
        for i, radius in enumerate(radii):
            for _ in range(MAX_SPAWN_ATTEMPTS):
                candidate = rng.uniform(-h, h, size=2)
                if i == 0:
                    placed[0] = candidate
                    break
                dist = np.linalg.norm(placed[:i] - candidate, axis=1)
                if np.all(dist >= radii[:i] + radius):
                    placed[i] = candidate
                    break
            else:
                raise ConfigurationError(
                    f"could not place entity {i} without overlap after "
                    f"{MAX_SPAWN_ATTEMPTS} attempts; arena too crowded"
                )
        n = cfg.num_agents
        state = WorldState(
            agent_pos=placed[:n].copy(),
            agent_vel=np.zeros((n, 2)),
            obstacle_pos=placed[n : n + cfg.num_obstacles].copy(),
            water=placed[-1].copy(),
            step=0,
            rng=rng,
        )
        return state, self.observe_all(state)

    def step(
        self, state: WorldState, actions
    ) -> tuple[WorldState, np.ndarray, np.ndarray, bool]:
        """Advance one tick; rewards are computed on the post-step state."""
        cfg = self.config
        acts = np.asarray(actions)
        if acts.shape != (cfg.num_agents,):
            raise ValueError(
                f"expected {cfg.num_agents} actions, got shape {acts.shape}"
            )
        acts = acts.astype(int)
        if np.any((acts < 0) | (acts >= NUM_ACTIONS)):
            raise ValueError("action ids must lie in 0..3")
        if state.step >= cfg.episode_length:
            raise ValueError("episode already finished; reset the world")
        forces = ACTION_DIRECTIONS[acts] * cfg.force_magnitude
        new = self.apply_physics(state, forces)
        new.step = state.step + 1
        rewards = self.compute_rewards(new)
        done = new.step >= cfg.episode_length
        return new, rewards, self.observe_all(new), done

    def apply_physics(self, state: WorldState, forces) -> WorldState:
        """v <- v*(1-damping) + f*dt/m, hard speed clamp, p <- p + v*dt.

        Obstacle contact adds a repulsive spring force before integration;
        obstacles themselves never move.
        """
        cfg = self.config
        forces = np.asarray(forces, dtype=np.float64)
        if forces.shape != state.agent_pos.shape:
            raise ValueError(f"forces must have shape {state.agent_pos.shape}")
        if not np.all(np.isfinite(forces)):
            raise ValueError("forces must be finite")
        f = forces.copy()
        if cfg.num_obstacles:
            delta = state.agent_pos[:, None, :] - state.obstacle_pos[None, :, :]
            dist = np.linalg.norm(delta, axis=2)
            overlap = np.maximum(
                0.0, (self._radii[:, None] + cfg.obstacle_radius) - dist
            )
            # coincident centers give no push direction; leave those at zero
            safe = np.where(dist > 0.0, dist, 1.0)
            f += CONTACT_STIFFNESS * np.sum(
                (overlap / safe)[:, :, None] * delta, axis=1
            )
        vel = state.agent_vel * (1.0 - cfg.damping) + f * (cfg.dt / AGENT_MASS)
        vel = _clamp_speed(vel, self._max_speed)
        pos = state.agent_pos + vel * cfg.dt
        return WorldState(
            agent_pos=pos,
            agent_vel=vel,
            obstacle_pos=state.obstacle_pos,
            water=state.water,
            step=state.step,
            rng=state.rng,
        )

    def compute_rewards(self, state: WorldState) -> np.ndarray:
        """Per-agent rewards, red agents first.

        Red: catch reward per green in contact (team-shared when configured)
        minus a shaped distance to the nearest green.  Green: penalty per red
        in contact, minus shaped distance to water, minus the soft-wall cost.
        """
        cfg = self.config
        num_red = cfg.num_red
        red_pos = state.agent_pos[:num_red]
        green_pos = state.agent_pos[num_red:]
        rewards = np.empty(cfg.num_agents)

        dist = np.linalg.norm(red_pos[:, None, :] - green_pos[None, :, :], axis=2)
        colliding = dist < (cfg.red_radius + cfg.green_radius)
        if cfg.shared_catch_reward:
            caught = float(np.count_nonzero(colliding.any(axis=0)))
            catch_counts = np.full(num_red, caught)
        else:
            catch_counts = colliding.sum(axis=1).astype(float)
        rewards[:num_red] = (
            cfg.catch_reward * catch_counts - cfg.chase_shaping * dist.min(axis=1)
        )

        touches = colliding.sum(axis=0).astype(float)
        water_dist = np.linalg.norm(green_pos - state.water, axis=1)
        walls = np.array(
            [boundary_penalty(p, cfg.arena_half_width) for p in green_pos]
        )
        rewards[num_red:] = (
            cfg.caught_penalty * touches
            - cfg.water_shaping * water_dist
            - cfg.boundary_weight * walls
        )
        return rewards

    def observe(self, state: WorldState, agent_index: int) -> np.ndarray:
        """Local observation: [own vel, own pos, obstacle offsets, water
        offset, other-agent offsets, all green velocities]."""
        cfg = self.config
        n = cfg.num_agents
        if not 0 <= agent_index < n:
            raise IndexError(f"agent_index {agent_index} out of range 0..{n - 1}")
        pos = state.agent_pos[agent_index]
        others = np.delete(state.agent_pos, agent_index, axis=0)
        parts = [
            state.agent_vel[agent_index],
            pos,
            (state.obstacle_pos - pos).ravel(),
            state.water - pos,
            (others - pos).ravel(),
            state.agent_vel[cfg.num_red :].ravel(),
        ]
        return np.concatenate(parts)

    def observe_all(self, state: WorldState) -> np.ndarray:
        return np.stack(
            [self.observe(state, i) for i in range(self.config.num_agents)]
        )
