"""POMDP model contracts, episode execution and exact small-domain oracles.

States, actions and observations are opaque hashable values.  All randomness
is drawn from a ``random.Random`` passed in by the caller.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Hashable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

State = Hashable
Action = Hashable
Observation = Hashable
History = Tuple[Tuple[Action, Observation], ...]
"""Append-only sequence of (action, observation) pairs."""


class ImpossibleObservation(ValueError):
    """Observation has zero likelihood under the current belief and action."""


class OracleTooLarge(RuntimeError):
    """Exact search would exceed its node budget."""


class GenerativeModel(Protocol):
    """Black-box simulator contract consumed by planners and the episode runner."""

    discount: float

    def step(self, state: State, action: Action, rng: random.Random) -> Tuple[State, Observation, float]:
        ...

    def sample_initial_state(self, rng: random.Random) -> State:
        ...

    def legal_actions(self, state: State) -> Sequence[Action]:
        ...

    def preferred_actions(self, state: State) -> Sequence[Action]:
        ...

    def is_terminal(self, state: State) -> bool:
        ...


class Planner(Protocol):
    """Online decision maker driven by :func:`simulate_episode`.

    ``observe`` returns a diagnostics dict; a truthy ``"deprivation"`` entry
    flags a recovered belief-update failure.
    """

    def reset(self, rng: random.Random) -> None:
        ...

    def act(self, rng: random.Random) -> Action:
        ...

    def observe(self, action: Action, observation: Observation, rng: random.Random) -> dict:
        ...


class EpisodeFailure(RuntimeError):
    """Raised by a planner when it cannot continue the episode."""


@dataclass
class ExplicitModel:
    """Enumerable POMDP with dense tables.

    ``T[a, s, s']``, ``O[a, s', o]`` and ``R[s, a]`` are indexed by position in
    ``states``, ``actions`` and ``observations``.
    """

    states: List[Any]
    actions: List[Any]
    observations: List[Any]
    T: np.ndarray
    O: np.ndarray
    R: np.ndarray
    b0: np.ndarray
    discount: float = 0.95

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.O = np.asarray(self.O, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.b0 = np.asarray(self.b0, dtype=float)
        nS, nA, nO = len(self.states), len(self.actions), len(self.observations)
        if self.T.shape != (nA, nS, nS):
            raise ValueError(f"T has shape {self.T.shape}, expected {(nA, nS, nS)}")
        if self.O.shape != (nA, nS, nO):
            raise ValueError(f"O has shape {self.O.shape}, expected {(nA, nS, nO)}")
        if self.R.shape != (nS, nA):
            raise ValueError(f"R has shape {self.R.shape}, expected {(nS, nA)}")
        if not np.allclose(self.T.sum(axis=2), 1.0, atol=1e-9, rtol=0):
            raise ValueError("transition rows must sum to 1")
        if not np.allclose(self.O.sum(axis=2), 1.0, atol=1e-9, rtol=0):
            raise ValueError("observation rows must sum to 1")
        self._state_index = {s: i for i, s in enumerate(self.states)}
        self._action_index = {a: i for i, a in enumerate(self.actions)}
        self._obs_index = {o: i for i, o in enumerate(self.observations)}

    def state_index(self, s) -> int:
        return self._state_index[s]

    def action_index(self, a) -> int:
        return self._action_index[a]

    def observation_index(self, o) -> int:
        return self._obs_index[o]

    def distribution(self, particles) -> np.ndarray:
        """Empirical distribution over ``states`` of a particle collection."""
        b = np.zeros(len(self.states))
        for s in particles:
            b[self._state_index[s]] += 1.0
        return b / b.sum()


class ExplicitSimulator:
    """Generative view of an :class:`ExplicitModel` (labels in, labels out)."""

    def __init__(self, model: ExplicitModel):
        self.model = model
        self.discount = model.discount
        m = model
        nS = len(m.states)
        self._cum_T = [[np.cumsum(m.T[a, s]).tolist() for s in range(nS)] for a in range(len(m.actions))]
        self._cum_O = [[np.cumsum(m.O[a, s]).tolist() for s in range(nS)] for a in range(len(m.actions))]
        self._cum_b0 = np.cumsum(m.b0).tolist()
        self._R = m.R.tolist()

    @staticmethod
    def _draw(cum, rng) -> int:
        u = rng.random() * cum[-1]
        for i, c in enumerate(cum):
            if u < c:
                return i
        return len(cum) - 1

    def step(self, state, action, rng):
        m = self.model
        s = m.state_index(state)
        a = m.action_index(action)
        s2 = self._draw(self._cum_T[a][s], rng)
        o = self._draw(self._cum_O[a][s2], rng)
        return m.states[s2], m.observations[o], self._R[s][a]

    def sample_initial_state(self, rng):
        return self.model.states[self._draw(self._cum_b0, rng)]

    def legal_actions(self, state):
        return self.model.actions

    def preferred_actions(self, state):
        return self.model.actions

    def is_terminal(self, state):
        return False

    @property
    def reward_span(self) -> float:
        return float(self.model.R.max() - self.model.R.min())


@dataclass
class StepRecord:
    t: int
    state: Any
    action: Any
    observation: Any
    reward: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class EpisodeTrace:
    seed: int
    config_id: str = ""
    initial_state: Any = None
    records: List[StepRecord] = field(default_factory=list)
    failed: bool = False
    failure: Optional[str] = None

    @property
    def rewards(self) -> List[float]:
        return [r.reward for r in self.records]

    def __len__(self):
        return len(self.records)


def episode_rngs(seed: int) -> Tuple[random.Random, random.Random]:
    """Independent (environment, planner) generators derived from one seed."""
    env_seed, planner_seed = np.random.SeedSequence(seed).generate_state(2)
    return random.Random(int(env_seed)), random.Random(int(planner_seed))


def simulate_episode(model: GenerativeModel, planner: Planner, horizon: int, seed: int,
                     config_id: str = "") -> EpisodeTrace:
    """Run one monitor-decide-act episode against ``model``.

    The environment and the planner draw from separate generators so that two
    planners given the same seed face the same environment randomness as long
    as they pick the same actions.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    env_rng, planner_rng = episode_rngs(seed)
    state = model.sample_initial_state(env_rng)
    trace = EpisodeTrace(seed=seed, config_id=config_id, initial_state=state)
    planner.reset(planner_rng)
    for t in range(1, horizon + 1):
        if model.is_terminal(state):
            break
        action = planner.act(planner_rng)
        state, obs, reward = model.step(state, action, env_rng)
        if not math.isfinite(reward):
            raise ValueError(f"non-finite reward {reward!r} at step {t}")
        record = StepRecord(t, state, action, obs, reward)
        trace.records.append(record)
        try:
            record.diagnostics = planner.observe(action, obs, planner_rng) or {}
        except EpisodeFailure as exc:
            record.diagnostics = {"failure": str(exc)}
            trace.failed = True
            trace.failure = str(exc)
            break
    return trace


def discounted_return(trace_or_rewards, gamma: float) -> float:
    """Sum of ``gamma**t * r_t`` over the trace, starting at t = 0."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    rewards = trace_or_rewards.rewards if isinstance(trace_or_rewards, EpisodeTrace) else trace_or_rewards
    total = 0.0
    disc = 1.0
    for r in rewards:
        total += disc * r
        disc *= gamma
    return total


def exact_belief_update(b, a: int, o: int, m: ExplicitModel) -> np.ndarray:
    """Bayes filter step over state indices for action index ``a`` and observation index ``o``."""
    b = np.asarray(b, dtype=float)
    if abs(b.sum() - 1.0) > 1e-9:
        raise ValueError("belief must sum to 1")
    unnorm = m.O[a, :, o] * (b @ m.T[a])
    z = unnorm.sum()
    if z <= 0.0:
        raise ImpossibleObservation(f"observation {m.observations[o]!r} impossible after action {m.actions[a]!r}")
    return unnorm / z


def expectimax_value(b, m: ExplicitModel, depth: int, node_budget: int = 1_000_000) -> Tuple[float, int]:
    """Exact finite-depth belief-tree value; returns (value, best action index).

    Ties go to the lowest action index.  Raises :class:`OracleTooLarge` once
    more than ``node_budget`` belief nodes have been expanded.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    b = np.asarray(b, dtype=float)
    visited = [0]

    def value(belief, d):
        if d == 0:
            return 0.0, 0
        visited[0] += 1
        if visited[0] > node_budget:
            raise OracleTooLarge(f"expectimax exceeded node budget of {node_budget}")
        best_v, best_a = -math.inf, 0
        for a in range(len(m.actions)):
            v = float(belief @ m.R[:, a])
            if d > 1:
                pred = belief @ m.T[a]
                joint = pred[:, None] * m.O[a]
                p_obs = joint.sum(axis=0)
                future = 0.0
                for o, po in enumerate(p_obs):
                    if po <= 0.0:
                        continue
                    future += po * value(joint[:, o] / po, d - 1)[0]
                v += m.discount * future
            if v > best_v:
                best_v, best_a = v, a
        return best_v, best_a

    return value(b, depth)
