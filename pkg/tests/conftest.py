import random

import numpy as np
import pytest

from mtdplan.core import ExplicitModel

ACCEPTANCE_RESULTS = []


def record_acceptance(number, passed, detail):
    ACCEPTANCE_RESULTS.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


class ConstantModel:
    """One state, one action, fixed reward, one observation."""

    discount = 0.5

    def __init__(self, reward=1.0, actions=(0,)):
        self.reward = reward
        self.actions = list(actions)

    def step(self, state, action, rng):
        return state, "o", self.reward

    def sample_initial_state(self, rng):
        return "s"

    def legal_actions(self, state):
        return self.actions

    def preferred_actions(self, state):
        return self.actions

    def is_terminal(self, state):
        return False

    @property
    def reward_span(self):
        return 1.0


class BanditModel:
    """Stateless arms: ``rewards[a]`` is paid deterministically for arm ``a``."""

    discount = 0.9

    def __init__(self, rewards):
        self.rewards = list(rewards)
        self.actions = list(range(len(rewards)))

    def step(self, state, action, rng):
        return state, 0, self.rewards[action]

    def sample_initial_state(self, rng):
        return 0

    def legal_actions(self, state):
        return self.actions

    def preferred_actions(self, state):
        return self.actions

    def is_terminal(self, state):
        return False

    @property
    def reward_span(self):
        return max(self.rewards) - min(self.rewards)


class ScriptedPlanner:
    def __init__(self, actions):
        self.actions = list(actions)
        self.t = 0

    def reset(self, rng):
        self.t = 0

    def act(self, rng):
        a = self.actions[self.t % len(self.actions)]
        self.t += 1
        return a

    def observe(self, action, observation, rng):
        return {}


def random_explicit_model(rng: np.random.Generator, n_states=3, n_actions=2, n_obs=2,
                          nonneg_rewards=False, discount=0.9) -> ExplicitModel:
    T = rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))
    O = rng.dirichlet(np.ones(n_obs), size=(n_actions, n_states))
    R = rng.uniform(0 if nonneg_rewards else -1, 1, size=(n_states, n_actions))
    b0 = rng.dirichlet(np.ones(n_states))
    return ExplicitModel(states=list(range(n_states)), actions=list(range(n_actions)),
                         observations=list(range(n_obs)), T=T, O=O, R=R, b0=b0, discount=discount)


@pytest.fixture
def rng():
    return random.Random(12345)
