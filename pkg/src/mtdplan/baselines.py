"""Reference defenders that do not plan: threshold rule, never-act and uniform random."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .domain import NOOP, UP, ClusterObservation

TIE_BREAK_RULE = "largest observed progress, then lowest node index"


@dataclass(frozen=True)
class RuleConfig:
    rb: int = 1

    def __post_init__(self):
        if self.rb < 1:
            raise ValueError(f"rb must be a non-zero attack phase, got {self.rb}")


def rule_based_decide(o: ClusterObservation, cfg: RuleConfig) -> int:
    """Reimage the online node with the most observed progress, if it reaches ``rb``."""
    best, best_op = NOOP, -1
    for i, (av, op) in enumerate(o):
        if av == UP and op >= cfg.rb and op > best_op:
            best, best_op = i + 1, op
    return best


def noop_decide(o: Optional[ClusterObservation] = None) -> int:
    return NOOP


def random_decide(o, rng: random.Random, actions: Optional[Sequence[int]] = None) -> int:
    if actions is None:
        actions = range(len(o) + 1)
    actions = list(actions)
    return actions[rng.randrange(len(actions))]


class ObservationPlanner:
    """Adapts a memoryless decision rule to the planner protocol.

    Before the first observation arrives the rule sees ``initial_observation``.
    """

    def __init__(self, decide, initial_observation: ClusterObservation, name: str = ""):
        self.decide = decide
        self.initial_observation = initial_observation
        self.name = name
        self.last: ClusterObservation = initial_observation

    def reset(self, rng):
        self.last = self.initial_observation

    def act(self, rng):
        return self.decide(self.last, rng)

    def observe(self, action, observation, rng):
        self.last = observation
        return {}


def rule_planner(cfg: RuleConfig, initial_observation) -> ObservationPlanner:
    return ObservationPlanner(lambda o, rng: rule_based_decide(o, cfg), initial_observation, f"rule(rb={cfg.rb})")


def noop_planner(initial_observation) -> ObservationPlanner:
    return ObservationPlanner(lambda o, rng: noop_decide(o), initial_observation, "noop")


def random_planner(initial_observation) -> ObservationPlanner:
    return ObservationPlanner(random_decide, initial_observation, "random")
