"""Cryptojacking cluster-defense POMDP.

Each node carries ``(p, c, av, op, timer)``: attack progress along the kill
chain, compromised flag, availability, defender-observed progress and the
steps left in the current offline phase.  A cluster state is a tuple of node
tuples; an observation is a tuple of per-node ``(av, op)`` pairs.

Actions are integers: ``0`` is NoOp and ``i + 1`` reimages node ``i``.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np

from .core import ExplicitModel

UP, SHUTDOWN, BOOTUP = 0, 1, 2
NONE, TARGET_SCAN, LAUNCHED = 0, 1, 2
NOOP = 0

NodeState = Tuple[int, int, int, int, int]
ClusterState = Tuple[NodeState, ...]
ClusterObservation = Tuple[Tuple[int, int], ...]

PRISTINE: NodeState = (NONE, 0, UP, NONE, 0)


def reimage(i: int) -> int:
    return i + 1


def describe_action(a: int) -> str:
    return "NoOp" if a == NOOP else f"Reimage({a - 1})"


@dataclass
class DomainConfig:
    n_nodes: int = 3
    attack_rate: float = 0.1
    observation_rate: float = 0.5
    shutdown_duration: int = 2
    bootup_duration: int = 1
    w_comp: float = 10.0
    w_off: float = 2.0
    w_up: float = 1.0
    discount: float = 0.95
    chain_length: int = 3

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError(f"n_nodes must be >= 1, got {self.n_nodes}")
        for name in ("attack_rate", "observation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("shutdown_duration", "bootup_duration"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("w_comp", "w_off", "w_up"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        if self.chain_length < 2:
            raise ValueError("chain_length must be >= 2")

    @property
    def launched(self) -> int:
        return self.chain_length - 1

    def to_dict(self) -> dict:
        return asdict(self)


def initial_state(cfg: DomainConfig) -> ClusterState:
    return (PRISTINE,) * cfg.n_nodes


def observe(s: ClusterState) -> ClusterObservation:
    return tuple((n[2], n[3]) for n in s)


def node_valid(node: NodeState, cfg: DomainConfig) -> bool:
    p, c, av, op, timer = node
    if not (0 <= p <= cfg.launched and 0 <= op <= p and c in (0, 1)):
        return False
    if c and p != cfg.launched:
        return False
    if av == UP:
        return timer == 0
    if av == SHUTDOWN:
        return 1 <= timer <= cfg.shutdown_duration
    if av == BOOTUP:
        return 1 <= timer <= cfg.bootup_duration
    return False


def reward(s_before, a, s_after: ClusterState, cfg: DomainConfig) -> float:
    total = 0.0
    for _, c, av, _, _ in s_after:
        if c:
            total -= cfg.w_comp
        if av != UP:
            total -= cfg.w_off
        elif not c:
            total += cfg.w_up
    return total


def step(s: ClusterState, a: int, cfg: DomainConfig, rng: random.Random):
    """One timestep: defense, attack, observation, reward (in that order)."""
    attack_rate = cfg.attack_rate
    obs_rate = cfg.observation_rate
    launched = cfg.launched
    w_comp, w_off, w_up = cfg.w_comp, cfg.w_off, cfg.w_up
    rand = rng.random
    target = a - 1
    nodes = []
    obs = []
    r = 0.0
    i = 0
    for p, c, av, op, timer in s:
        if av == UP:
            if i == target:
                av, timer, op = SHUTDOWN, cfg.shutdown_duration, NONE
        else:
            timer -= 1
            if timer == 0:
                if av == SHUTDOWN:
                    av, timer = BOOTUP, cfg.bootup_duration
                else:
                    av, p, c, op = UP, NONE, 0, NONE
        if av == UP:
            if p < launched and rand() < attack_rate:
                p += 1
                if p == launched:
                    c = 1
                if rand() < obs_rate:
                    op = p
            r += -w_comp if c else w_up
        else:
            r -= w_comp + w_off if c else w_off
        nodes.append((p, c, av, op, timer))
        obs.append((av, op))
        i += 1
    return tuple(nodes), tuple(obs), r


def perturb_for_observation(particle: ClusterState, o: ClusterObservation, cfg: DomainConfig,
                            rng: random.Random = None) -> ClusterState:
    """Smallest edit of ``particle`` that makes it emit ``o``."""
    out = []
    for (p, c, av, op, timer), (av_o, op_o) in zip(particle, o):
        if av != av_o:
            timer = 0 if av_o == UP else (cfg.shutdown_duration if av_o == SHUTDOWN else cfg.bootup_duration)
            av = av_o
        op = op_o
        p = max(p, op)
        c = 1 if p == cfg.launched else 0
        out.append((p, c, av, op, timer))
    return tuple(out)


class MTDModel:
    """Generative-model view of the cluster domain for planners and episodes."""

    def __init__(self, cfg: DomainConfig):
        self.cfg = cfg
        self.discount = cfg.discount
        self.actions = list(range(cfg.n_nodes + 1))
        self._initial = initial_state(cfg)

    def step(self, state, action, rng):
        return step(state, action, self.cfg, rng)

    def __getstate__(self):
        return {"cfg": self.cfg}

    def __setstate__(self, d):
        self.__init__(d["cfg"])

    def sample_initial_state(self, rng):
        return self._initial

    def legal_actions(self, state):
        return self.actions

    def preferred_actions(self, state):
        """NoOp plus reimaging any online node with observed attack progress."""
        pref = [NOOP]
        i = 1
        for n in state:
            if n[2] == UP and n[3] >= TARGET_SCAN:
                pref.append(i)
            i += 1
        return pref

    def is_terminal(self, state):
        return False

    def observe(self, state) -> ClusterObservation:
        return observe(state)

    def perturb_for_observation(self, particle, o, rng=None):
        return perturb_for_observation(particle, o, self.cfg, rng)

    @property
    def reward_span(self) -> float:
        c = self.cfg
        return c.n_nodes * (c.w_up + max(c.w_comp + c.w_off, 0.0))


def node_states(cfg: DomainConfig) -> List[NodeState]:
    """Every node tuple satisfying the node invariants, in a fixed order."""
    out = []
    for p, c, op in itertools.product(range(cfg.chain_length), (0, 1), range(cfg.chain_length)):
        for av, timer in [(UP, 0)] + [(SHUTDOWN, t) for t in range(1, cfg.shutdown_duration + 1)] \
                + [(BOOTUP, t) for t in range(1, cfg.bootup_duration + 1)]:
            node = (p, c, av, op, timer)
            if node_valid(node, cfg):
                out.append(node)
    return out


def _node_outcomes(node: NodeState, reimaged: bool, cfg: DomainConfig):
    """Exact (probability, successor) list for a single node."""
    p, c, av, op, timer = node
    if av == UP and reimaged:
        return [(1.0, (p, c, SHUTDOWN, NONE, cfg.shutdown_duration))]
    if av == SHUTDOWN:
        nxt = (p, c, BOOTUP, op, cfg.bootup_duration) if timer == 1 else (p, c, SHUTDOWN, op, timer - 1)
        return [(1.0, nxt)]
    if av == BOOTUP and timer > 1:
        return [(1.0, (p, c, BOOTUP, op, timer - 1))]
    if av == BOOTUP:
        p, c, op = NONE, 0, NONE
    if p >= cfg.launched:
        return [(1.0, (p, c, UP, op, 0))]
    ar, r = cfg.attack_rate, cfg.observation_rate
    q = p + 1
    cq = 1 if q == cfg.launched else c
    outcomes = [(1.0 - ar, (p, c, UP, op, 0)), (ar * r, (q, cq, UP, q, 0)), (ar * (1.0 - r), (q, cq, UP, op, 0))]
    return [(w, n) for w, n in outcomes if w > 0.0]


def build_explicit_model(cfg: DomainConfig) -> ExplicitModel:
    """Enumerated single-node model; observations are deterministic in the successor."""
    if cfg.n_nodes != 1:
        raise ValueError(f"enumeration too large: explicit model requires n_nodes == 1, got {cfg.n_nodes}")
    nodes = node_states(cfg)
    states = [(n,) for n in nodes]
    index = {s: i for i, s in enumerate(states)}
    observations = sorted({observe(s) for s in states})
    obs_index = {o: i for i, o in enumerate(observations)}
    actions = [NOOP, reimage(0)]
    nS, nA = len(states), len(actions)
    T = np.zeros((nA, nS, nS))
    O = np.zeros((nA, nS, len(observations)))
    R = np.zeros((nS, nA))
    for a in actions:
        for i, s in enumerate(states):
            for w, n2 in _node_outcomes(s[0], a == reimage(0), cfg):
                j = index[(n2,)]
                T[a, i, j] += w
                R[i, a] += w * reward(s, a, (n2,), cfg)
            O[a, i, obs_index[observe(s)]] = 1.0
    b0 = np.zeros(nS)
    b0[index[initial_state(cfg)]] = 1.0
    return ExplicitModel(states=states, actions=actions, observations=observations,
                         T=T, O=O, R=R, b0=b0, discount=cfg.discount)
