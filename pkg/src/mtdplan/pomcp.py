"""Partially observable Monte-Carlo planning with an unweighted particle belief.

The search tree is keyed by history: observation nodes hold visit counts and
the states that reached them, action edges hold visit counts and the running
mean of sampled discounted returns.
"""
from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence

from .core import EpisodeFailure, GenerativeModel


@dataclass
class PlannerConfig:
    num_simulations: int = 1024
    c_uct: Optional[float] = None
    """Exploration constant; ``None`` means the model's reward span."""
    max_depth: int = 30
    K: int = 1200
    max_rejection_attempts: int = 120_000
    reinvigoration_fraction: float = 0.5
    use_preferred_actions: bool = False
    reuse_tree: bool = True

    def __post_init__(self):
        for name in ("num_simulations", "max_depth", "K", "max_rejection_attempts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.c_uct is not None and self.c_uct < 0:
            raise ValueError(f"c_uct must be >= 0, got {self.c_uct}")
        if not 0.0 <= self.reinvigoration_fraction <= 1.0:
            raise ValueError("reinvigoration_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


class ParticleDeprivation(Exception):
    """Rejection sampling ran out of attempts before refilling the belief.

    ``partial`` holds the accepted successors, ``donors`` a sample of rejected
    successors that reinvigoration may perturb into consistency.
    """

    def __init__(self, partial: List[Any], donors: List[Any], attempts: int):
        super().__init__(f"particle deprivation: {len(partial)} accepted after {attempts} attempts")
        self.partial = partial
        self.donors = donors
        self.attempts = attempts


class UnrecoverableDeprivation(EpisodeFailure):
    pass


class ParticleBelief:
    """K sampled states; duplicates carry weight by multiplicity."""

    def __init__(self, particles: Sequence[Any]):
        if not particles:
            raise ValueError("a particle belief needs at least one particle")
        self.particles = list(particles)

    @property
    def K(self) -> int:
        return len(self.particles)

    @classmethod
    def from_model(cls, model: GenerativeModel, K: int, rng: random.Random) -> ParticleBelief:
        return cls([model.sample_initial_state(rng) for _ in range(K)])

    def sample(self, rng: random.Random):
        return self.particles[int(rng.random() * len(self.particles))]

    def estimate(self, s) -> float:
        return sum(1 for p in self.particles if p == s) / len(self.particles)

    def distribution(self) -> Dict[Any, float]:
        k = len(self.particles)
        return {s: n / k for s, n in Counter(self.particles).items()}


class ActionEdge:
    __slots__ = ("n", "q", "children")

    def __init__(self):
        self.n = 0
        self.q = 0.0
        self.children: Dict[Any, ObservationNode] = {}


class ObservationNode:
    __slots__ = ("n", "edges", "preferred", "particles")

    def __init__(self):
        self.n = 0
        self.edges: Optional[Dict[Any, ActionEdge]] = None
        self.preferred: frozenset = frozenset()
        self.particles: List[Any] = []

    @property
    def expanded(self) -> bool:
        return self.edges is not None

    def expand(self, state, model: GenerativeModel, use_preferred: bool):
        self.edges = {a: ActionEdge() for a in model.legal_actions(state)}
        if use_preferred:
            self.preferred = frozenset(model.preferred_actions(state))


class SearchTree:
    def __init__(self, root: Optional[ObservationNode] = None):
        self.root = root if root is not None else ObservationNode()

    def __len__(self):
        count, stack = 0, [self.root]
        while stack:
            node = stack.pop()
            count += 1
            if node.edges:
                for edge in node.edges.values():
                    stack.extend(edge.children.values())
        return count

    def action_values(self) -> Dict[Any, float]:
        if not self.root.edges:
            return {}
        return {a: e.q for a, e in self.root.edges.items() if e.n > 0}


def resolve_c_uct(model: GenerativeModel, cfg: PlannerConfig) -> float:
    if cfg.c_uct is not None:
        return cfg.c_uct
    span = getattr(model, "reward_span", None)
    if span is None:
        raise ValueError("c_uct is unset and the model exposes no reward_span")
    return float(span)


def select_action(node: ObservationNode, c_uct: float):
    """UCB1 choice at an expanded node.

    Unvisited actions win outright, preferred ones first; remaining ties go to
    the earliest action.
    """
    first_unvisited = None
    for a, edge in node.edges.items():
        if edge.n == 0:
            if a in node.preferred:
                return a
            if first_unvisited is None:
                first_unvisited = a
    if first_unvisited is not None:
        return first_unvisited
    log_n = math.log(node.n) if node.n > 0 else 0.0
    best_a, best_v = None, -math.inf
    for a, edge in node.edges.items():
        v = edge.q + c_uct * math.sqrt(log_n / edge.n)
        if v > best_v:
            best_a, best_v = a, v
    return best_a


def rollout(state, depth: int, model: GenerativeModel, cfg: PlannerConfig, rng: random.Random) -> float:
    total, disc = 0.0, 1.0
    gamma = model.discount
    while depth < cfg.max_depth and not model.is_terminal(state):
        actions = model.preferred_actions(state) if cfg.use_preferred_actions else model.legal_actions(state)
        state, _, r = model.step(state, actions[int(rng.random() * len(actions))], rng)
        total += disc * r
        disc *= gamma
        depth += 1
    return total


def simulate_tree(state, node: ObservationNode, depth: int, model: GenerativeModel, cfg: PlannerConfig,
                  rng: random.Random, c_uct: Optional[float] = None) -> float:
    if c_uct is None:
        c_uct = resolve_c_uct(model, cfg)
    if depth >= cfg.max_depth or model.is_terminal(state):
        return 0.0
    node.particles.append(state)
    if not node.expanded:
        node.expand(state, model, cfg.use_preferred_actions)
        return rollout(state, depth, model, cfg, rng)
    a = select_action(node, c_uct)
    next_state, obs, reward = model.step(state, a, rng)
    edge = node.edges[a]
    child = edge.children.get(obs)
    if child is None:
        child = edge.children[obs] = ObservationNode()
    ret = reward + model.discount * simulate_tree(next_state, child, depth + 1, model, cfg, rng, c_uct)
    node.n += 1
    edge.n += 1
    edge.q += (ret - edge.q) / edge.n
    return ret


def plan(belief: ParticleBelief, model: GenerativeModel, cfg: PlannerConfig, rng: random.Random,
         tree: Optional[SearchTree] = None):
    """Run ``cfg.num_simulations`` searches from belief samples; return the greedy root action."""
    if tree is None:
        tree = SearchTree()
    root = tree.root
    c_uct = resolve_c_uct(model, cfg)
    if not root.expanded:
        root.expand(belief.particles[0], model, cfg.use_preferred_actions)
    for _ in range(cfg.num_simulations):
        simulate_tree(belief.sample(rng), root, 0, model, cfg, rng, c_uct)
    best_a, best_q = None, -math.inf
    for a, edge in root.edges.items():
        if edge.n > 0 and edge.q > best_q:
            best_a, best_q = a, edge.q
    if best_a is None:
        best_a = next(iter(root.edges))
    return best_a


def update_belief(belief: ParticleBelief, a, o_real, model: GenerativeModel, cfg: PlannerConfig,
                  rng: random.Random, tree: Optional[SearchTree] = None) -> ParticleBelief:
    """Rejection-sampling filter step; raises :class:`ParticleDeprivation` on exhaustion."""
    particles = belief.particles
    n = len(particles)
    accepted: List[Any] = []
    donors: List[Any] = []
    attempts = 0
    step = model.step
    while len(accepted) < cfg.K:
        if attempts >= cfg.max_rejection_attempts:
            raise ParticleDeprivation(accepted, donors, attempts)
        s2, o, _ = step(particles[int(rng.random() * n)], a, rng)
        attempts += 1
        if o == o_real:
            accepted.append(s2)
        elif len(donors) < cfg.K:
            donors.append(s2)
    if tree is not None:
        tree.root.particles.extend(accepted)
    return ParticleBelief(accepted)


def reinvigorate(partial: Sequence[Any], o_real, model: GenerativeModel, cfg: PlannerConfig,
                 rng: random.Random, donors: Optional[Sequence[Any]] = None) -> ParticleBelief:
    """Refill a deprived particle set to ``cfg.K`` using the model's observation-forcing hook.

    A ``reinvigoration_fraction`` share of the missing slots (all of them when
    nothing was accepted) is filled with perturbed donors; the rest resample
    the accepted particles.
    """
    partial = list(partial)
    if len(partial) >= cfg.K:
        return ParticleBelief(partial)
    perturb = getattr(model, "perturb_for_observation", None)
    if perturb is None:
        raise UnrecoverableDeprivation("model provides no perturbation for reinvigoration")
    pool = list(donors) if donors else partial
    if not pool:
        raise UnrecoverableDeprivation("no donor particles left to reinvigorate from")
    missing = cfg.K - len(partial)
    n_perturbed = missing if not partial else int(round(cfg.reinvigoration_fraction * missing))
    out = partial[:]
    for _ in range(n_perturbed):
        out.append(perturb(pool[rng.randrange(len(pool))], o_real, rng))
    for _ in range(missing - n_perturbed):
        out.append(partial[rng.randrange(len(partial))])
    return ParticleBelief(out)


def advance_tree(tree: SearchTree, a, o) -> SearchTree:
    root = tree.root
    if root.edges is None or a not in root.edges:
        return SearchTree()
    child = root.edges[a].children.get(o)
    return SearchTree(child) if child is not None else SearchTree()


class POMCPPlanner:
    """Stateful online planner: belief tracking, tree reuse, deprivation recovery."""

    def __init__(self, model: GenerativeModel, cfg: Optional[PlannerConfig] = None):
        self.model = model
        self.cfg = cfg or PlannerConfig()
        self.belief: Optional[ParticleBelief] = None
        self.tree = SearchTree()

    def reset(self, rng: random.Random) -> None:
        self.belief = ParticleBelief.from_model(self.model, self.cfg.K, rng)
        self.tree = SearchTree()

    def act(self, rng: random.Random):
        if not self.cfg.reuse_tree:
            self.tree = SearchTree()
        return plan(self.belief, self.model, self.cfg, rng, self.tree)

    def observe(self, action, observation, rng: random.Random) -> dict:
        self.tree = advance_tree(self.tree, action, observation)
        diag = {"deprivation": False}
        try:
            self.belief = update_belief(self.belief, action, observation, self.model, self.cfg, rng, self.tree)
        except ParticleDeprivation as exc:
            diag["deprivation"] = True
            diag["accepted"] = len(exc.partial)
            self.belief = reinvigorate(exc.partial, observation, self.model, self.cfg, rng, exc.donors)
            self.tree.root.particles.extend(self.belief.particles)
        return diag
