"""Fast oracle and property checks runnable from the command line."""
from __future__ import annotations

import itertools
import random
from typing import Callable, List, Tuple

import numpy as np

from .bapomdp import DirichletCounts, expected_observation, expected_transition
from .baselines import RuleConfig, rule_based_decide
from .core import exact_belief_update, expectimax_value, simulate_episode
from .domain import (UP, DomainConfig, MTDModel, build_explicit_model, node_states, node_valid, reward, step)
from .pomcp import ParticleBelief, PlannerConfig, POMCPPlanner, update_belief
from .tiger import LISTEN, tiger_model, tiger_simulator

Check = Tuple[str, Callable[[], str]]


def _count_rows() -> str:
    rng = np.random.default_rng(0)
    for _ in range(1000):
        nS, nA, nO = rng.integers(1, 5, size=3)
        c = DirichletCounts.from_arrays(rng.integers(1, 20, size=(nS, nA, nS)), rng.integers(1, 20, size=(nS, nA, nO)))
        s, a = int(rng.integers(nS)), int(rng.integers(nA))
        row = [expected_transition(c, s, a, j) for j in range(nS)]
        orow = [expected_observation(c, s, a, o) for o in range(nO)]
        assert abs(sum(row) - 1.0) < 1e-12 and abs(sum(orow) - 1.0) < 1e-12
    return "1000 random tables normalized"


def _tiger_filter() -> str:
    m = tiger_model()
    sim = tiger_simulator()
    rng = random.Random(1)
    cfg = PlannerConfig(K=10_000, max_rejection_attempts=10**6)
    belief = ParticleBelief.from_model(sim, cfg.K, rng)
    exact = m.b0.copy()
    errors = []
    state = sim.sample_initial_state(rng)
    for _ in range(10):
        state, o, _ = sim.step(state, LISTEN, rng)
        exact = exact_belief_update(exact, LISTEN, o, m)
        belief = update_belief(belief, LISTEN, o, sim, cfg, rng)
        errors.append(np.abs(m.distribution(belief.particles) - exact).sum())
    mean = float(np.mean(errors))
    assert mean <= 0.05, f"mean L1 {mean:.4f}"
    return f"mean L1 {mean:.4f} over 10 listens"


def _tiger_expectimax() -> str:
    _, a = expectimax_value(np.array([0.5, 0.5]), tiger_model(), 3)
    assert a == LISTEN, f"best action {a}"
    return "depth-3 best action is listen"


def _explicit_domain() -> str:
    m = build_explicit_model(DomainConfig(n_nodes=1, attack_rate=0.3, observation_rate=0.6))
    assert np.allclose(m.T.sum(axis=2), 1.0, atol=1e-9) and np.allclose(m.O.sum(axis=2), 1.0, atol=1e-9)
    return f"{len(m.states)} single-node states, rows stochastic"


def _reward_recompute() -> str:
    cfg = DomainConfig()
    rng = random.Random(2)
    nodes = node_states(cfg)
    for _ in range(1000):
        s = tuple(rng.choice(nodes) for _ in range(cfg.n_nodes))
        expected = sum(-cfg.w_comp * n[1] - cfg.w_off * (n[2] != UP) + cfg.w_up * (n[2] == UP and not n[1]) for n in s)
        assert abs(reward(None, 0, s, cfg) - expected) < 1e-12
        s2, _, r = step(s, 0, cfg, rng)
        assert abs(r - reward(s, 0, s2, cfg)) < 1e-12
    return "1000 random states"


def _rule_exhaustive() -> str:
    for rb in (1, 2):
        for ops in itertools.product(range(3), repeat=3):
            o = tuple((UP, op) for op in ops)
            a = rule_based_decide(o, RuleConfig(rb))
            qualifying = [i for i, op in enumerate(ops) if op >= rb]
            if not qualifying:
                assert a == 0
            else:
                top = max(ops[i] for i in qualifying)
                assert a == 1 + min(i for i in qualifying if ops[i] == top)
    return "54 observation vectors"


def _domain_invariants() -> str:
    cfg = DomainConfig(attack_rate=0.3, observation_rate=0.4)
    rng = random.Random(3)
    s = MTDModel(cfg).sample_initial_state(rng)
    for _ in range(5000):
        s, o, _ = step(s, rng.randrange(cfg.n_nodes + 1), cfg, rng)
        assert all(node_valid(n, cfg) for n in s)
    return "5000 random steps keep node invariants"


def _determinism() -> str:
    cfg = DomainConfig(observation_rate=0.5)
    model = MTDModel(cfg)
    pcfg = PlannerConfig(num_simulations=32, K=100, max_depth=8, use_preferred_actions=True)
    a = simulate_episode(model, POMCPPlanner(model, pcfg), 15, 11)
    b = simulate_episode(model, POMCPPlanner(model, pcfg), 15, 11)
    assert [(r.state, r.action, r.reward) for r in a.records] == [(r.state, r.action, r.reward) for r in b.records]
    return "repeated episode identical"


CHECKS: List[Check] = [
    ("expected dynamics normalization", _count_rows),
    ("particle filter vs exact Bayes (Tiger)", _tiger_filter),
    ("expectimax Tiger", _tiger_expectimax),
    ("explicit single-node model", _explicit_domain),
    ("reward recomputation", _reward_recompute),
    ("rule-based decision table", _rule_exhaustive),
    ("domain invariants", _domain_invariants),
    ("episode determinism", _determinism),
]


def run_checks(checks=CHECKS) -> List[Tuple[str, bool, str]]:
    results = []
    for name, fn in checks:
        try:
            results.append((name, True, fn()))
        except AssertionError as exc:
            results.append((name, False, str(exc) or "assertion failed"))
    return results
