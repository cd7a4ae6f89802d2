import math
import random
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from conftest import BanditModel, ConstantModel
from mtdplan.core import discounted_return, exact_belief_update, expectimax_value, simulate_episode
from mtdplan.domain import (UP, DomainConfig, MTDModel, build_explicit_model, node_states)
from mtdplan.pomcp import (ObservationNode, ParticleBelief, ParticleDeprivation, PlannerConfig, POMCPPlanner,
                           SearchTree, UnrecoverableDeprivation, advance_tree, plan, reinvigorate, rollout,
                           simulate_tree, update_belief)
from mtdplan.tiger import LISTEN, tiger_model, tiger_simulator


def test_estimate_sums_to_one_and_counts_multiplicity():
    belief = ParticleBelief(["a", "b", "a", "c", "a", "b", "a"])
    dist = belief.distribution()
    assert belief.estimate("a") == 4 / 7
    assert sum(Counter(belief.particles).values()) == belief.K
    assert math.fsum(dist.values()) == pytest.approx(1.0, abs=1e-15)
    assert belief.estimate("zzz") == 0.0


def test_empty_belief_rejected():
    with pytest.raises(ValueError):
        ParticleBelief([])


def test_planner_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(num_simulations=0)
    with pytest.raises(ValueError):
        PlannerConfig(c_uct=-1.0)
    with pytest.raises(ValueError):
        PlannerConfig(reinvigoration_fraction=1.5)


def test_single_action_single_simulation(rng):
    cfg = PlannerConfig(num_simulations=1, max_depth=3, K=1)
    assert plan(ParticleBelief(["s"]), ConstantModel(), cfg, rng) == 0


def test_tiger_plan_matches_expectimax(rng):
    m = tiger_model()
    _, best = expectimax_value(m.b0, m, 3)
    sim = tiger_simulator()
    cfg = PlannerConfig(num_simulations=4096, max_depth=3, K=1000)
    belief = ParticleBelief.from_model(sim, cfg.K, rng)
    assert plan(belief, sim, cfg, rng) == m.actions[best] == LISTEN


def test_rewarding_arm_chosen_almost_always():
    model = BanditModel([1.0, 0.0, 0.0])
    cfg = PlannerConfig(num_simulations=50, max_depth=3, K=1)
    picks = [plan(ParticleBelief([0]), model, cfg, random.Random(seed)) for seed in range(100)]
    assert picks.count(0) >= 99


def test_simulate_tree_at_max_depth_returns_zero(rng):
    cfg = PlannerConfig(max_depth=4)
    node = ObservationNode()
    assert simulate_tree("s", node, 4, ConstantModel(), cfg, rng) == 0.0
    assert not node.expanded


def test_zero_exploration_is_greedy_after_warm_start(rng):
    model = BanditModel([1.0, 0.0])
    cfg = PlannerConfig(num_simulations=40, max_depth=1, c_uct=0.0, K=1)
    tree = SearchTree()
    plan(ParticleBelief([0]), model, cfg, rng, tree)
    edges = tree.root.edges
    assert edges[1].n == 1
    assert edges[0].n == 39


class EchoModel:
    """Reward equals the state value; single action."""

    discount = 0.5

    def step(self, state, action, rng):
        return state, 0, float(state)

    def sample_initial_state(self, rng):
        return 0

    def legal_actions(self, state):
        return [0]

    def preferred_actions(self, state):
        return [0]

    def is_terminal(self, state):
        return False


def test_q_is_incremental_mean(rng):
    cfg = PlannerConfig(max_depth=1, c_uct=1.0)
    model = EchoModel()
    root = ObservationNode()
    root.expand(0, model, False)
    simulate_tree(2, root, 0, model, cfg, rng)
    simulate_tree(4, root, 0, model, cfg, rng)
    assert root.edges[0].q == 3.0
    assert root.edges[0].n == 2 == root.n


def _walk(node):
    yield node
    if node.edges:
        for edge in node.edges.values():
            for child in edge.children.values():
                yield from _walk(child)


def test_tree_visit_counts_and_value_bounds(rng):
    model = MTDModel(DomainConfig(observation_rate=0.5))
    cfg = PlannerConfig(num_simulations=300, max_depth=10, K=50, use_preferred_actions=True)
    tree = SearchTree()
    plan(ParticleBelief.from_model(model, cfg.K, rng), model, cfg, rng, tree)
    bound = model.reward_span / (1 - model.discount)
    for node in _walk(tree.root):
        if node.expanded and node.n:
            assert node.n == sum(e.n for e in node.edges.values())
            assert all(abs(e.q) <= bound for e in node.edges.values())


def test_preferred_actions_tried_first():
    class Preferring(BanditModel):
        def preferred_actions(self, state):
            return [2]

    model = Preferring([0.0, 0.0, 0.0])
    node = ObservationNode()
    node.expand(0, model, True)
    cfg = PlannerConfig(max_depth=2, c_uct=1.0, use_preferred_actions=True)
    simulate_tree(0, node, 0, model, cfg, random.Random(0))
    assert node.edges[2].n == 1 and node.edges[0].n == 0


def test_rollout_cutoff_and_geometric_sum(rng):
    model = ConstantModel(reward=1.0)
    cfg = PlannerConfig(max_depth=5)
    assert rollout("s", 5, model, cfg, rng) == 0.0
    assert rollout("s", 2, model, cfg, rng) == 1.75


class ChainModel:
    """Two states, one action; reward 1 in state 0, stays put with probability ``stay``."""

    discount = 0.9

    def __init__(self, stay=0.7):
        self.stay = stay

    def step(self, state, action, rng):
        nxt = state if rng.random() < self.stay else 1 - state
        return nxt, 0, 1.0 if state == 0 else 0.0

    def sample_initial_state(self, rng):
        return 0

    def legal_actions(self, state):
        return [0]

    def preferred_actions(self, state):
        return [0]

    def is_terminal(self, state):
        return False


def test_rollout_mean_matches_chain_expectation():
    model = ChainModel()
    cfg = PlannerConfig(max_depth=12)
    P = np.array([[0.7, 0.3], [0.3, 0.7]])
    r = np.array([1.0, 0.0])
    v = np.zeros(2)
    for _ in range(cfg.max_depth):
        v = r + model.discount * P @ v
    rng = random.Random(99)
    samples = np.array([rollout(0, 0, model, cfg, rng) for _ in range(10_000)])
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - v[0]) <= 3 * se


def test_update_belief_deterministic_model(rng):
    cfg = PlannerConfig(K=25)
    belief = update_belief(ParticleBelief(["s"] * 25), 0, "o", ConstantModel(), cfg, rng)
    assert belief.particles == ["s"] * 25


def test_update_belief_tracks_exact_posterior_on_tiger():
    m = tiger_model()
    sim = tiger_simulator()
    rng = random.Random(5)
    cfg = PlannerConfig(K=10_000, max_rejection_attempts=10**6)
    belief = ParticleBelief.from_model(sim, cfg.K, rng)
    exact = m.b0
    for o in (0, 0, 1, 0):
        exact = exact_belief_update(exact, LISTEN, o, m)
        belief = update_belief(belief, LISTEN, o, sim, cfg, rng)
        assert belief.K == cfg.K
        assert np.abs(m.distribution(belief.particles) - exact).sum() <= 0.05


def test_impossible_observation_deprives(rng):
    cfg = PlannerConfig(K=10, max_rejection_attempts=200)
    with pytest.raises(ParticleDeprivation) as info:
        update_belief(ParticleBelief(["s"]), 0, "never", ConstantModel(), cfg, rng)
    assert info.value.partial == [] and info.value.attempts == 200
    assert len(info.value.donors) == 10


def test_filter_error_shrinks_as_particles_grow():
    m = tiger_model()
    sim = tiger_simulator()
    obs = (0, 0, 1, 0, 0)
    exact = m.b0
    for o in obs:
        exact = exact_belief_update(exact, LISTEN, o, m)
    means = []
    for K in (100, 1000, 10_000):
        errs = []
        for rep in range(20):
            rng = random.Random(1000 * K + rep)
            cfg = PlannerConfig(K=K, max_rejection_attempts=10**7)
            belief = ParticleBelief.from_model(sim, K, rng)
            for o in obs:
                belief = update_belief(belief, LISTEN, o, sim, cfg, rng)
            errs.append(np.abs(m.distribution(belief.particles) - exact).sum())
        means.append(np.mean(errs))
    assert means[0] >= means[1] >= means[2]


def test_reinvigorate_full_set_unchanged(rng):
    cfg = PlannerConfig(K=3)
    out = reinvigorate(["a", "b", "c"], "o", ConstantModel(), cfg, rng)
    assert out.particles == ["a", "b", "c"]


def test_reinvigorate_without_hook_is_unrecoverable(rng):
    with pytest.raises(UnrecoverableDeprivation):
        reinvigorate(["a"], "o", ConstantModel(), PlannerConfig(K=3), rng)


def test_reinvigorate_forces_observed_progress(rng):
    cfg_d = DomainConfig(n_nodes=3)
    model = MTDModel(cfg_d)
    donor = ((0, 0, UP, 0, 0),) * 3
    o = ((UP, 1), (UP, 0), (UP, 0))
    out = reinvigorate([], o, model, PlannerConfig(K=5), rng, donors=[donor])
    assert out.K == 5
    for particle in out.particles:
        assert particle[0][3] == 1 and particle[0][0] >= 1
        assert model.observe(particle) == o


def test_reinvigorated_particles_explain_observation_exhaustively():
    cfg_d = DomainConfig(n_nodes=1, attack_rate=0.3, observation_rate=0.5)
    model = MTDModel(cfg_d)
    explicit = build_explicit_model(cfg_d)
    rng = random.Random(4)
    donors = [(n,) for n in node_states(cfg_d)]
    for o in explicit.observations:
        oi = explicit.observation_index(o)
        out = reinvigorate(donors[:2], o, model, PlannerConfig(K=len(donors) + 2, reinvigoration_fraction=1.0),
                           rng, donors=donors)
        for particle in out.particles[2:]:
            for a in explicit.actions:
                assert explicit.O[a, explicit.state_index(particle), oi] > 0


def test_advance_empty_tree():
    tree = advance_tree(SearchTree(), 0, 0)
    assert len(tree) == 1 and not tree.root.expanded


def test_advance_keeps_child_statistics(rng):
    sim = tiger_simulator()
    cfg = PlannerConfig(num_simulations=500, max_depth=4, K=200)
    tree = SearchTree()
    a = plan(ParticleBelief.from_model(sim, cfg.K, rng), sim, cfg, rng, tree)
    child = tree.root.edges[a].children[0]
    visits = child.n
    assert advance_tree(tree, a, 0).root is child
    assert advance_tree(tree, a, 0).root.n == visits


def test_deprivation_is_recorded_and_episode_continues():
    env = MTDModel(DomainConfig(attack_rate=0.9, observation_rate=0.9))
    planner_model = MTDModel(DomainConfig(attack_rate=0.05, observation_rate=0.9))
    cfg = PlannerConfig(num_simulations=16, max_depth=5, K=50, max_rejection_attempts=500,
                        use_preferred_actions=True)
    trace = simulate_episode(env, POMCPPlanner(planner_model, cfg), 30, seed=3)
    assert len(trace) == 30 and not trace.failed
    assert any(r.diagnostics["deprivation"] for r in trace.records)


class AffineRewards:
    def __init__(self, model, scale, shift):
        self.model, self.scale, self.shift = model, scale, shift
        self.discount = model.discount

    def step(self, state, action, rng):
        s2, o, r = self.model.step(state, action, rng)
        return s2, o, self.scale * r + self.shift

    def __getattr__(self, name):
        return getattr(self.model, name)


@pytest.mark.parametrize("scale,shift", [(2.0, 0.0), (0.5, 3.0), (3.0, -7.0)])
def test_plan_invariant_under_affine_rewards(scale, shift):
    sim = tiger_simulator()
    for seed in range(10):
        cfg = PlannerConfig(num_simulations=300, max_depth=4, K=100, c_uct=50.0)
        scaled = PlannerConfig(num_simulations=300, max_depth=4, K=100, c_uct=50.0 * scale)
        belief = ParticleBelief.from_model(sim, 100, random.Random(seed))
        a1 = plan(belief, sim, cfg, random.Random(seed))
        a2 = plan(belief, AffineRewards(sim, scale, shift), scaled, random.Random(seed))
        assert a1 == a2


def _tiger_returns(reuse, episodes, seed0):
    sim = tiger_simulator()
    cfg = PlannerConfig(num_simulations=256, max_depth=8, K=300, reuse_tree=reuse)
    return np.array([discounted_return(simulate_episode(sim, POMCPPlanner(sim, cfg), 10, seed0 + i), sim.discount)
                     for i in range(episodes)])


@pytest.mark.slow
def test_tree_reuse_not_worse_on_tiger():
    with_reuse = _tiger_returns(True, 200, 0)
    without = _tiger_returns(False, 200, 0)
    diff = with_reuse - without
    if np.allclose(diff, 0):
        return
    t = stats.ttest_rel(with_reuse, without, alternative="less")
    assert t.pvalue >= 0.05, f"reuse worse: mean {with_reuse.mean():.2f} vs {without.mean():.2f}"
