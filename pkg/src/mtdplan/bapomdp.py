"""Bayes-adaptive POMDPs: Dirichlet experience counts carried inside the state.

States, actions and observations of the underlying skeleton are integer
indices.  Counts are stored as flat integer tuples so hyperstates are
hashable values that a particle belief can hold directly.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import ExplicitModel


class CountInvariantError(ValueError):
    """A count row that must be positive sums to zero."""


@dataclass(frozen=True)
class DirichletCounts:
    """Transition counts ``phi[s, a, s']`` and observation counts ``psi[s', a, o]``."""

    n_states: int
    n_actions: int
    n_observations: int
    phi: Tuple[int, ...]
    psi: Tuple[int, ...]

    def __post_init__(self):
        nS, nA, nO = self.n_states, self.n_actions, self.n_observations
        if len(self.phi) != nS * nA * nS or len(self.psi) != nS * nA * nO:
            raise ValueError("count tables do not match the declared index spaces")
        if any(v < 0 for v in self.phi) or any(v < 0 for v in self.psi):
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_arrays(cls, phi, psi) -> DirichletCounts:
        phi = np.asarray(phi)
        psi = np.asarray(psi)
        if not (np.issubdtype(phi.dtype, np.integer) and np.issubdtype(psi.dtype, np.integer)):
            if not (np.all(phi == np.round(phi)) and np.all(psi == np.round(psi))):
                raise ValueError("counts must be integers")
        nS, nA, nS2 = phi.shape
        nS3, nA2, nO = psi.shape
        if nS != nS2 or nS != nS3 or nA != nA2:
            raise ValueError(f"incompatible count shapes {phi.shape} and {psi.shape}")
        return cls(nS, nA, nO, tuple(int(v) for v in phi.ravel()), tuple(int(v) for v in psi.ravel()))

    @classmethod
    def uniform(cls, n_states: int, n_actions: int, n_observations: int, count: int = 1) -> DirichletCounts:
        return cls(n_states, n_actions, n_observations,
                   (count,) * (n_states * n_actions * n_states),
                   (count,) * (n_states * n_actions * n_observations))

    @classmethod
    def from_model(cls, model: ExplicitModel, scale: int = 10_000) -> DirichletCounts:
        """Counts proportional to an explicit model's probabilities."""
        phi = np.rint(np.transpose(model.T, (1, 0, 2)) * scale).astype(int)
        psi = np.rint(np.transpose(model.O, (1, 0, 2)) * scale).astype(int)
        return cls.from_arrays(phi, psi)

    def phi_array(self) -> np.ndarray:
        return np.array(self.phi).reshape(self.n_states, self.n_actions, self.n_states)

    def psi_array(self) -> np.ndarray:
        return np.array(self.psi).reshape(self.n_states, self.n_actions, self.n_observations)

    def phi_row(self, s: int, a: int) -> Tuple[int, ...]:
        i = (s * self.n_actions + a) * self.n_states
        return self.phi[i:i + self.n_states]

    def psi_row(self, s2: int, a: int) -> Tuple[int, ...]:
        i = (s2 * self.n_actions + a) * self.n_observations
        return self.psi[i:i + self.n_observations]

    def validate(self) -> None:
        for s in range(self.n_states):
            for a in range(self.n_actions):
                if sum(self.phi_row(s, a)) <= 0:
                    raise CountInvariantError(f"transition counts for (s={s}, a={a}) sum to zero")
                if sum(self.psi_row(s, a)) <= 0:
                    raise CountInvariantError(f"observation counts for (s'={s}, a={a}) sum to zero")

    def increment(self, s: int, a: int, s2: int, o: int) -> DirichletCounts:
        """Counts after experiencing one transition ``s --a--> s2`` emitting ``o``."""
        i = (s * self.n_actions + a) * self.n_states + s2
        j = (s2 * self.n_actions + a) * self.n_observations + o
        phi = self.phi[:i] + (self.phi[i] + 1,) + self.phi[i + 1:]
        psi = self.psi[:j] + (self.psi[j] + 1,) + self.psi[j + 1:]
        # an increment cannot break the invariants, so skip __post_init__ on this hot path
        out = object.__new__(DirichletCounts)
        for name, value in (("n_states", self.n_states), ("n_actions", self.n_actions),
                            ("n_observations", self.n_observations), ("phi", phi), ("psi", psi)):
            object.__setattr__(out, name, value)
        return out


def _normalized(row: Sequence[int], idx: int, what: str) -> float:
    total = sum(row)
    if total <= 0:
        raise CountInvariantError(f"{what} counts sum to zero")
    return row[idx] / total


def expected_transition(counts: DirichletCounts, s: int, a: int, s2: int) -> float:
    return _normalized(counts.phi_row(s, a), s2, f"transition (s={s}, a={a})")


def expected_observation(counts: DirichletCounts, s2: int, a: int, o: int) -> float:
    return _normalized(counts.psi_row(s2, a), o, f"observation (s'={s2}, a={a})")


@dataclass(frozen=True)
class HyperState:
    s: int
    counts: DirichletCounts


@dataclass
class PomdpSkeleton:
    """Known structure of a POMDP whose dynamics are uncertain."""

    R: np.ndarray
    """Reward table indexed ``[s, a]``."""
    prior: DirichletCounts
    initial: np.ndarray
    discount: float = 0.95

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.initial = np.asarray(self.initial, dtype=float)
        p = self.prior
        if self.R.shape != (p.n_states, p.n_actions):
            raise ValueError(f"reward table has shape {self.R.shape}, expected {(p.n_states, p.n_actions)}")
        if self.initial.shape != (p.n_states,) or abs(self.initial.sum() - 1.0) > 1e-9:
            raise ValueError("initial distribution must be a probability vector over states")
        p.validate()

    @property
    def n_states(self) -> int:
        return self.prior.n_states

    @property
    def n_actions(self) -> int:
        return self.prior.n_actions

    @property
    def n_observations(self) -> int:
        return self.prior.n_observations

    @classmethod
    def from_model(cls, model: ExplicitModel, prior: Optional[DirichletCounts] = None) -> PomdpSkeleton:
        if prior is None:
            prior = DirichletCounts.uniform(len(model.states), len(model.actions), len(model.observations))
        return cls(R=model.R, prior=prior, initial=model.b0, discount=model.discount)


def _draw(row: Sequence[int], rng: random.Random) -> int:
    u = rng.random() * sum(row)
    acc = 0
    for i, w in enumerate(row):
        acc += w
        if u < acc:
            return i
    return len(row) - 1


def ba_step(h: HyperState, a: int, skeleton: PomdpSkeleton, rng: random.Random):
    """Sample from the count-expected dynamics and record the sampled experience."""
    counts = h.counts
    s2 = _draw(counts.phi_row(h.s, a), rng)
    o = _draw(counts.psi_row(s2, a), rng)
    return HyperState(s2, counts.increment(h.s, a, s2, o)), o, float(skeleton.R[h.s, a])


class BAModel:
    """Generative model over hyperstates, usable directly by the POMCP planner."""

    def __init__(self, skeleton: PomdpSkeleton):
        self.skeleton = skeleton
        self.discount = skeleton.discount
        self.actions = list(range(skeleton.n_actions))
        self._initial_cum = np.cumsum(skeleton.initial).tolist()

    def step(self, state: HyperState, action: int, rng: random.Random):
        return ba_step(state, action, self.skeleton, rng)

    def sample_initial_state(self, rng: random.Random) -> HyperState:
        u = rng.random() * self._initial_cum[-1]
        s = next((i for i, c in enumerate(self._initial_cum) if u < c), len(self._initial_cum) - 1)
        return HyperState(s, self.skeleton.prior)

    def legal_actions(self, state):
        return self.actions

    def preferred_actions(self, state):
        return self.actions

    def is_terminal(self, state):
        return False

    @property
    def reward_span(self) -> float:
        return float(self.skeleton.R.max() - self.skeleton.R.min())


def lift(skeleton: PomdpSkeleton) -> BAModel:
    return BAModel(skeleton)


def learned_model_error(counts: DirichletCounts, truth: ExplicitModel) -> float:
    """Mean L1 row error of the count-expected transitions plus that of the observations."""
    nS, nA, nO = len(truth.states), len(truth.actions), len(truth.observations)
    if (counts.n_states, counts.n_actions, counts.n_observations) != (nS, nA, nO):
        raise ValueError(
            f"index mismatch: counts are {(counts.n_states, counts.n_actions, counts.n_observations)}, "
            f"model is {(nS, nA, nO)}")
    phi = counts.phi_array().astype(float)
    psi = counts.psi_array().astype(float)
    if np.any(phi.sum(axis=2) <= 0) or np.any(psi.sum(axis=2) <= 0):
        raise CountInvariantError("count rows must have positive sums")
    t_hat = phi / phi.sum(axis=2, keepdims=True)
    o_hat = psi / psi.sum(axis=2, keepdims=True)
    t_err = np.abs(t_hat - np.transpose(truth.T, (1, 0, 2))).sum(axis=2).mean()
    o_err = np.abs(o_hat - np.transpose(truth.O, (1, 0, 2))).sum(axis=2).mean()
    return float(t_err + o_err)


def learn_from_model(truth: ExplicitModel, counts: DirichletCounts, steps: int, rng: random.Random,
                     state: Optional[int] = None) -> Tuple[DirichletCounts, int]:
    """Feed ``steps`` transitions sampled from ``truth`` under uniformly random actions into ``counts``."""
    nA = len(truth.actions)
    cum_T = np.cumsum(truth.T, axis=2).tolist()
    cum_O = np.cumsum(truth.O, axis=2).tolist()
    if state is None:
        state = _draw_cum(np.cumsum(truth.b0).tolist(), rng)
    for _ in range(steps):
        a = int(rng.random() * nA)
        s2 = _draw_cum(cum_T[a][state], rng)
        o = _draw_cum(cum_O[a][s2], rng)
        counts = counts.increment(state, a, s2, o)
        state = s2
    return counts, state


def _draw_cum(cum, rng) -> int:
    u = rng.random() * cum[-1]
    for i, c in enumerate(cum):
        if u < c:
            return i
    return len(cum) - 1
