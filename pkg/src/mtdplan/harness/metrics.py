"""Episode-level and cell-level metrics for cluster-defense experiments."""
from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

from ..core import EpisodeTrace, discounted_return
from ..domain import UP


@dataclass
class EpisodeMetrics:
    seed: int
    steps: int
    compromise_events: int
    steps_to_compromise: List[int]
    censored_periods: int
    availability_counts: List[int]
    """Steps with exactly k nodes online and uncompromised, indexed by k."""
    deprivation_events: int
    discounted_return: float
    failed: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def episode_metrics(trace: EpisodeTrace, gamma: float) -> EpisodeMetrics:
    """Single pass over a trace.

    An exposure period opens when a node is pristine and able to be attacked
    (time 0, or the step before it comes back online) and closes on
    compromise, on going offline, or at the end of the episode.  Only periods
    closed by compromise contribute a time; the rest are counted as censored.
    """
    prev = trace.initial_state
    n = len(prev)
    period_start: List[Optional[int]] = [0 if node[2] == UP and not node[1] else None for node in prev]
    events = 0
    times: List[int] = []
    censored = 0
    avail = [0] * (n + 1)
    deprivations = 0
    for rec in trace.records:
        t = rec.t
        k = 0
        for i, (node_prev, node) in enumerate(zip(prev, rec.state)):
            _, c_prev, av_prev, _, _ = node_prev
            _, c, av, _, _ = node
            if av == UP and av_prev != UP:
                period_start[i] = t - 1
            if c and not c_prev:
                events += 1
                if period_start[i] is not None:
                    times.append(t - period_start[i])
                period_start[i] = None
            elif av != UP and period_start[i] is not None:
                censored += 1
                period_start[i] = None
            if av == UP and not c:
                k += 1
        avail[k] += 1
        if rec.diagnostics.get("deprivation"):
            deprivations += 1
        prev = rec.state
    censored += sum(1 for s in period_start if s is not None)
    return EpisodeMetrics(
        seed=trace.seed, steps=len(trace.records), compromise_events=events, steps_to_compromise=times,
        censored_periods=censored, availability_counts=avail, deprivation_events=deprivations,
        discounted_return=discounted_return(trace, gamma), failed=trace.failed,
    )


@dataclass
class MetricsReport:
    episodes: int
    compromise_event_count_mean: float
    compromise_event_count_std: float
    expected_steps_to_compromise: Optional[float]
    compromise_times_observed: int
    censored_periods: int
    pct_time_at_least_one_available: float
    pct_time_all_available: float
    availability_distribution: List[float]
    particle_deprivation_count: int
    episodes_with_deprivation: int
    failed_episodes: int
    discounted_return_mean: float
    discounted_return_std: float
    wall_clock_seconds: float = 0.0
    cell: Dict[str, object] = field(default_factory=dict)
    per_episode: List[EpisodeMetrics] = field(default_factory=list)

    @property
    def censored_all(self) -> bool:
        return self.compromise_times_observed == 0

    def scalars(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("per_episode", "availability_distribution", "cell")}
        for k, v in enumerate(self.availability_distribution):
            d[f"pct_time_{k}_available"] = v
        if self.censored_all:
            d["expected_steps_to_compromise"] = "censored: all"
        return d

    def to_dict(self) -> dict:
        d = self.scalars()
        d["availability_distribution"] = list(self.availability_distribution)
        d["cell"] = dict(self.cell)
        d["per_episode"] = [e.to_dict() for e in self.per_episode]
        return d


def _std(xs: Sequence[float]) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def aggregate(per_episode: List[EpisodeMetrics], n_nodes: int) -> MetricsReport:
    if not per_episode:
        raise ValueError("no episodes to aggregate")
    counts = [e.compromise_events for e in per_episode]
    times = [t for e in per_episode for t in e.steps_to_compromise]
    avail = [0] * (n_nodes + 1)
    for e in per_episode:
        for k, v in enumerate(e.availability_counts):
            avail[k] += v
    total_steps = sum(avail)
    dist = [100.0 * v / total_steps if total_steps else 0.0 for v in avail]
    returns = [e.discounted_return for e in per_episode]
    return MetricsReport(
        episodes=len(per_episode),
        compromise_event_count_mean=statistics.fmean(counts),
        compromise_event_count_std=_std(counts),
        expected_steps_to_compromise=statistics.fmean(times) if times else None,
        compromise_times_observed=len(times),
        censored_periods=sum(e.censored_periods for e in per_episode),
        pct_time_at_least_one_available=100.0 - dist[0] if total_steps else 0.0,
        pct_time_all_available=dist[n_nodes],
        availability_distribution=dist,
        particle_deprivation_count=sum(e.deprivation_events for e in per_episode),
        episodes_with_deprivation=sum(1 for e in per_episode if e.deprivation_events > 0),
        failed_episodes=sum(1 for e in per_episode if e.failed),
        discounted_return_mean=statistics.fmean(returns),
        discounted_return_std=_std(returns),
        per_episode=list(per_episode),
    )


def compute_metrics(traces: Sequence[EpisodeTrace], gamma: float) -> MetricsReport:
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    n_nodes = len(traces[0].initial_state)
    return aggregate([episode_metrics(t, gamma) for t in traces], n_nodes)
