"""Seeded batch execution of experiment cells and result emission."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from .. import __version__
from ..bapomdp import DirichletCounts, PomdpSkeleton, lift
from ..baselines import TIE_BREAK_RULE, RuleConfig, noop_planner, random_planner, rule_planner
from ..core import simulate_episode
from ..domain import MTDModel, build_explicit_model, initial_state, observe
from ..pomcp import POMCPPlanner
from .config import PLANNER_RATE_BOUNDS, ConfigError, ExperimentConfig, parse_planner
from .metrics import EpisodeMetrics, MetricsReport, aggregate, episode_metrics

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_KEYS = ("planner", "observation_rate", "true_attack_rate", "planner_attack_rate")
WALL_CLOCK_FIELDS = ("wall_clock_seconds",)


@dataclass(frozen=True)
class Cell:
    planner: str
    observation_rate: float
    true_attack_rate: float
    planner_attack_rate: float

    def label(self) -> str:
        return (f"{self.planner}|obs={self.observation_rate:g}|true={self.true_attack_rate:g}"
                f"|model={self.planner_attack_rate:g}")


def clamp_planner_rate(rate: float) -> float:
    lo, hi = PLANNER_RATE_BOUNDS
    return min(max(rate, lo), hi)


class BAPlanner:
    """POMCP over hyperstates of the enumerated single-node domain.

    Translates cluster observations into the explicit model's observation indices.
    """

    def __init__(self, explicit, skeleton, pomcp_cfg):
        self.explicit = explicit
        self.inner = POMCPPlanner(lift(skeleton), pomcp_cfg)

    def reset(self, rng):
        self.inner.reset(rng)

    def act(self, rng):
        return self.explicit.actions[self.inner.act(rng)]

    def observe(self, action, observation, rng):
        a = self.explicit.action_index(action)
        return self.inner.observe(a, self.explicit.observation_index(observation), rng)


def make_planner(cfg: ExperimentConfig, cell: Cell):
    kind, arg = parse_planner(cell.planner)
    env_domain = dataclasses.replace(cfg.domain, attack_rate=cell.true_attack_rate,
                                     observation_rate=cell.observation_rate)
    first_obs = observe(initial_state(env_domain))
    if kind == "rule":
        return rule_planner(RuleConfig(arg if arg is not None else cfg.rule_rb), first_obs)
    if kind == "noop":
        return noop_planner(first_obs)
    if kind == "random":
        return random_planner(first_obs)
    planner_domain = dataclasses.replace(env_domain, attack_rate=cell.planner_attack_rate)
    if kind == "pomcp":
        return POMCPPlanner(MTDModel(planner_domain), cfg.pomcp)
    if planner_domain.n_nodes != 1:
        raise ConfigError("planner", "bapomcp needs an enumerable domain (domain.n_nodes: 1)")
    explicit = build_explicit_model(planner_domain)
    prior = DirichletCounts.from_model(explicit, scale=cfg.bapomcp_prior_scale)
    return BAPlanner(explicit, PomdpSkeleton.from_model(explicit, prior), cfg.pomcp)


def _run_episode(args) -> EpisodeMetrics:
    cfg, cell, index = args
    env_domain = dataclasses.replace(cfg.domain, attack_rate=cell.true_attack_rate,
                                     observation_rate=cell.observation_rate)
    planner = make_planner(cfg, cell)
    trace = simulate_episode(MTDModel(env_domain), planner, cfg.horizon, cfg.seed + index, cell.label())
    return episode_metrics(trace, env_domain.discount)


def run_batch(cfg: ExperimentConfig, planner: Optional[str] = None, observation_rate: Optional[float] = None,
              true_rate: Optional[float] = None, planner_rate: Optional[float] = None,
              out_dir=None, workers: Optional[int] = None) -> MetricsReport:
    """Run ``cfg.episodes`` seeded episodes of one cell and aggregate them.

    Episode ``i`` uses seed ``cfg.seed + i`` regardless of worker count, so
    results do not depend on scheduling.
    """
    true_rate = cfg.true_attack_rate if true_rate is None else true_rate
    if planner_rate is None:
        planner_rate = cfg.planner_attack_rate if cfg.planner_attack_rate is not None else true_rate
    cell = Cell(
        planner=planner or cfg.planner,
        observation_rate=cfg.observation_rates[0] if observation_rate is None else observation_rate,
        true_attack_rate=true_rate,
        planner_attack_rate=clamp_planner_rate(planner_rate),
    )
    make_planner(cfg, cell)
    workers = cfg.effective_workers() if workers is None else workers
    start = time.perf_counter()
    jobs = [(cfg, cell, i) for i in range(cfg.episodes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_episode = list(pool.map(_run_episode, jobs))
    else:
        per_episode = [_run_episode(j) for j in jobs]
    report = aggregate(per_episode, cfg.domain.n_nodes)
    report.wall_clock_seconds = time.perf_counter() - start
    report.cell = dataclasses.asdict(cell)
    log.info("%s: %.2f compromises/episode (%.1fs)", cell.label(), report.compromise_event_count_mean,
             report.wall_clock_seconds)
    if out_dir is not None:
        write_outputs([report], cfg, out_dir, "batch")
    return report


def observation_sweep(cfg: ExperimentConfig, planners: Optional[Sequence[str]] = None) -> List[MetricsReport]:
    planners = list(planners or cfg.planners)
    return [run_batch(cfg, planner=p, observation_rate=r) for p in planners for r in cfg.observation_rates]


def noise_sweep(cfg: ExperimentConfig, planner: str = "pomcp") -> List[MetricsReport]:
    """One batch per ((true, planner) attack-rate pair, observation rate); environment uses the true rate."""
    return [run_batch(cfg, planner=planner, observation_rate=r, true_rate=t, planner_rate=m)
            for t, m in cfg.noise_pairs for r in cfg.observation_rates]


def metadata(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "seeds": {"base": cfg.seed, "episodes": [cfg.seed + i for i in range(cfg.episodes)]},
        "rule_tie_break": TIE_BREAK_RULE,
        "planner_rate_clamp": list(PLANNER_RATE_BOUNDS),
    }


def report_document(reports: Iterable[MetricsReport], cfg: ExperimentConfig, command: str) -> dict:
    doc = metadata(cfg, command)
    doc["cells"] = [r.to_dict() for r in reports]
    return doc


def strip_wall_clock(doc: dict) -> dict:
    """Copy of a report document without timing fields (for reproducibility checks)."""
    doc = json.loads(json.dumps(doc))
    for cell in doc.get("cells", []):
        for key in WALL_CLOCK_FIELDS:
            cell.pop(key, None)
    return doc


def csv_rows(reports: Iterable[MetricsReport]) -> List[dict]:
    rows = []
    for r in reports:
        row = {k: r.cell.get(k) for k in CSV_KEYS}
        row.update(r.scalars())
        rows.append(row)
    return rows


def csv_preamble(cfg: ExperimentConfig, command: str) -> str:
    """``#``-prefixed provenance line; read the table with ``comment="#"``."""
    return "# " + json.dumps(metadata(cfg, command), sort_keys=True) + "\n"


def write_outputs(reports: Sequence[MetricsReport], cfg: ExperimentConfig, out_dir, name: str) -> tuple:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{name}.json"
    csv_path = out / f"{name}.csv"
    json_path.write_text(json.dumps(report_document(reports, cfg, name), indent=2, sort_keys=True) + "\n")
    rows = csv_rows(reports)
    with csv_path.open("w", newline="") as fh:
        fh.write(csv_preamble(cfg, name))
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return json_path, csv_path
