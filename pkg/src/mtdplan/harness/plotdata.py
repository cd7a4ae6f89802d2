"""Figure-ready long-format tables re-derived from stored report documents."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, List

COLUMNS = ["figure", "planner", "observation_rate", "true_attack_rate", "planner_attack_rate",
           "k", "value", "stddev"]

SCALAR_FIGURES = [
    ("compromise_events", "compromise_event_count_mean", "compromise_event_count_std"),
    ("steps_to_compromise", "expected_steps_to_compromise", None),
    ("availability_at_least_one", "pct_time_at_least_one_available", None),
    ("availability_all", "pct_time_all_available", None),
    ("particle_deprivation", "particle_deprivation_count", None),
]


def figure_rows(doc: dict) -> List[dict]:
    rows = []
    for cell in doc["cells"]:
        key = {k: cell["cell"].get(k) for k in ("planner", "observation_rate", "true_attack_rate",
                                                "planner_attack_rate")}
        for figure, field, err in SCALAR_FIGURES:
            value = cell.get(field)
            if isinstance(value, str):
                value = ""
            rows.append({"figure": figure, **key, "k": "", "value": value,
                         "stddev": cell.get(err, "") if err else ""})
        for k, pct in enumerate(cell["availability_distribution"]):
            rows.append({"figure": "availability_distribution", **key, "k": k, "value": pct, "stddev": ""})
    return rows


def plotdata(paths: Iterable, out_path) -> int:
    rows = []
    for p in paths:
        rows.extend(figure_rows(json.loads(Path(p).read_text())))
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return len(rows)
