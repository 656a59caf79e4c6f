"""CSV / JSON writers. Every file starts with the resolved config so it can be rerun."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from .config import config_digest, resolved
from .sim import MetricsRecord, ScenarioConfig, SimulationResult


def header_lines(cfg: ScenarioConfig | None, extra: dict | None = None) -> list[str]:
    lines = []
    if cfg is not None:
        lines.append("# config: " + json.dumps(resolved(cfg), sort_keys=True))
        lines.append(f"# seed: {cfg.seed}")
        lines.append(f"# config_digest: {config_digest(cfg)}")
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {json.dumps(v, sort_keys=True)}")
    return lines


def write_csv(path, fields: Sequence[str], rows: Iterable[Sequence], cfg: ScenarioConfig | None = None,
              extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in header_lines(cfg, extra):
            fh.write(line + "\n")
        w = csv.writer(fh)
        w.writerow(fields)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def read_csv(path) -> tuple[dict, list[dict]]:
    """Return (header comments, rows). Comment values are JSON-decoded where possible."""
    meta: dict = {}
    body = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                try:
                    meta[key] = json.loads(value)
                except json.JSONDecodeError:
                    meta[key] = value
            else:
                body.append(line)
    return meta, list(csv.DictReader(body))


def write_metrics(path, result: SimulationResult) -> Path:
    return write_csv(path, MetricsRecord.CSV_FIELDS, (r.row() for r in result.records), result.config)


def summary(result: SimulationResult) -> dict:
    s = result.summary()
    s["config_digest"] = config_digest(result.config)
    s["seed"] = result.config.seed
    return s


def write_summary(path, result: SimulationResult) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"config": resolved(result.config), **summary(result)}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path
