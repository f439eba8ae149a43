"""Run configuration, manifests, and file I/O for the command-line tools.

Config files are JSON:

    {
      "grid":     {"min_salary": 20, "max_salary": 3000, "levels": 100,
                   "spacing": "uniform", "unit_scale": 1.0},
      "classes":  [{"alpha": 215.0, "beta": 20.5, "gamma": 5.0, "count": 950000},
                   {"alpha": 220.5, "beta": 19.45, "gamma": 10.0, "count": 50000}],
      "dynamics": {"mode": "sequential", "seed": 42, "epochs_max": 500000000,
                   "stationarity": {"window": 100, "threshold": 0.001}},
      "outputs":  {"directory": "runs/example", "snapshot_cadence": 25}
    }

Salaries in the file times unit_scale give kilodollars (so a config written
in dollars uses unit_scale 0.001). Optional dynamics keys: offers
("imitative" | "uniform"), shards (parallel block count), fire_hazard.

Schema violations raise ConfigError naming the offending field with a
best-effort line number in the file. Every file written here goes through a
temp-file-and-rename so readers never observe partial output; the manifest
is written last and carries SHA-256 checksums of the data files, the full
config echo, the RNG algorithm id and seed, and timestamps - enough to
reproduce the run exactly (see rerun_from_manifest).
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import ClassParams, DynamicsSettings, SalaryGrid, Scenario

__all__ = ["ConfigError", "RunConfig", "load_config", "config_to_scenario",
           "atomic_write_text", "sha256_of", "write_manifest",
           "histogram_header", "write_histogram_csv", "write_solution_csv",
           "write_trajectory_csv", "read_histogram_csv", "rerun_from_manifest",
           "RNG_ALGORITHM"]

from .abm import RNG_ALGORITHM

FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    """A config field is missing or violates the schema."""

    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"config field '{field}': {message}{where}")


def _line_of(text: str, key: str, occurrence: int = 0) -> int | None:
    """Best-effort line number of the occurrence-th appearance of "key"."""
    needle = f'"{key}"'
    pos = -1
    for _ in range(occurrence + 1):
        pos = text.find(needle, pos + 1)
        if pos < 0:
            return None
    return text.count("\n", 0, pos) + 1


@dataclass
class RunConfig:
    scenario: Scenario
    mode: str
    offers: str
    seed: int
    epochs_max: int
    window: int
    threshold: float
    tolerance: float
    fire_hazard: float
    shards: int
    out_dir: str
    snapshot_cadence: int
    raw: dict


def _get(cfg: dict, text: str, path: str, kind, default=..., occurrence: int = 0):
    node = cfg
    parts = path.split(".")
    for depth, part in enumerate(parts):
        if not isinstance(node, dict) or part not in node:
            if default is not ...:
                return default
            raise ConfigError(path, "required field is missing",
                              _line_of(text, parts[max(0, depth - 1)]))
        node = node[part]
    if kind is int:
        if isinstance(node, bool) or not isinstance(node, int):
            raise ConfigError(path, f"must be an integer, got {node!r}",
                              _line_of(text, parts[-1], occurrence))
        return node
    if kind is float:
        if isinstance(node, bool) or not isinstance(node, (int, float)):
            raise ConfigError(path, f"must be a number, got {node!r}",
                              _line_of(text, parts[-1], occurrence))
        return float(node)
    if kind is str:
        if not isinstance(node, str):
            raise ConfigError(path, f"must be a string, got {node!r}",
                              _line_of(text, parts[-1], occurrence))
        return node
    if kind is list:
        if not isinstance(node, list):
            raise ConfigError(path, "must be a list",
                              _line_of(text, parts[-1], occurrence))
        return node
    raise AssertionError(kind)


def parse_config(cfg: dict, text: str = "") -> RunConfig:
    """Validate a config dict (text, when given, supplies line numbers)."""
    min_s = _get(cfg, text, "grid.min_salary", float)
    max_s = _get(cfg, text, "grid.max_salary", float)
    levels = _get(cfg, text, "grid.levels", int)
    spacing = _get(cfg, text, "grid.spacing", str, "uniform")
    unit_scale = _get(cfg, text, "grid.unit_scale", float, 1.0)
    if unit_scale <= 0:
        raise ConfigError("grid.unit_scale", "must be > 0",
                          _line_of(text, "unit_scale"))
    if min_s <= 0:
        raise ConfigError("grid.min_salary", "must be > 0",
                          _line_of(text, "min_salary"))
    if max_s <= min_s:
        raise ConfigError("grid.max_salary", "must exceed min_salary",
                          _line_of(text, "max_salary"))
    if levels < 2:
        raise ConfigError("grid.levels", "must be >= 2", _line_of(text, "levels"))
    if spacing not in ("uniform", "log"):
        raise ConfigError("grid.spacing", "must be 'uniform' or 'log'",
                          _line_of(text, "spacing"))

    class_list = _get(cfg, text, "classes", list)
    if not class_list:
        raise ConfigError("classes", "needs at least one class",
                          _line_of(text, "classes"))
    classes = []
    for idx, entry in enumerate(class_list):
        if not isinstance(entry, dict):
            raise ConfigError(f"classes[{idx}]", "must be an object",
                              _line_of(text, "classes"))
        for key in ("alpha", "beta", "gamma"):
            if key not in entry:
                raise ConfigError(f"classes[{idx}].{key}", "required field is missing",
                                  _line_of(text, key, idx))
            v = entry[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"classes[{idx}].{key}", f"must be > 0, got {v!r}",
                                  _line_of(text, key, idx))
        cnt = entry.get("count")
        if isinstance(cnt, bool) or not isinstance(cnt, int) or cnt < 1:
            raise ConfigError(f"classes[{idx}].count", f"must be an integer >= 1, got {cnt!r}",
                              _line_of(text, "count", idx))
        classes.append((ClassParams(float(entry["alpha"]), float(entry["beta"]),
                                    float(entry["gamma"])), cnt))

    mode = _get(cfg, text, "dynamics.mode", str, "sequential")
    if mode not in ("sequential", "parallel", "replicator"):
        raise ConfigError("dynamics.mode",
                          "must be 'sequential', 'parallel' or 'replicator'",
                          _line_of(text, "mode"))
    if mode == "replicator" and len(class_list) != 1:
        raise ConfigError("dynamics.mode",
                          "replicator (mean-field) mode needs exactly one class",
                          _line_of(text, "mode"))
    tolerance = _get(cfg, text, "dynamics.tolerance", float, 1e-9)
    if not tolerance > 0:
        raise ConfigError("dynamics.tolerance", "must be > 0",
                          _line_of(text, "tolerance"))
    seed = _get(cfg, text, "dynamics.seed", int, 0)
    if seed < 0:
        raise ConfigError("dynamics.seed", "must be >= 0", _line_of(text, "seed"))
    epochs_max = _get(cfg, text, "dynamics.epochs_max", int, 3000 * sum(c for _, c in classes))
    if epochs_max < 0:
        raise ConfigError("dynamics.epochs_max", "must be >= 0",
                          _line_of(text, "epochs_max"))
    window = _get(cfg, text, "dynamics.stationarity.window", int, 100)
    if window < 1:
        raise ConfigError("dynamics.stationarity.window", "must be >= 1",
                          _line_of(text, "window"))
    threshold = _get(cfg, text, "dynamics.stationarity.threshold", float, 1e-3)
    if not threshold > 0:
        raise ConfigError("dynamics.stationarity.threshold", "must be > 0",
                          _line_of(text, "threshold"))
    offers = _get(cfg, text, "dynamics.offers", str, "imitative")
    if offers not in ("imitative", "uniform"):
        raise ConfigError("dynamics.offers", "must be 'imitative' or 'uniform'",
                          _line_of(text, "offers"))
    fire_hazard = _get(cfg, text, "dynamics.fire_hazard", float, 0.0)
    if not (0.0 <= fire_hazard < 1.0):
        raise ConfigError("dynamics.fire_hazard", "must be in [0, 1)",
                          _line_of(text, "fire_hazard"))
    shards = _get(cfg, text, "dynamics.shards", int, 8)
    if shards < 1:
        raise ConfigError("dynamics.shards", "must be >= 1", _line_of(text, "shards"))

    out_dir = _get(cfg, text, "outputs.directory", str, "runs")
    cadence = _get(cfg, text, "outputs.snapshot_cadence", int, 0)
    if cadence < 0:
        raise ConfigError("outputs.snapshot_cadence", "must be >= 0",
                          _line_of(text, "snapshot_cadence"))

    maker = SalaryGrid.uniform if spacing == "uniform" else SalaryGrid.log_uniform
    grid = maker(min_s * unit_scale, max_s * unit_scale, levels)
    scenario = Scenario(grid=grid, classes=tuple(classes), rng_seed=seed,
                        dynamics=DynamicsSettings())
    return RunConfig(scenario=scenario, mode=mode, offers=offers, seed=seed,
                     epochs_max=epochs_max, window=window, threshold=threshold,
                     tolerance=tolerance, fire_hazard=fire_hazard, shards=shards,
                     out_dir=out_dir, snapshot_cadence=cadence, raw=cfg)


def load_config(path) -> RunConfig:
    """Read and validate a JSON config file."""
    p = Path(path)
    text = p.read_text()  # missing file propagates as an I/O error
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<json>", f"invalid JSON: {e.msg}", e.lineno) from e
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "top level must be an object", 1)
    return parse_config(cfg, text)


def config_to_scenario(cfg: RunConfig) -> Scenario:
    return cfg.scenario


# ---------------------------------------------------------------------------
# Files

def atomic_write_text(path, text: str) -> Path:
    """Write via temp file + rename; readers never see partial content."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, p)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return p


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % float(v)


def histogram_header(k: int) -> str:
    counts = ", ".join(f"count_class{j + 1}" for j in range(k))
    return f"level_index, salary_kusd, {counts}, density_total, model_density_total"


def write_histogram_csv(path, grid: SalaryGrid, counts: np.ndarray,
                        model_density: np.ndarray) -> Path:
    """counts: (k, n) per-class occupancy; densities derived from totals."""
    k, n = counts.shape
    total = counts.sum()
    lines = [histogram_header(k)]
    for i in range(n):
        row = [str(i), _fmt(grid.levels[i])]
        row += [str(int(counts[j, i])) for j in range(k)]
        row.append(_fmt(counts[:, i].sum() / total))
        row.append(_fmt(model_density[i]))
        lines.append(", ".join(row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_solution_csv(path, grid: SalaryGrid, solution) -> Path:
    """Equilibrium densities with per-class columns and a partition label."""
    k = solution.k
    n = grid.n
    dens_cols = ", ".join(f"density_class{j + 1}" for j in range(k))
    lines = [f"level_index, salary_kusd, {dens_cols}, density_total, partition"]
    holder = solution.holder()
    for i in range(n):
        row = [str(i), _fmt(grid.levels[i])]
        row += [_fmt(solution.densities[j, i]) for j in range(k)]
        row.append(_fmt(solution.combined_density[i]))
        row.append("0" if holder[i] < 0 else str(int(holder[i]) + 1))
        lines.append(", ".join(row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_trajectory_csv(path, snapshots, k: int) -> Path:
    pays = ", ".join(f"mean_payoff_class{j + 1}" for j in range(k))
    lines = [f"sweep, residual_l1, accepted_moves, {pays}, potential"]
    for snap in snapshots:
        row = [str(snap.sweep), _fmt(snap.residual), str(snap.accepted_total)]
        row += [_fmt(v) for v in snap.mean_payoff]
        row.append(_fmt(snap.potential))
        lines.append(", ".join(row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_histogram_csv(path) -> dict:
    """Parse a histogram or solution CSV into named float columns."""
    p = Path(path)
    rows = [line.strip() for line in p.read_text().splitlines() if line.strip()]
    if not rows:
        raise ValueError(f"{p}: empty file")
    names = [c.strip() for c in rows[0].split(",")]
    data = {name: [] for name in names}
    for line in rows[1:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(names):
            raise ValueError(f"{p}: row with {len(cells)} cells, header has {len(names)}")
        for name, cell in zip(names, cells):
            data[name].append(float(cell))
    return {name: np.asarray(vals) for name, vals in data.items()}


def write_manifest(path, *, command: str, config: dict, seed: int,
                   started: datetime, finished: datetime,
                   convergence: dict, files: list[Path],
                   version: str) -> Path:
    entries = [{"path": Path(f).name, "sha256": sha256_of(f),
                "bytes": os.path.getsize(f)} for f in files]
    doc = {
        "toolkit_version": version,
        "command": command,
        "config": config,
        "rng": {"algorithm": RNG_ALGORITHM, "seed": seed},
        "started_utc": started.astimezone(timezone.utc).isoformat(),
        "finished_utc": finished.astimezone(timezone.utc).isoformat(),
        "convergence": convergence,
        "files": entries,
    }
    return atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def rerun_from_manifest(manifest_path, out_dir) -> dict:
    """Re-execute a manifest's run into out_dir; returns the new manifest."""
    from . import cli

    doc = json.loads(Path(manifest_path).read_text())
    cfg = parse_config(doc["config"])
    seed = int(doc["rng"]["seed"])
    command = doc["command"]
    if command == "simulate":
        cli.run_simulate(cfg, seed=seed, out_dir=Path(out_dir))
    elif command == "solve":
        cli.run_solve(cfg, out_dir=Path(out_dir))
    else:
        raise ValueError(f"manifest command {command!r} is not re-runnable")
    return json.loads((Path(out_dir) / "manifest.json").read_text())
