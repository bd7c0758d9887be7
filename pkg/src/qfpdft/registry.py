"""JSON solution files and CSV tables.

Solution files are self-validating: metrics are recomputed from the stored
design on load and must agree with the stored values.
"""

import csv
import io
import json
import math
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .biphoton import CountsTable, JointDistribution
from .exceptions import ValidationError
from .qfp import ModeLattice, QfpConfig, RfDrive, ShaperConfig
from .synth import PsoSettings, SearchSpace, SynthesisResult, final_metrics

__all__ = [
    "SCHEMA_VERSION", "solution_to_dict", "solution_from_dict",
    "save_solution", "load_solution", "write_table_csv", "read_table_csv",
    "write_counts_csv", "read_counts_csv", "write_distribution_csv",
    "read_distribution_csv", "write_rows_csv",
]

SCHEMA_VERSION = 1
METRIC_TOL = 1e-9


def _drive_list(drive):
    return [{"amp": a, "phase": p} for a, p in drive.pairs()]


def solution_to_dict(result, timestamp=True):
    cfg, space, m = result.config, result.search_space, result.metrics
    record = {
        "schema_version": SCHEMA_VERSION,
        "d": space.d,
        "B": space.n_channels,
        "P": space.n_harmonics,
        "symmetric": space.symmetric,
        "seed": result.pso.seed,
        "total_modes": cfg.lattice.total_modes,
        "comp_offset": cfg.lattice.comp_offset,
        "channel_offset": cfg.shaper.channel_offset,
        "fidelity_clamp": space.fidelity_clamp,
        "shaper_phases": list(cfg.shaper.phases),
        "eom1": _drive_list(cfg.drive_a),
        "eom2": _drive_list(cfg.drive_b),
        "fidelity": m.fidelity,
        "success_prob": m.success_prob,
        "cost": m.cost,
        "iterations_used": result.iterations_used,
        "wall_time_s": result.wall_time,
        "search": {"amp_max": space.amp_max, "init_amp": space.init_amp,
                   "n_samples": space.n_samples},
        "pso": asdict(result.pso),
    }
    if timestamp:
        record["created"] = datetime.now(timezone.utc).isoformat()
    return record


def solution_from_dict(record, validate=True):
    """Rebuild a :class:`SynthesisResult`; checks stored metrics when ``validate``."""
    try:
        if record["schema_version"] != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema_version {record['schema_version']}")
        lattice = ModeLattice(record["d"], record["total_modes"], record["comp_offset"])
        shaper = ShaperConfig(record["shaper_phases"], record["channel_offset"])
        drive_a = RfDrive.from_pairs((e["amp"], e["phase"]) for e in record["eom1"])
        drive_b = RfDrive.from_pairs((e["amp"], e["phase"]) for e in record["eom2"])
        search = record.get("search", {})
        space = SearchSpace(record["d"], record["B"], record["P"], record["symmetric"],
                            total_modes=record["total_modes"],
                            fidelity_clamp=record["fidelity_clamp"], **search)
        pso = PsoSettings(**record.get("pso", {"seed": record["seed"]}))
        stored = (record["fidelity"], record["success_prob"], record["cost"])
        iterations, wall = record["iterations_used"], record["wall_time_s"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed solution record: {exc!r}") from exc
    config = QfpConfig(drive_a, shaper, drive_b, lattice)
    metrics = final_metrics(config, space.fidelity_clamp)
    if validate:
        fresh = (metrics.fidelity, metrics.success_prob, metrics.cost)
        for name, a, b in zip(("fidelity", "success_prob", "cost"), stored, fresh):
            if not abs(a - b) <= METRIC_TOL:
                raise ValidationError(
                    f"stored {name}={a!r} disagrees with recomputed {b!r}")
    return SynthesisResult(config, metrics, space, pso, iterations, wall)


def save_solution(result, path, timestamp=True):
    path = Path(path)
    path.write_text(json.dumps(solution_to_dict(result, timestamp), indent=2) + "\n",
                    encoding="utf-8")
    return path


def load_solution(path, validate=True):
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    return solution_from_dict(record, validate)


# ---------------------------------------------------------------------------
# CSV tables: header row of signal bins, one row per idler bin
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_rows_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, (float, int, np.number)) else v
                         for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
    return Path(path)


def write_table_csv(path, table):
    table = np.asarray(table)
    d = table.shape[1]
    header = ["idler\\signal"] + [str(n) for n in range(d)]
    rows = [[str(m)] + [_fmt(v) for v in row] for m, row in enumerate(table)]
    return write_rows_csv(path, header, rows)


def read_table_csv(path, dtype=float):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty table")
    header, body = rows[0], [r for r in rows[1:] if r]
    d = len(header) - 1
    if d < 1 or len(body) != d:
        raise ValidationError(f"{path}: expected {d} idler rows, found {len(body)}")
    try:
        values = [[float(v) for v in row[1:]] for row in body]
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from exc
    if any(len(r) != d for r in values):
        raise ValidationError(f"{path}: ragged table")
    arr = np.array(values)
    if dtype is int:
        if np.any(arr != np.round(arr)):
            raise ValidationError(f"{path}: counts must be integers")
        return arr.astype(np.int64)
    return arr


def write_counts_csv(path, counts):
    table = counts.counts if isinstance(counts, CountsTable) else counts
    return write_table_csv(path, np.asarray(table, dtype=np.int64))


def read_counts_csv(path):
    return CountsTable(read_table_csv(path, dtype=int))


def write_distribution_csv(path, dist):
    return write_table_csv(path, dist.probs)


def read_distribution_csv(path):
    probs = read_table_csv(path)
    if np.any(probs < 0) or not math.isfinite(probs.sum()):
        raise ValidationError(f"{path}: invalid probabilities")
    return JointDistribution.from_probs(probs)
