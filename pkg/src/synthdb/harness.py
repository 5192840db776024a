"""Experiment harness: CSV ingestion, benchmark sweeps, reports.

A sweep evaluates the mechanism over a grid of (sigma, seed) cells.  Each
cell generates its own query workload, runs the mechanism with a stream
key derived from (seed, sigma), evaluates the workload on both databases,
and records worst-case errors plus wall-clock time.  Cells are isolated:
one failure never aborts the others.

File formats
------------
synthetic CSV    no header, one point per row, comma-separated floats at
                 full (shortest round-trip) precision.
report.json      UTF-8, top-level keys {config, params, cells, aggregate};
                 every float serialized with 17 significant digits.
moment CSV       header "synthdb-moments,v1,<kind>,<L or ->", then one
                 value per line.
design CSV       header "synthdb-design,v1,<rows>,<cols>,<d>", the matrix
                 row-major (one row per line), then the support points one
                 per line; for external LP cross-checks.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import DesignMatrix, MomentVector
from .core import Dataset, PrivacyBudget, derive_params, normalize_dataset
from .mechanism import DEFAULT_FEASIBILITY_BOUND, run_accelerated, run_full
from .noise import derive_seed, rng_stream
from .queries import error_metrics, evaluate_query, random_queries

SCHEMA_VERSION = 1
SUBSET_ALIASES = {"pca": "pca_ellipsoid", "uniform": "uniform_hypercube",
                  "pca_ellipsoid": "pca_ellipsoid",
                  "uniform_hypercube": "uniform_hypercube"}


@dataclass
class ExperimentConfig:
    """Validated sweep description; see from_json for the file schema."""

    dataset: str
    sigmas: list
    seeds: list
    epsilon: float = 1.0
    delta: float = 0.0
    mode: str = "pure"
    columns: list | None = None
    ranges: list | None = None
    smoothness: list | None = None   # per-sigma K override; default sigma^2
    C: int | None = None             # None -> exact full-grid mechanism
    R: int | None = None
    subset: str = "pca"
    pca_fraction: float = 0.5
    subspace_dim: int | None = None
    psi_iterations: int = 10
    query_count: int = 100
    kernels_per_query: int = 10
    norm_certified: bool = False
    m_max: int | None = None
    jobs: int = 1
    feasibility_bound: int = DEFAULT_FEASIBILITY_BOUND
    out_dir: str = "synthdb-out"

    def __post_init__(self):
        if not self.sigmas:
            raise ValueError("config needs at least one sigma")
        if not self.seeds:
            raise ValueError("config needs at least one seed")
        if self.mode not in ("pure", "approx"):
            raise ValueError("mode must be 'pure' or 'approx'")
        if self.mode == "pure" and self.delta != 0.0:
            raise ValueError("pure mode requires delta = 0")
        if self.mode == "approx" and not 0.0 < self.delta < 1.0:
            raise ValueError("approx mode requires delta in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.subset not in SUBSET_ALIASES:
            raise ValueError(f"subset must be one of {sorted(set(SUBSET_ALIASES))}")
        if self.smoothness is not None and not isinstance(self.smoothness, (list, tuple)):
            self.smoothness = [self.smoothness] * len(self.sigmas)
        if self.smoothness is not None and len(self.smoothness) != len(self.sigmas):
            raise ValueError("smoothness override must match the sigma list")
        if self.query_count < 1 or self.kernels_per_query < 1:
            raise ValueError("query_count and kernels_per_query must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")

    def smoothness_for(self, i: int) -> float:
        if self.smoothness is not None:
            return float(self.smoothness[i])
        return float(self.sigmas[i]) ** 2

    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.epsilon, self.delta, pca_fraction=self.pca_fraction)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION,
                "dataset": self.dataset, "columns": self.columns,
                "ranges": self.ranges, "mode": self.mode,
                "epsilon": self.epsilon, "delta": self.delta,
                "sigmas": list(self.sigmas), "smoothness": self.smoothness,
                "C": self.C, "R": self.R, "subset": self.subset,
                "pca_fraction": self.pca_fraction,
                "subspace_dim": self.subspace_dim,
                "psi_iterations": self.psi_iterations,
                "query_count": self.query_count,
                "kernels_per_query": self.kernels_per_query,
                "norm_certified": self.norm_certified,
                "seeds": list(self.seeds), "m_max": self.m_max,
                "jobs": self.jobs, "feasibility_bound": self.feasibility_bound,
                "out_dir": self.out_dir}

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        raw.pop("schema_version", None)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def load_csv(path, selected_columns=None) -> Dataset:
    """Read a numeric CSV into a raw dataset.

    A first row that fails to parse in the selected columns is treated as a
    header.  Any other malformed row is an error naming its line number.
    """
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((lineno, row))
    if not rows:
        raise ValueError(f"{path}: no data rows")

    width = len(rows[0][1])
    cols = list(range(width)) if selected_columns is None else list(selected_columns)
    if not cols:
        raise ValueError("empty column selection")
    if any(c < 0 or c >= width for c in cols):
        raise ValueError(f"column selection {cols} outside 0..{width - 1}")

    def parse(row, lineno):
        if len(row) != width:
            raise ValueError(f"line {lineno}: expected {width} cells, got {len(row)}")
        try:
            return [float(row[c]) for c in cols]
        except ValueError:
            bad = next(row[c] for c in cols if not _is_float(row[c]))
            raise ValueError(f"line {lineno}: could not parse {bad!r}") from None

    start = 0
    try:
        parse(rows[0][1], rows[0][0])
    except ValueError:
        start = 1  # header row
        if len(rows) == 1:
            raise ValueError(f"{path}: only a header row present") from None
    data = [parse(row, lineno) for lineno, row in rows[start:]]
    return Dataset(np.array(data), stage="raw")


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def save_points(path, points) -> None:
    pts = np.asarray(points, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for row in pts:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_moment_vector(path, mv: MomentVector) -> None:
    lat = mv.lattice.L if mv.lattice is not None else "-"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"synthdb-moments,v1,{mv.kind},{lat}\n")
        for v in mv.values:
            fh.write(repr(float(v)) + "\n")


def load_moment_vector(path) -> MomentVector:
    from .core import Lattice
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["synthdb-moments", "v1"]:
            raise ValueError(f"{path}: not a moment-vector file")
        kind, lat = header[2], header[3]
        values = [float(line) for line in fh if line.strip()]
    lattice = None if lat == "-" else Lattice(int(lat))
    return MomentVector(np.array(values), kind=kind, lattice=lattice)


def save_design_matrix(path, dm: DesignMatrix) -> None:
    rows, cols = dm.values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"synthdb-design,v1,{rows},{cols},{dm.support.shape[1]}\n")
        for row in dm.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
        for pt in dm.support:
            fh.write(",".join(repr(float(v)) for v in pt) + "\n")


def load_design_matrix(path):
    """Returns (values, support) arrays; enough for external cross-checks."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["synthdb-design", "v1"]:
            raise ValueError(f"{path}: not a design-matrix file")
        rows, cols, d = int(header[2]), int(header[3]), int(header[4])
        values = np.array([[float(v) for v in fh.readline().split(",")]
                           for _ in range(rows)])
        support = np.array([[float(v) for v in fh.readline().split(",")]
                            for _ in range(cols)])
    if values.shape != (rows, cols) or support.shape != (cols, d):
        raise ValueError(f"{path}: truncated design-matrix file")
    return values, support


def _format_json(obj, indent=0) -> str:
    """json.dumps with every float at 17 significant digits."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_format_json(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_format_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, np.integer)):
        return json.dumps(obj if not isinstance(obj, np.integer) else int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if x != x or x in (float("inf"), float("-inf")):
            return json.dumps(None)
        return format(x, ".17g")
    return json.dumps(obj)


def _cell_name(sigma, seed) -> str:
    s = repr(float(sigma)).replace(".", "p").replace("-", "m")
    return f"sigma{s}_seed{seed}"


def _run_cell(cfg: ExperimentConfig, data: Dataset, sigma_index: int, seed: int):
    sigma = float(cfg.sigmas[sigma_index])
    smooth = cfg.smoothness_for(sigma_index)
    cell_seed = derive_seed(seed, "cell", sigma)
    cell = {"sigma": sigma, "seed": seed, "smoothness": smooth, "status": "ok"}
    started = time.perf_counter()
    try:
        workload = random_queries(cfg.query_count, cfg.kernels_per_query, data.d,
                                  sigma, rng_stream(seed, "queries", sigma),
                                  norm_certified=cfg.norm_certified)
        if cfg.C is None:
            sdb, report = run_full(data, smooth, cfg.budget(), seed=cell_seed,
                                   m_max=cfg.m_max,
                                   feasibility_bound=cfg.feasibility_bound)
        else:
            sdb, report = run_accelerated(data, smooth, cfg.budget(), cfg.C,
                                          R_override=cfg.R,
                                          subset_source=SUBSET_ALIASES[cfg.subset],
                                          seed=cell_seed,
                                          subspace_dim=cfg.subspace_dim,
                                          psi_iterations=cfg.psi_iterations,
                                          m_max=cfg.m_max)
        true_ans = np.array([evaluate_query(q, data) for q in workload])
        synth_ans = np.array([evaluate_query(q, sdb) for q in workload])
        metrics = error_metrics(true_ans, synth_ans)
        cell.update({
            "worst_abs": metrics.worst_abs,
            "worst_rel": metrics.worst_rel,
            "median_rel": metrics.median_rel,
            "rel_excluded": metrics.rel_excluded,
            "params": {"t": sdb.params.t, "N": sdb.params.N, "m": sdb.params.m,
                       "L": sdb.params.L, "C": sdb.params.C, "R": sdb.params.R,
                       "mode": sdb.params.mode},
            "diagnostics": report.to_dict(),
        })
        points = sdb.points
    except Exception as exc:  # per-cell isolation
        cell.update({"status": "failed", "error": f"{type(exc).__name__}: {exc}"})
        points = None
    cell["time_s"] = time.perf_counter() - started
    return cell, points


@dataclass
class ExperimentResult:
    report: dict
    report_path: Path
    synthetic_path: Path | None
    failed_cells: int

    @property
    def all_ok(self) -> bool:
        return self.failed_cells == 0


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the sweep, write synthetic CSVs and report.json, return a summary.

    Writes one synthetic_<cell>.csv per cell plus synthetic.csv for the
    first cell in sweep order (the canonical artifact checked for
    reproducibility).  Identical config and seeds reproduce every file
    byte for byte.
    """
    raw = load_csv(cfg.dataset, cfg.columns)
    if cfg.ranges is not None:
        ranges = [tuple(r) for r in cfg.ranges]
    else:
        warnings.warn(
            "no attribute ranges in config: normalizing with the data's own "
            "min/max, which leaks information beyond the stated epsilon",
            UserWarning)
        ranges = [(float(lo), float(hi)) if hi > lo else (float(lo), float(lo) + 1.0)
                  for lo, hi in zip(raw.points.min(axis=0), raw.points.max(axis=0))]
    data = normalize_dataset(raw, ranges)

    cells_spec = [(i, seed) for i in range(len(cfg.sigmas)) for seed in cfg.seeds]
    results = [None] * len(cells_spec)
    if cfg.jobs == 1:
        for pos, (i, seed) in enumerate(cells_spec):
            results[pos] = _run_cell(cfg, data, i, seed)
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_run_cell, cfg, data, i, seed)
                       for i, seed in cells_spec]
            results = [f.result() for f in futures]

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    synthetic_path = None
    cells = []
    for pos, ((i, seed), (cell, points)) in enumerate(zip(cells_spec, results)):
        cells.append(cell)
        if points is not None:
            name = f"synthetic_{_cell_name(cfg.sigmas[i], seed)}.csv"
            save_points(out / name, points)
            if pos == 0:
                save_points(out / "synthetic.csv", points)
                synthetic_path = out / "synthetic.csv"

    params = {}
    for i, sigma in enumerate(cfg.sigmas):
        try:
            p = derive_params(data.n, data.d, cfg.smoothness_for(i), cfg.budget())
            params[str(float(sigma))] = {"t": p.t, "N": p.N, "m": p.m, "L": p.L,
                                         "mode": p.mode}
        except Exception as exc:
            params[str(float(sigma))] = {"error": str(exc)}

    aggregate = {}
    for i, sigma in enumerate(cfg.sigmas):
        ok = [c for c in cells if c["sigma"] == float(sigma) and c["status"] == "ok"]
        failed = [c for c in cells if c["sigma"] == float(sigma) and c["status"] != "ok"]
        entry = {"cells_ok": len(ok), "cells_failed": len(failed)}
        if ok:
            for key in ("worst_abs", "worst_rel", "median_rel", "time_s"):
                vals = [c[key] for c in ok if c[key] == c[key]]
                entry[f"mean_{key}"] = float(np.mean(vals)) if vals else None
        aggregate[str(float(sigma))] = entry

    report = {"config": cfg.to_dict(), "params": params, "cells": cells,
              "aggregate": aggregate}
    report_path = out / "report.json"
    report_path.write_text(_format_json(report) + "\n", encoding="utf-8")
    failed = sum(1 for c in cells if c["status"] != "ok")
    return ExperimentResult(report=report, report_path=report_path,
                            synthetic_path=synthetic_path, failed_cells=failed)
