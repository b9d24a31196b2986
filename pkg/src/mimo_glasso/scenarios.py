"""Monte-Carlo sweeps over the array size and their CSV output.

Two sweep shapes are supported:

``fixed-load``
    ``K = ceil(alpha_k M)`` users, ``L = ceil(alpha_l M)`` selected.
``fixed-users``
    ``K`` fixed, one cell per ``L`` in ``l_values``.

Trial ``t`` of a cell draws its channel from a substream keyed by
``(M, K, t)`` only, so both methods (and every ``L`` of a fixed-users sweep)
see the same realization, and results do not depend on execution order or on
the number of worker processes.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .channel import sample_rayleigh, substream
from .metrics import NoiseProfile, avg_throughput, power_leakage, rss
from .precoder import DegenerateSolutionError, group_lasso_precoder, mrt_random
from .solver import SolverConfig

__all__ = [
    "METHODS",
    "CSV_COLUMNS",
    "ScenarioConfig",
    "SweepRecord",
    "cells",
    "run_trial",
    "run_sweep",
    "emit_csv",
    "read_csv",
    "load_config",
]

log = logging.getLogger(__name__)

METHODS = ("group-lasso", "mrt")
MODES = ("fixed-load", "fixed-users")
CSV_COLUMNS = (
    "method", "M", "K", "L", "trials",
    "mean_avg_throughput", "stderr_throughput",
    "mean_leakage", "stderr_leakage", "mean_rss",
)

# stream tags inside the master seed's key space
_CHANNEL_STREAM = 0
_MRT_STREAM = 1
_MAX_REDRAWS = 100
_FLAG_FRACTION = 0.01


def _ceil(x: float) -> int:
    # 0.3 * 10 must give 3, not 4
    return math.ceil(round(x, 9))


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str = "fixed-load"
    m_values: tuple = (4, 8, 16, 32, 64)
    alpha_k: float = 1.0
    alpha_l: float = 0.3
    k_users: int = 16
    l_values: tuple = (8,)
    power: float = 1.0
    noise_variance: float = 0.1
    beta: float = 1.0
    trials: int = 200
    master_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    methods: tuple = METHODS

    def __post_init__(self):
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        object.__setattr__(self, "l_values", tuple(int(x) for x in self.l_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if isinstance(self.solver, dict):
            opts = dict(self.solver)
            if "lambda" in opts:
                opts["lam"] = opts.pop("lambda")
            object.__setattr__(self, "solver", SolverConfig(**opts))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.m_values or any(m < 1 for m in self.m_values):
            raise ValueError("m_values must be a nonempty list of positive integers")
        if list(self.m_values) != sorted(set(self.m_values)):
            raise ValueError("m_values must be strictly ascending")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ValueError(f"methods must be a nonempty subset of {METHODS}")
        if not self.power > 0:
            raise ValueError("power must be > 0")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be > 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if self.mode == "fixed-load":
            if not 0 < self.alpha_l <= self.alpha_k:
                raise ValueError("need 0 < alpha_l <= alpha_k")
        else:
            if self.k_users < 1:
                raise ValueError("k_users must be positive")
            if not self.l_values or any(not 1 <= x <= self.k_users for x in self.l_values):
                raise ValueError(f"every L must lie in [1, {self.k_users}]")

    def solver_config(self) -> SolverConfig:
        """Solver settings with this scenario's ``beta``."""
        return self.solver.with_(beta=self.beta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["m_values"] = list(self.m_values)
        d["l_values"] = list(self.l_values)
        d["methods"] = list(self.methods)
        return d


@dataclass(frozen=True)
class SweepRecord:
    method: str
    m: int
    k: int
    l: int
    mean_avg_throughput: float
    mean_leakage: float
    mean_rss: float
    trials: int
    stderr_throughput: float
    stderr_leakage: float
    degenerate: int = 0

    @property
    def flagged(self) -> bool:
        """More than 1% of the cell's trials needed a redraw."""
        return self.degenerate > _FLAG_FRACTION * self.trials

    def sort_key(self):
        return (self.method, self.m, self.l)


def cells(cfg: ScenarioConfig) -> list:
    """``(M, K, L)`` triples of the sweep, in order."""
    out = []
    for m in cfg.m_values:
        if cfg.mode == "fixed-load":
            k, l = _ceil(cfg.alpha_k * m), _ceil(cfg.alpha_l * m)
            if not 1 <= l <= k:
                raise ValueError(f"M={m} gives L={l}, K={k}")
            out.append((m, k, l))
        else:
            out.extend((m, cfg.k_users, l) for l in cfg.l_values)
    return out


def run_trial(cfg: ScenarioConfig, method: str, m: int, k: int, l: int, trial: int):
    """One Monte-Carlo trial: returns ``(throughput, leakage, rss, redraws)``."""
    noise = NoiseProfile.uniform(k, cfg.noise_variance)
    redraws = 0
    for attempt in range(_MAX_REDRAWS):
        key = (_CHANNEL_STREAM, m, k, trial) if attempt == 0 else (_CHANNEL_STREAM, m, k, trial, attempt)
        h = sample_rayleigh(m, k, substream(cfg.master_seed, *key))
        if method == "mrt":
            out = mrt_random(h, cfg.power, l, substream(cfg.master_seed, _MRT_STREAM, m, k, l, trial, attempt))
        else:
            try:
                out = group_lasso_precoder(h, cfg.power, l, cfg.solver_config())
            except DegenerateSolutionError as exc:
                redraws += 1
                log.warning("degenerate solution at M=%d K=%d L=%d trial=%d: %s", m, k, l, trial, exc)
                continue
        return (
            avg_throughput(h, out, noise),
            power_leakage(h, out),
            rss(h, out.v_matrix, cfg.beta, out.n_selected, k),
            redraws,
        )
    raise RuntimeError(f"{_MAX_REDRAWS} degenerate draws in a row at M={m} K={k} L={l} trial={trial}")


def _run_trial_packed(args):
    return run_trial(*args)


def _summarize(method, m, k, l, rows) -> SweepRecord:
    arr = np.asarray([r[:3] for r in rows], dtype=float)
    n = arr.shape[0]
    mean = arr.mean(axis=0)
    se = arr.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(3)
    return SweepRecord(
        method=method, m=m, k=k, l=l,
        mean_avg_throughput=float(mean[0]),
        mean_leakage=float(mean[1]),
        mean_rss=float(mean[2]),
        trials=n,
        stderr_throughput=float(se[0]),
        stderr_leakage=float(se[1]),
        degenerate=int(sum(r[3] for r in rows)),
    )


def run_sweep(cfg: ScenarioConfig, workers: int = 1) -> list:
    """Run every ``(method, cell)`` of the sweep and aggregate across trials."""
    jobs = [(method, m, k, l) for (m, k, l) in cells(cfg) for method in cfg.methods]
    tasks = [(cfg, method, m, k, l, t) for (method, m, k, l) in jobs for t in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_packed, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = [run_trial(*t) for t in tasks]

    records = []
    for i, (method, m, k, l) in enumerate(jobs):
        rows = results[i * cfg.trials:(i + 1) * cfg.trials]
        rec = _summarize(method, m, k, l, rows)
        if rec.flagged:
            log.warning("cell %s M=%d K=%d L=%d flagged: %d degenerate draws in %d trials",
                        method, m, k, l, rec.degenerate, rec.trials)
        records.append(rec)
    return records


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def emit_csv(records, path) -> None:
    """Write records sorted by ``(method, M, L)`` with round-trippable floats."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    rows = sorted(records, key=SweepRecord.sort_key)
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in rows:
                writer.writerow([
                    r.method, _fmt(r.m), _fmt(r.k), _fmt(r.l), _fmt(r.trials),
                    _fmt(r.mean_avg_throughput), _fmt(r.stderr_throughput),
                    _fmt(r.mean_leakage), _fmt(r.stderr_leakage), _fmt(r.mean_rss),
                ])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> list:
    """Parse a file written by :func:`emit_csv` back into records."""
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            SweepRecord(
                method=row["method"], m=int(row["M"]), k=int(row["K"]), l=int(row["L"]),
                trials=int(row["trials"]),
                mean_avg_throughput=float(row["mean_avg_throughput"]),
                stderr_throughput=float(row["stderr_throughput"]),
                mean_leakage=float(row["mean_leakage"]),
                stderr_leakage=float(row["stderr_leakage"]),
                mean_rss=float(row["mean_rss"]),
            )
            for row in reader
        ]


def load_config(path) -> ScenarioConfig:
    """Read a ``key: value`` (YAML) file whose keys are ScenarioConfig fields."""
    import yaml

    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping of ScenarioConfig fields")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    return ScenarioConfig(**data)
