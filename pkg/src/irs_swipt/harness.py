"""Monte Carlo sweeps: seeded trials, algorithm dispatch, aggregation, CSV/SVG output."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .algorithms import (BcdOptions, DesignError, UnsupportedDimensions, baseline_no_irs,
                         bcd_mrt, bcd_sdr, bcd_zf)
from .channel import SystemConfig, draw_realization
from .metrics import qos_check

log = logging.getLogger("irs_swipt.harness")

AXES = {
    "M": "num_bs_antennas",
    "N": "num_irs_elements",
    "sinr_target_db": "sinr_target_db",
    "eh_target_dbm": "eh_target_dbm",
}
ALGORITHMS = ("bcd", "mrt", "zf", "bcd-noirs", "mrt-noirs", "zf-noirs")
STATUSES = ("ok", "infeasible", "degenerate", "numerical-failure")
CSV_HEADER = ("sweep_axis", "sweep_value", "algorithm", "seed", "status", "power_w",
              "power_dbw", "iterations", "min_sinr_margin", "min_eh_margin", "wall_ms")

_RUNNERS: dict[str, Callable] = {
    "bcd": bcd_sdr,
    "mrt": bcd_mrt,
    "zf": bcd_zf,
    "bcd-noirs": lambda cfg, real, opts: baseline_no_irs(cfg, real, "optimal", opts),
    "mrt-noirs": lambda cfg, real, opts: baseline_no_irs(cfg, real, "mrt", opts),
    "zf-noirs": lambda cfg, real, opts: baseline_no_irs(cfg, real, "zf", opts),
}


class ConfigError(ValueError):
    pass


def child_seed(master: int, sweep_index: int, trial: int) -> int:
    """Pack ``(master, sweep_index, trial)`` into one integer; injective by construction."""
    if master < 0 or not 0 <= sweep_index < 2**32 or not 0 <= trial < 2**32:
        raise ValueError("seed components out of range")
    return (int(master) << 64) | (int(sweep_index) << 32) | int(trial)


@dataclass
class ExperimentSpec:
    config: SystemConfig = field(default_factory=SystemConfig)
    sweep_axis: str = "N"
    sweep_values: tuple = (10, 30, 50, 70)
    algorithms: tuple[str, ...] = ALGORITHMS
    trials: int = 50
    seed: int = 0
    out_dir: str = "results"
    # every sweep point sees the same drops (paired comparisons, nested channels)
    common_random_numbers: bool = True
    workers: int = 1
    options: BcdOptions = field(default_factory=BcdOptions)
    # wall-clock column; switch off for byte-reproducible CSV files
    timing: bool = True

    def __post_init__(self):
        if self.sweep_axis not in AXES:
            raise ConfigError(f"sweep axis must be one of {sorted(AXES)}")
        self.sweep_values = tuple(self.sweep_values)
        if not self.sweep_values:
            raise ConfigError("sweep value list is empty")
        if self.sweep_axis in ("M", "N"):
            if any(float(v) != int(v) for v in self.sweep_values):
                raise ConfigError(f"{self.sweep_axis} values must be integers")
            self.sweep_values = tuple(int(v) for v in self.sweep_values)
        else:
            self.sweep_values = tuple(float(v) for v in self.sweep_values)
        self.algorithms = tuple(self.algorithms)
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for v in self.sweep_values:
            try:
                self.point_config(v)
            except ValueError as exc:
                raise ConfigError(f"invalid sweep value {v!r}: {exc}") from exc

    def point_config(self, value) -> SystemConfig:
        return self.config.with_(**{AXES[self.sweep_axis]: value})

    def skipped(self) -> list[tuple[object, str, str]]:
        """``(value, algorithm, reason)`` for combinations that are not run."""
        out = []
        for v in self.sweep_values:
            cfg = self.point_config(v)
            for a in self.algorithms:
                if a.startswith("zf") and cfg.num_bs_antennas < cfg.num_users:
                    out.append((v, a, f"zero forcing needs M >= K (M={cfg.num_bs_antennas}, "
                                      f"K={cfg.num_users})"))
        return out

    def realization_seed(self, sweep_index: int, trial: int) -> int:
        return child_seed(self.seed, 0 if self.common_random_numbers else sweep_index, trial)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        known = {"config", "sweep", "sweep_axis", "sweep_values", "algorithms", "trials",
                 "seed", "out_dir", "common_random_numbers", "workers", "options", "timing"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        try:
            kw = {}
            if "config" in d:
                kw["config"] = SystemConfig.from_dict(d.pop("config"))
            if "options" in d:
                kw["options"] = BcdOptions(**d.pop("options"))
            if "sweep" in d:
                sw = d.pop("sweep")
                kw["sweep_axis"], kw["sweep_values"] = sw["axis"], sw["values"]
            kw.update(d)
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "sweep": {"axis": self.sweep_axis, "values": list(self.sweep_values)},
            "algorithms": list(self.algorithms),
            "trials": self.trials,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "common_random_numbers": self.common_random_numbers,
            "workers": self.workers,
            "options": asdict(self.options),
            "timing": self.timing,
        }


@dataclass
class TrialRecord:
    sweep_axis: str
    sweep_value: float
    algorithm: str
    seed: int
    status: str
    power_w: float = math.nan
    power_dbw: float = math.nan
    iterations: int = 0
    min_sinr_margin: float = math.nan
    min_eh_margin: float = math.nan
    wall_ms: float = 0.0
    max_rank_ratio: float = math.nan
    termination: str = ""
    note: str = ""
    sweep_index: int = 0
    trial: int = 0
    objectives: tuple[float, ...] = ()

    def csv_row(self) -> list[str]:
        return [self.sweep_axis, _fmt(self.sweep_value), self.algorithm, str(self.seed),
                self.status, _fmt(self.power_w), _fmt(self.power_dbw), str(self.iterations),
                _fmt(self.min_sinr_margin), _fmt(self.min_eh_margin), _fmt(self.wall_ms)]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def run_algorithm(name: str, cfg: SystemConfig, real, opts: BcdOptions, *, sweep_axis="",
                  sweep_value=0.0, sweep_index=0, trial=0) -> TrialRecord:
    rec = TrialRecord(sweep_axis, sweep_value, name, real.seed, "numerical-failure",
                      sweep_index=sweep_index, trial=trial)
    t0 = time.perf_counter()
    try:
        design, trace = _RUNNERS[name](cfg, real, opts)
    except DesignError as exc:
        rec.status, rec.note = exc.status, str(exc)
        design = trace = None
    except UnsupportedDimensions as exc:
        rec.status, rec.note = "degenerate", str(exc)
        design = trace = None
    except Exception as exc:  # a single bad trial must not abort the sweep
        log.exception("%s failed on seed %s", name, real.seed)
        rec.status, rec.note = "numerical-failure", f"{type(exc).__name__}: {exc}"
        design = trace = None
    rec.wall_ms = (time.perf_counter() - t0) * 1e3
    if trace is not None:
        rec.iterations = trace.iterations
        rec.termination = trace.termination
        rec.objectives = tuple(trace.objectives)
        if trace.rank_ratios_w:
            rec.max_rank_ratio = float(np.max(np.concatenate(trace.rank_ratios_w)))
        if design is None:
            rec.status, rec.note = trace.status, "; ".join(trace.notes)
    if design is not None:
        noirs = name.endswith("-noirs")
        q = qos_check(design, real.without_irs() if noirs else real,
                      cfg.with_(num_irs_elements=0) if noirs else cfg)
        rec.power_w = design.power
        rec.power_dbw = design.power_dbw
        rec.min_sinr_margin = q.min_sinr_margin
        rec.min_eh_margin = q.min_eh_margin
        if q.feasible:
            rec.status = "ok"
        else:
            rec.status = "numerical-failure"
            rec.note = f"design fails the QoS check (worst violation {q.worst_violation:.3e})"
    return rec


def _run_point(spec: ExperimentSpec, sweep_index: int, trial: int,
               skip: frozenset) -> list[TrialRecord]:
    value = spec.sweep_values[sweep_index]
    cfg = spec.point_config(value)
    real = draw_realization(cfg, spec.realization_seed(sweep_index, trial))
    out = []
    for name in spec.algorithms:
        if (value, name) in skip:
            continue
        rec = run_algorithm(name, cfg, real, spec.options, sweep_axis=spec.sweep_axis,
                            sweep_value=value, sweep_index=sweep_index, trial=trial)
        if not spec.timing:
            rec.wall_ms = 0.0
        out.append(rec)
    return out


def _run_chunk(args):
    spec, items, skip = args
    return [_run_point(spec, i, t, skip) for i, t in items]


@dataclass
class Aggregate:
    sweep_value: float
    algorithm: str
    trials: int
    ok: int
    infeasible_rate: float
    mean_dbw: float
    se_dbw: float
    mean_w: float


AGG_HEADER = ("sweep_axis", "sweep_value", "algorithm", "trials", "ok", "infeasible_rate",
              "mean_power_dbw", "se_power_dbw", "mean_power_w")


def aggregate(records: Sequence[TrialRecord]) -> list[Aggregate]:
    """Per (sweep value, algorithm): mean and standard error of the dBW power over ok trials."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.sweep_index, r.sweep_value, r.algorithm), []).append(r)
    out = []
    order = {a: i for i, a in enumerate(ALGORITHMS)}
    for (_, value, algo), recs in sorted(groups.items(),
                                         key=lambda kv: (kv[0][0], order[kv[0][2]])):
        ok = [r for r in recs if r.status == "ok"]
        dbw = np.array([r.power_dbw for r in ok])
        n = len(ok)
        out.append(Aggregate(
            sweep_value=value, algorithm=algo, trials=len(recs), ok=n,
            infeasible_rate=sum(r.status == "infeasible" for r in recs) / len(recs),
            mean_dbw=float(dbw.mean()) if n else math.nan,
            se_dbw=float(dbw.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
            mean_w=float(np.mean([r.power_w for r in ok])) if n else math.nan,
        ))
    return out


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: list[TrialRecord]
    aggregates: list[Aggregate]
    skipped: list[tuple]

    def table(self, algorithm: str) -> list[Aggregate]:
        return [a for a in self.aggregates if a.algorithm == algorithm]

    def powers(self, algorithm: str, sweep_index: int) -> dict[int, float]:
        """``trial -> power_w`` of ok records (for paired comparisons)."""
        return {r.trial: r.power_w for r in self.records
                if r.algorithm == algorithm and r.sweep_index == sweep_index and r.status == "ok"}


def run_experiment(spec: ExperimentSpec, progress: Callable[[int, int], None] | None = None
                   ) -> ExperimentResult:
    """Run every (sweep point, trial) and every algorithm on a shared realization.

    Work items are spread over ``spec.workers`` processes; records are
    returned in (sweep index, trial, algorithm) order regardless of
    completion order, so the output is deterministic.
    """
    skipped = spec.skipped()
    for v, a, why in skipped:
        log.warning("skipping %s at %s=%s: %s", a, spec.sweep_axis, v, why)
    skip = frozenset((v, a) for v, a, _ in skipped)
    items = [(i, t) for i in range(len(spec.sweep_values)) for t in range(spec.trials)]
    results: dict[tuple[int, int], list[TrialRecord]] = {}
    if spec.workers == 1:
        for n, (i, t) in enumerate(items):
            results[(i, t)] = _run_point(spec, i, t, skip)
            if progress:
                progress(n + 1, len(items))
    else:
        chunks = [items[j::spec.workers] for j in range(spec.workers)]
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for chunk, recs in zip(chunks, pool.map(_run_chunk, [(spec, c, skip) for c in chunks])):
                for key, r in zip(chunk, recs):
                    results[key] = r
    records = [r for key in sorted(results) for r in results[key]]
    return ExperimentResult(spec, records, aggregate(records), skipped)


def _open_for_write(path):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_csv(records: Sequence[TrialRecord], path) -> Path:
    if not records:
        raise ValueError("no records to write")
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.csv_row())
    return Path(path)


def emit_summary(aggregates: Sequence[Aggregate], path, sweep_axis: str) -> Path:
    if not aggregates:
        raise ValueError("no aggregates to write")
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for a in aggregates:
            w.writerow([sweep_axis, _fmt(a.sweep_value), a.algorithm, a.trials, a.ok,
                        _fmt(a.infeasible_rate), _fmt(a.mean_dbw), _fmt(a.se_dbw),
                        _fmt(a.mean_w)])
    return Path(path)


_AXIS_LABEL = {"M": "BS antennas M", "N": "IRS elements N",
               "sinr_target_db": "SINR target (dB)", "eh_target_dbm": "EH target (dBm)"}
_STYLE = {"bcd": ("C0", "-", "o"), "mrt": ("C1", "-", "s"), "zf": ("C2", "-", "^"),
          "bcd-noirs": ("C0", "--", "o"), "mrt-noirs": ("C1", "--", "s"),
          "zf-noirs": ("C2", "--", "^")}


def emit_plot(aggregates: Sequence[Aggregate], path, sweep_axis: str = "N",
              title: str | None = None) -> Path:
    """Static SVG: one line per algorithm, mean power (dBW) against the sweep value."""
    if not aggregates:
        raise ValueError("no aggregates to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.2))
    for algo in ALGORITHMS:
        pts = [a for a in aggregates if a.algorithm == algo]
        if not pts:
            continue
        color, ls, marker = _STYLE[algo]
        ax.plot([a.sweep_value for a in pts], [a.mean_dbw for a in pts], color=color,
                linestyle=ls, marker=marker, label=algo)
    ax.set_xlabel(_AXIS_LABEL.get(sweep_axis, sweep_axis))
    ax.set_ylabel("mean transmit power (dBW)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with plt.rc_context({"svg.hashsalt": "irs-swipt"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
    return path


def write_outputs(result: ExperimentResult, out_dir=None) -> dict[str, Path]:
    out = Path(out_dir or result.spec.out_dir)
    paths = {
        "trials": emit_csv(result.records, out / "trials.csv"),
        "summary": emit_summary(result.aggregates, out / "summary.csv", result.spec.sweep_axis),
    }
    if any(not math.isnan(a.mean_dbw) for a in result.aggregates):
        paths["plot"] = emit_plot(result.aggregates, out / "power.svg", result.spec.sweep_axis)
    spec_path = out / "spec.json"
    spec_path.write_text(json.dumps(result.spec.to_dict(), indent=2) + "\n", encoding="utf-8")
    paths["spec"] = spec_path
    return paths


def default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, 8))
