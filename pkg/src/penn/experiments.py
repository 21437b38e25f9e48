"""Experiment grids that reproduce the shape of the comparison tables.

Every runner trains a grid of (model, regime, target, seed, ...) runs on the
synthetic data and returns an :class:`ExperimentResult` holding a table with
the same rows and columns as the matching comparison table, plus one row
per individual run.
"""
from __future__ import annotations

import csv
import logging
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .dataset import DatasetSplit, drop_zero_impulse, split
from .errors import DivergenceError
from .harness import BATCH_SIZE, TrainConfig, compare_latency, default_schedule, train
from .networks import MODEL_KINDS, build_network
from .synth import SyntheticGenConfig, synth_generate

log = logging.getLogger(__name__)

TARGETS = ("thrust", "impulse")
RESULT_COLUMNS = [
    f"{group}_{col}" for group in ("hs", "ls", "synthesis") for col in ("thrust", "impulse", "average")
]
NONCONVERGED_MAPE = 100.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Desk-scale defaults; raise counts/epochs toward 50000/20000/150 for full scale."""

    regimes: tuple[str, ...] = ("hs", "ls")
    hs_count: int = 3200
    ls_count: int = 3200
    noise_sd: float | None = None
    data_seed: int = 0
    split_ratios: tuple[float, ...] = (0.625, 0.1875, 0.1875)
    epochs: int = 150
    seeds: tuple[int, ...] = (0, 1, 2)
    models: tuple[str, ...] = ()  # empty: runner default
    losses: tuple[str, ...] = ("mse", "mae", "mare")
    hs_factors: tuple[float, ...] = (1, 5, 20, 200, 500)
    ls_factors: tuple[float, ...] = (1, 5, 20, 100, 200)
    scale_factors: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    hs_batch_size: int = BATCH_SIZE["hs"]
    ls_batch_size: int = BATCH_SIZE["ls"]
    timing_passes: int = 10_000


@dataclass
class ExperimentResult:
    name: str
    columns: list[str]
    table: list[dict]
    runs: list[dict]
    meta: dict = field(default_factory=dict)

    def write(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / f"{self.name}.csv", out_dir / f"{self.name}_runs.csv"]
        _write_rows(paths[0], self.columns, self.table)
        if self.runs:
            _write_rows(paths[1], list(self.runs[0]), self.runs)
        else:
            paths.pop()
        if self.meta:
            meta_path = out_dir / f"{self.name}_meta.txt"
            meta_path.write_text("".join(f"{k}: {v}\n" for k, v in self.meta.items()), encoding="utf-8")
            paths.append(meta_path)
        return paths

    def summary(self) -> str:
        widths = {c: max(len(c), *(len(_fmt(r[c])) for r in self.table)) if self.table else len(c) for c in self.columns}
        lines = ["  ".join(c.ljust(widths[c]) for c in self.columns)]
        for row in self.table:
            lines.append("  ".join(_fmt(row[c]).ljust(widths[c]) for c in self.columns))
        return "\n".join(lines)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def _write_rows(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


class _Data:
    """Per-regime splits, generated once per experiment."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._cache: dict[str, DatasetSplit] = {}

    def __getitem__(self, regime: str) -> DatasetSplit:
        if regime not in self._cache:
            count = self.cfg.hs_count if regime == "hs" else self.cfg.ls_count
            gen = SyntheticGenConfig(regime, count, self.cfg.noise_sd, self.cfg.data_seed)
            ds = drop_zero_impulse(synth_generate(gen))
            self._cache[regime] = split(ds, self.cfg.split_ratios, seed=self.cfg.data_seed)
        return self._cache[regime]


def _run(cfg: ExperimentConfig, data: _Data, experiment: str, model: str, regime: str, target: str, seed: int,
         loss: str = "mare", width: float = 1.0, factor: float = 1.0) -> dict:
    return _fit_run(cfg, data, experiment, model, regime, target, seed, loss, width, factor)[0]


def _fit_run(cfg: ExperimentConfig, data: _Data, experiment: str, model: str, regime: str, target: str, seed: int,
             loss: str = "mare", width: float = 1.0, factor: float = 1.0):
    """One training run; returns (result row, fitted estimator or None if it diverged)."""
    lr, milestones, decay = default_schedule(model, cfg.epochs)
    tc = TrainConfig(
        model=model,
        width_multiplier=width,
        target=target,
        loss=loss,
        epochs=cfg.epochs,
        batch_size=cfg.hs_batch_size if regime == "hs" else cfg.ls_batch_size,
        learning_rate=lr,
        lr_milestones=milestones,
        lr_decay=decay,
        seed=seed,
        regime=regime,
        subsample=factor,
    )
    row = {
        "experiment": experiment,
        "model": build_network(model, width).name,
        "width_multiplier": width,
        "loss": loss,
        "regime": regime,
        "target": target,
        "seed": seed,
        "factor": factor,
        "n_train": int(len(data[regime].train) // factor),
        "params": build_network(model, width).n_params,
        "test_mape": float("nan"),
        "best_val_mape": float("nan"),
        "converged": False,
        "train_seconds": float("nan"),
        "inference_seconds": float("nan"),
    }
    try:
        est, report = train(tc, data=data[regime], latency_passes=0)
    except DivergenceError as exc:
        log.warning("run diverged: %s %s %s seed %d factor %g: %s", model, regime, target, seed, factor, exc)
        return row, None
    row.update(
        test_mape=report.test_mape[target],
        best_val_mape=report.val_mape,
        converged=report.converged,
        train_seconds=report.train_seconds,
    )
    log.info("%s %s %s %s seed %d factor %g -> %.3f%%", experiment, row["model"], regime, target, seed, factor,
             row["test_mape"])
    return row, est


def _mean(values) -> float:
    vals = [v for v in values]
    return float(np.mean(vals)) if vals else float("nan")


def _result_columns(runs: list[dict], regimes, match) -> dict:
    """Seed-averaged thrust/impulse/average MAPE per regime, plus synthesis."""
    out = {}
    for regime in ("hs", "ls"):
        for target in TARGETS:
            out[f"{regime}_{target}"] = _mean(
                r["test_mape"] for r in runs if match(r) and r["regime"] == regime and r["target"] == target
            ) if regime in regimes else float("nan")
        out[f"{regime}_average"] = (out[f"{regime}_thrust"] + out[f"{regime}_impulse"]) / 2.0
    for col in ("thrust", "impulse", "average"):
        out[f"synthesis_{col}"] = (out[f"hs_{col}"] + out[f"ls_{col}"]) / 2.0
    return out


def run_comparative(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    models = cfg.models or MODEL_KINDS
    data = _Data(cfg)
    runs = [
        _run(cfg, data, "comparative", m, regime, t, s)
        for m in models for regime in cfg.regimes for t in TARGETS for s in cfg.seeds
    ]
    table = []
    for m in models:
        net = build_network(m)
        row = {"model": net.name, "params": net.n_params}
        row.update(_result_columns(runs, cfg.regimes, lambda r, name=net.name: r["model"] == name))
        table.append(row)
    return ExperimentResult("comparative", ["model", "params"] + RESULT_COLUMNS, table, runs)


def run_loss_ablation(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    models = cfg.models or ("mlp-mul", "penn-bnf")
    data = _Data(cfg)
    runs = [
        _run(cfg, data, "loss", m, regime, t, s, loss=loss)
        for m in models for loss in cfg.losses for regime in cfg.regimes for t in TARGETS for s in cfg.seeds
    ]
    table = []
    for m in models:
        name = build_network(m).name
        for loss in cfg.losses:
            row = {"loss": loss.upper(), "model": name}
            row.update(_result_columns(
                runs, cfg.regimes, lambda r, name=name, loss=loss: r["model"] == name and r["loss"] == loss
            ))
            table.append(row)
    return ExperimentResult("loss_ablation", ["loss", "model"] + RESULT_COLUMNS, table, runs)


def run_size_dependence(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    """Train on subsampled training splits; hyperparameters stay fixed."""
    models = cfg.models or ("mlp-mul", "penn-bnf")
    data = _Data(cfg)
    runs = []
    for m in models:
        for regime in cfg.regimes:
            factors = cfg.hs_factors if regime == "hs" else cfg.ls_factors
            for factor in factors:
                for t in TARGETS:
                    for s in cfg.seeds:
                        runs.append(_run(cfg, data, "size", m, regime, t, s, factor=factor))
    table = []
    for m in models:
        name = build_network(m).name
        for regime in cfg.regimes:
            factors = cfg.hs_factors if regime == "hs" else cfg.ls_factors
            for factor in factors:
                sel = [r for r in runs if r["model"] == name and r["regime"] == regime and r["factor"] == factor]
                thrust = _mean(_capped(r) for r in sel if r["target"] == "thrust")
                impulse = _mean(_capped(r) for r in sel if r["target"] == "impulse")
                table.append({
                    "model": name,
                    "regime": regime,
                    "factor": factor,
                    "n_train": sel[0]["n_train"],
                    "thrust": thrust,
                    "impulse": impulse,
                    "average": (thrust + impulse) / 2.0,
                    "converged": all(r["converged"] for r in sel),
                })
    columns = ["model", "regime", "factor", "n_train", "thrust", "impulse", "average", "converged"]
    return ExperimentResult("size_dependence", columns, table, runs)


def _capped(row: dict) -> float:
    # diverged runs enter curve means at the non-convergence threshold
    v = row["test_mape"]
    return v if row["converged"] and np.isfinite(v) else max(NONCONVERGED_MAPE, v if np.isfinite(v) else 0.0)


def _family(cfg: ExperimentConfig) -> list[float]:
    return [float(f) for f in cfg.scale_factors]


def run_scaling_family(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    data = _Data(cfg)
    runs = [
        _run(cfg, data, "scaling", "penn-bnf", regime, t, s, width=w)
        for w in _family(cfg) for regime in cfg.regimes for t in TARGETS for s in cfg.seeds
    ]
    table = []
    for w in _family(cfg):
        net = build_network("penn-bnf", w)
        row = {"model": net.name, "params": net.n_params}
        row.update(_result_columns(runs, cfg.regimes, lambda r, name=net.name: r["model"] == name))
        table.append(row)
    return ExperimentResult("scaling_family", ["model", "params"] + RESULT_COLUMNS, table, runs)


def hardware_description() -> str:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return (f"{cpu}; {os.cpu_count()} logical CPU(s); {platform.system()} {platform.release()}; "
            f"Python {sys.version.split()[0]}; numpy {np.__version__}; single-threaded BLAS")


def bench_timing(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    """Training wall time and single-sample inference latency per family member.

    All members of one regime are timed together (interleaved), single-threaded.
    """
    data = _Data(cfg)
    widths = _family(cfg)
    runs = []
    with threadpool_limits(limits=1):
        for regime in cfg.regimes:
            fitted = [_fit_run(cfg, data, "timing", "penn-bnf", regime, "thrust", cfg.seeds[0], width=w) for w in widths]
            rows = [row for row, _ in fitted]
            ok = [(row, est) for row, est in fitted if est is not None]
            latencies = compare_latency([est for _, est in ok], data[regime].test.X, cfg.timing_passes)
            for (row, _), latency in zip(ok, latencies):
                row["inference_seconds"] = latency
            runs.extend(rows)
    table = []
    for w in widths:
        name = build_network("penn-bnf", w).name
        row = {"model": name}
        for regime in ("hs", "ls"):
            sel = [r for r in runs if r["model"] == name and r["regime"] == regime]
            row[f"{regime}_training_s"] = sel[0]["train_seconds"] if sel else float("nan")
            row[f"{regime}_inference_s"] = sel[0]["inference_seconds"] if sel else float("nan")
        table.append(row)
    columns = ["model", "hs_training_s", "hs_inference_s", "ls_training_s", "ls_inference_s"]
    meta = {"hardware": hardware_description(), "inference_passes": cfg.timing_passes}
    return ExperimentResult("timing", columns, table, runs, meta=meta)


RUNNERS = {
    "comparative": run_comparative,
    "loss": run_loss_ablation,
    "size": run_size_dependence,
    "scaling": run_scaling_family,
    "timing": bench_timing,
}


__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "RUNNERS",
    "bench_timing",
    "hardware_description",
    "run_comparative",
    "run_loss_ablation",
    "run_scaling_family",
    "run_size_dependence",
]
