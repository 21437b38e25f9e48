"""Single training runs: configuration, data sourcing, training, evaluation."""
from __future__ import annotations

import csv
import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .autodiff import ForwardPlan
from .config import ConfigError
from .dataset import Dataset, DatasetSplit, drop_zero_impulse, load_csv, split, subsample
from .errors import ContractError
from .estimators import make_regressor
from .networks import MODEL_KINDS
from .objectives import mape
from .synth import SyntheticGenConfig, synth_generate

log = logging.getLogger(__name__)

OUTPUT_ENV = "PENN_OUTPUT_DIR"
BATCH_SIZE = {"hs": 100, "ls": 40}
DEFAULT_EPOCHS = 150
PENN_SCHEDULE = (0.002, (60, 80, 100), 0.5)
MLP_SCHEDULE = (0.01, (80, 120), 0.1)


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "penn-output"))


def default_schedule(model: str, epochs: int = DEFAULT_EPOCHS) -> tuple[float, tuple[int, ...], float]:
    """Initial lr, milestones and decay for ``model``.

    For runs shorter than 150 epochs the milestones are compressed
    proportionally so the decay pattern still covers the run.
    """
    lr, milestones, decay = PENN_SCHEDULE if model.startswith("penn") else MLP_SCHEDULE
    if epochs != DEFAULT_EPOCHS:
        milestones = tuple(int(round(m * epochs / DEFAULT_EPOCHS)) for m in milestones)
    return lr, milestones, decay


@dataclass(frozen=True)
class TrainConfig:
    model: str = "penn-bnf"
    width_multiplier: float = 1.0
    target: str = "thrust"
    loss: str = "mare"
    epochs: int = DEFAULT_EPOCHS
    batch_size: int | None = None  # None: 100 for hs-like data, 40 for ls-like
    learning_rate: float | None = None  # None: model-family default
    lr_milestones: tuple[int, ...] | None = None
    lr_decay: float | None = None
    seed: int = 0
    data_path: str | None = None
    regime: str | None = None
    count: int | None = None
    noise_sd: float | None = None
    data_seed: int = 0
    split_ratios: tuple[float, ...] = (0.6, 0.2, 0.2)
    subsample: float = 1.0

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.data_path is None and (self.regime is None or self.count is None):
            raise ConfigError("no dataset source: set data_path, or regime and count for the generator")

    def resolved(self) -> "TrainConfig":
        """Fill model- and regime-dependent defaults."""
        lr, milestones, decay = default_schedule(self.model)
        return dataclasses.replace(
            self,
            batch_size=self.batch_size or BATCH_SIZE.get(self.regime or "hs", 100),
            learning_rate=self.learning_rate if self.learning_rate is not None else lr,
            lr_milestones=self.lr_milestones if self.lr_milestones is not None else milestones,
            lr_decay=self.lr_decay if self.lr_decay is not None else decay,
        )


@dataclass
class MetricsReport:
    config: dict
    seed: int
    model_name: str
    n_params: int
    n_train: int
    n_val: int
    n_test: int
    history: list[dict] = field(default_factory=list)
    best_epoch: int | None = None
    val_mape: float = float("nan")
    test_mape: dict[str, float] = field(default_factory=dict)
    train_seconds: float = 0.0
    inference_seconds: float = float("nan")
    converged: bool = True

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_source(config: TrainConfig) -> DatasetSplit:
    """Load or generate the data for ``config``, drop zero-impulse rows, split."""
    if config.data_path is not None:
        ds = load_csv(config.data_path)
    else:
        ds = drop_zero_impulse(
            synth_generate(SyntheticGenConfig(config.regime, config.count, config.noise_sd, config.data_seed))
        )
    return split(ds, config.split_ratios, seed=config.data_seed)


def build_estimator(config: TrainConfig):
    cfg = config.resolved()
    return make_regressor(
        cfg.model,
        width_multiplier=cfg.width_multiplier,
        loss=cfg.loss,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        lr_milestones=tuple(cfg.lr_milestones),
        lr_decay=cfg.lr_decay,
        target=cfg.target,
        random_state=cfg.seed,
    )


def evaluate(estimator, ds: Dataset, target: str | None = None) -> dict:
    """MAPE of ``estimator`` on ``ds`` after the prediction policy."""
    target = target or estimator.target
    if len(ds) == 0:
        raise ContractError("cannot evaluate on an empty split")
    if ds.X.shape[1] != estimator.n_features_in_:
        raise ContractError(
            f"checkpoint expects {estimator.n_features_in_} input features, dataset has {ds.X.shape[1]}"
        )
    return {"target": target, "n": len(ds), "mape": mape(ds.target(target), estimator.predict(ds.X))}


def compare_latency(estimators, X, n_passes: int = 10_000, block: int = 10) -> list[float]:
    """Mean seconds per single-sample forward pass for each fitted estimator.

    Each network is traced once into a :class:`ForwardPlan` (inference without
    tape bookkeeping) and timed on normalised rows of ``X``. The estimators are
    timed round-robin in blocks of ``block`` passes, so slow drift in machine
    speed is shared evenly instead of landing on whichever model runs last.
    BLAS is limited to one thread while timing.
    """
    X = np.asarray(X, dtype=np.float64)
    if not len(X):
        raise ContractError("latency needs at least one sample")
    plans, rows = [], []
    for est in estimators:
        xs = list((X[:256] - est.x_mean_) / est.x_std_)
        plans.append(ForwardPlan(est.network_, xs[0]))
        rows.append(xs)
    for plan, xs in zip(plans, rows):
        for i in range(50):
            plan(xs[i % len(xs)])
    totals = [0.0] * len(plans)
    done = 0
    with threadpool_limits(limits=1):
        while done < n_passes:
            k = min(block, n_passes - done)
            for j, (plan, xs) in enumerate(zip(plans, rows)):
                m = len(xs)
                t0 = time.perf_counter()
                for i in range(done, done + k):
                    plan(xs[i % m])
                totals[j] += time.perf_counter() - t0
            done += k
    return [t / n_passes for t in totals]


def inference_latency(estimator, X, n_passes: int = 10_000) -> float:
    """Mean wall-clock seconds of one single-sample network forward pass."""
    return compare_latency([estimator], X, n_passes)[0]


def train(config: TrainConfig, data: DatasetSplit | None = None, latency_passes: int = 500):
    """Fit one model on one target; returns (fitted estimator, MetricsReport).

    The validation split picks the best epoch; the test split is scored once.
    """
    if data is None:
        config.validate()
    elif config.model not in MODEL_KINDS:
        raise ConfigError(f"model must be one of {MODEL_KINDS}, got {config.model!r}")
    cfg = config.resolved()
    data = data if data is not None else load_source(cfg)
    train_ds = subsample(data.train, cfg.subsample, seed=cfg.seed) if cfg.subsample != 1 else data.train
    est = build_estimator(cfg)
    est.fit(train_ds.X, train_ds.target(cfg.target), eval_set=(data.val.X, data.val.target(cfg.target)))
    history = est.history_
    final_val = history[-1]["val_mape"] if history else evaluate(est, data.val, cfg.target)["mape"]
    report = MetricsReport(
        config=dataclasses.asdict(cfg),
        seed=cfg.seed,
        model_name=est.network_.name,
        n_params=est.network_.n_params,
        n_train=len(train_ds),
        n_val=len(data.val),
        n_test=len(data.test),
        history=history,
        best_epoch=est.best_epoch_,
        val_mape=min((h["val_mape"] for h in history), default=final_val),
        test_mape={cfg.target: evaluate(est, data.test, cfg.target)["mape"]},
        train_seconds=est.train_seconds_,
        inference_seconds=inference_latency(est, data.test.X, latency_passes) if latency_passes else float("nan"),
        converged=bool(np.isfinite(final_val) and final_val <= 100.0),
    )
    return est, report


def write_metrics_csv(report: MetricsReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_mape"])
        for h in report.history:
            writer.writerow([h["epoch"], repr(h["train_loss"]), repr(h["val_mape"])])
    return path
