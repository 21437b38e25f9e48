"""scikit-learn compatible regressors wrapping the PENN and MLP networks.

``fit`` takes raw physical inputs (n, 18) and one raw target column. Inputs
are z-scored with training statistics; the target is divided by a positive
constant (mean |y| of the training targets) so the network works near unit
scale. A pure rescaling keeps relative losses exact and keeps the sign of
thrust, which the clamp policy needs.
"""
from __future__ import annotations

import logging
import time

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .autodiff import Adam, LrSchedule, Tape, Tensor, backward
from .dataset import constant_features
from .errors import DivergenceError, ParameterError
from .networks import build_network
from .objectives import DEFAULT_POLICY, LossKind, apply_policy, check_relative_targets, loss, mape

log = logging.getLogger(__name__)

N_FEATURES = 18
PREDICT_CHUNK = 4096


class _NetworkRegressor(RegressorMixin, BaseEstimator):
    """Shared fit / predict machinery; subclasses name the network."""

    def _network_kind(self) -> str:
        raise NotImplementedError

    def _width(self) -> float:
        return 1.0

    def schedule(self) -> LrSchedule:
        return LrSchedule(self.learning_rate, tuple(self.lr_milestones), self.lr_decay)

    def _validate_params(self):
        if self.epochs < 0:
            raise ParameterError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.target not in ("thrust", "impulse"):
            raise ParameterError(f"target must be 'thrust' or 'impulse', got {self.target!r}")
        LossKind(self.loss)

    def fit(self, X, y, eval_set=None):
        """Train with Adam on shuffled mini-batches.

        When ``eval_set=(X_val, y_val)`` is given, the parameters with the
        lowest validation MAPE over all epochs are kept.
        """
        self._validate_params()
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if X.shape[1] != N_FEATURES:
            raise ParameterError(f"expected {N_FEATURES} input features, got {X.shape[1]}")
        kind = LossKind(self.loss)
        if kind is LossKind.MARE:
            check_relative_targets(y)
        if eval_set is not None:
            X_val, y_val = check_X_y(*eval_set, dtype=np.float64, y_numeric=True)

        self.x_mean_ = X.mean(axis=0)
        self.x_std_ = X.std(axis=0)
        # a feature constant in this training set carries no information; centre it only
        self.x_std_[constant_features(self.x_mean_, self.x_std_)] = 1.0
        self.target_scale_ = float(np.mean(np.abs(y))) or 1.0
        self.n_features_in_ = X.shape[1]
        self.network_ = build_network(self._network_kind(), self._width(), seed=self.random_state)
        self.history_ = []
        self.best_epoch_ = None

        Xn = (X - self.x_mean_) / self.x_std_
        ys = y / self.target_scale_
        params = self.network_.parameters()
        opt = Adam(params)
        sched = self.schedule()
        rng = np.random.default_rng([self.random_state, 7])
        best = None
        t0 = time.perf_counter()
        n = len(Xn)
        for epoch in range(self.epochs):
            lr = sched.lr_at_epoch(epoch)
            order = rng.permutation(n)
            total = 0.0
            for b, start in enumerate(range(0, n, self.batch_size)):
                idx = order[start : start + self.batch_size]
                with Tape() as tape:
                    pred = self.network_(Tensor(Xn[idx]))
                    batch_loss = loss(kind, ys[idx].reshape(-1, 1), pred)
                value = batch_loss.item()
                if not np.isfinite(value):
                    raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
                grads = backward(tape, batch_loss, params)
                opt.step(grads, lr)
                total += value * len(idx)
            record = {"epoch": epoch, "train_loss": total / n, "val_mape": float("nan")}
            if eval_set is not None:
                val = mape(y_val, self.predict(X_val))
                record["val_mape"] = val
                if np.isfinite(val) and (best is None or val < best[0]):
                    best = (val, epoch, [p.data.copy() for p in params])
            self.history_.append(record)
            if self.verbose:
                log.info("epoch %d lr %.2e loss %.6g val_mape %.4f", epoch, lr, record["train_loss"], record["val_mape"])
        if best is not None:
            for p, saved in zip(params, best[2]):
                p.data[...] = saved
            self.best_epoch_ = best[1]
        self.train_seconds_ = time.perf_counter() - t0
        return self

    def predict_raw(self, X) -> np.ndarray:
        """Network output in physical units, before the prediction policy."""
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ParameterError(f"expected {self.n_features_in_} input features, got {X.shape[1]}")
        Xn = (X - self.x_mean_) / self.x_std_
        out = np.empty(len(Xn))
        for start in range(0, len(Xn), PREDICT_CHUNK):
            chunk = Xn[start : start + PREDICT_CHUNK]
            out[start : start + len(chunk)] = self.network_(Tensor(chunk)).data[:, 0]
        return out * self.target_scale_

    def predict(self, X) -> np.ndarray:
        return apply_policy(self.target, self.predict_raw(X), DEFAULT_POLICY)

    def mape_score(self, X, y) -> float:
        return mape(y, self.predict(X))

    @property
    def n_params_(self) -> int:
        check_is_fitted(self, "network_")
        return self.network_.n_params


class PENNRegressor(_NetworkRegressor):
    """Physical-embedded network regressor for one engine performance target.

    Parameters
    ----------
    fusion : {"fcf", "bnf", "abf", "cawf"}
        Fusion module used at all three fusion stages.
    width_multiplier : float
        Uniform scale on every hidden width (0.25, 0.5, 1, 2, 4 name the
        Down4 .. Up4 family).
    loss : {"mse", "mae", "mare"}
    epochs, batch_size : int
    learning_rate, lr_milestones, lr_decay :
        Step schedule; lr is multiplied by ``lr_decay`` at each milestone epoch.
    target : {"thrust", "impulse"}
        Only used for the prediction policy (negative thrust clamped to 0).
    random_state : int
        Seeds initialisation and batch shuffling.
    """

    def __init__(
        self,
        fusion="bnf",
        width_multiplier=1.0,
        loss="mare",
        epochs=150,
        batch_size=100,
        learning_rate=0.002,
        lr_milestones=(60, 80, 100),
        lr_decay=0.5,
        target="thrust",
        random_state=0,
        verbose=0,
    ):
        self.fusion = fusion
        self.width_multiplier = width_multiplier
        self.loss = loss
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_milestones = lr_milestones
        self.lr_decay = lr_decay
        self.target = target
        self.random_state = random_state
        self.verbose = verbose

    def _network_kind(self):
        return f"penn-{self.fusion}"

    def _width(self):
        return self.width_multiplier


class _MLPRegressorBase(_NetworkRegressor):
    def __init__(
        self,
        loss="mare",
        epochs=150,
        batch_size=100,
        learning_rate=0.01,
        lr_milestones=(80, 120),
        lr_decay=0.1,
        target="thrust",
        random_state=0,
        verbose=0,
    ):
        self.loss = loss
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_milestones = lr_milestones
        self.lr_decay = lr_decay
        self.target = target
        self.random_state = random_state
        self.verbose = verbose


class MLPResRegressor(_MLPRegressorBase):
    """Eight-layer residual MLP baseline."""

    def _network_kind(self):
        return "mlp-res"


class MLPMulRegressor(_MLPRegressorBase):
    """Two-branch MLP baseline."""

    def _network_kind(self):
        return "mlp-mul"


def make_regressor(model: str, **params):
    """Build a regressor from a model-kind string such as ``"penn-bnf"``."""
    model = model.lower()
    if model.startswith("penn-"):
        return PENNRegressor(fusion=model[5:], **params)
    if model == "mlp-res":
        params.pop("width_multiplier", None)
        return MLPResRegressor(**params)
    if model == "mlp-mul":
        params.pop("width_multiplier", None)
        return MLPMulRegressor(**params)
    raise ParameterError(f"unknown model kind {model!r}")
