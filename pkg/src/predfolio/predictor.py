"""One-step-ahead return prediction with a small tapped-delay tanh network.

Each asset gets its own network: ``delay`` lagged returns feed a layer of
tanh hidden units and a single linear output. Training minimizes the sum of
squared one-step errors on the training slice with damped Gauss-Newton
steps (Levenberg-Marquardt); the parameter snapshot with the lowest
validation loss seen is kept, which doubles as early stopping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    InsufficientDataError,
    TrainingError,
)

TRAIN, VAL, TEST = "train", "val", "test"

_DAMPING_MAX = 1e12
_DAMPING_MIN = 1e-12
# Relative improvement below which an LM run is considered converged.
_FTOL = 1e-12


@dataclass
class PredictorConfig:
    delay: int = 41
    hidden_units: int = 5
    max_epochs: int = 1000
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    lm_initial_damping: float = 1e-3
    lm_damping_factor: float = 10.0
    seed: int | tuple[int, ...] = 0

    def validate(self) -> None:
        if self.delay < 1:
            raise ConfigError(f"delay must be >= 1, got {self.delay}")
        if self.hidden_units < 1:
            raise ConfigError(f"hidden_units must be >= 1, got {self.hidden_units}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not 0.0 < f < 1.0 for f in fracs):
            raise ConfigError(f"split fractions must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)!r}")
        if self.lm_initial_damping <= 0:
            raise ConfigError("lm_initial_damping must be positive")
        if self.lm_damping_factor <= 1:
            raise ConfigError("lm_damping_factor must exceed 1")


@dataclass
class SupervisedSplit:
    """Lag-window samples with chronological train/val/test labels."""

    inputs: np.ndarray   # (n, delay), oldest lag first
    targets: np.ndarray  # (n,)
    labels: np.ndarray   # (n,) strings from {train, val, test}

    def mask(self, label: str) -> np.ndarray:
        return self.labels == label

    def __len__(self) -> int:
        return len(self.targets)


@dataclass
class TrainedPredictor:
    """Fitted network parameters for one asset."""

    asset: str
    input_weights: np.ndarray   # (hidden, delay)
    hidden_bias: np.ndarray     # (hidden,)
    output_weights: np.ndarray  # (hidden,)
    output_bias: float
    best_val_loss: float
    epochs_run: int

    @property
    def delay(self) -> int:
        return self.input_weights.shape[1]

    @property
    def hidden_units(self) -> int:
        return self.input_weights.shape[0]

    def flat(self) -> np.ndarray:
        return _pack(self.input_weights, self.hidden_bias, self.output_weights, self.output_bias)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "asset": self.asset,
            "delay": self.delay,
            "hidden_units": self.hidden_units,
            "shapes": {
                "input_weights": list(self.input_weights.shape),
                "hidden_bias": [self.hidden_units],
                "output_weights": [self.hidden_units],
                "output_bias": [],
            },
            "parameters": [float(v) for v in self.flat()],
            "best_val_loss": float(self.best_val_loss),
            "epochs_run": int(self.epochs_run),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedPredictor":
        if data.get("version") != 1:
            raise ConfigError(f"unsupported predictor dump version {data.get('version')!r}")
        d, h = int(data["delay"]), int(data["hidden_units"])
        theta = np.asarray(data["parameters"], dtype=float)
        w_in, b_h, w_out, b_out = _unpack(theta, d, h)
        return cls(
            asset=data["asset"],
            input_weights=w_in,
            hidden_bias=b_h,
            output_weights=w_out,
            output_bias=b_out,
            best_val_loss=float(data["best_val_loss"]),
            epochs_run=int(data["epochs_run"]),
        )


@dataclass
class PredictionRecord:
    """Real vs predicted one-step returns and their error series."""

    asset: str
    real: np.ndarray
    predicted: np.ndarray
    errors: np.ndarray
    split_labels: np.ndarray

    def __len__(self) -> int:
        return len(self.real)

    def to_dict(self) -> dict:
        return {
            "asset": self.asset,
            "real": [float(v) for v in self.real],
            "predicted": [float(v) for v in self.predicted],
            "errors": [float(v) for v in self.errors],
            "split_labels": [str(v) for v in self.split_labels],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PredictionRecord":
        return cls(
            asset=data["asset"],
            real=np.asarray(data["real"], dtype=float),
            predicted=np.asarray(data["predicted"], dtype=float),
            errors=np.asarray(data["errors"], dtype=float),
            split_labels=np.asarray(data["split_labels"], dtype=object),
        )


def _n_params(delay: int, hidden: int) -> int:
    return hidden * delay + hidden + hidden + 1


def _pack(w_in, b_h, w_out, b_out) -> np.ndarray:
    return np.concatenate([np.ravel(w_in), np.ravel(b_h), np.ravel(w_out), [b_out]])


def _unpack(theta: np.ndarray, delay: int, hidden: int):
    hd = hidden * delay
    w_in = theta[:hd].reshape(hidden, delay)
    b_h = theta[hd : hd + hidden]
    w_out = theta[hd + hidden : hd + 2 * hidden]
    b_out = float(theta[-1])
    return w_in, b_h, w_out, b_out


def _init_flat(delay: int, hidden: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform [-0.5, 0.5] scaled by 1/sqrt(fan-in) per layer."""
    in_scale = 1.0 / np.sqrt(delay)
    out_scale = 1.0 / np.sqrt(hidden)
    w_in = rng.uniform(-0.5, 0.5, size=(hidden, delay)) * in_scale
    b_h = rng.uniform(-0.5, 0.5, size=hidden) * in_scale
    w_out = rng.uniform(-0.5, 0.5, size=hidden) * out_scale
    b_out = rng.uniform(-0.5, 0.5) * out_scale
    return _pack(w_in, b_h, w_out, b_out)


def _forward_flat(theta: np.ndarray, inputs: np.ndarray, delay: int, hidden: int) -> np.ndarray:
    w_in, b_h, w_out, b_out = _unpack(theta, delay, hidden)
    hidden_act = np.tanh(inputs @ w_in.T + b_h)
    return hidden_act @ w_out + b_out


def _jacobian_flat(theta: np.ndarray, inputs: np.ndarray, delay: int, hidden: int) -> np.ndarray:
    """Analytic d(prediction)/d(parameter), one row per sample.

    Residuals are ``prediction - target``, so this is also the residual
    Jacobian; column order matches :func:`_pack`.
    """
    w_in, b_h, w_out, b_out = _unpack(theta, delay, hidden)
    n = inputs.shape[0]
    hidden_act = np.tanh(inputs @ w_in.T + b_h)        # (n, hidden)
    gate = (1.0 - hidden_act**2) * w_out               # (n, hidden)
    j_w_in = np.einsum("nh,nd->nhd", gate, inputs).reshape(n, hidden * delay)
    return np.concatenate([j_w_in, gate, hidden_act, np.ones((n, 1))], axis=1)


def split_series(series, config: PredictorConfig) -> SupervisedSplit:
    """Window a return series into (lags -> next return) samples.

    The first ``delay`` returns are consumed as lags only; the remaining
    samples are labelled chronologically train, then validation, then test
    by the configured fractions (each partition gets at least one sample).
    """
    config.validate()
    returns = np.asarray(getattr(series, "returns", series), dtype=float)
    d = config.delay
    t = len(returns)
    if t < d + 3:
        raise InsufficientDataError(
            f"need at least {d + 3} returns for delay {d} (3 usable samples), got {t}"
        )
    n = t - d
    inputs = np.lib.stride_tricks.sliding_window_view(returns, d)[:n].copy()
    targets = returns[d:].copy()

    n_train = min(max(int(round(config.train_frac * n)), 1), n - 2)
    n_val = min(max(int(round(config.val_frac * n)), 1), n - n_train - 1)
    labels = np.empty(n, dtype=object)
    labels[:n_train] = TRAIN
    labels[n_train : n_train + n_val] = VAL
    labels[n_train + n_val :] = TEST
    return SupervisedSplit(inputs=inputs, targets=targets, labels=labels)


def forward(predictor: TrainedPredictor, lags) -> float:
    """Evaluate the network on one window of ``delay`` lagged returns."""
    lags = np.asarray(lags, dtype=float)
    if lags.shape != (predictor.delay,):
        raise DimensionError(
            f"expected {predictor.delay} lag values, got shape {lags.shape}"
        )
    out = _forward_flat(
        predictor.flat(), lags[None, :], predictor.delay, predictor.hidden_units
    )
    return float(out[0])


def jacobian(predictor: TrainedPredictor, inputs) -> np.ndarray:
    """Residual Jacobian of the network over a batch of lag windows."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != predictor.delay:
        raise DimensionError(
            f"lag windows have width {inputs.shape[1]}, predictor expects {predictor.delay}"
        )
    return _jacobian_flat(predictor.flat(), inputs, predictor.delay, predictor.hidden_units)


def train_arnn(
    split: SupervisedSplit,
    config: PredictorConfig,
    asset: str = "",
    on_epoch=None,
) -> TrainedPredictor:
    """Fit the network with Levenberg-Marquardt on the training slice.

    Each epoch solves ``(J'J + damping * I) step = -J' residual`` and only
    accepts steps that strictly decrease the training SSE; the damping is
    divided by ``lm_damping_factor`` on acceptance and multiplied on
    rejection. The returned parameters are the snapshot with the lowest
    validation SSE. Deterministic for a fixed seed.

    ``on_epoch(epoch, train_loss, val_loss)`` is invoked after each
    accepted epoch when supplied.
    """
    config.validate()
    d, h = config.delay, config.hidden_units
    if split.inputs.shape[1] != d:
        raise DimensionError(
            f"split built with delay {split.inputs.shape[1]}, config says {d}"
        )
    x_train, y_train = split.inputs[split.mask(TRAIN)], split.targets[split.mask(TRAIN)]
    x_val, y_val = split.inputs[split.mask(VAL)], split.targets[split.mask(VAL)]
    if len(y_train) < 1 or len(y_val) < 1:
        raise InsufficientDataError("need at least one training and one validation sample")

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    theta = _init_flat(d, h, rng)
    n_params = _n_params(d, h)
    eye = np.eye(n_params)

    def sse(params, x, y):
        r = _forward_flat(params, x, d, h) - y
        return float(r @ r)

    loss = sse(theta, x_train, y_train)
    if not np.isfinite(loss):
        raise TrainingError("non-finite training loss on initial parameters", epoch=0)
    val_loss = sse(theta, x_val, y_val)
    best_theta, best_val = theta.copy(), val_loss

    damping = config.lm_initial_damping
    factor = config.lm_damping_factor
    epochs_run = 0

    for epoch in range(1, config.max_epochs + 1):
        residual = _forward_flat(theta, x_train, d, h) - y_train
        jac = _jacobian_flat(theta, x_train, d, h)
        gradient = jac.T @ residual
        if np.max(np.abs(gradient)) < 1e-14:
            break
        hessian = jac.T @ jac

        accepted = False
        while damping <= _DAMPING_MAX:
            step = np.linalg.solve(hessian + damping * eye, -gradient)
            trial = theta + step
            trial_loss = sse(trial, x_train, y_train)
            if np.isfinite(trial_loss) and trial_loss < loss:
                prev_loss = loss
                theta, loss = trial, trial_loss
                damping = max(damping / factor, _DAMPING_MIN)
                accepted = True
                break
            damping *= factor
        if not accepted:
            break
        epochs_run = epoch
        if not np.isfinite(loss):
            raise TrainingError("training loss became non-finite", epoch=epoch)

        val_loss = sse(theta, x_val, y_val)
        if not np.isfinite(val_loss):
            raise TrainingError("validation loss became non-finite", epoch=epoch)
        if val_loss < best_val:
            best_val = val_loss
            best_theta = theta.copy()
        if on_epoch is not None:
            on_epoch(epoch, loss, val_loss)
        if prev_loss - loss <= _FTOL * (loss + 1e-30):
            break

    w_in, b_h, w_out, b_out = _unpack(best_theta, d, h)
    return TrainedPredictor(
        asset=asset,
        input_weights=w_in,
        hidden_bias=b_h,
        output_weights=w_out,
        output_bias=b_out,
        best_val_loss=best_val,
        epochs_run=epochs_run,
    )


def rolling_predict(
    predictor: TrainedPredictor,
    series,
    config: PredictorConfig,
    asset: str | None = None,
) -> PredictionRecord:
    """Predict every supervised sample from its true preceding lags.

    Windows are rebuilt from the raw series (no feedback of predictions),
    so ``real``, ``predicted`` and ``errors`` all have length
    ``len(series) - delay``; split labels are carried through from
    :func:`split_series`.
    """
    if config.delay != predictor.delay:
        raise DimensionError(
            f"predictor was trained with delay {predictor.delay}, config says {config.delay}"
        )
    split = split_series(series, config)
    predicted = _forward_flat(
        predictor.flat(), split.inputs, predictor.delay, predictor.hidden_units
    )
    errors = split.targets - predicted
    return PredictionRecord(
        asset=asset if asset is not None else predictor.asset,
        real=split.targets,
        predicted=predicted,
        errors=errors,
        split_labels=split.labels,
    )
