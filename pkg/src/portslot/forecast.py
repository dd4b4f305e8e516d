"""Per-slot truck-arrival forecasting.

An encoder-decoder LSTM reads two hourly signals (deep-sea container
arrivals and truck arrivals) over a set of lookup days and emits the
operation day's 24 hourly truck arrivals.  A historical average over the
same lookup days is the baseline.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from portslot import lstm

HORIZON = 24
CHECKPOINT_VERSION = "1"

LOOKUP_TEMPLATES = {
    1: (-1, -2, -7, -14, -21),
    2: (-2, -3, -7, -14, -21),
    3: (-3, -4, -7, -14, -21),
}


def build_lookup_window(scenario_id: int) -> tuple[int, ...]:
    """Day offsets feeding the forecaster for same-day, 1- and 2-day-ahead
    planning."""
    try:
        return LOOKUP_TEMPLATES[scenario_id]
    except KeyError:
        raise ValueError(f"unknown lookup scenario {scenario_id!r}; expected 1-3") from None


@dataclass
class SeriesWindow:
    """Input block of one forecast: two signals over the lookup hours."""

    x: np.ndarray                      # (lookup hours, 2)
    lookup: tuple[int, ...]

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2 or self.x.shape[1] != 2:
            raise ValueError("window must be (hours, 2 signals)")
        if (self.x < 0).any():
            raise ValueError("signals are counts and must be nonnegative")
        if tuple(self.lookup) not in LOOKUP_TEMPLATES.values():
            raise ValueError(f"lookup {self.lookup!r} matches no known template")


@dataclass
class ForecastMetrics:
    mse: float
    rmse: float
    mae: float


def eval_metrics(predictions, observations) -> ForecastMetrics:
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    obs = np.asarray(observations, dtype=np.float64).ravel()
    if pred.shape != obs.shape or pred.size == 0:
        raise ValueError("predictions and observations must have equal nonzero length")
    mse = float(np.mean((pred - obs) ** 2))
    return ForecastMetrics(mse=mse, rmse=float(np.sqrt(mse)),
                           mae=float(np.mean(np.abs(pred - obs))))


def ha_baseline(history: np.ndarray, lookup: tuple[int, ...], day: int) -> np.ndarray:
    """Hourly mean of the lookup days; ``history`` is an hourly series."""
    series = np.asarray(history, dtype=np.float64)
    n_days = series.size // 24
    rows = []
    for off in lookup:
        d = day + off
        if d < 0 or d >= n_days:
            raise ValueError(f"lookup day {d} missing from history")
        rows.append(series[d * 24:(d + 1) * 24])
    return np.mean(rows, axis=0)


# ---------------------------------------------------------------------------
# dataset assembly


@dataclass
class ForecastDataset:
    x: np.ndarray          # (samples, lookup hours, 2)
    y: np.ndarray          # (samples, 24)
    days: np.ndarray       # operation day index per sample
    lookup: tuple[int, ...]


def build_dataset(containers: np.ndarray, trucks: np.ndarray,
                  lookup: tuple[int, ...]) -> ForecastDataset:
    """One sample per day whose whole lookup window lies in the history.

    Lookup days are ordered oldest first so the encoder ends on the most
    recent information.
    """
    containers = np.asarray(containers, dtype=np.float64)
    trucks = np.asarray(trucks, dtype=np.float64)
    if containers.shape != trucks.shape:
        raise ValueError("signals must align")
    n_days = containers.size // 24
    offsets = sorted(lookup)
    first = -min(offsets)
    xs, ys, days = [], [], []
    for d in range(first, n_days):
        block = []
        for off in offsets:
            lo = (d + off) * 24
            block.append(np.stack([containers[lo:lo + 24], trucks[lo:lo + 24]], axis=1))
        xs.append(np.concatenate(block, axis=0))
        ys.append(trucks[d * 24:(d + 1) * 24])
        days.append(d)
    if not xs:
        raise ValueError("history too short for the lookup window")
    return ForecastDataset(x=np.stack(xs), y=np.stack(ys), days=np.array(days),
                           lookup=tuple(lookup))


def calendar_split(ds: ForecastDataset, train_fraction: float = 10 / 12,
                   val_fraction: float = 1 / 12):
    """Chronological train/validation/test split."""
    n = ds.x.shape[0]
    n_train = int(n * train_fraction)
    n_val = int(n * val_fraction)
    tr = ForecastDataset(ds.x[:n_train], ds.y[:n_train], ds.days[:n_train], ds.lookup)
    va = ForecastDataset(ds.x[n_train:n_train + n_val], ds.y[n_train:n_train + n_val],
                         ds.days[n_train:n_train + n_val], ds.lookup)
    te = ForecastDataset(ds.x[n_train + n_val:], ds.y[n_train + n_val:],
                         ds.days[n_train + n_val:], ds.lookup)
    return tr, va, te


# ---------------------------------------------------------------------------
# model


@dataclass
class Seq2SeqModel:
    params: dict[str, np.ndarray]
    hidden: int
    horizon: int = HORIZON
    x_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    x_std: np.ndarray = field(default_factory=lambda: np.ones(2))
    y_mean: float = 0.0
    y_std: float = 1.0

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.x_mean) / self.x_std


def zero_model(hidden: int = 8) -> Seq2SeqModel:
    return Seq2SeqModel(params=lstm.zero_seq2seq(hidden), hidden=hidden)


def seq2seq_forecast(window, model: Seq2SeqModel) -> np.ndarray:
    """Nonnegative 24-hour forecast; deterministic (no dropout at inference)."""
    x = window.x if isinstance(window, SeriesWindow) else np.asarray(window, dtype=np.float64)
    if x.ndim == 2 and x.shape[1] != 2:
        raise ValueError("window must carry exactly two input signals")
    return lstm.seq2seq_predict(model.params, model.normalize(x), model.horizon,
                                model.y_mean, model.y_std)


@dataclass
class Hyper:
    hidden: int = 40
    lr: float = 0.005
    dropout: float = 0.2
    grad_clip: float = 1.0
    val_every: int = 20
    steps: int = 1500
    batch: int = 32
    seed: int = 0


@dataclass
class TrainingLog:
    steps: list[int] = field(default_factory=list)
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "train_mse", "val_mse"])
        for s, t, v in zip(self.steps, self.train_mse, self.val_mse):
            w.writerow([s, repr(t), repr(v)])
        return buf.getvalue()


def _scaled_teacher(y: np.ndarray, y_mean: float, y_std: float) -> np.ndarray:
    """Decoder inputs: scaled previous target, zero at the first step."""
    teach = np.zeros_like(y)
    teach[:, 1:] = (y[:, :-1] - y_mean) / y_std
    return teach


def train_forecaster(train: ForecastDataset, val: ForecastDataset | None = None,
                     hyper: Hyper | None = None) -> tuple[Seq2SeqModel, TrainingLog]:
    """Adam-trained encoder-decoder with teacher forcing.

    Dropout multiplies the decoder hidden state ahead of the readout during
    training only; gradients are clipped to a unit global norm.  Training is
    deterministic for a fixed seed.
    """
    hyper = hyper or Hyper()
    if train.x.shape[0] == 0:
        raise ValueError("empty training dataset")
    rng = np.random.default_rng(hyper.seed)
    x_mean = train.x.reshape(-1, 2).mean(axis=0)
    x_std = train.x.reshape(-1, 2).std(axis=0)
    x_std[x_std < 1e-9] = 1.0
    y_mean = float(train.y.mean())
    y_std = float(train.y.std())
    if y_std < 1e-9:
        y_std = 1.0
    model = Seq2SeqModel(params=lstm.init_seq2seq(hyper.hidden, rng),
                         hidden=hyper.hidden, horizon=train.y.shape[1],
                         x_mean=x_mean, x_std=x_std, y_mean=y_mean, y_std=y_std)
    xn = (train.x - x_mean) / x_std
    teacher = _scaled_teacher(train.y, y_mean, y_std)
    n = xn.shape[0]
    optimizer = lstm.Adam(lr=hyper.lr)
    log = TrainingLog()
    keep = 1.0 - hyper.dropout
    for step in range(1, hyper.steps + 1):
        idx = rng.integers(0, n, size=min(hyper.batch, n))
        xb, yb, tb = xn[idx], train.y[idx], teacher[idx]
        mask = None
        if hyper.dropout > 0:
            mask = (rng.random((xb.shape[0], model.horizon, hyper.hidden)) < keep) / keep
        loss, grads, _ = lstm.seq2seq_loss_and_grads(model.params, xb, yb, tb,
                                                     dropout_mask=mask)
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite training loss at step {step}; "
                               f"check input scaling and learning rate")
        grads, _ = lstm.clip_gradients(grads, hyper.grad_clip)
        optimizer.step(model.params, grads)
        if step % hyper.val_every == 0 or step == hyper.steps:
            train_pred = lstm.seq2seq_predict(model.params, xn, model.horizon,
                                              y_mean, y_std)
            t_mse = float(np.mean((train_pred - train.y) ** 2))
            if val is not None and val.x.shape[0]:
                val_pred = lstm.seq2seq_predict(model.params, (val.x - x_mean) / x_std,
                                                model.horizon, y_mean, y_std)
                v_mse = float(np.mean((val_pred - val.y) ** 2))
            else:
                v_mse = float("nan")
            log.steps.append(step)
            log.train_mse.append(t_mse)
            log.val_mse.append(v_mse)
    return model, log


# ---------------------------------------------------------------------------
# checkpoint I/O


def save_model(model: Seq2SeqModel) -> str:
    doc = {
        "version": CHECKPOINT_VERSION,
        "hidden": model.hidden,
        "horizon": model.horizon,
        "x_mean": model.x_mean.tolist(),
        "x_std": model.x_std.tolist(),
        "y_mean": model.y_mean,
        "y_std": model.y_std,
        "tensors": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                    for k, v in sorted(model.params.items())},
    }
    return json.dumps(doc)


def load_model(text: str) -> Seq2SeqModel:
    doc = json.loads(text)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    params = {k: np.array(t["data"]).reshape(t["shape"])
              for k, t in doc["tensors"].items()}
    return Seq2SeqModel(params=params, hidden=int(doc["hidden"]),
                        horizon=int(doc["horizon"]),
                        x_mean=np.array(doc["x_mean"]), x_std=np.array(doc["x_std"]),
                        y_mean=float(doc["y_mean"]), y_std=float(doc["y_std"]))
