"""Ingestion, train-only preprocessing, time-ordered splits and a synthetic stream."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .environment import Transactions


class IngestionError(ValueError):
    """The input file cannot be turned into transactions."""


@dataclass
class SynthConfig:
    n_transactions: int = 10000
    fraud_rate: float = 0.02
    n_features: int = 8
    mean_separation: float = 4.0  # distance between class means, in feature std units
    feature_std: float = 1.0
    genuine_amount_mu: float = 3.5
    genuine_amount_sigma: float = 1.0
    fraud_amount_mu: float = 4.5
    fraud_amount_sigma: float = 1.2
    mean_interarrival: float = 1.0
    drift_index: int | None = None
    drift_offset: float = 0.0  # added to every fraud feature mean from drift_index on
    seed: int = 0

    def __post_init__(self):
        if self.n_transactions < 1 or self.n_features < 1:
            raise ValueError("n_transactions and n_features must be positive")
        if not 0.0 < self.fraud_rate < 1.0:
            raise ValueError("fraud_rate must lie strictly between 0 and 1")
        if self.mean_separation < 0 or not self.feature_std > 0:
            raise ValueError("mean_separation must be >= 0 and feature_std > 0")
        if not (self.genuine_amount_sigma > 0 and self.fraud_amount_sigma > 0 and self.mean_interarrival > 0):
            raise ValueError("amount sigmas and mean_interarrival must be positive")
        if self.drift_index is not None and not 0 <= self.drift_index <= self.n_transactions:
            raise ValueError("drift_index must lie within the stream")


@dataclass
class DatasetSpec:
    source: str = "synthetic"
    path: str | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    time_column: str = "time"
    amount_column: str = "amount"
    label_column: str = "label"
    categorical_columns: list = field(default_factory=list)
    exclude_columns: list = field(default_factory=list)
    target_smoothing: float = 20.0

    def __post_init__(self):
        if self.source not in ("csv", "synthetic"):
            raise ValueError(f"dataset source must be 'csv' or 'synthetic', got {self.source!r}")
        if self.source == "csv" and not self.path:
            raise ValueError("csv dataset needs a path")
        if self.target_smoothing < 0:
            raise ValueError("target_smoothing must be >= 0")


def synth_frame(config):
    """Generate a time-ordered synthetic table: time, f0..f{d-1}, amount, label."""
    rng = np.random.default_rng(config.seed)
    n, d = config.n_transactions, config.n_features
    labels = (rng.random(n) < config.fraud_rate).astype(np.int64)
    sigma = config.feature_std
    feats = rng.normal(0.0, sigma, size=(n, d))
    fraud = labels == 1
    # spread the separation evenly so the Euclidean distance is mean_separation * sigma
    shift = np.full(d, config.mean_separation * sigma / math.sqrt(d))
    feats[fraud] += shift
    if config.drift_index is not None and config.drift_offset != 0.0:
        late = fraud & (np.arange(n) >= config.drift_index)
        feats[late] += config.drift_offset
    amounts = np.where(
        fraud,
        rng.lognormal(config.fraud_amount_mu, config.fraud_amount_sigma, n),
        rng.lognormal(config.genuine_amount_mu, config.genuine_amount_sigma, n),
    )
    times = np.cumsum(rng.exponential(config.mean_interarrival, n))
    cols = {"time": times}
    for j in range(d):
        cols[f"f{j}"] = feats[:, j]
    cols["amount"] = amounts
    cols["label"] = labels
    return pd.DataFrame(cols)


def write_csv(frame, path):
    """Write with shortest round-trip float formatting (byte-stable)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(frame.columns)
        for row in frame.itertuples(index=False):
            w.writerow(row)


def read_table(path, spec):
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise IngestionError(f"{path}: empty file") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    if frame.shape[0] == 0:
        raise IngestionError(f"{path}: no data rows")
    return frame


def _numeric(frame, col, allow_missing):
    raw = frame[col]
    if raw.dtype != object:
        values = raw.to_numpy(dtype=np.float64)
        missing = np.isnan(values)
    else:
        # float() rather than pd.to_numeric: the latter is not round-trip exact
        text = raw.str.strip().to_numpy(dtype=object)
        missing = text == ""
        bad = np.zeros(text.shape[0], dtype=bool)
        try:
            values = np.array([float(s) if s else math.nan for s in text], dtype=np.float64)
        except ValueError:
            values = np.full(text.shape[0], np.nan)
            for i, s in enumerate(text):
                if s:
                    try:
                        values[i] = float(s)
                    except ValueError:
                        bad[i] = True
        bad |= ~missing & ~np.isfinite(values)
        if bad.any():
            rows = np.flatnonzero(bad)[:5].tolist()
            raise IngestionError(f"column {col!r}: non-numeric values at data rows {rows}")
    if missing.any() and not allow_missing:
        rows = np.flatnonzero(missing)[:5].tolist()
        raise IngestionError(f"column {col!r}: missing values at data rows {rows}")
    return values


@dataclass
class RawDataset:
    """Parsed, time-sorted table before any fitted preprocessing."""

    times: np.ndarray
    amounts: np.ndarray
    labels: np.ndarray
    numeric: np.ndarray  # [n x p], may hold NaN for missing values
    numeric_names: list
    categorical: dict  # column -> array of str

    def __len__(self):
        return self.times.shape[0]

    def take(self, idx):
        return RawDataset(
            self.times[idx],
            self.amounts[idx],
            self.labels[idx],
            self.numeric[idx],
            self.numeric_names,
            {k: v[idx] for k, v in self.categorical.items()},
        )


def parse_frame(frame, spec):
    """Validate columns, parse numerics and sort ascending by time (stable)."""
    required = [spec.time_column, spec.amount_column, spec.label_column, *spec.categorical_columns]
    missing_cols = [c for c in required if c not in frame.columns]
    if missing_cols:
        raise IngestionError(f"missing required column(s): {', '.join(missing_cols)}")
    for c in spec.exclude_columns:
        if c not in frame.columns:
            raise IngestionError(f"excluded column {c!r} not present")
    if frame.shape[0] == 0:
        raise IngestionError("no data rows")

    times = _numeric(frame, spec.time_column, allow_missing=False)
    amounts = _numeric(frame, spec.amount_column, allow_missing=False)
    if (amounts < 0).any():
        rows = np.flatnonzero(amounts < 0)[:5].tolist()
        raise IngestionError(f"column {spec.amount_column!r}: negative amounts at data rows {rows}")
    labels_f = _numeric(frame, spec.label_column, allow_missing=False)
    bad = ~np.isin(labels_f, (0.0, 1.0))
    if bad.any():
        rows = np.flatnonzero(bad)[:5].tolist()
        raise IngestionError(f"column {spec.label_column!r}: labels must be 0 or 1 (data rows {rows})")

    skip = {spec.label_column, *spec.categorical_columns, *spec.exclude_columns}
    numeric_names = [c for c in frame.columns if c not in skip]
    numeric = np.column_stack(
        [_numeric(frame, c, allow_missing=True) for c in numeric_names]
    ) if numeric_names else np.zeros((frame.shape[0], 0))
    categorical = {
        c: frame[c].astype(str).to_numpy(dtype=object) for c in spec.categorical_columns
    }

    order = np.argsort(times, kind="stable")
    raw = RawDataset(times, amounts, labels_f.astype(np.int64), numeric, numeric_names, categorical)
    return raw.take(order)


def load_csv(spec):
    """Parse ``spec.path`` into a time-sorted :class:`RawDataset`."""
    return parse_frame(read_table(spec.path, spec), spec)


def load_dataset(spec):
    if spec.source == "csv":
        return load_csv(spec)
    return parse_frame(synth_frame(spec.synth), spec)


def synth_generate(config, spec=None):
    """Synthetic stream as a time-sorted :class:`RawDataset`."""
    return parse_frame(synth_frame(config), spec or DatasetSpec(synth=config))


# -- fitted transforms -------------------------------------------------------


@dataclass
class ScalerParams:
    mins: np.ndarray
    maxs: np.ndarray

    def to_dict(self):
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}


def fit_scaler(train):
    x = np.asarray(train, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("cannot fit a scaler on zero rows")
    return ScalerParams(x.min(axis=0), x.max(axis=0))


def apply_scaler(params, data):
    """Min-max map; constant features become 0; no clamping outside the fit range."""
    x = np.asarray(data, dtype=np.float64)
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    out = (x - params.mins) / safe
    out[:, span == 0] = 0.0
    return out


def invert_scaler(params, scaled):
    return np.asarray(scaled) * (params.maxs - params.mins) + params.mins


@dataclass
class TargetEncoder:
    table: dict
    global_mean: float
    smoothing: float

    def transform(self, values):
        return np.array([self.table.get(v, self.global_mean) for v in values], dtype=np.float64)


def fit_target_encoder(values, labels, smoothing=20.0):
    """Smoothed per-category fraud mean, fit on training rows only."""
    values = np.asarray(values, dtype=object)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape[0] == 0:
        raise ValueError("cannot fit an encoder on zero rows")
    global_mean = float(labels.mean())
    table = {}
    frame = pd.DataFrame({"c": values, "y": labels}).groupby("c", sort=True)["y"].agg(["count", "sum"])
    for cat, (count, total) in frame.iterrows():
        table[cat] = float((total + smoothing * global_mean) / (count + smoothing))
    return TargetEncoder(table, global_mean, float(smoothing))


def target_encode(values, labels, smoothing=20.0):
    enc = fit_target_encoder(values, labels, smoothing)
    return enc.transform(values), enc


# -- splitting ---------------------------------------------------------------


@dataclass
class SplitBundle:
    train: object
    validation: object
    test: object


def split_bounds(n):
    """Index cut points ``(n_train, n_train + n_val)`` for a 70/10/20 split."""
    if n < 10:
        raise ValueError(f"need at least 10 rows to split, got {n}")
    n_train = (7 * n) // 10
    n_val = n // 10
    return n_train, n_train + n_val


def split(data):
    """Contiguous 70/10/20 split; train and validation floored, remainder to test."""
    a, b = split_bounds(len(data))
    idx = np.arange(len(data))
    if isinstance(data, RawDataset):
        return SplitBundle(data.take(idx[:a]), data.take(idx[a:b]), data.take(idx[b:]))
    return SplitBundle(data[:a], data[a:b], data[b:])


# -- whole pipeline ----------------------------------------------------------


@dataclass
class Preprocessor:
    medians: np.ndarray
    encoders: dict
    scaler: ScalerParams
    feature_names: list

    def _assemble(self, raw):
        x = raw.numeric.copy()
        nan = np.isnan(x)
        if nan.any():
            x[nan] = np.broadcast_to(self.medians, x.shape)[nan]
        cats = [self.encoders[c].transform(raw.categorical[c]) for c in self.encoders]
        return np.column_stack([x, *cats]) if cats else x

    def transform(self, raw):
        feats = apply_scaler(self.scaler, self._assemble(raw))
        return Transactions(feats, raw.amounts, raw.labels, raw.times, self.feature_names)


def fit_preprocessor(train, smoothing=20.0):
    """Fit imputation medians, target encoders and the scaler on ``train`` alone."""
    with np.errstate(all="ignore"):
        medians = np.nanmedian(train.numeric, axis=0) if train.numeric.shape[1] else np.zeros(0)
    medians = np.where(np.isnan(medians), 0.0, medians)  # all-missing columns
    encoders = {
        c: fit_target_encoder(v, train.labels, smoothing) for c, v in train.categorical.items()
    }
    pre = Preprocessor(medians, encoders, None, [*train.numeric_names, *encoders])
    pre.scaler = fit_scaler(pre._assemble(train))
    return pre


@dataclass
class PreparedData:
    train: Transactions
    validation: Transactions
    test: Transactions
    preprocessor: Preprocessor
    n_rows: int


def prepare(spec):
    """Load, sort, split and preprocess a dataset (fits on train only)."""
    raw = load_dataset(spec)
    parts = split(raw)
    pre = fit_preprocessor(parts.train, spec.target_smoothing)
    return PreparedData(
        pre.transform(parts.train),
        pre.transform(parts.validation),
        pre.transform(parts.test),
        pre,
        len(raw),
    )
