"""Out-degree forecasting and active-source selection."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .graph import NodeId, node_key


@dataclass(frozen=True)
class DegreeForecast:
    node: NodeId
    values: tuple[float, ...]


class NotFittedError(RuntimeError):
    pass


class Forecaster:
    name = "base"

    def __init__(self):
        self._last: dict[NodeId, np.ndarray] | None = None

    def fit(self, histories: Mapping[NodeId, Sequence[float]]) -> "Forecaster":
        if not histories:
            raise ValueError("no histories to fit")
        lengths = {len(s) for s in histories.values()}
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError("histories must share one non-zero length")
        self._last = {u: np.asarray(s, dtype=np.float64) for u, s in histories.items()}
        self._fit(np.vstack(list(self._last.values())))
        return self

    def _fit(self, matrix: np.ndarray) -> None:
        pass

    def _forecast(self, series: np.ndarray, horizon: int) -> np.ndarray:
        raise NotImplementedError

    def predict(self, u: NodeId, horizon: int) -> DegreeForecast:
        if self._last is None:
            raise NotFittedError(f"{self.name} forecaster used before fit")
        series = self._last.get(u)
        if series is None:
            return DegreeForecast(u, (0.0,) * horizon)
        values = np.clip(self._forecast(series, horizon), 0.0, None)
        return DegreeForecast(u, tuple(float(v) for v in values))

    def predict_all(self, horizon: int) -> dict[NodeId, DegreeForecast]:
        if self._last is None:
            raise NotFittedError(f"{self.name} forecaster used before fit")
        return {u: self.predict(u, horizon) for u in self._last}


class PersistenceForecaster(Forecaster):
    """Repeats the last observed day."""

    name = "persistence"

    def _forecast(self, series, horizon):
        return np.full(horizon, series[-1])


class MovingAverageForecaster(Forecaster):
    """Mean of the last ``window`` days (default ``min(7, len(history))``)."""

    name = "moving-average"

    def __init__(self, window: int | None = None):
        super().__init__()
        self.window = window

    def _forecast(self, series, horizon):
        w = min(self.window or 7, len(series))
        return np.full(horizon, series[-w:].mean())


class AutoregressiveForecaster(Forecaster):
    """One AR(p) model with intercept pooled over all nodes, fitted by least squares.

    Multi-step forecasts are produced recursively.
    """

    name = "autoregressive"

    def __init__(self, order: int = 1):
        super().__init__()
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self.coef: np.ndarray | None = None

    def _fit(self, matrix):
        p = self.order
        if matrix.shape[1] <= p:
            self.coef = None
            return
        rows, targets = [], []
        for t in range(p, matrix.shape[1]):
            rows.append(np.hstack([np.ones((matrix.shape[0], 1)), matrix[:, t - p:t][:, ::-1]]))
            targets.append(matrix[:, t])
        x = np.vstack(rows)
        y = np.concatenate(targets)
        self.coef = np.linalg.lstsq(x, y, rcond=None)[0]

    def _forecast(self, series, horizon):
        if self.coef is None:
            return np.full(horizon, series[-1])
        hist = list(series)
        out = []
        for _ in range(horizon):
            lags = np.asarray(hist[-1:-self.order - 1:-1])
            nxt = float(self.coef[0] + self.coef[1:] @ lags)
            out.append(nxt)
            hist.append(max(nxt, 0.0))
        return np.asarray(out)


class FixedForecaster(Forecaster):
    """Returns pre-computed values; used to drive the pipeline with known degrees."""

    name = "fixed"

    def __init__(self, values: Mapping[NodeId, Sequence[float]]):
        super().__init__()
        self.values = {u: np.asarray(v, dtype=np.float64) for u, v in values.items()}

    def fit(self, histories=None):
        self._last = self.values
        return self

    def _forecast(self, series, horizon):
        out = np.zeros(horizon)
        out[:min(horizon, len(series))] = series[:horizon]
        return out


FORECASTERS = {
    "persistence": PersistenceForecaster,
    "moving-average": MovingAverageForecaster,
    "autoregressive": AutoregressiveForecaster,
}


def make_forecaster(name: str = "moving-average", **params) -> Forecaster:
    try:
        return FORECASTERS[name](**params)
    except KeyError:
        raise ValueError(f"unknown forecaster {name!r}; choose from {sorted(FORECASTERS)}") from None


def degree_loss(pred: Mapping[NodeId, Sequence[float]], truth: Mapping[NodeId, Sequence[float]]) -> float:
    """Mean squared error over nodes and days: (1 / (tau * N)) * sum (d - d_hat)^2."""
    if set(pred) != set(truth):
        raise ValueError("prediction and truth cover different nodes")
    if not truth:
        raise ValueError("empty input")
    keys = sorted(truth, key=node_key)
    p = [np.asarray(getattr(pred[k], "values", pred[k]), dtype=np.float64) for k in keys]
    t = [np.asarray(getattr(truth[k], "values", truth[k]), dtype=np.float64) for k in keys]
    if any(a.shape != b.shape for a, b in zip(p, t)) or len({a.shape for a in t}) != 1:
        raise ValueError("shape mismatch between prediction and truth")
    p, t = np.vstack(p), np.vstack(t)
    return float(((t - p) ** 2).sum() / t.size)


def active_sources(forecasts: Mapping[NodeId, DegreeForecast], threshold: float = 0.0) -> list[list[NodeId]]:
    """Per-day sets {u : d_hat_t(u) > threshold}, each in canonical node order."""
    if not forecasts:
        return []
    horizon = max(len(f.values) for f in forecasts.values())
    days: list[list[NodeId]] = [[] for _ in range(horizon)]
    for u in sorted(forecasts, key=node_key):
        for d, v in enumerate(forecasts[u].values):
            if v > threshold:
                days[d].append(u)
    return days


def k2(d_hat: float) -> int:
    """Destination budget: round half to even."""
    return int(round(d_hat))


def dump_forecasts(path: str | Path, forecasts: Mapping[NodeId, DegreeForecast], start_day: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u in sorted(forecasts, key=node_key):
            for i, v in enumerate(forecasts[u].values):
                fh.write(json.dumps({"node": u, "day": start_day + i, "value": v}) + "\n")


def load_forecasts(path: str | Path) -> tuple[dict[NodeId, DegreeForecast], int]:
    rows: dict[NodeId, dict[int, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                rows.setdefault(r["node"], {})[r["day"]] = float(r["value"])
    if not rows:
        return {}, 0
    start = min(min(d) for d in rows.values())
    stop = max(max(d) for d in rows.values()) + 1
    out = {u: DegreeForecast(u, tuple(days.get(d, 0.0) for d in range(start, stop)))
           for u, days in rows.items()}
    return out, start
