"""Analytic prediction generators exercising the evaluation pipeline.

Neither baseline trains anything: persistence repeats the initial state over
the horizon; linear extrapolation continues the first ground-truth increment.
Both emit standard prediction files, so every metric path runs without any
learned model.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import DatapointPackage
from .errors import ScoreError
from .metrics import PredictionRecord, write_prediction

BASELINE_KINDS = ("persistence", "extrapolation")


def persistence_predict(gt: DatapointPackage, horizon: int) -> PredictionRecord:
    """Every predicted step equals the stored initial state."""
    stored = gt.fields.shape[0] - 1
    if horizon > stored:
        raise ScoreError(f"horizon {horizon} exceeds stored steps {stored}")
    fields = np.broadcast_to(gt.fields[0], (horizon,) + gt.fields.shape[1:]).copy()
    return PredictionRecord(datapoint_index=gt.design_point.index,
                            horizon=horizon, fields=fields)


def extrapolate_predict(gt: DatapointPackage, horizon: int) -> PredictionRecord:
    """Step t predicts state0 + t * (state1 - state0)."""
    if gt.fields.shape[0] < 2:
        raise ScoreError("linear extrapolation needs at least 2 stored states")
    stored = gt.fields.shape[0] - 1
    if horizon > stored:
        raise ScoreError(f"horizon {horizon} exceeds stored steps {stored}")
    delta = gt.fields[1] - gt.fields[0]
    steps = np.arange(1, horizon + 1, dtype=np.float64)[:, None, None]
    fields = gt.fields[0][None] + steps * delta[None]
    return PredictionRecord(datapoint_index=gt.design_point.index,
                            horizon=horizon, fields=fields)


_PREDICTORS = {
    "persistence": persistence_predict,
    "extrapolation": extrapolate_predict,
}


def baseline_predict(kind: str, gt: DatapointPackage, horizon: int) -> PredictionRecord:
    if kind not in _PREDICTORS:
        raise ScoreError(f"unknown baseline {kind!r}; options: {', '.join(BASELINE_KINDS)}")
    return _PREDICTORS[kind](gt, horizon)


def emit_baseline(kind: str, gt: DatapointPackage, horizon: int,
                  pred_root: str | Path, variant: str) -> Path:
    return write_prediction(baseline_predict(kind, gt, horizon), pred_root, variant)
