"""Prediction scoring: per-quantity errors, performance and generalization
scores, and the four named aspect scores plus their average.

The velocity error for a horizon H over a prediction set D is

    (1 / (|D| H)) sum_d sum_{t=1..H} (1 / (sqrt(2) N_d)) sum_v ||x_v^t - y_v^t||_2

with the Euclidean norm over the two velocity components per node. Pressure
and temperature use the same structure with per-node absolute differences and
a 1/N_d normalizer (the sqrt(2) is the per-component normalization of the
two-vector and has no scalar counterpart), so a uniform per-component error
of eps scores exactly eps for every quantity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import (
    DatapointPackage,
    FIELD_COLUMNS,
    Manifest,
    dp_dirname,
    read_fields,
    write_fields,
)
from .errors import AlignmentError, ScoreError

QUANTITIES = ("velocity", "pressure", "temperature")

#: The evaluation horizon used at paper scale.
FULL_HORIZON = 250

#: (origin variant, target variant) pairs defining the four aspect scores.
SURF_PAIRS = {
    "mesh": ("full", "mesh"),
    "topology": ("base", "topology"),
    "range": ("base", "range"),
    "dynamic": ("base", "dynamic"),
}


@dataclass
class PredictionRecord:
    """A model's rolled-out fields for one datapoint, steps 1..H."""

    datapoint_index: int
    horizon: int
    fields: np.ndarray  # (H, nodes, 4)

    def __post_init__(self):
        if self.fields.ndim != 3 or self.fields.shape[2] != len(FIELD_COLUMNS):
            raise AlignmentError(
                f"prediction tensor must be (H, nodes, 4); got {self.fields.shape}")
        if self.fields.shape[0] != self.horizon:
            raise AlignmentError(
                f"horizon {self.horizon} disagrees with tensor {self.fields.shape}")


def write_prediction(pred: PredictionRecord, pred_root: str | Path,
                     variant: str) -> Path:
    out = Path(pred_root) / variant / dp_dirname(pred.datapoint_index)
    out.mkdir(parents=True, exist_ok=True)
    write_fields(out / "fields.bin", pred.fields, horizon=pred.horizon)
    return out


def read_prediction(pred_root: str | Path, variant: str, index: int) -> PredictionRecord:
    path = Path(pred_root) / variant / dp_dirname(index) / "fields.bin"
    if not path.exists():
        raise AlignmentError(f"missing prediction file {path}")
    fields, header = read_fields(path)
    horizon = int(header.get("horizon", fields.shape[0]))
    return PredictionRecord(datapoint_index=index, horizon=horizon, fields=fields)


# ---------------------------------------------------------------------------
# Error measures


def _check_pair(pred: PredictionRecord, gt: DatapointPackage, horizon: int):
    if horizon < 1:
        raise ScoreError(f"evaluation horizon must be >= 1, got {horizon}")
    if pred.horizon < horizon:
        raise AlignmentError(
            f"datapoint {pred.datapoint_index}: prediction horizon {pred.horizon} "
            f"is shorter than the requested {horizon}")
    if pred.fields.shape[1] != gt.fields.shape[1]:
        raise AlignmentError(
            f"datapoint {pred.datapoint_index}: prediction has "
            f"{pred.fields.shape[1]} nodes, ground truth {gt.fields.shape[1]}")
    if gt.fields.shape[0] - 1 < horizon:
        raise AlignmentError(
            f"datapoint {pred.datapoint_index}: ground truth stores "
            f"{gt.fields.shape[0] - 1} steps, fewer than horizon {horizon}")


def _pair_errors(pred: PredictionRecord, gt: DatapointPackage, horizon: int) -> dict[str, float]:
    """Per-datapoint mean errors; prediction step t matches stored state t."""
    _check_pair(pred, gt, horizon)
    x = pred.fields[:horizon]
    y = gt.fields[1:horizon + 1]
    vel = np.linalg.norm(x[:, :, 0:2] - y[:, :, 0:2], axis=2)
    return {
        "velocity": float(vel.mean() / np.sqrt(2.0)),
        "pressure": float(np.abs(x[:, :, 2] - y[:, :, 2]).mean()),
        "temperature": float(np.abs(x[:, :, 3] - y[:, :, 3]).mean()),
    }


def rollout_errors(pairs, horizon: int) -> dict[str, float]:
    """Dataset-level errors: mean over datapoints of the per-datapoint means."""
    sums = {q: 0.0 for q in QUANTITIES}
    count = 0
    for pred, gt in pairs:
        errs = _pair_errors(pred, gt, horizon)
        for q in QUANTITIES:
            sums[q] += errs[q]
        count += 1
    if count == 0:
        raise ScoreError("no prediction/ground-truth pairs to score")
    return {q: sums[q] / count for q in QUANTITIES}


def rmse_velocity(preds, gts, horizon: int) -> float:
    """Velocity rollout error (m/s) over matched prediction/ground-truth lists."""
    return rollout_errors(zip(preds, gts), horizon)["velocity"]


def rmse_scalar(preds, gts, horizon: int, quantity: str) -> float:
    """Pressure (Pa) or temperature (K) rollout error."""
    if quantity in ("p", "pressure"):
        key = "pressure"
    elif quantity in ("t", "T", "temperature"):
        key = "temperature"
    else:
        raise ScoreError(f"unknown scalar quantity {quantity!r}")
    return rollout_errors(zip(preds, gts), horizon)[key]


# ---------------------------------------------------------------------------
# Scores


@dataclass
class ScoreReport:
    rmse: dict[str, float]
    ps: dict[str, float]
    ps_mean: float
    horizon: int
    variant: str = ""
    n_datapoints: int = 0
    gs: dict[str, float] = field(default_factory=dict)
    gs_mean: float | None = None

    def to_dict(self) -> dict:
        out = {
            "variant": self.variant,
            "horizon": self.horizon,
            "n_datapoints": self.n_datapoints,
            "rmse": self.rmse,
            "ps": self.ps,
            "ps_mean": self.ps_mean,
        }
        if self.gs:
            out["gs"] = self.gs
            out["gs_mean"] = self.gs_mean
        return out


def performance_score(rmses: dict[str, float], sigmas: dict[str, float]) -> ScoreReport:
    """Normalized errors: PS_q = error_q / sigma_q, averaged over quantities."""
    ps = {}
    for q in QUANTITIES:
        sigma = float(sigmas[q])
        if sigma <= 0:
            raise ScoreError(f"degenerate dataset: sigma for {q} is {sigma}")
        ps[q] = float(rmses[q]) / sigma
    return ScoreReport(rmse={q: float(rmses[q]) for q in QUANTITIES},
                       ps=ps, ps_mean=sum(ps.values()) / len(ps), horizon=0)


def generalization_score(cross_rmse: float, self_rmse: float) -> float:
    """Relative performance drop for one quantity: cross / self."""
    if self_rmse <= 0:
        raise ScoreError("self-trained reference error is zero; ratio undefined")
    return float(cross_rmse) / float(self_rmse)


def generalization_scores(cross: dict[str, float], self_: dict[str, float]) -> dict[str, float]:
    out = {q: generalization_score(cross[q], self_[q]) for q in QUANTITIES}
    out["mean"] = sum(out[q] for q in QUANTITIES) / len(QUANTITIES)
    return out


@dataclass(frozen=True)
class SurfScores:
    mesh: float
    topology: float
    range: float
    dynamic: float

    @property
    def average(self) -> float:
        return (self.mesh + self.topology + self.range + self.dynamic) / 4.0

    def to_dict(self) -> dict:
        return {"mesh": self.mesh, "topology": self.topology, "range": self.range,
                "dynamic": self.dynamic, "average": self.average}


def surf_scores(gs: dict[tuple[str, str], float]) -> SurfScores:
    """The four aspect scores from a (origin, target) -> GS map.

    Requires (full, mesh), (base, topology), (base, range), (base, dynamic).
    """
    table = {(o.lower(), t.lower()): float(v) for (o, t), v in gs.items()}
    missing = [pair for pair in SURF_PAIRS.values() if pair not in table]
    if missing:
        need = ", ".join(f"{o}->{t}" for o, t in missing)
        raise ScoreError(f"generalization matrix incomplete; still need: {need}")
    return SurfScores(mesh=table[SURF_PAIRS["mesh"]],
                      topology=table[SURF_PAIRS["topology"]],
                      range=table[SURF_PAIRS["range"]],
                      dynamic=table[SURF_PAIRS["dynamic"]])


# ---------------------------------------------------------------------------
# Report files


def write_report(payload: dict, out_dir: str | Path, name: str) -> tuple[Path, Path]:
    """Score report as canonical JSON plus a flat CSV table for plotting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jpath = out_dir / f"{name}.json"
    jpath.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n",
                     encoding="utf-8")

    rows: list[tuple[str, float]] = []

    def flatten(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                flatten(f"{prefix}.{k}" if prefix else str(k), obj[k])
        elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
            rows.append((prefix, float(obj)))

    flatten("", payload)
    cpath = out_dir / f"{name}.csv"
    with open(cpath, "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        for key, value in rows:
            fh.write(f"{key},{value!r}\n")
    return jpath, cpath


def sigmas_from_manifest(manifest: Manifest) -> dict[str, float]:
    return {q: float(manifest.stats[q]["std"]) for q in QUANTITIES}
