"""Dataset generation and evaluation orchestration.

Generation runs one datapoint per worker job (sample -> outline -> meshes ->
clamp -> solve -> downsample -> write); outputs are deterministic functions
of the design point and configuration, so worker count and completion order
never change the bytes. Completed datapoint directories are detected by
checksum and skipped on re-runs. Failed datapoints are recorded in the
manifest with their error text.
"""

from __future__ import annotations

import json
import multiprocessing
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import metrics as mt
from .errors import DatasetError, FlowbenchError
from .geometry import build_outline
from .interp import downsample
from .meshing import DEFAULT_COARSE_EDGE_LEN, DEFAULT_FINE_FACTOR, mesh_quality, triangulate
from .params import DesignPoint, get_variant, sample_design_points
from .solver import (
    PRODUCTION_OPTIONS,
    SolverOptions,
    clamp_amplitudes,
    net_outflow_clamp_factor,
    properties_for,
    reynolds_number,
    run_transient,
)

WORKERS_ENV = "FLOWBENCH_WORKERS"

#: Thermal diffusivities outside this window get flagged in the manifest.
DIFFUSIVITY_WINDOW = (1e-7, 1e-2)


@dataclass
class RunConfig:
    """Pipeline settings; all defaults are desk scale except dt."""

    variants: list[str] = field(default_factory=lambda: ["base"])
    n: int = 16
    seed: int = 0
    dt: float = 0.01
    steps: int = 300
    horizon: int | None = None
    coarse_edge_len: float = DEFAULT_COARSE_EDGE_LEN
    fine_factor: float = DEFAULT_FINE_FACTOR
    rho: float = 1.225
    mu: float = 1.7894e-5
    out_root: str = "dataset"
    workers: int = 1
    npz_export: bool = False
    stabilization: str = "upwind"

    def effective_horizon(self, stored_steps: int) -> int:
        if self.horizon is not None:
            return min(self.horizon, stored_steps)
        return min(mt.FULL_HORIZON, stored_steps)

    def solver_options(self) -> SolverOptions:
        if self.stabilization == PRODUCTION_OPTIONS.stabilization:
            return PRODUCTION_OPTIONS
        return SolverOptions(stabilization=self.stabilization)

    def to_dict(self) -> dict:
        return asdict(self)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise FlowbenchError(f"{WORKERS_ENV}={env!r} is not an integer")
    return 1


# ---------------------------------------------------------------------------
# Single-datapoint job


def generate_datapoint(dp: DesignPoint, config: RunConfig) -> dict:
    """Simulate and write one datapoint; returns its manifest entry."""
    clamp = net_outflow_clamp_factor(dp)
    dp = clamp_amplitudes(dp)
    variant = get_variant(dp.variant.id)

    outline = build_outline(dp)
    coarse_target = config.coarse_edge_len / variant.mesh_resolution_factor
    coarse = triangulate(outline, coarse_target)
    fine = triangulate(outline, coarse_target / config.fine_factor)

    props = properties_for(dp, rho=config.rho, mu=config.mu)
    record = run_transient(dp, fine, config.dt, config.steps, props=props,
                           options=config.solver_options())
    coarse_record = downsample(record, coarse)

    re_obj = reynolds_number(props.rho, float(dp["Inlet1v"]),
                             2.0 * float(dp["Object1Radius"]) * 1e-3, props.mu)
    alpha = props.alpha
    meta = {
        "clamp_factor": clamp,
        "reynolds_object1": re_obj,
        "thermal_diffusivity": alpha,
        "thermal_diffusivity_flagged":
            not (DIFFUSIVITY_WINDOW[0] <= alpha <= DIFFUSIVITY_WINDOW[1]),
        "nodes_fine": fine.n_nodes,
        "nodes_coarse": coarse.n_nodes,
        "node_ratio": fine.n_nodes / coarse.n_nodes,
        "min_angle_fine": mesh_quality(fine).min_angle_deg,
        "min_angle_coarse": mesh_quality(coarse).min_angle_deg,
    }
    pkg = ds.DatapointPackage.from_record(dp, coarse_record, metadata=meta)
    out_dir = ds.write_datapoint(pkg, config.out_root, npz_export=config.npz_export)
    entry = {"index": dp.index, "status": "ok",
             "checksum": ds.datapoint_checksum(out_dir)}
    entry.update(meta)
    return entry


def _job(args) -> dict:
    dp_json, config_dict = args
    dp = DesignPoint.from_json(dp_json)
    config = RunConfig(**config_dict)
    dp_dir = Path(config.out_root) / dp.variant.id / ds.dp_dirname(dp.index)
    if ds.datapoint_complete(dp_dir):
        entry = {"index": dp.index, "status": "ok",
                 "checksum": ds.datapoint_checksum(dp_dir), "skipped": True}
        meta = json.loads((dp_dir / "meta.json").read_text())["metadata"]
        for key in ("clamp_factor", "reynolds_object1", "nodes_fine", "nodes_coarse",
                    "node_ratio", "thermal_diffusivity_flagged"):
            if key in meta:
                entry[key] = meta[key]
        return entry
    try:
        return generate_datapoint(dp, config)
    except FlowbenchError as exc:
        return {"index": dp.index, "status": "failed", "error": str(exc)}


def _worker_init():
    # One BLAS thread per worker keeps results reproducible and cores busy
    # with datapoint-level parallelism instead.
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"


def generate_variant(variant: str, config: RunConfig,
                     design_points: list[DesignPoint] | None = None) -> ds.Manifest:
    """Generate all datapoints of one variant and write its manifest."""
    v = get_variant(variant)
    if design_points is None:
        design_points = sample_design_points(v, config.n, config.seed)
    jobs = [(dp.to_json(), config.to_dict()) for dp in design_points]

    if config.workers <= 1:
        _worker_init()
        entries = [_job(j) for j in jobs]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(config.workers, initializer=_worker_init) as pool:
            entries = list(pool.imap_unordered(_job, jobs, chunksize=1))
    entries.sort(key=lambda e: e["index"])

    ok = [e for e in entries if e["status"] == "ok"]
    if len(design_points) >= 10:
        splits = ds.split_dataset(len(design_points), config.seed)
    else:
        # Too few datapoints for an 80/10/10 split; keep everything in train
        # (mini benchmarks score baselines on the train split).
        splits = {"train": [dp.index for dp in design_points], "val": [], "test": []}
    root = Path(config.out_root)
    train_ok = [i for i in splits["train"]
                if any(e["index"] == i for e in ok)]
    stats_src = (ds.read_fields(root / v.id / ds.dp_dirname(i) / "fields.bin")[0]
                 for i in train_ok)
    stats = ds.compute_stats(stats_src) if train_ok else {
        q: {"mean": 0.0, "std": 0.0} for q in mt.QUANTITIES}

    logged = config.to_dict()
    logged.pop("workers", None)  # execution detail; bytes must not depend on it
    manifest = ds.Manifest(
        variant=v.id, count=len(design_points), seed=config.seed,
        dt=config.dt, steps=config.steps, splits=splits, stats=stats,
        datapoints=entries, config=logged)
    ds.write_manifest(manifest, config.out_root)
    return manifest


def generate(config: RunConfig) -> dict[str, ds.Manifest]:
    """Generate every configured variant; returns manifests by variant id."""
    out = {}
    for variant in config.variants:
        out[variant] = generate_variant(variant, config)
    return out


# ---------------------------------------------------------------------------
# Evaluation


def load_split_packages(data_root: str | Path, variant: str,
                        split: str = "test") -> list[ds.DatapointPackage]:
    manifest = ds.read_manifest(data_root, variant)
    indices = manifest.splits[split]
    out = []
    for i in indices:
        dp_dir = Path(data_root) / variant / ds.dp_dirname(i)
        if not dp_dir.exists():
            raise DatasetError(f"split {split} datapoint {i} missing under {dp_dir}")
        out.append(ds.read_datapoint(dp_dir))
    return out


def score_run(data_root: str | Path, variant: str, pred_root: str | Path,
              horizon: int | None = None, split: str = "test") -> mt.ScoreReport:
    """Errors and performance scores of one prediction set on one variant."""
    manifest = ds.read_manifest(data_root, variant)
    gts = load_split_packages(data_root, variant, split)
    if not gts:
        raise DatasetError(f"empty {split} split for {variant}")
    stored = min(g.fields.shape[0] - 1 for g in gts)
    h = min(horizon, stored) if horizon is not None else min(mt.FULL_HORIZON, stored)
    pairs = []
    for gt in gts:
        pred = mt.read_prediction(pred_root, variant, gt.design_point.index)
        pairs.append((pred, gt))
    errors = mt.rollout_errors(pairs, h)
    report = mt.performance_score(errors, mt.sigmas_from_manifest(manifest))
    report.horizon = h
    report.variant = variant
    report.n_datapoints = len(pairs)
    return report


def evaluate_runs(data_root: str | Path, runs: dict[str, str | Path],
                  horizon: int | None = None, split: str = "test") -> dict:
    """Score several labeled prediction roots and build the GS matrix.

    ``runs`` maps an origin label (the variant a model was trained on) to its
    prediction root; each root holds per-variant prediction directories. GS
    for (origin, target) divides the origin model's error on the target by
    the target-trained model's own error there, so the matrix needs the
    diagonal runs. When the four aspect pairs are present the named scores
    and their average are included.
    """
    per_run: dict[str, dict[str, mt.ScoreReport]] = {}
    for origin, pred_root in runs.items():
        origin = origin.lower()
        targets = {}
        for vdir in sorted(Path(pred_root).iterdir()):
            if vdir.is_dir() and ds.manifest_path(data_root, vdir.name).exists():
                targets[vdir.name] = score_run(data_root, vdir.name, pred_root,
                                               horizon, split)
        if not targets:
            raise DatasetError(f"no scoreable predictions under {pred_root}")
        per_run[origin] = targets

    gs_matrix: dict[str, dict[str, dict[str, float]]] = {}
    gs_pairs: dict[tuple[str, str], float] = {}
    for origin, targets in per_run.items():
        for target, report in targets.items():
            self_report = per_run.get(target, {}).get(target)
            if self_report is None:
                continue
            try:
                gs = mt.generalization_scores(report.rmse, self_report.rmse)
            except FlowbenchError:
                continue  # zero self-error (e.g. ground truth as predictions)
            gs_matrix.setdefault(origin, {})[target] = gs
            gs_pairs[(origin, target)] = gs["mean"]

    payload = {
        "split": split,
        "performance": {origin: {t: r.to_dict() for t, r in targets.items()}
                        for origin, targets in per_run.items()},
        "gs_matrix": gs_matrix,
    }
    try:
        payload["surf_gs"] = mt.surf_scores(gs_pairs).to_dict()
    except FlowbenchError:
        pass
    return payload
