"""Autoregressive rollout from the initial state to prediction files.

Only state 0 of each datapoint is consumed; later stored states never enter
the rollout. Prescribed boundary values are recomputed from the design-point
parameters at every step. The oracle mode replaces the learned increment
with the true one and exists to validate the prediction plumbing (it reads
the stored states and must reproduce them bit-for-bit).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .container import Datapoint, datapoint_dir, load_split, write_prediction
from .features import BoundaryDriver, Normalizer, node_features
from .model import MessagePassingNet, edge_attributes, mesh_edges


def rollout_datapoint(model: MessagePassingNet | None, norm: Normalizer,
                      dp: Datapoint, horizon: int,
                      oracle: bool = False) -> np.ndarray:
    driver = BoundaryDriver.from_datapoint(dp)
    edges = mesh_edges(dp.mesh)
    scale = float(np.median(np.linalg.norm(
        dp.mesh.coords[edges[:, 1]] - dp.mesh.coords[edges[:, 0]], axis=1)))
    attr = torch.as_tensor(edge_attributes(dp.mesh, edges, scale),
                           dtype=torch.float32)
    edges_t = torch.as_tensor(edges, dtype=torch.long)

    state_z = norm.encode(dp.fields[0])
    out = np.empty((horizon,) + dp.fields.shape[1:])
    phys = dp.fields[0]
    for step in range(horizon):
        if oracle:
            # true increment applied losslessly: replays the stored states
            phys = phys + (dp.fields[step + 1] - phys)
            out[step] = dp.fields[step + 1]
            continue
        feats = node_features(state_z, dp)
        with torch.no_grad():
            delta = model(torch.as_tensor(feats, dtype=torch.float32),
                          edges_t, attr).numpy()
        state_z = state_z + delta
        phys = driver.apply(norm.decode(state_z), (step + 1) * dp.dt)
        state_z = norm.encode(phys)
        out[step] = norm.decode(state_z)
    return out


def rollout_split(model, norm: Normalizer, data_root: str | Path, variant: str,
                  split: str, horizon: int, pred_root: str | Path,
                  oracle: bool = False) -> list[Path]:
    written = []
    for dp in load_split(Path(data_root), variant, split):
        stored = dp.fields.shape[0] - 1
        h = min(horizon, stored)
        fields = rollout_datapoint(model, norm, dp, h, oracle=oracle)
        path = Path(pred_root) / variant / f"dp_{dp.index}" / "fields.bin"
        write_prediction(path, fields, h)
        written.append(path)
    return written
