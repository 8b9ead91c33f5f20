"""Node features, normalization, and prescribed boundary values.

Node features concatenate the normalized state (u, v, p, T), a one-hot of
the seven node types, and the two thermal fluid properties broadcast to
every node. Normalization statistics come from the dataset manifest; the
model works on z-scored states and predicts z-scored increments.

Boundary values are known data, not predictions: during training rollouts
and evaluation rollouts alike, prescribed nodes (inlets, walls, obstacle
surfaces) are reset to their boundary values at every step, computed from
the design-point parameters stored in the datapoint metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .container import Datapoint, ManifestData, NODE_TYPE_NAMES

STATE_WIDTH = 4
FEATURE_WIDTH = STATE_WIDTH + len(NODE_TYPE_NAMES) + 2

#: Fixed scales for the broadcast thermal properties (range-table maxima).
K_SCALE = 1.2
CP_SCALE = 6446.0

AMBIENT_TEMPERATURE = 300.0


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray  # (4,)
    std: np.ndarray   # (4,)

    @classmethod
    def from_manifest(cls, manifest: ManifestData) -> "Normalizer":
        s = manifest.stats
        mean = np.array([s["velocity"]["mean"], s["velocity"]["mean"],
                         s["pressure"]["mean"], s["temperature"]["mean"]])
        std = np.array([s["velocity"]["std"], s["velocity"]["std"],
                        s["pressure"]["std"], s["temperature"]["std"]])
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std)

    def encode(self, state: np.ndarray) -> np.ndarray:
        return (state - self.mean) / self.std

    def decode(self, state_z: np.ndarray) -> np.ndarray:
        return state_z * self.std + self.mean


def node_features(state_z: np.ndarray, dp: Datapoint) -> np.ndarray:
    """(N, 13) feature matrix from a z-scored state."""
    n = state_z.shape[0]
    onehot = np.zeros((n, len(NODE_TYPE_NAMES)))
    onehot[np.arange(n), dp.mesh.node_type] = 1.0
    props = np.empty((n, 2))
    props[:, 0] = float(dp.properties["k"]) / K_SCALE
    props[:, 1] = float(dp.properties["cp"]) / CP_SCALE
    return np.concatenate([state_z, onehot, props], axis=1)


@dataclass
class BoundaryDriver:
    """Prescribed nodal values of one datapoint as functions of time."""

    dirichlet_uv: np.ndarray     # (N,) bool
    dirichlet_T: np.ndarray      # (N,) bool
    uv_static: np.ndarray        # (N, 2) walls/objects contribution (zeros)
    temp_values: np.ndarray      # (N,)
    inlet_nodes: dict[str, np.ndarray]
    inlet_params: dict[str, tuple[float, float, float, np.ndarray]]

    @classmethod
    def from_datapoint(cls, dp: Datapoint) -> "BoundaryDriver":
        values = dp.design_values
        ntype = dp.mesh.node_type
        names = [NODE_TYPE_NAMES[t] for t in ntype]
        n = len(names)

        orientation = math.radians(float(values.get("DomainOrientation", 0.0)))
        rot = np.array([[math.cos(orientation), -math.sin(orientation)],
                        [math.sin(orientation), math.cos(orientation)]])

        dirichlet_uv = np.array([t in ("Wall", "ObjectWall", "Inlet1", "Inlet2",
                                       "Inlet3") for t in names])
        dirichlet_T = np.zeros(n, dtype=bool)
        temp_values = np.zeros(n)

        inlet_nodes = {}
        inlet_params = {}
        specs = {
            "Inlet1": (float(values["Inlet1v"]), 0.0, 0.0, np.array([1.0, 0.0]),
                       AMBIENT_TEMPERATURE),
        }
        for i, sign in ((2, -1.0), (3, 1.0)):
            ang = math.radians(float(values[f"Inlet{i}Angle"]))
            specs[f"Inlet{i}"] = (
                float(values[f"Inlet{i}vMean"]),
                float(values[f"Inlet{i}vAmplitude"]),
                float(values[f"Inlet{i}vFrequency"]),
                np.array([math.cos(ang), sign * math.sin(ang)]),
                float(values[f"Inlet{i}T"]))
        for tag, (mean, amp, freq, direction, temp) in specs.items():
            nodes = np.flatnonzero([t == tag for t in names])
            inlet_nodes[tag] = nodes
            inlet_params[tag] = (mean, amp, freq, rot @ direction)
            dirichlet_T[nodes] = True
            temp_values[nodes] = temp

        for oid in (1, 2):
            key = f"Object{oid}T"
            if key in values:
                sel = (ntype == NODE_TYPE_NAMES.index("ObjectWall")) \
                    & (dp.mesh.node_object == oid)
                dirichlet_T |= sel
                temp_values[sel] = float(values[key])

        return cls(dirichlet_uv=dirichlet_uv, dirichlet_T=dirichlet_T,
                   uv_static=np.zeros((n, 2)), temp_values=temp_values,
                   inlet_nodes=inlet_nodes, inlet_params=inlet_params)

    def apply(self, state: np.ndarray, t: float) -> np.ndarray:
        """Overwrite prescribed entries of a physical-space state at time t."""
        out = state.copy()
        out[self.dirichlet_uv, 0:2] = self.uv_static[self.dirichlet_uv]
        for tag, nodes in self.inlet_nodes.items():
            mean, amp, freq, direction = self.inlet_params[tag]
            speed = mean + amp * math.sin(2.0 * math.pi * freq * t)
            out[nodes, 0] = speed * direction[0]
            out[nodes, 1] = speed * direction[1]
        out[self.dirichlet_T, 3] = self.temp_values[self.dirichlet_T]
        return out
