"""A small message-passing network over the coarse mesh graph.

Encode-process-decode with three message-passing rounds and a modest hidden
width; the decoder's final layer starts at zero so an untrained model
reproduces persistence exactly and training can only improve on it.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .container import MeshData
from .features import FEATURE_WIDTH, STATE_WIDTH


def mesh_edges(mesh: MeshData) -> np.ndarray:
    """Directed edge list (both directions) from the triangle set."""
    t = mesh.triangles.astype(np.int64)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    e = np.unique(e, axis=0)
    return np.concatenate([e, e[:, ::-1]])


def _mlp(width_in: int, width: int, width_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(width_in, width), nn.SiLU(),
        nn.Linear(width, width_out))


class MessagePassingNet(nn.Module):
    def __init__(self, hidden: int = 64, layers: int = 3):
        super().__init__()
        self.hidden = hidden
        self.layers = layers
        self.encoder = _mlp(FEATURE_WIDTH, hidden, hidden)
        self.edge_nets = nn.ModuleList(
            _mlp(2 * hidden + 3, hidden, hidden) for _ in range(layers))
        self.node_nets = nn.ModuleList(
            _mlp(2 * hidden, hidden, hidden) for _ in range(layers))
        self.decoder = _mlp(hidden, hidden, STATE_WIDTH)
        last = self.decoder[-1]
        nn.init.zeros_(last.weight)
        nn.init.zeros_(last.bias)

    def forward(self, features: torch.Tensor, edges: torch.Tensor,
                edge_attr: torch.Tensor) -> torch.Tensor:
        """features: (N, F) or batched (B, N, F); returns matching shape."""
        batched = features.dim() == 3
        if not batched:
            features = features.unsqueeze(0)
        b = features.shape[0]
        h = self.encoder(features)
        src, dst = edges[:, 0], edges[:, 1]
        attr = edge_attr.unsqueeze(0).expand(b, -1, -1)
        for edge_net, node_net in zip(self.edge_nets, self.node_nets):
            msg = edge_net(torch.cat([h[:, src], h[:, dst], attr], dim=2))
            agg = torch.zeros_like(h).index_add_(1, dst, msg)
            h = h + node_net(torch.cat([h, agg], dim=2))
        out = self.decoder(h)
        return out if batched else out.squeeze(0)


def edge_attributes(mesh: MeshData, edges: np.ndarray, scale: float) -> np.ndarray:
    d = (mesh.coords[edges[:, 1]] - mesh.coords[edges[:, 0]]) / scale
    return np.concatenate([d, np.linalg.norm(d, axis=1, keepdims=True)], axis=1)
