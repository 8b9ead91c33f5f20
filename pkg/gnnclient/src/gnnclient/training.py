"""Seven-step supervised training of the message-passing model.

The supervision target stack is built against previously predicted states:
with q_P^t defined as the ground-truth state at the window start,

    target_k = q_GT^{t+k} - q_P^{t+k-1},   k = 1..K

and the loss is the mean squared error between the target stack and the
model's output stack, whose k-th entry advances q_P^{t+k} = q_P^{t+k-1} +
output_k. Windows of one datapoint are batched into a single tensor chain;
this environment is dispatch-overhead-bound, so batching is what makes 200
epochs affordable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .container import Datapoint, load_split, read_manifest
from .features import BoundaryDriver, Normalizer, node_features
from .model import MessagePassingNet, edge_attributes, mesh_edges

SUPERVISION_STEPS = 7


def build_targets(gt_states: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Target stack for one supervision window.

    gt_states holds K+1 ground-truth states (t .. t+K); predicted holds the
    K-1 intermediate predicted states (t+1 .. t+K-1). target_k is measured
    against the previously predicted state, with the window start taken from
    the ground truth.
    """
    k = gt_states.shape[0] - 1
    if predicted.shape[0] != max(k - 1, 0):
        raise ValueError(f"need {k - 1} intermediate predictions, got "
                         f"{predicted.shape[0]}")
    prev = np.concatenate([gt_states[0:1], predicted], axis=0)  # q_P^{t..t+K-1}
    return gt_states[1:] - prev


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 1e-4
    lr_decay: float = 0.999
    hidden: int = 48
    layers: int = 3
    windows_per_epoch: int = 6
    batch_windows: int = 6
    supervision_steps: int = SUPERVISION_STEPS
    seed: int = 0
    device: str = "cpu"


@dataclass
class _GraphCache:
    edges: torch.Tensor
    edge_attr: torch.Tensor
    driver: BoundaryDriver
    fields_z: np.ndarray
    static_feats: torch.Tensor  # (N, FEATURE_WIDTH - 4), constant per graph
    bc_mask: torch.Tensor       # (N, 4) bool, prescribed entries
    dp: Datapoint


class Trainer:
    def __init__(self, data_root: str | Path, variant: str,
                 config: TrainConfig = TrainConfig()):
        self.config = config
        self.variant = variant
        self.data_root = Path(data_root)
        manifest = read_manifest(self.data_root, variant)
        self.normalizer = Normalizer.from_manifest(manifest)
        self.dt = None
        torch.manual_seed(config.seed)
        self.model = MessagePassingNet(hidden=config.hidden, layers=config.layers)
        self.model.to(config.device)

        self.train_graphs = self._load("train")
        if not self.train_graphs:
            raise RuntimeError(f"empty train split for {variant}")
        self.val_graphs = self._load("val")

    def _load(self, split: str) -> list[_GraphCache]:
        graphs = []
        for dp in load_split(self.data_root, self.variant, split):
            edges = mesh_edges(dp.mesh)
            scale = float(np.median(np.linalg.norm(
                dp.mesh.coords[edges[:, 1]] - dp.mesh.coords[edges[:, 0]], axis=1)))
            attr = edge_attributes(dp.mesh, edges, scale)
            driver = BoundaryDriver.from_datapoint(dp)
            fields_z = self.normalizer.encode(dp.fields)
            static = node_features(fields_z[0], dp)[:, 4:]
            mask = np.zeros((dp.fields.shape[1], 4), dtype=bool)
            mask[driver.dirichlet_uv, 0:2] = True
            mask[driver.dirichlet_T, 3] = True
            graphs.append(_GraphCache(
                edges=torch.as_tensor(edges, dtype=torch.long),
                edge_attr=torch.as_tensor(attr, dtype=torch.float32),
                driver=driver,
                fields_z=fields_z,
                static_feats=torch.as_tensor(static, dtype=torch.float32),
                bc_mask=torch.as_tensor(mask),
                dp=dp))
            self.dt = dp.dt
        return graphs

    # -- batched window loss --------------------------------------------------

    def _imposed_states(self, graph: _GraphCache, states_z: np.ndarray,
                        times: np.ndarray) -> np.ndarray:
        out = np.empty_like(states_z)
        for b in range(states_z.shape[0]):
            phys = self.normalizer.decode(states_z[b])
            out[b] = self.normalizer.encode(graph.driver.apply(phys, float(times[b])))
        return out

    def batch_loss(self, graph: _GraphCache, t0s: np.ndarray) -> torch.Tensor:
        """Autoregressive K-step loss over a batch of windows of one graph."""
        k = self.config.supervision_steps
        gt = np.stack([graph.fields_z[t0:t0 + k + 1] for t0 in t0s])  # (B,K+1,N,4)
        b, n = gt.shape[0], gt.shape[2]
        state = torch.as_tensor(gt[:, 0], dtype=torch.float32)
        static = graph.static_feats.unsqueeze(0).expand(b, -1, -1)
        mask = graph.bc_mask.unsqueeze(0).expand(b, -1, -1)

        outputs = []
        predictions = []
        for step in range(k):
            feats = torch.cat([state, static], dim=2)
            delta = self.model(feats, graph.edges, graph.edge_attr)
            outputs.append(delta)
            state = state + delta
            times = (t0s + step + 1) * self.dt
            with torch.no_grad():
                fixed_np = self._imposed_states(graph, state.detach().numpy(), times)
            fixed = torch.as_tensor(fixed_np, dtype=torch.float32)
            state = torch.where(mask, fixed, state)
            predictions.append(state)

        with torch.no_grad():
            preds_np = torch.stack(predictions, dim=1).numpy()  # (B,K,N,4)
        targets = np.stack([
            build_targets(gt[i], preds_np[i, :k - 1]) for i in range(b)])
        target_t = torch.as_tensor(targets, dtype=torch.float32)
        output_t = torch.stack(outputs, dim=1)  # (B,K,N,4)
        return torch.mean((output_t - target_t) ** 2)

    def _all_windows(self, graphs: list[_GraphCache]) -> list[tuple[int, int]]:
        out = []
        for gi, graph in enumerate(graphs):
            max_t0 = graph.fields_z.shape[0] - 1 - self.config.supervision_steps
            out += [(gi, t0) for t0 in range(0, max_t0 + 1)]
        return out

    def _fixed_eval_windows(self, graphs: list[_GraphCache], count: int):
        windows = self._all_windows(graphs)
        if len(windows) > count:
            rng = np.random.default_rng(1234)
            pick = rng.choice(len(windows), size=count, replace=False)
            windows = [windows[i] for i in sorted(pick)]
        return windows

    def eval_loss(self, graphs: list[_GraphCache], windows) -> float:
        if not windows:
            return float("nan")
        self.model.eval()
        by_graph: dict[int, list[int]] = {}
        for gi, t0 in windows:
            by_graph.setdefault(gi, []).append(t0)
        total = 0.0
        with torch.no_grad():
            for gi, t0s in sorted(by_graph.items()):
                loss = self.batch_loss(graphs[gi], np.asarray(t0s))
                total += float(loss) * len(t0s)
        self.model.train()
        return total / len(windows)

    def train(self, log=print) -> dict:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        opt = torch.optim.Adam(self.model.parameters(), lr=cfg.lr)
        sched = torch.optim.lr_scheduler.ExponentialLR(opt, gamma=cfg.lr_decay)

        eval_windows = self._fixed_eval_windows(self.train_graphs, 48)
        val_windows = self._fixed_eval_windows(self.val_graphs, 16) \
            if self.val_graphs else []
        initial = self.eval_loss(self.train_graphs, eval_windows)
        history = {"train": [], "val": [], "initial": initial}
        log(f"initial train loss {initial:.6f}")

        per_graph_windows = []
        for graph in self.train_graphs:
            max_t0 = graph.fields_z.shape[0] - 1 - cfg.supervision_steps
            per_graph_windows.append(np.arange(0, max_t0 + 1))

        batches = max(1, cfg.windows_per_epoch // cfg.batch_windows)
        for epoch in range(cfg.epochs):
            epoch_loss = 0.0
            for _ in range(batches):
                gi = int(rng.integers(len(self.train_graphs)))
                pool = per_graph_windows[gi]
                size = min(cfg.batch_windows, len(pool))
                t0s = rng.choice(pool, size=size, replace=False)
                opt.zero_grad()
                loss = self.batch_loss(self.train_graphs[gi], t0s)
                if not torch.isfinite(loss):
                    raise RuntimeError(f"training diverged at epoch {epoch}")
                loss.backward()
                opt.step()
                epoch_loss += float(loss.detach())
            sched.step()
            history["train"].append(epoch_loss / batches)
            if val_windows and (epoch + 1) % 25 == 0:
                history["val"].append(self.eval_loss(self.val_graphs, val_windows))
                log(f"epoch {epoch + 1}: train {history['train'][-1]:.6f} "
                    f"val {history['val'][-1]:.6f}")

        history["final"] = self.eval_loss(self.train_graphs, eval_windows)
        log(f"final train loss {history['final']:.6f} "
            f"(initial {history['initial']:.6f})")
        return history

    def save(self, path: str | Path, history: dict | None = None):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save({
            "state_dict": self.model.state_dict(),
            "hidden": self.config.hidden,
            "layers": self.config.layers,
            "supervision_steps": self.config.supervision_steps,
            "normalizer_mean": self.normalizer.mean,
            "normalizer_std": self.normalizer.std,
            "variant": self.variant,
            "history": history or {},
        }, path)


def load_model(path: str | Path) -> tuple[MessagePassingNet, Normalizer, dict]:
    payload = torch.load(path, weights_only=False)
    model = MessagePassingNet(hidden=payload["hidden"], layers=payload["layers"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    norm = Normalizer(mean=payload["normalizer_mean"], std=payload["normalizer_std"])
    return model, norm, payload
