"""Readers and writers for the benchmark's on-disk interface.

Implements the documented container formats directly (ASCII header closed by
a blank line, little-endian payload blocks) so this client depends only on
the published layout, not on the generator's code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FIELDS_MAGIC = "FLOWBENCH-FIELDS"
MESH_MAGIC = "FLOWBENCH-MESH"
FORMAT_VERSION = 1

NODE_TYPE_NAMES = ("Fluid", "Wall", "Inlet1", "Inlet2", "Inlet3", "Outlet", "ObjectWall")


class ContainerError(RuntimeError):
    pass


def _read_header(fh, magic: str) -> dict[str, str]:
    first = fh.readline().decode("ascii").strip().split()
    if len(first) != 2 or first[0] != magic:
        raise ContainerError(f"bad magic; expected {magic}")
    if int(first[1]) != FORMAT_VERSION:
        raise ContainerError(f"unsupported {magic} version {first[1]}")
    header = {}
    while True:
        line = fh.readline().decode("ascii")
        if line in ("\n", ""):
            break
        key, _, value = line.strip().partition(" ")
        header[key] = value
    return header


def read_fields(path: Path) -> tuple[np.ndarray, dict[str, str]]:
    with open(path, "rb") as fh:
        header = _read_header(fh, FIELDS_MAGIC)
        shape = tuple(int(s) for s in header["shape"].split())
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise ContainerError(f"{path}: truncated payload")
    return data.reshape(shape).copy(), header


def write_prediction(path: Path, tensor: np.ndarray, horizon: int):
    tensor = np.ascontiguousarray(tensor, dtype="<f8")
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (f"{FIELDS_MAGIC} {FORMAT_VERSION}\n"
              "dtype float64-le\n"
              f"shape {' '.join(str(s) for s in tensor.shape)}\n"
              "columns u v p T\n"
              "order C step,node,column\n"
              f"horizon {horizon}\n\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(tensor.tobytes())


@dataclass
class MeshData:
    coords: np.ndarray
    triangles: np.ndarray
    node_type: np.ndarray
    node_object: np.ndarray


def read_mesh(path: Path) -> MeshData:
    with open(path, "rb") as fh:
        header = _read_header(fh, MESH_MAGIC)
        n, m, b = (int(s) for s in header["counts"].split())
        coords = np.frombuffer(fh.read(n * 16), dtype="<f8").reshape(n, 2).copy()
        tris = np.frombuffer(fh.read(m * 12), dtype="<i4").reshape(m, 3).copy()
        ntype = np.frombuffer(fh.read(n), dtype="u1").copy()
        nobj = np.frombuffer(fh.read(n * 2), dtype="<i2").copy()
    return MeshData(coords=coords, triangles=tris, node_type=ntype, node_object=nobj)


@dataclass
class Datapoint:
    index: int
    fields: np.ndarray      # (steps + 1, nodes, 4)
    mesh: MeshData
    design_values: dict
    properties: dict
    dt: float


def read_datapoint(dp_dir: Path) -> Datapoint:
    dp_dir = Path(dp_dir)
    fields, _ = read_fields(dp_dir / "fields.bin")
    mesh = read_mesh(dp_dir / "mesh.bin")
    meta = json.loads((dp_dir / "meta.json").read_text())
    return Datapoint(
        index=int(meta["design_point"]["index"]),
        fields=fields,
        mesh=mesh,
        design_values=meta["design_point"]["values"],
        properties=meta["properties"],
        dt=float(meta["dt"]),
    )


@dataclass
class ManifestData:
    variant: str
    splits: dict[str, list[int]]
    stats: dict[str, dict[str, float]]
    steps: int


def read_manifest(data_root: Path, variant: str) -> ManifestData:
    payload = json.loads((Path(data_root) / variant / "manifest").read_text())
    if int(payload["format_version"]) != FORMAT_VERSION:
        raise ContainerError(f"unsupported manifest version {payload['format_version']}")
    return ManifestData(variant=payload["variant"], splits=payload["splits"],
                        stats=payload["stats"], steps=int(payload["steps"]))


def datapoint_dir(data_root: Path, variant: str, index: int) -> Path:
    return Path(data_root) / variant / f"dp_{index}"


def load_split(data_root: Path, variant: str, split: str) -> list[Datapoint]:
    manifest = read_manifest(data_root, variant)
    return [read_datapoint(datapoint_dir(data_root, variant, i))
            for i in manifest.splits[split]]
