"""On-disk benchmark packaging: per-datapoint containers, manifests, splits.

Layout under a dataset root:

    <root>/<variant>/dp_<index>/fields.bin   field tensor container
    <root>/<variant>/dp_<index>/mesh.bin     mesh container
    <root>/<variant>/dp_<index>/meta.json    generation metadata
    <root>/<variant>/manifest                dataset manifest (JSON)

Binary containers start with an ASCII header (magic + version line, then
"key value" lines, closed by an empty line) followed by little-endian
payload blocks in the order the header declares. Writers emit deterministic
bytes; readers reject unknown versions.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .meshing import Mesh, NODE_TYPE_NAMES
from .params import DesignPoint
from .solver import FluidProperties, SimulationRecord

FIELDS_MAGIC = "FLOWBENCH-FIELDS"
MESH_MAGIC = "FLOWBENCH-MESH"
FORMAT_VERSION = 1
FIELD_COLUMNS = ("u", "v", "p", "T")


# ---------------------------------------------------------------------------
# Low-level container IO


def _write_header(fh, magic: str, entries: list[tuple[str, str]]):
    lines = [f"{magic} {FORMAT_VERSION}"]
    lines += [f"{k} {v}" for k, v in entries]
    fh.write(("\n".join(lines) + "\n\n").encode("ascii"))


def _read_header(fh, magic: str) -> dict[str, str]:
    first = fh.readline().decode("ascii").strip()
    parts = first.split()
    if len(parts) != 2 or parts[0] != magic:
        raise DatasetError(f"bad container magic: expected {magic}, got {first!r}")
    if int(parts[1]) != FORMAT_VERSION:
        raise DatasetError(
            f"unsupported {magic} version {parts[1]} (reader supports {FORMAT_VERSION})")
    header: dict[str, str] = {}
    while True:
        line = fh.readline().decode("ascii")
        if line in ("\n", ""):
            break
        key, _, value = line.strip().partition(" ")
        header[key] = value
    return header


def write_fields(path: Path, tensor: np.ndarray, horizon: int | None = None):
    """Field tensor container: float64 little-endian, C order."""
    tensor = np.ascontiguousarray(tensor, dtype="<f8")
    if tensor.ndim != 3 or tensor.shape[2] != len(FIELD_COLUMNS):
        raise DatasetError(f"field tensor must be (steps, nodes, 4); got {tensor.shape}")
    entries = [
        ("dtype", "float64-le"),
        ("shape", " ".join(str(s) for s in tensor.shape)),
        ("columns", " ".join(FIELD_COLUMNS)),
        ("order", "C step,node,column"),
    ]
    if horizon is not None:
        entries.append(("horizon", str(int(horizon))))
    with open(path, "wb") as fh:
        _write_header(fh, FIELDS_MAGIC, entries)
        fh.write(tensor.tobytes())


def read_fields(path: Path) -> tuple[np.ndarray, dict[str, str]]:
    with open(path, "rb") as fh:
        header = _read_header(fh, FIELDS_MAGIC)
        if header.get("dtype") != "float64-le":
            raise DatasetError(f"unsupported dtype {header.get('dtype')!r} in {path}")
        shape = tuple(int(s) for s in header["shape"].split())
        data = fh.read()
    expect = int(np.prod(shape)) * 8
    if len(data) != expect:
        raise DatasetError(f"{path}: payload is {len(data)} bytes, expected {expect}")
    return np.frombuffer(data, dtype="<f8").reshape(shape).copy(), header


def write_mesh(path: Path, mesh: Mesh):
    coords = np.ascontiguousarray(mesh.coords, dtype="<f8")
    tris = np.ascontiguousarray(mesh.triangles, dtype="<i4")
    ntype = np.ascontiguousarray(mesh.node_type, dtype="u1")
    nobj = np.ascontiguousarray(mesh.node_object, dtype="<i2")
    tag_table = sorted(set(mesh.boundary_tags))
    tag_id = {t: i for i, t in enumerate(tag_table)}
    bedges = np.empty((len(mesh.boundary_tags), 3), dtype="<i4")
    bedges[:, :2] = mesh.boundary_edges
    bedges[:, 2] = [tag_id[t] for t in mesh.boundary_tags]
    entries = [
        ("counts", f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.boundary_tags)}"),
        ("dtypes", "coords:float64-le triangles:int32-le node_type:uint8 "
                   "node_object:int16-le boundary_edges:int32-le"),
        ("node-types", " ".join(NODE_TYPE_NAMES)),
        ("edge-tags", " ".join(tag_table) if tag_table else "-"),
        ("target-edge-len", repr(float(mesh.target_edge_len))),
        ("blocks", "coords triangles node_type node_object boundary_edges"),
    ]
    with open(path, "wb") as fh:
        _write_header(fh, MESH_MAGIC, entries)
        fh.write(coords.tobytes())
        fh.write(tris.tobytes())
        fh.write(ntype.tobytes())
        fh.write(nobj.tobytes())
        fh.write(bedges.tobytes())


def read_mesh(path: Path) -> Mesh:
    with open(path, "rb") as fh:
        header = _read_header(fh, MESH_MAGIC)
        n, m, b = (int(s) for s in header["counts"].split())
        tag_table = header["edge-tags"].split()
        if tag_table == ["-"]:
            tag_table = []
        coords = np.frombuffer(fh.read(n * 2 * 8), dtype="<f8").reshape(n, 2).copy()
        tris = np.frombuffer(fh.read(m * 3 * 4), dtype="<i4").reshape(m, 3).copy()
        ntype = np.frombuffer(fh.read(n), dtype="u1").copy()
        nobj = np.frombuffer(fh.read(n * 2), dtype="<i2").copy()
        bedges = np.frombuffer(fh.read(b * 3 * 4), dtype="<i4").reshape(b, 3).copy()
    return Mesh(
        coords=coords,
        triangles=tris,
        node_type=ntype,
        node_object=nobj.astype(np.int16),
        boundary_edges=bedges[:, :2].copy(),
        boundary_tags=[tag_table[i] for i in bedges[:, 2]],
        target_edge_len=float(header["target-edge-len"]),
    )


# ---------------------------------------------------------------------------
# Datapoint packages


@dataclass
class DatapointPackage:
    """Everything stored for one datapoint."""

    design_point: DesignPoint
    mesh: Mesh
    fields: np.ndarray  # (steps + 1, nodes, 4)
    dt: float
    properties: FluidProperties
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_record(cls, dp: DesignPoint, record: SimulationRecord,
                    metadata: dict | None = None) -> "DatapointPackage":
        md = dict(record.metadata)
        if metadata:
            md.update(metadata)
        return cls(design_point=dp, mesh=record.mesh, fields=record.states,
                   dt=record.dt, properties=record.properties, metadata=md)


def _canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=1)


def dp_dirname(index: int) -> str:
    return f"dp_{index}"


def write_datapoint(pkg: DatapointPackage, root: str | Path,
                    npz_export: bool = False) -> Path:
    """Write one datapoint directory; returns its path.

    With npz_export, additionally emits the archive-of-arrays layout
    (sim.npz with per-step coordinates/velocity/pressure/temperature plus
    triangles.npy) used by earlier benchmark tooling.
    """
    dp = pkg.design_point
    variant = dp.variant.id if dp.variant else "custom"
    out = Path(root) / variant / dp_dirname(dp.index)
    out.mkdir(parents=True, exist_ok=True)
    try:
        write_fields(out / "fields.bin", pkg.fields)
        write_mesh(out / "mesh.bin", pkg.mesh)
        meta = {
            "format_version": FORMAT_VERSION,
            "design_point": json.loads(dp.to_json()),
            "dt": pkg.dt,
            "steps": int(pkg.fields.shape[0] - 1),
            "properties": {"rho": pkg.properties.rho, "mu": pkg.properties.mu,
                           "k": pkg.properties.k, "cp": pkg.properties.cp},
            "metadata": pkg.metadata,
        }
        (out / "meta.json").write_text(_canonical_json(meta) + "\n", encoding="utf-8")
        checksum = datapoint_checksum(out)
        (out / "checksum.sha256").write_text(checksum + "\n", encoding="utf-8")
        if npz_export:
            export_npz(pkg, out)
    except OSError as exc:
        raise DatasetError(f"failed writing datapoint under {out}: {exc}") from exc
    return out


def datapoint_checksum(dp_dir: Path) -> str:
    h = hashlib.sha256()
    for name in ("fields.bin", "mesh.bin", "meta.json"):
        h.update((Path(dp_dir) / name).read_bytes())
    return h.hexdigest()


def datapoint_complete(dp_dir: Path) -> bool:
    """True when the directory holds a full datapoint with a valid checksum."""
    dp_dir = Path(dp_dir)
    marker = dp_dir / "checksum.sha256"
    if not marker.exists():
        return False
    try:
        return marker.read_text().strip() == datapoint_checksum(dp_dir)
    except OSError:
        return False


def read_datapoint(dp_dir: str | Path) -> DatapointPackage:
    dp_dir = Path(dp_dir)
    fields, _header = read_fields(dp_dir / "fields.bin")
    mesh = read_mesh(dp_dir / "mesh.bin")
    meta = json.loads((dp_dir / "meta.json").read_text(encoding="utf-8"))
    if int(meta.get("format_version", -1)) != FORMAT_VERSION:
        raise DatasetError(f"{dp_dir}: unsupported meta format version "
                           f"{meta.get('format_version')!r}")
    dp = DesignPoint.from_json(json.dumps(meta["design_point"]))
    props = FluidProperties(**meta["properties"])
    return DatapointPackage(design_point=dp, mesh=mesh, fields=fields,
                            dt=float(meta["dt"]), properties=props,
                            metadata=meta.get("metadata", {}))


def export_npz(pkg: DatapointPackage, out_dir: Path):
    """Archive-of-arrays export with deterministic zip bytes."""
    steps = pkg.fields.shape[0]
    coords = np.broadcast_to(pkg.mesh.coords, (steps,) + pkg.mesh.coords.shape)
    arrays = {
        "coords": np.ascontiguousarray(coords),
        "velocity": np.ascontiguousarray(pkg.fields[:, :, 0:2]),
        "pressure": np.ascontiguousarray(pkg.fields[:, :, 2]),
        "temperature": np.ascontiguousarray(pkg.fields[:, :, 3]),
        "node_type": pkg.mesh.node_type.astype(np.int64),
    }
    with zipfile.ZipFile(out_dir / "sim.npz", "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, arr)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())
    with open(out_dir / "triangles.npy", "wb") as fh:
        np.lib.format.write_array(fh, pkg.mesh.triangles.astype(np.int64))


# ---------------------------------------------------------------------------
# Splits and statistics


def split_dataset(n: int, seed: int) -> dict[str, list[int]]:
    """Seeded shuffle split: 80% train, 10% validation, 10% test.

    Validation and test each take floor(n/10) items; train keeps the rest.
    """
    if n < 10:
        raise DatasetError(f"need at least 10 datapoints to split, got {n}")
    order = np.random.default_rng(int(seed) & 0x7FFFFFFF).permutation(n)
    n_eval = n // 10
    n_train = n - 2 * n_eval
    return {
        "train": sorted(int(i) for i in order[:n_train]),
        "val": sorted(int(i) for i in order[n_train:n_train + n_eval]),
        "test": sorted(int(i) for i in order[n_train + n_eval:]),
    }


def compute_stats(field_tensors) -> dict[str, dict[str, float]]:
    """Pooled mean / population sigma per variable over an iterable of field
    tensors; both velocity components pool into one statistic."""
    acc = {name: [0.0, 0.0, 0] for name in ("velocity", "pressure", "temperature")}

    def add(name, values):
        a = acc[name]
        a[0] += float(values.sum())
        a[1] += float((values.astype(np.float64) ** 2).sum())
        a[2] += values.size

    count = 0
    for tensor in field_tensors:
        add("velocity", tensor[:, :, 0:2])
        add("pressure", tensor[:, :, 2])
        add("temperature", tensor[:, :, 3])
        count += 1
    if count == 0:
        raise DatasetError("cannot compute statistics over zero datapoints")
    out = {}
    for name, (s, s2, n) in acc.items():
        mean = s / n
        var = max(s2 / n - mean * mean, 0.0)
        out[name] = {"mean": mean, "std": float(np.sqrt(var))}
    return out


# ---------------------------------------------------------------------------
# Manifests


@dataclass
class Manifest:
    variant: str
    count: int
    seed: int
    dt: float
    steps: int
    splits: dict[str, list[int]]
    stats: dict[str, dict[str, float]]
    datapoints: list[dict]
    config: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def to_json(self) -> str:
        return _canonical_json({
            "format_version": self.format_version,
            "variant": self.variant,
            "count": self.count,
            "seed": self.seed,
            "dt": self.dt,
            "steps": self.steps,
            "splits": self.splits,
            "stats": self.stats,
            "datapoints": self.datapoints,
            "config": self.config,
        })

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        d = json.loads(text)
        if int(d.get("format_version", -1)) != FORMAT_VERSION:
            raise DatasetError(f"unsupported manifest format version "
                               f"{d.get('format_version')!r}")
        return cls(variant=d["variant"], count=d["count"], seed=d["seed"],
                   dt=d["dt"], steps=d["steps"], splits=d["splits"],
                   stats=d["stats"], datapoints=d["datapoints"],
                   config=d.get("config", {}),
                   format_version=d["format_version"])


def manifest_path(root: str | Path, variant: str) -> Path:
    return Path(root) / variant / "manifest"


def write_manifest(manifest: Manifest, root: str | Path) -> Path:
    path = manifest_path(root, manifest.variant)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.to_json() + "\n", encoding="utf-8")
    return path


def read_manifest(root: str | Path, variant: str) -> Manifest:
    path = manifest_path(root, variant)
    if not path.exists():
        raise DatasetError(f"no manifest for variant {variant!r} under {root}")
    return Manifest.from_json(path.read_text(encoding="utf-8"))
