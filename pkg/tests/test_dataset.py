import numpy as np
import pytest

from flowbench import dataset as ds
from flowbench.errors import DatasetError
from flowbench.meshing import Mesh
from flowbench.params import sample_design_points
from flowbench.solver import FluidProperties


def _tiny_package(steps=1, nodes=1):
    (dp,) = sample_design_points("base", 1, seed=1)
    mesh = Mesh(
        coords=np.arange(nodes * 2, dtype=float).reshape(nodes, 2),
        triangles=np.zeros((0, 3), dtype=np.int32),
        node_type=np.zeros(nodes, dtype=np.uint8),
        node_object=np.full(nodes, -1, dtype=np.int16),
        boundary_edges=np.zeros((0, 2), dtype=np.int32),
        boundary_tags=[], target_edge_len=0.1)
    fields = np.arange((steps + 1) * nodes * 4, dtype=float).reshape(steps + 1, nodes, 4)
    return ds.DatapointPackage(design_point=dp, mesh=mesh, fields=fields,
                               dt=0.01, properties=FluidProperties(),
                               metadata={"clamp_factor": 1.0})


def test_roundtrip_bit_exact(tmp_path, mini_dataset):
    dp_dir = mini_dataset / "dynamic" / "dp_0"
    pkg = ds.read_datapoint(dp_dir)
    out = ds.write_datapoint(pkg, tmp_path)
    for name in ("fields.bin", "mesh.bin"):
        assert (out / name).read_bytes() == (dp_dir / name).read_bytes()
    again = ds.read_datapoint(out)
    assert np.array_equal(again.fields, pkg.fields)
    assert np.array_equal(again.mesh.coords, pkg.mesh.coords)
    assert np.array_equal(again.mesh.triangles, pkg.mesh.triangles)
    assert again.mesh.boundary_tags == pkg.mesh.boundary_tags


def test_container_byte_lengths(tmp_path):
    pkg = _tiny_package(steps=1, nodes=1)
    out = ds.write_datapoint(pkg, tmp_path)
    fields_bytes = (out / "fields.bin").read_bytes()
    header, _, payload = fields_bytes.partition(b"\n\n")
    # documented layout: (steps+1) x nodes x 4 float64 payload
    assert len(payload) == 2 * 1 * 4 * 8
    expected_header = (f"{ds.FIELDS_MAGIC} {ds.FORMAT_VERSION}\n"
                       "dtype float64-le\nshape 2 1 4\ncolumns u v p T\n"
                       "order C step,node,column").encode()
    assert header == expected_header

    mesh_bytes = (out / "mesh.bin").read_bytes()
    mheader, _, mpayload = mesh_bytes.partition(b"\n\n")
    # coords 1x2 f8 + triangles 0 + node_type 1 u1 + node_object 1 i2 + edges 0
    assert len(mpayload) == 16 + 0 + 1 + 2 + 0
    assert mheader.startswith(f"{ds.MESH_MAGIC} {ds.FORMAT_VERSION}\n".encode())


def test_reader_rejects_other_versions(tmp_path):
    pkg = _tiny_package()
    out = ds.write_datapoint(pkg, tmp_path)
    raw = (out / "fields.bin").read_bytes()
    (out / "fields.bin").write_bytes(raw.replace(b"FIELDS 1", b"FIELDS 9", 1))
    with pytest.raises(DatasetError):
        ds.read_fields(out / "fields.bin")


def test_npz_export_toggle(tmp_path):
    pkg = _tiny_package(steps=2, nodes=3)
    out = ds.write_datapoint(pkg, tmp_path / "plain")
    assert not (out / "sim.npz").exists()
    out2 = ds.write_datapoint(pkg, tmp_path / "npz", npz_export=True)
    assert (out2 / "sim.npz").exists() and (out2 / "triangles.npy").exists()
    with np.load(out2 / "sim.npz") as z:
        assert z["velocity"].shape == (3, 3, 2)
        assert z["coords"].shape == (3, 3, 2)
        assert np.array_equal(z["pressure"], pkg.fields[:, :, 2])
    tris = np.load(out2 / "triangles.npy")
    assert tris.shape == (0, 3)


def test_npz_export_deterministic_bytes(tmp_path):
    pkg = _tiny_package(steps=2, nodes=3)
    a = ds.write_datapoint(pkg, tmp_path / "a", npz_export=True)
    b = ds.write_datapoint(pkg, tmp_path / "b", npz_export=True)
    assert (a / "sim.npz").read_bytes() == (b / "sim.npz").read_bytes()


def test_checksum_detects_completion(tmp_path):
    pkg = _tiny_package()
    out = ds.write_datapoint(pkg, tmp_path)
    assert ds.datapoint_complete(out)
    (out / "fields.bin").write_bytes(b"corrupted")
    assert not ds.datapoint_complete(out)


def test_split_sizes_paper_scale():
    s = ds.split_dataset(1200, seed=0)
    assert (len(s["train"]), len(s["val"]), len(s["test"])) == (960, 120, 120)


def test_split_smallest_legal():
    s = ds.split_dataset(10, seed=3)
    assert (len(s["train"]), len(s["val"]), len(s["test"])) == (8, 1, 1)


def test_split_disjoint_exhaustive():
    for n in (10, 23, 57):
        s = ds.split_dataset(n, seed=n)
        everything = s["train"] + s["val"] + s["test"]
        assert sorted(everything) == list(range(n))
        assert len(s["val"]) == len(s["test"]) == n // 10


def test_split_determinism_and_minimum():
    assert ds.split_dataset(40, seed=9) == ds.split_dataset(40, seed=9)
    with pytest.raises(DatasetError):
        ds.split_dataset(9, seed=0)


def test_stats_constant_field():
    tensors = [np.full((3, 4, 4), 2.5)]
    stats = ds.compute_stats(iter(tensors))
    for q in ("velocity", "pressure", "temperature"):
        assert stats[q]["mean"] == pytest.approx(2.5)
        assert stats[q]["std"] == pytest.approx(0.0, abs=1e-12)


def test_stats_two_values():
    t = np.zeros((1, 2, 4))
    t[0, 1, :] = 2.0
    stats = ds.compute_stats([t])
    assert stats["pressure"]["mean"] == pytest.approx(1.0)
    assert stats["pressure"]["std"] == pytest.approx(1.0)
    assert stats["velocity"]["mean"] == pytest.approx(1.0)


def test_stats_pools_velocity_components():
    t = np.zeros((1, 1, 4))
    t[0, 0, 0] = 4.0  # u
    t[0, 0, 1] = 0.0  # v
    stats = ds.compute_stats([t])
    assert stats["velocity"]["mean"] == pytest.approx(2.0)
    assert stats["velocity"]["std"] == pytest.approx(2.0)


def test_manifest_roundtrip(mini_dataset):
    manifest = ds.read_manifest(mini_dataset, "dynamic")
    assert manifest.count == 10
    assert sorted(manifest.splits["train"] + manifest.splits["val"]
                  + manifest.splits["test"]) == list(range(10))
    assert manifest.stats["velocity"]["std"] > 0
    again = ds.Manifest.from_json(manifest.to_json())
    assert again.to_json() == manifest.to_json()


def test_manifest_rejects_bad_version(mini_dataset):
    text = ds.manifest_path(mini_dataset, "dynamic").read_text()
    with pytest.raises(DatasetError):
        ds.Manifest.from_json(text.replace('"format_version": 1', '"format_version": 3'))
