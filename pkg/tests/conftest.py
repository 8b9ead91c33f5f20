import numpy as np
import pytest

from flowbench.geometry import DomainOutline, LineSegment


def rect_outline(length=1.0, height=1.0):
    """Axis-aligned channel rectangle with the production tag layout."""
    return DomainOutline(outer=[
        LineSegment((0.0, 0.0), (length, 0.0), "Wall"),
        LineSegment((length, 0.0), (length, height), "Outlet"),
        LineSegment((length, height), (0.0, height), "Wall"),
        LineSegment((0.0, height), (0.0, 0.0), "Inlet1"),
    ], holes=[])


@pytest.fixture(scope="session")
def unit_square_mesh():
    from flowbench.meshing import triangulate

    return triangulate(rect_outline(1.0, 1.0), 0.25)


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory):
    """A small generated dataset shared by IO/metric/CLI tests."""
    from flowbench.pipeline import RunConfig, generate_variant

    root = tmp_path_factory.mktemp("mini_dataset")
    config = RunConfig(variants=["dynamic"], n=10, seed=5, dt=0.01, steps=10,
                       coarse_edge_len=0.045, out_root=str(root), workers=1)
    manifest = generate_variant("dynamic", config)
    assert all(e["status"] == "ok" for e in manifest.datapoints)
    return root


def zero_velocity(t, xy):
    return np.zeros(2)
