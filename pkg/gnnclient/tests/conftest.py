import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def dynamic_mini_dataset(tmp_path_factory):
    """A small dynamic-variant dataset produced through the generator CLI."""
    root = tmp_path_factory.mktemp("gnn_data") / "data"
    cmd = [sys.executable, "-m", "flowbench.cli", "generate",
           "--variant", "dynamic", "-n", "10", "--seed", "5",
           "--steps", "60", "--coarse-edge", "0.045", "--out", str(root)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return root


def run_flowbench(*args):
    proc = subprocess.run([sys.executable, "-m", "flowbench.cli", *args],
                          capture_output=True, text=True)
    return proc
