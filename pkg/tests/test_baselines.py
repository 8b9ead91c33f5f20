import numpy as np
import pytest

from flowbench import metrics as mt
from flowbench.baselines import (
    baseline_predict,
    emit_baseline,
    extrapolate_predict,
    persistence_predict,
)
from flowbench.dataset import DatapointPackage
from flowbench.errors import ScoreError
from flowbench.meshing import Mesh
from flowbench.params import DesignPoint, get_variant
from flowbench.solver import FluidProperties


def _gt(fields, index=0):
    nodes = fields.shape[1]
    mesh = Mesh(coords=np.zeros((nodes, 2)),
                triangles=np.zeros((0, 3), dtype=np.int32),
                node_type=np.zeros(nodes, dtype=np.uint8),
                node_object=np.full(nodes, -1, dtype=np.int16),
                boundary_edges=np.zeros((0, 2), dtype=np.int32),
                boundary_tags=[], target_edge_len=0.1)
    dp = DesignPoint(variant=get_variant("base"), index=index, values={}, rng_seed=0)
    return DatapointPackage(design_point=dp, mesh=mesh, fields=fields,
                            dt=0.01, properties=FluidProperties())


def test_persistence_on_constant_truth_scores_zero():
    gt = _gt(np.full((5, 3, 4), 1.5))
    pred = persistence_predict(gt, 4)
    errs = mt.rollout_errors([(pred, gt)], 4)
    assert all(v == 0.0 for v in errs.values())


def test_persistence_drift_oracle():
    # scalar drift delta per step, 1 node, H=2: error (|d| + |2d|) / 2
    delta = 0.7
    fields = np.zeros((3, 1, 4))
    for s in range(3):
        fields[s, 0, 3] = s * delta
    gt = _gt(fields)
    pred = persistence_predict(gt, 2)
    err = mt.rmse_scalar([pred], [gt], 2, "temperature")
    assert err == pytest.approx((delta + 2 * delta) / 2)


def test_persistence_rejects_horizon_beyond_storage():
    gt = _gt(np.zeros((3, 1, 4)))
    with pytest.raises(ScoreError):
        persistence_predict(gt, 5)


def test_h_zero_rejected_by_scoring():
    gt = _gt(np.zeros((3, 1, 4)))
    pred = persistence_predict(gt, 0)
    assert pred.fields.shape[0] == 0
    with pytest.raises(ScoreError):
        mt.rollout_errors([(pred, gt)], 0)


def test_extrapolation_exact_on_linear_truth():
    fields = np.zeros((6, 2, 4))
    for s in range(6):
        fields[s] = s * np.array([[1.0, -2.0, 0.5, 3.0], [0.0, 1.0, 1.0, 1.0]])
    gt = _gt(fields)
    pred = extrapolate_predict(gt, 5)
    errs = mt.rollout_errors([(pred, gt)], 5)
    assert all(v == pytest.approx(0.0, abs=1e-12) for v in errs.values())


def test_extrapolation_equals_persistence_on_constant_truth():
    gt = _gt(np.full((4, 3, 4), 2.0))
    a = persistence_predict(gt, 3)
    b = extrapolate_predict(gt, 3)
    assert np.array_equal(a.fields, b.fields)


def test_extrapolation_quadratic_oracle():
    # scalar a*t^2, 1 node: extrapolated step t gives t*(gt1-gt0) = t*a,
    # error |a t^2 - a t|; H=2 mean = (0 + 2a) / 2
    a = 0.31
    fields = np.zeros((3, 1, 4))
    for s in range(3):
        fields[s, 0, 2] = a * s * s
    gt = _gt(fields)
    pred = extrapolate_predict(gt, 2)
    err = mt.rmse_scalar([pred], [gt], 2, "p")
    assert err == pytest.approx((abs(a - a) + abs(4 * a - 2 * a)) / 2)


def test_extrapolation_needs_two_states():
    gt = _gt(np.zeros((1, 1, 4)))
    with pytest.raises(ScoreError):
        extrapolate_predict(gt, 1)


def test_persistence_bounds_extrapolation_on_linear_truth():
    fields = np.zeros((5, 1, 4))
    for s in range(5):
        fields[s, 0, 0] = 2.0 * s
    gt = _gt(fields)
    p_err = mt.rollout_errors([(persistence_predict(gt, 4), gt)], 4)
    e_err = mt.rollout_errors([(extrapolate_predict(gt, 4), gt)], 4)
    assert p_err["velocity"] >= e_err["velocity"]


def test_unknown_kind():
    gt = _gt(np.zeros((2, 1, 4)))
    with pytest.raises(ScoreError):
        baseline_predict("oracle", gt, 1)


def test_emitted_files_conform(tmp_path):
    rng = np.random.default_rng(4)
    gt = _gt(rng.standard_normal((4, 5, 4)), index=2)
    emit_baseline("persistence", gt, 3, tmp_path, "base")
    pred = mt.read_prediction(tmp_path, "base", 2)
    assert pred.horizon == 3
    assert np.array_equal(pred.fields, np.broadcast_to(gt.fields[0], (3, 5, 4)))
