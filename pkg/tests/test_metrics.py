import numpy as np
import pytest

from flowbench import metrics as mt
from flowbench.dataset import DatapointPackage
from flowbench.errors import AlignmentError, ScoreError
from flowbench.meshing import Mesh
from flowbench.params import DesignPoint, get_variant
from flowbench.solver import FluidProperties


def _mesh(nodes):
    return Mesh(coords=np.zeros((nodes, 2)),
                triangles=np.zeros((0, 3), dtype=np.int32),
                node_type=np.zeros(nodes, dtype=np.uint8),
                node_object=np.full(nodes, -1, dtype=np.int16),
                boundary_edges=np.zeros((0, 2), dtype=np.int32),
                boundary_tags=[], target_edge_len=0.1)


def _pair(gt_fields, pred_fields, index=0):
    dp = DesignPoint(variant=get_variant("base"), index=index, values={}, rng_seed=0)
    gt = DatapointPackage(design_point=dp, mesh=_mesh(gt_fields.shape[1]),
                          fields=gt_fields, dt=0.01, properties=FluidProperties())
    pred = mt.PredictionRecord(datapoint_index=index, horizon=pred_fields.shape[0],
                               fields=pred_fields)
    return pred, gt


def test_rmse_velocity_unit_case():
    gt = np.zeros((2, 1, 4))
    pred = np.zeros((1, 1, 4))
    pred[0, 0, 0:2] = (1.0, 1.0)
    p, g = _pair(gt, pred)
    assert mt.rmse_velocity([p], [g], 1) == 1.0


def test_perfect_prediction_scores_zero():
    rng = np.random.default_rng(0)
    gt = rng.standard_normal((4, 5, 4))
    pred = gt[1:4].copy()
    p, g = _pair(gt, pred)
    errs = mt.rollout_errors([(p, g)], 3)
    assert errs == {"velocity": 0.0, "pressure": 0.0, "temperature": 0.0}


def test_rmse_scalar_single_error():
    gt = np.zeros((2, 1, 4))
    pred = np.zeros((1, 1, 4))
    pred[0, 0, 3] = 3.0
    p, g = _pair(gt, pred)
    assert mt.rmse_scalar([p], [g], 1, "T") == pytest.approx(3.0)


def test_rmse_constant_bias():
    gt = np.zeros((4, 7, 4))
    pred = np.full((3, 7, 4), 0.25)
    p, g = _pair(gt, pred)
    errs = mt.rollout_errors([(p, g)], 3)
    assert errs["pressure"] == pytest.approx(0.25)
    assert errs["temperature"] == pytest.approx(0.25)
    # uniform per-component velocity error of eps scores exactly eps
    assert errs["velocity"] == pytest.approx(0.25)


def test_rmse_averaging_invariance():
    rng = np.random.default_rng(1)
    gt = rng.standard_normal((3, 4, 4))
    pred = gt[1:3] + 0.5
    p1, g1 = _pair(gt, pred, index=0)
    p2, g2 = _pair(gt.copy(), pred.copy(), index=1)
    single = mt.rollout_errors([(p1, g1)], 2)
    double = mt.rollout_errors([(p1, g1), (p2, g2)], 2)
    for q in mt.QUANTITIES:
        assert double[q] == pytest.approx(single[q])


def test_alignment_errors():
    gt = np.zeros((3, 4, 4))
    pred = np.zeros((2, 5, 4))
    p, g = _pair(gt, pred)
    with pytest.raises(AlignmentError):
        mt.rollout_errors([(p, g)], 2)
    with pytest.raises(ScoreError):
        mt.rollout_errors([], 2)
    p2, g2 = _pair(np.zeros((2, 4, 4)), np.zeros((1, 4, 4)))
    with pytest.raises(ScoreError):
        mt.rollout_errors([(p2, g2)], 0)  # empty-horizon prediction rejected


def test_performance_score_basics():
    rmses = {"velocity": 2.0, "pressure": 3.0, "temperature": 4.0}
    sig = {"velocity": 2.0, "pressure": 3.0, "temperature": 4.0}
    rep = mt.performance_score(rmses, sig)
    assert rep.ps_mean == pytest.approx(1.0)
    zeros = mt.performance_score({q: 0.0 for q in mt.QUANTITIES}, sig)
    assert zeros.ps_mean == 0.0


def test_performance_score_paper_row():
    # PS components reported for one model on the base dataset
    rep = mt.performance_score(
        {"velocity": 0.073, "pressure": 0.142, "temperature": 0.068},
        {q: 1.0 for q in mt.QUANTITIES})
    assert rep.ps_mean == pytest.approx(0.094, abs=5e-4)


def test_performance_score_degenerate_sigma():
    with pytest.raises(ScoreError):
        mt.performance_score({q: 1.0 for q in mt.QUANTITIES},
                             {"velocity": 0.0, "pressure": 1.0, "temperature": 1.0})


def test_generalization_self_pair_is_exactly_one():
    assert mt.generalization_score(0.731, 0.731) == 1.0
    gs = mt.generalization_scores({q: 0.4 for q in mt.QUANTITIES},
                                  {q: 0.4 for q in mt.QUANTITIES})
    assert gs["mean"] == 1.0


def test_generalization_ratios():
    cross = {"velocity": 2.0, "pressure": 4.0, "temperature": 6.0}
    self_ = {"velocity": 2.0, "pressure": 2.0, "temperature": 2.0}
    gs = mt.generalization_scores(cross, self_)
    assert gs["mean"] == pytest.approx(2.0)
    with pytest.raises(ScoreError):
        mt.generalization_score(1.0, 0.0)


def _surf_input(m, t, r, d):
    return {("full", "mesh"): m, ("base", "topology"): t,
            ("base", "range"): r, ("base", "dynamic"): d}


def test_surf_scores_published_aggregates():
    s = mt.surf_scores(_surf_input(1.07, 3.10, 1.30, 5.76))
    assert s.average == pytest.approx(2.8075, abs=1e-12)
    assert abs(s.average - 2.81) <= 0.005 + 1e-12
    s2 = mt.surf_scores(_surf_input(1.01, 3.68, 1.08, 2.17))
    assert s2.average == pytest.approx(1.985, abs=1e-12)
    assert abs(s2.average - 1.98) <= 0.005 + 1e-12  # boundary inclusive


def test_surf_scores_all_ones():
    s = mt.surf_scores(_surf_input(1.0, 1.0, 1.0, 1.0))
    assert s.average == 1.0


def test_surf_scores_missing_pair():
    gs = _surf_input(1.0, 1.0, 1.0, 1.0)
    del gs[("base", "range")]
    with pytest.raises(ScoreError, match="base->range"):
        mt.surf_scores(gs)


def test_prediction_file_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    fields = rng.standard_normal((4, 6, 4))
    pred = mt.PredictionRecord(datapoint_index=3, horizon=4, fields=fields)
    mt.write_prediction(pred, tmp_path, "base")
    back = mt.read_prediction(tmp_path, "base", 3)
    assert back.horizon == 4
    assert np.array_equal(back.fields, fields)
    with pytest.raises(AlignmentError):
        mt.read_prediction(tmp_path, "base", 99)


def test_report_files(tmp_path):
    payload = {"performance": {"base": {"base": {"ps_mean": 0.5}}},
               "surf_gs": {"mesh": 1.0, "topology": 1.0, "range": 1.0,
                           "dynamic": 1.0, "average": 1.0}}
    jpath, cpath = mt.write_report(payload, tmp_path, "scores")
    assert jpath.exists()
    lines = cpath.read_text().strip().splitlines()
    assert lines[0] == "metric,value"
    assert any(line.startswith("surf_gs.average,") for line in lines)


def test_rollout_errors_order_invariant():
    rng = np.random.default_rng(8)
    pairs = []
    for i in range(3):
        gt = rng.standard_normal((4, 5, 4))
        pred = gt[1:4] + rng.standard_normal((3, 5, 4)) * 0.1
        pairs.append(_pair(gt, pred, index=i))
    fwd = mt.rollout_errors(list(pairs), 3)
    rev = mt.rollout_errors(list(reversed(pairs)), 3)
    for q in mt.QUANTITIES:
        assert fwd[q] == pytest.approx(rev[q], rel=1e-12)
