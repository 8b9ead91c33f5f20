import copy
import math

import numpy as np
import pytest

from flowbench import solver
from flowbench.errors import SolverError
from flowbench.geometry import build_outline
from flowbench.meshing import triangulate
from flowbench.params import sample_design_points
from flowbench.solver import (
    BoundarySpec,
    FluidProperties,
    FlowSolver,
    SolverOptions,
    TransientInlet,
    clamp_amplitudes,
    inlet_velocity,
    net_outflow_clamp_factor,
    reynolds_number,
    run_transient,
    transient_inlets,
)

from conftest import rect_outline, zero_velocity


def _inlet(mean, amplitude, frequency):
    return TransientInlet(mean=mean, amplitude=amplitude, frequency=frequency,
                          direction=(1.0, 0.0), temperature=300.0,
                          width=0.02, normal_fraction=1.0)


def test_inlet_velocity_constant():
    assert inlet_velocity(_inlet(5.0, 0.0, 3.0), 1.234) == pytest.approx(5.0)


def test_inlet_velocity_quarter_period():
    assert inlet_velocity(_inlet(5.0, 2.0, 1.0), 0.25) == pytest.approx(7.0)


def test_inlet_velocity_three_quarter_period():
    assert inlet_velocity(_inlet(5.0, 2.0, 1.0), 0.75) == pytest.approx(3.0)


def test_reynolds_number():
    assert reynolds_number(1.0, 2.0, 0.5, 0.001) == pytest.approx(1000.0)
    assert reynolds_number(1.0, 4.0, 0.5, 0.001) == pytest.approx(2000.0)
    assert reynolds_number(1.0, 2.0, 0.5, 0.002) == pytest.approx(500.0)


def _dynamic_point(**overrides):
    (dp,) = sample_design_points("dynamic", 1, seed=5)
    dp.values.update(overrides)
    return dp


def test_clamp_noop_without_amplitude():
    dp = _dynamic_point(Inlet2vAmplitude=0.0, Inlet3vAmplitude=0.0)
    assert net_outflow_clamp_factor(dp) == 1.0
    assert clamp_amplitudes(dp).values == dp.values


def test_clamp_noop_when_bound_already_met():
    dp = _dynamic_point(Inlet1v=10.0, Inlet2vMean=5.0, Inlet2vAmplitude=0.5,
                        Inlet3vAmplitude=0.0)
    assert net_outflow_clamp_factor(dp) == 1.0


def test_clamp_worked_example():
    # Q1 = 0.4 m^2/s, Inlet2 mean flux 0.1 with amplitude flux 0.8, Inlet3
    # silent: worst case 0.4 + 0.1 - 0.8 s >= 0.02 gives s = 0.6.
    dp = _dynamic_point(
        DomainHeight=400.0, Inlet1v=1.0,
        Inlet2Angle=90.0, Inlet2vMean=5.0, Inlet2vAmplitude=40.0, Inlet2vFrequency=2.0,
        Inlet3vMean=0.0, Inlet3vAmplitude=0.0, Inlet3vFrequency=0.0)
    assert net_outflow_clamp_factor(dp) == pytest.approx(0.6)
    clamped = clamp_amplitudes(dp)
    assert clamped["Inlet2vAmplitude"] == pytest.approx(24.0)
    assert clamped["Inlet2vMean"] == dp["Inlet2vMean"]


def test_clamp_guarantees_min_influx_numerically():
    # dense-time oracle over adversarial draws
    rng = np.random.default_rng(0)
    t = np.linspace(0.0, 3.0, 4001)
    for _ in range(50):
        dp = _dynamic_point(
            Inlet1v=float(rng.uniform(0.5, 2.0)),
            Inlet2vMean=float(rng.uniform(0.0, 10.0)),
            Inlet2vAmplitude=float(rng.uniform(0.0, 10.0)),
            Inlet2vFrequency=float(rng.uniform(1.0, 5.0)),
            Inlet2Angle=float(rng.uniform(20.0, 90.0)),
            Inlet3vMean=float(rng.uniform(0.0, 10.0)),
            Inlet3vAmplitude=float(rng.uniform(0.0, 10.0)),
            Inlet3vFrequency=float(rng.uniform(1.0, 5.0)),
            Inlet3Angle=float(rng.uniform(20.0, 45.0)))
        inlets = transient_inlets(clamp_amplitudes(dp))
        total = sum(np.array([inlets[k].flux(tt) for tt in t]) for k in inlets)
        q1 = inlets["Inlet1"].flux(0.0)
        assert total.min() >= 0.05 * q1 - 1e-12


@pytest.fixture(scope="module")
def quiescent_setup():
    mesh = triangulate(rect_outline(1.0, 1.0), 0.3)
    bc = BoundarySpec(velocity={"Wall": zero_velocity, "Inlet1": zero_velocity},
                      temperature={}, pressure={"Outlet": 0.0},
                      ambient_temperature=320.0)
    return mesh, bc


def test_quiescent_fixed_point(quiescent_setup):
    mesh, bc = quiescent_setup
    fs = FlowSolver(mesh, FluidProperties(), bc)
    state = fs.initial_state()
    out, info = fs.step(state, 0.0, 0.01)
    assert np.abs(out.u).max() == 0.0
    assert np.abs(out.v).max() == 0.0
    assert out.T == pytest.approx(state.T)
    assert info.div_residual <= 1e-12


def test_rejects_bad_dt(quiescent_setup):
    mesh, bc = quiescent_setup
    fs = FlowSolver(mesh, FluidProperties(), bc)
    with pytest.raises(SolverError):
        fs.step(fs.initial_state(), 0.0, 0.0)


def test_properties_validation():
    with pytest.raises(SolverError):
        FluidProperties(rho=0.0)
    with pytest.raises(SolverError):
        SolverOptions(stabilization="weird")


def test_conduction_slab_linear_profile():
    mesh = triangulate(rect_outline(1.0, 1.0), 0.2)
    props = FluidProperties(rho=1.0, mu=1.0, k=1.0, cp=1.0)
    bc = BoundarySpec(
        velocity={"Wall": zero_velocity, "Inlet1": zero_velocity,
                  "Outlet": zero_velocity},
        temperature={"Inlet1": 300.0, "Outlet": 400.0},
        pressure={"Outlet": 0.0}, ambient_temperature=300.0)
    fs = FlowSolver(mesh, props, bc)
    state = fs.initial_state()
    for k in range(120):
        new, _ = fs.step(state, k * 0.05, 0.05)
        if np.abs(new.T - state.T).max() < 1e-10:
            state = new
            break
        state = new
    exact = 300.0 + 100.0 * mesh.coords[:, 0]
    assert np.abs(state.T - exact).max() <= 0.01 * 100.0


def test_run_transient_shapes_and_metadata():
    (dp,) = sample_design_points("base", 1, seed=12)
    mesh = triangulate(build_outline(dp), 0.05)
    rec = run_transient(dp, mesh, dt=0.01, steps=5)
    assert rec.states.shape == (6, mesh.n_nodes, 4)
    assert rec.n_steps == 5
    assert rec.metadata["max_divergence_residual"] <= 1e-6
    assert np.isfinite(rec.states).all()
    zero_rec = run_transient(dp, mesh, dt=0.01, steps=0)
    assert zero_rec.states.shape[0] == 1


def test_run_transient_temperature_bounds():
    (dp,) = sample_design_points("base", 1, seed=12)
    mesh = triangulate(build_outline(dp), 0.05)
    rec = run_transient(dp, mesh, dt=0.01, steps=20)
    assert rec.metadata["temperature_bounds_ok"]


def test_dynamic_inlet_oscillation_frequency():
    dp = _dynamic_point(Inlet2vFrequency=5.0, Inlet2vAmplitude=6.0, Inlet2vMean=6.0,
                        Inlet3vAmplitude=0.0)
    dp = clamp_amplitudes(dp)
    mesh = triangulate(build_outline(dp), 0.04)
    steps, dt = 40, 0.01
    rec = run_transient(dp, mesh, dt=dt, steps=steps)
    inlet_nodes = mesh.boundary_nodes("Inlet2")
    speeds = np.hypot(rec.states[1:, inlet_nodes, 0],
                      rec.states[1:, inlet_nodes, 1]).mean(axis=1)
    spec = np.abs(np.fft.rfft(speeds - speeds.mean()))
    freqs = np.fft.rfftfreq(steps, d=dt)
    assert freqs[np.argmax(spec)] == pytest.approx(5.0, abs=freqs[1])
    # amplitude at the inlet follows the transient law
    inlets = transient_inlets(dp)
    want = np.array([inlets["Inlet2"].speed((k + 1) * dt) for k in range(steps)])
    assert speeds == pytest.approx(want, rel=1e-9)


def test_rotation_equivariance_short():
    (dp,) = sample_design_points("base", 1, seed=42)
    mesh = triangulate(build_outline(dp), 0.06)
    theta = 37.0
    a = math.radians(theta)
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    twin = copy.copy(mesh)
    twin.coords = mesh.coords @ rot.T
    dp2 = copy.deepcopy(dp)
    dp2.values["DomainOrientation"] = theta
    props = solver.properties_for(dp)
    fs1 = FlowSolver(mesh, props, solver.boundary_for(dp))
    fs2 = FlowSolver(twin, props, solver.boundary_for(dp2))
    s1, s2 = fs1.initial_state(), fs2.initial_state()
    for k in range(10):
        s1, _ = fs1.step(s1, k * 0.01, 0.01)
        s2, _ = fs2.step(s2, k * 0.01, 0.01)
    uv1 = np.stack([s1.u, s1.v], axis=1)
    uv2 = np.stack([s2.u, s2.v], axis=1) @ rot
    assert np.linalg.norm(uv2 - uv1) / np.linalg.norm(uv1) <= 1e-6
    assert np.linalg.norm(s2.T - s1.T) / np.linalg.norm(s1.T) <= 1e-6


def test_full_step_count_spans_three_seconds(quiescent_setup):
    mesh, bc = quiescent_setup
    rec = run_transient(None, mesh, dt=0.01, steps=300,
                        props=FluidProperties(), bc=bc)
    assert rec.states.shape[0] == 301
    assert rec.n_steps * rec.dt == pytest.approx(3.0)
