"""Transient incompressible 2D flow with heat transport on triangular meshes.

Fractional-step scheme on linear elements: a semi-implicit momentum predictor
(implicit diffusion, streamline-upwind stabilized convection linearized at the
previous velocity), a pressure Poisson solve built from the composed discrete
operators so the projection annihilates the discrete divergence exactly (up
to the linear-solver residual), then an implicit energy advection-diffusion
step using the projected velocity.

Pressure solves use conjugate gradients with an incomplete-LU
preconditioner computed once per mesh; momentum and energy use BiCGStab. Velocities are m/s,
pressure Pa, temperature K; the pressure is handled kinematically (p/rho)
inside the scheme and stored in Pa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .meshing import (
    Mesh,
    NODE_TYPE_NAMES,
    NT_INLET1,
    NT_INLET2,
    NT_INLET3,
    NT_OUTLET,
)
from .params import DesignPoint, INLET_WIDTH_MM

MM = 1e-3

#: Temperature prescribed at the main inlet and used as the initial fill, K.
AMBIENT_TEMPERATURE = 300.0

#: Required share of the main-inlet flux that must always leave the outlet.
NET_OUTFLOW_MARGIN = 0.05

U, V, P, T = 0, 1, 2, 3


@dataclass(frozen=True)
class FluidProperties:
    """Constant fluid properties; defaults are standard air at 15 C."""

    rho: float = 1.225      # kg/m^3
    mu: float = 1.7894e-5   # Pa s
    k: float = 0.0258       # W/(m K)
    cp: float = 1006.0      # J/(kg K)

    def __post_init__(self):
        if min(self.rho, self.mu, self.k, self.cp) <= 0:
            raise SolverError("fluid properties must be strictly positive")

    @property
    def nu(self) -> float:
        return self.mu / self.rho

    @property
    def alpha(self) -> float:
        return self.k / (self.rho * self.cp)


@dataclass
class FieldState:
    """Nodal fields at one time level."""

    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    T: np.ndarray

    def to_array(self) -> np.ndarray:
        return np.stack([self.u, self.v, self.p, self.T], axis=1)

    @classmethod
    def from_array(cls, a: np.ndarray) -> "FieldState":
        return cls(a[:, U].copy(), a[:, V].copy(), a[:, P].copy(), a[:, T].copy())


@dataclass(frozen=True)
class TransientInlet:
    """Sinusoidally varying inflow through one boundary opening."""

    mean: float
    amplitude: float
    frequency: float
    direction: tuple[float, float]  # unit vector of the injected velocity
    temperature: float
    width: float                    # opening width, m
    normal_fraction: float          # |direction . inward normal|

    def speed(self, t: float) -> float:
        return self.mean + self.amplitude * math.sin(2.0 * math.pi * self.frequency * t)

    def flux(self, t: float) -> float:
        """Instantaneous volumetric influx per unit depth, m^2/s."""
        return self.width * self.normal_fraction * self.speed(t)


def inlet_velocity(spec: TransientInlet, t: float) -> float:
    """Inflow speed at time t: mean + amplitude * sin(2 pi f t)."""
    return spec.speed(t)


def reynolds_number(rho: float, u: float, length: float, mu: float) -> float:
    return rho * u * length / mu


@dataclass
class BoundarySpec:
    """Tag-keyed Dirichlet data.

    velocity maps a node-type name to a callable (t, xy) -> (2,) vector or
    (n, 2) per-node array; temperature maps a node-type name (or ObjectWall{i}
    for a specific obstacle) to a fixed value; pressure pins nodes of a type
    to a reference value. Types without an entry are natural: stress-free for
    velocity, adiabatic for temperature.
    """

    velocity: dict = field(default_factory=dict)
    temperature: dict = field(default_factory=dict)
    pressure: dict = field(default_factory=dict)
    ambient_temperature: float = AMBIENT_TEMPERATURE
    inlets: dict = field(default_factory=dict)  # tag -> TransientInlet


def _rotation(deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def transient_inlets(dp: DesignPoint) -> dict[str, TransientInlet]:
    """The three inlets of a design point, directions in world coordinates."""
    rot = _rotation(float(dp.get("DomainOrientation", 0.0)))
    width2 = INLET_WIDTH_MM * MM
    height = float(dp["DomainHeight"]) * MM

    def unit(vec):
        v = rot @ np.asarray(vec, dtype=float)
        return (float(v[0]), float(v[1]))

    inlets = {
        "Inlet1": TransientInlet(
            mean=float(dp["Inlet1v"]), amplitude=0.0, frequency=0.0,
            direction=unit((1.0, 0.0)), temperature=AMBIENT_TEMPERATURE,
            width=height, normal_fraction=1.0),
    }
    for i, sign in ((2, -1.0), (3, 1.0)):  # Inlet2 on top wall, Inlet3 on bottom
        ang = math.radians(float(dp[f"Inlet{i}Angle"]))
        inlets[f"Inlet{i}"] = TransientInlet(
            mean=float(dp[f"Inlet{i}vMean"]),
            amplitude=float(dp[f"Inlet{i}vAmplitude"]),
            frequency=float(dp[f"Inlet{i}vFrequency"]),
            direction=unit((math.cos(ang), sign * math.sin(ang))),
            temperature=float(dp[f"Inlet{i}T"]),
            width=width2,
            normal_fraction=math.sin(ang))
    return inlets


def net_outflow_clamp_factor(dp: DesignPoint) -> float:
    """Common scale for the small-inlet amplitudes keeping a net outflow.

    Worst case assumes both sinusoids reach their minima together, so the
    bound holds for any frequency pair: Q1 + Q2m + Q3m - s (A2 + A3) >=
    margin * Q1.
    """
    inlets = transient_inlets(dp)
    q1 = inlets["Inlet1"].flux(0.0)
    mean_flux = sum(inlets[f"Inlet{i}"].width * inlets[f"Inlet{i}"].normal_fraction
                    * inlets[f"Inlet{i}"].mean for i in (2, 3))
    amp_flux = sum(inlets[f"Inlet{i}"].width * inlets[f"Inlet{i}"].normal_fraction
                   * inlets[f"Inlet{i}"].amplitude for i in (2, 3))
    if amp_flux <= 0.0:
        return 1.0
    s = ((1.0 - NET_OUTFLOW_MARGIN) * q1 + mean_flux) / amp_flux
    return min(1.0, s)


def clamp_amplitudes(dp: DesignPoint) -> DesignPoint:
    """Design point with Inlet2/Inlet3 amplitudes scaled to keep net outflow."""
    s = net_outflow_clamp_factor(dp)
    values = dict(dp.values)
    for i in (2, 3):
        key = f"Inlet{i}vAmplitude"
        if key in values:
            values[key] = float(values[key]) * s
    return replace(dp, values=values)


def boundary_for(dp: DesignPoint) -> BoundarySpec:
    """Production boundary conditions for a design point."""
    inlets = transient_inlets(dp)
    zero = lambda t, xy: np.zeros(2)

    def inflow(spec: TransientInlet):
        d = np.asarray(spec.direction)
        return lambda t, xy: spec.speed(t) * d

    velocity = {
        "Wall": zero,
        "ObjectWall": zero,
        "Inlet1": inflow(inlets["Inlet1"]),
        "Inlet2": inflow(inlets["Inlet2"]),
        "Inlet3": inflow(inlets["Inlet3"]),
    }
    temperature = {
        "Inlet1": AMBIENT_TEMPERATURE,
        "Inlet2": inlets["Inlet2"].temperature,
        "Inlet3": inlets["Inlet3"].temperature,
    }
    for i in dp.object_ids:
        temperature[f"ObjectWall{i}"] = float(dp[f"Object{i}T"])
    return BoundarySpec(
        velocity=velocity,
        temperature=temperature,
        pressure={"Outlet": 0.0},
        ambient_temperature=AMBIENT_TEMPERATURE,
        inlets=inlets,
    )


def properties_for(dp: DesignPoint, rho: float = 1.225, mu: float = 1.7894e-5) -> FluidProperties:
    return FluidProperties(rho=rho, mu=mu,
                           k=float(dp["ThermalConductivity"]),
                           cp=float(dp["HeatCapacity"]))


@dataclass(frozen=True)
class SolverOptions:
    """Numerical knobs for the fractional-step scheme.

    stabilization "supg" adds streamline diffusion with the standard
    element-Peclet weighting; "upwind" instead applies algebraic discrete
    upwinding to the convection operator (first order, keeps fields inside
    their boundary-value range on under-resolved meshes and is the default
    for dataset production runs).
    """

    stabilization: str = "supg"
    rtol: float = 1e-8
    pressure_rtol: float = 1e-10

    def __post_init__(self):
        if self.stabilization not in ("supg", "upwind"):
            raise SolverError(f"unknown stabilization {self.stabilization!r}")


@dataclass
class StepInfo:
    div_residual: float
    iterations: tuple[int, int, int, int]  # u, v, pressure, energy


@dataclass
class SimulationRecord:
    """Time series of nodal fields over a fixed step count; state 0 included."""

    mesh: Mesh
    states: np.ndarray  # (steps + 1, N, 4) float64, columns (u, v, p, T)
    dt: float
    properties: FluidProperties
    metadata: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    def state(self, i: int) -> FieldState:
        return FieldState.from_array(self.states[i])

    def replace_mesh(self, mesh: Mesh, states: np.ndarray) -> "SimulationRecord":
        return SimulationRecord(mesh=mesh, states=states, dt=self.dt,
                                properties=self.properties, metadata=dict(self.metadata))


class _Counter:
    def __init__(self):
        self.n = 0

    def __call__(self, *_args):
        self.n += 1


class FlowSolver:
    """Assembled operators and boundary bookkeeping for one mesh/BC pair."""

    def __init__(self, mesh: Mesh, props: FluidProperties, bc: BoundarySpec,
                 options: SolverOptions = SolverOptions()):
        self.mesh = mesh
        self.props = props
        self.bc = bc
        self.options = options
        self.rtol = options.rtol
        self.pressure_rtol = options.pressure_rtol

        n = mesh.n_nodes
        tri = mesh.triangles.astype(np.int64)
        xy = mesh.coords
        x = xy[tri, 0]
        y = xy[tri, 1]
        area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                      - (y[:, 1] - y[:, 0]) * (x[:, 2] - x[:, 0]))
        if np.any(area <= 0):
            raise SolverError("mesh contains non-CCW triangles")
        self.area = area
        inv2a = 1.0 / (2.0 * area)
        self.bgrad = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]],
                              axis=1) * inv2a[:, None]
        self.cgrad = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]],
                              axis=1) * inv2a[:, None]
        self.h_elem = np.sqrt(4.0 * area / math.sqrt(3.0))
        self.tri = tri

        self._rows = np.repeat(tri, 3, axis=1).ravel()
        self._cols = np.tile(tri, (1, 3)).ravel()

        kdata = area[:, None, None] * (
            self.bgrad[:, :, None] * self.bgrad[:, None, :]
            + self.cgrad[:, :, None] * self.cgrad[:, None, :])
        self.K = self._assemble(kdata)
        self.Ml = np.bincount(tri.ravel(), np.repeat(area / 3.0, 3), minlength=n)

        a3 = (area / 3.0)[:, None]
        px = np.broadcast_to((a3 * self.bgrad)[:, None, :], (len(tri), 3, 3))
        py = np.broadcast_to((a3 * self.cgrad)[:, None, :], (len(tri), 3, 3))
        self.Px = self._assemble(px)
        self.Py = self._assemble(py)

        self._setup_boundaries()
        self._setup_pressure_operator()

    def _assemble(self, data) -> sp.csr_matrix:
        n = self.mesh.n_nodes
        return sp.coo_matrix((np.ascontiguousarray(data).ravel(),
                              (self._rows, self._cols)), shape=(n, n)).tocsr()

    def _setup_boundaries(self):
        mesh = self.mesh
        n = mesh.n_nodes
        type_names = [NODE_TYPE_NAMES[t] for t in mesh.node_type]

        self.vel_dir = np.zeros(n, dtype=bool)
        self.vel_groups: list[tuple[np.ndarray, object]] = []
        for tag, fn in self.bc.velocity.items():
            sel = np.array([tn == tag for tn in type_names])
            if sel.any():
                self.vel_dir |= sel
                self.vel_groups.append((np.flatnonzero(sel), fn))

        # Temperature Dirichlet selection is boundary-edge based so corner
        # nodes shared with walls still carry the surface temperature.
        edge_nodes: dict[str, set[int]] = {}
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            group = edge_nodes.setdefault(tag, set())
            group.add(int(i))
            group.add(int(j))
        self.temp_dir = np.zeros(n, dtype=bool)
        self.temp_values = np.zeros(n)
        for tag, value in self.bc.temperature.items():
            if tag == "ObjectWall":
                tags = [k for k in edge_nodes if k.startswith("ObjectWall")]
            else:
                tags = [tag]
            sel = np.zeros(n, dtype=bool)
            for k in tags:
                idx = sorted(edge_nodes.get(k, ()))
                sel[idx] = True
            self.temp_dir |= sel
            self.temp_values[sel] = float(value)

        self.press_dir = np.zeros(n, dtype=bool)
        self.press_values = np.zeros(n)
        for tag, value in self.bc.pressure.items():
            sel = np.array([tn == tag for tn in type_names])
            self.press_dir |= sel
            self.press_values[sel] = float(value)
        if not self.press_dir.any():
            # No reference surface: pin the first node to keep the Poisson
            # operator nonsingular.
            self.press_dir[0] = True

        self.vel_free = ~self.vel_dir
        self.press_free = ~self.press_dir

        # Outward normals and lengths of tagged boundary edges (for fluxes).
        directed = {}
        for k, (a, b, c) in enumerate(mesh.triangles):
            directed[(int(a), int(b))] = k
            directed[(int(b), int(c))] = k
            directed[(int(c), int(a))] = k
        normals = []
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            i, j = int(i), int(j)
            if (i, j) not in directed:
                i, j = j, i  # interior lies left of i->j
            d = mesh.coords[j] - mesh.coords[i]
            length = float(np.hypot(d[0], d[1]))
            normals.append((i, j, tag, d[1] / length, -d[0] / length, length))
        self._edge_normals = normals

    def _setup_pressure_operator(self):
        # Continuity is enforced at pressure nodes whose velocity is free;
        # rows at prescribed-velocity boundary nodes over-constrain the
        # projection (their test functions see only boundary data) and carry
        # spurious null modes. Those nodes get a zero-normal-gradient
        # pressure extrapolation instead, the usual wall treatment.
        self.p_solve = self.vel_free & self.press_free
        self.p_extrap = self.vel_dir & self.press_free

        zfree = sp.diags(self.vel_free.astype(np.float64))
        minv = sp.diags(1.0 / self.Ml)
        pxf = self.Px @ zfree
        pyf = self.Py @ zfree
        lap = pxf @ minv @ pxf.T + pyf @ minv @ pyf.T
        zp = sp.diags(self.p_solve.astype(np.float64))
        self.Lp = (zp @ lap @ zp + sp.diags((~self.p_solve).astype(np.float64))).tocsr()
        self.Lp.sum_duplicates()
        diag = self.Lp.diagonal()
        self._pressure_pre = spla.LinearOperator(
            self.Lp.shape, matvec=lambda r, d=diag: r / d)
        self._maxiter = 10 * self.mesh.n_nodes

        # Averaging stencils for the extrapolated boundary pressure, ordered
        # so later passes may use earlier boundary values (gap regions).
        neighbors: dict[int, set[int]] = {}
        for i, j in self.mesh.edges():
            neighbors.setdefault(int(i), set()).add(int(j))
            neighbors.setdefault(int(j), set()).add(int(i))
        known = self.p_solve | self.press_dir
        pending = sorted(np.flatnonzero(self.p_extrap))
        self._extrap_passes: list[tuple[int, np.ndarray]] = []
        assigned = known.copy()
        while pending:
            progressed = []
            rest = []
            for b in pending:
                srcs = sorted(k for k in neighbors.get(b, ()) if assigned[k])
                if srcs:
                    progressed.append((b, np.array(srcs, dtype=np.int64)))
                else:
                    rest.append(b)
            if not progressed:
                for b in rest:  # isolated; keep reference value
                    self._extrap_passes.append((b, np.array([], dtype=np.int64)))
                break
            for b, srcs in progressed:
                assigned[b] = True
                self._extrap_passes.append((b, srcs))
            pending = rest

    def extrapolate_boundary_pressure(self, p: np.ndarray) -> np.ndarray:
        out = p.copy()
        for b, srcs in self._extrap_passes:
            out[b] = out[srcs].mean() if len(srcs) else 0.0
        return out

    # -- boundary values ------------------------------------------------------

    def dirichlet_velocity(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        n = self.mesh.n_nodes
        ud = np.zeros(n)
        vd = np.zeros(n)
        for nodes, fn in self.vel_groups:
            vec = np.asarray(fn(t, self.mesh.coords[nodes]), dtype=float)
            if vec.ndim == 1:
                ud[nodes] = vec[0]
                vd[nodes] = vec[1]
            else:
                ud[nodes] = vec[:, 0]
                vd[nodes] = vec[:, 1]
        return ud, vd

    def initial_state(self) -> FieldState:
        n = self.mesh.n_nodes
        ud, vd = self.dirichlet_velocity(0.0)
        u = np.where(self.vel_dir, ud, 0.0)
        v = np.where(self.vel_dir, vd, 0.0)
        p = self.press_values.copy()
        temp = np.full(n, self.bc.ambient_temperature)
        temp[self.temp_dir] = self.temp_values[self.temp_dir]
        return FieldState(u, v, p, temp)

    # -- assembly -------------------------------------------------------------

    def _convection(self, u: np.ndarray, v: np.ndarray, kappa: float) -> sp.csr_matrix:
        """Stabilized convection operator for carrier velocity (u, v)."""
        ubar = u[self.tri].mean(axis=1)
        vbar = v[self.tri].mean(axis=1)
        g = ubar[:, None] * self.bgrad + vbar[:, None] * self.cgrad  # (M, 3)
        a3 = (self.area / 3.0)[:, None]
        cdata = np.broadcast_to((a3 * g)[:, None, :], (len(self.tri), 3, 3))

        if self.options.stabilization == "upwind":
            conv = self._assemble(np.ascontiguousarray(cdata))
            # Graph-Laplacian artificial diffusion that makes every
            # off-diagonal of the convection operator non-positive.
            w = conv.maximum(conv.T).maximum(0.0).tocsr()
            w.setdiag(0.0)
            w.eliminate_zeros()
            lump = np.asarray(w.sum(axis=1)).ravel()
            return conv + sp.diags(lump) - w

        umag = np.hypot(ubar, vbar)
        pe = umag * self.h_elem / (2.0 * kappa)
        small = pe < 1e-8
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            xi = np.where(small, 0.0, 1.0 / np.tanh(np.maximum(pe, 1e-300))
                          - 1.0 / np.maximum(pe, 1e-300))
            tau = np.where(small | (umag <= 0.0),
                           self.h_elem**2 / (12.0 * kappa),
                           xi * self.h_elem / np.maximum(2.0 * umag, 1e-300))
        sdata = (tau * self.area)[:, None, None] * g[:, :, None] * g[:, None, :]
        return self._assemble(np.ascontiguousarray(cdata) + sdata)

    def _apply_dirichlet(self, mat: sp.csr_matrix, rhs: np.ndarray,
                         mask: np.ndarray, values: np.ndarray):
        zf = sp.diags((~mask).astype(np.float64))
        sys = (zf @ mat + sp.diags(mask.astype(np.float64))).tocsr()
        b = np.where(mask, values, rhs)
        return sys, b

    def _krylov(self, mat, rhs, x0, label: str, step_index: int) -> tuple[np.ndarray, int]:
        diag = mat.diagonal()
        diag = np.where(np.abs(diag) > 0, diag, 1.0)
        pre = spla.LinearOperator(mat.shape, matvec=lambda r: r / diag)
        counter = _Counter()
        x, info = spla.bicgstab(mat, rhs, x0=x0, rtol=self.rtol, atol=0.0,
                                maxiter=self._maxiter, M=pre, callback=counter)
        if info != 0:
            # Deterministic direct fallback for stiff corner cases.
            try:
                x = spla.spsolve(mat.tocsc(), rhs)
            except Exception as exc:  # pragma: no cover
                res = float(np.linalg.norm(mat @ x - rhs))
                raise SolverError(f"{label} solve failed at step {step_index}",
                                  step=step_index, residual=res) from exc
            if not np.all(np.isfinite(x)):
                raise SolverError(f"{label} solve produced non-finite values",
                                  step=step_index)
        return x, counter.n

    # -- time stepping ----------------------------------------------------------

    def step(self, state: FieldState, t: float, dt: float,
             step_index: int = 0) -> tuple[FieldState, StepInfo]:
        if dt <= 0:
            raise SolverError("dt must be positive")
        props = self.props
        n = self.mesh.n_nodes
        t_new = t + dt
        p_kin = state.p / props.rho

        mdt = sp.diags(self.Ml / dt)
        conv = self._convection(state.u, state.v, props.nu)
        a_mom = (mdt + props.nu * self.K + conv).tocsr()

        ud, vd = self.dirichlet_velocity(t_new)
        rhs_u = self.Ml / dt * state.u + self.Px.T @ p_kin
        rhs_v = self.Ml / dt * state.v + self.Py.T @ p_kin
        sys_u, b_u = self._apply_dirichlet(a_mom, rhs_u, self.vel_dir, ud)
        u_star, it_u = self._krylov(sys_u, b_u, state.u, "momentum-u", step_index)
        _, b_v = self._apply_dirichlet(a_mom, rhs_v, self.vel_dir, vd)
        v_star, it_v = self._krylov(sys_u, b_v, state.v, "momentum-v", step_index)

        div_star = self.Px @ u_star + self.Py @ v_star
        rhs_p = np.where(self.p_solve, -div_star / dt, 0.0)
        counter = _Counter()
        phi, info = spla.cg(self.Lp, rhs_p, rtol=self.pressure_rtol, atol=0.0,
                            maxiter=self._maxiter, M=self._pressure_pre, callback=counter)
        if info != 0:
            phi = spla.spsolve(self.Lp.tocsc(), rhs_p)
            if not np.all(np.isfinite(phi)):
                raise SolverError("pressure solve failed", step=step_index,
                                  residual=float(np.linalg.norm(self.Lp @ phi - rhs_p)))

        corr_u = dt * (self.Px.T @ phi) / self.Ml
        corr_v = dt * (self.Py.T @ phi) / self.Ml
        u_new = u_star + np.where(self.vel_free, corr_u, 0.0)
        v_new = v_star + np.where(self.vel_free, corr_v, 0.0)
        p_new = self.extrapolate_boundary_pressure((p_kin + phi) * props.rho)

        conv_t = self._convection(u_new, v_new, props.alpha)
        a_temp = (mdt + props.alpha * self.K + conv_t).tocsr()
        rhs_t = self.Ml / dt * state.T
        sys_t, b_t = self._apply_dirichlet(a_temp, rhs_t, self.temp_dir, self.temp_values)
        t_next, it_t = self._krylov(sys_t, b_t, state.T, "energy", step_index)

        div_new = (self.Px @ u_new + self.Py @ v_new)[self.p_solve]
        div_res = self.divergence_residual(div_new, t_new)

        out = FieldState(u_new, v_new, p_new, t_next)
        if not (np.all(np.isfinite(out.u)) and np.all(np.isfinite(out.v))
                and np.all(np.isfinite(out.p)) and np.all(np.isfinite(out.T))):
            raise SolverError("non-finite fields", step=step_index)
        return out, StepInfo(div_residual=div_res,
                             iterations=(it_u, it_v, counter.n, it_t))

    def divergence_residual(self, div_rows: np.ndarray, t: float) -> float:
        """Max weak-divergence row normalized by mean inlet speed x mesh size."""
        ud, vd = self.dirichlet_velocity(t)
        speeds = np.hypot(ud, vd)[self.vel_dir]
        u_ref = float(speeds.mean()) if speeds.size else 0.0
        u_ref = max(u_ref, 1e-12)
        h_ref = self.mesh.target_edge_len or float(self.h_elem.mean())
        return float(np.abs(div_rows).max(initial=0.0)) / (u_ref * h_ref)

    def boundary_flux(self, state: FieldState) -> dict[str, float]:
        """Outward volume flux per tagged boundary group, m^2/s."""
        flux: dict[str, float] = {}
        for (i, j, tag, nx, ny, length) in self._edge_normals:
            un = 0.5 * ((state.u[i] + state.u[j]) * nx + (state.v[i] + state.v[j]) * ny)
            flux[tag] = flux.get(tag, 0.0) + un * length
        return flux


def step(state: FieldState, mesh: Mesh, props: FluidProperties, bc: BoundarySpec,
         t: float, dt: float, options: SolverOptions = SolverOptions()) -> FieldState:
    """Single fractional-step update (convenience wrapper building a solver)."""
    out, _info = FlowSolver(mesh, props, bc, options).step(state, t, dt)
    return out


PRODUCTION_OPTIONS = SolverOptions(stabilization="upwind")


def run_transient(dp: DesignPoint | None, mesh: Mesh, dt: float, steps: int,
                  props: FluidProperties | None = None,
                  bc: BoundarySpec | None = None,
                  options: SolverOptions = PRODUCTION_OPTIONS) -> SimulationRecord:
    """March `steps` fixed timesteps and record every state, the initial one
    included."""
    if steps < 0:
        raise SolverError("steps must be >= 0")
    if props is None:
        if dp is None:
            raise SolverError("need either a design point or explicit properties")
        props = properties_for(dp)
    if bc is None:
        if dp is None:
            raise SolverError("need either a design point or explicit boundary spec")
        bc = boundary_for(dp)

    solver = FlowSolver(mesh, props, bc, options)
    state = solver.initial_state()
    states = np.empty((steps + 1, mesh.n_nodes, 4))
    states[0] = state.to_array()
    max_div = 0.0
    iters = np.zeros(4, dtype=np.int64)
    for k in range(steps):
        try:
            state, info = solver.step(state, k * dt, dt, step_index=k)
        except SolverError as exc:
            exc.step = k
            raise
        states[k + 1] = state.to_array()
        max_div = max(max_div, info.div_residual)
        iters += info.iterations

    flux = solver.boundary_flux(state)
    inflow = -sum(f for tag, f in flux.items() if tag.startswith("Inlet"))
    outflow = flux.get("Outlet", 0.0)
    balance = abs(inflow - outflow) / max(abs(inflow), 1e-300)

    bc_temps = [bc.ambient_temperature] + [float(v) for v in bc.temperature.values()]
    t_lo, t_hi = min(bc_temps), max(bc_temps)
    margin = 0.01 * max(t_hi - t_lo, 1e-300)
    t_min = float(states[:, :, T].min())
    t_max = float(states[:, :, T].max())

    metadata = {
        "max_divergence_residual": max_div,
        "mass_balance_error": balance,
        "boundary_flux": {k: float(v) for k, v in sorted(flux.items())},
        "temperature_range": [t_min, t_max],
        "temperature_bounds_ok": bool(t_min >= t_lo - margin and t_max <= t_hi + margin),
        "krylov_iterations": [int(i) for i in iters],
    }
    return SimulationRecord(mesh=mesh, states=states, dt=dt, properties=props,
                            metadata=metadata)
