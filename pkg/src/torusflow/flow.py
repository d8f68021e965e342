"""Flow maps on the torus and the configuration-space form of the dynamics.

A map is stored through its periodic displacement, phi(z) = z + d(z) mod 1,
so composition, inversion and differentiation all stay inside the spectral
toolbox: compositions evaluate band-limited fields at displaced points,
inverses come from a fixed-point iteration on the displacement, and the
Jacobian is I + grad(d).

The evolution itself is carried here as the second-order label equation

    phi_tt = Gamma_phi(phi_t, phi_t),    Gamma_phi(U, V) = Gamma(U o phi^{-1}, V o phi^{-1}) o phi,

whose Eulerian readback phi_t o phi^{-1} must reproduce the velocity-form
trajectory.  The body-frame quantities (body velocity (grad phi)^{-1} phi_t,
body momentum Ad*_phi A(phi_t o phi^{-1})) and the right-invariant metric
evaluation live here too; the body momentum is the conserved quantity of
the b = 2 flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import _step_count, christoffel, validate_b
from .spectral import (
    DEFAULT_PAD_FACTOR,
    JacobianField,
    ScalarField,
    TorusGrid,
    VectorField,
    eval_spectra,
    eval_vector_offgrid,
    gradient,
    helmholtz,
    partial_x,
    partial_y,
)

__all__ = [
    "DET_FLOOR",
    "DiffeoMap",
    "GeodesicState",
    "GeodesicTrajectory",
    "FlowTrajectory",
    "BodyMomentum",
    "InversionError",
    "OrientationError",
    "apply",
    "compose",
    "invert",
    "jacobian",
    "compose_field",
    "flow_from_velocity",
    "trajectory_velocity",
    "christoffel_conjugated",
    "geodesic_step",
    "geodesic_integrate",
    "eulerian_velocity",
    "exp_map",
    "adjoint",
    "coadjoint",
    "body_velocity",
    "body_momentum",
    "metric_at",
]

DET_FLOOR = 1e-3
INVERT_TOL = 1e-12
INVERT_MAX_ITER = 100


class InversionError(RuntimeError):
    """Fixed-point inversion failed to converge (map too far from identity)."""


class OrientationError(RuntimeError):
    """The Jacobian determinant dropped below the orientation guard."""


@dataclass(frozen=True)
class DiffeoMap:
    """Torus map phi(z) = z + displacement(z), coordinates taken mod 1."""

    displacement: VectorField

    @property
    def grid(self) -> TorusGrid:
        return self.displacement.grid

    @classmethod
    def identity(cls, grid: TorusGrid) -> "DiffeoMap":
        return cls(VectorField.zero(grid))

    @classmethod
    def translation(cls, grid: TorusGrid, a1: float, a2: float) -> "DiffeoMap":
        return cls(VectorField.constant(grid, a1, a2))


def jacobian(phi: DiffeoMap) -> JacobianField:
    """Full Jacobian grad(phi) = I + grad(d); the determinant is pointwise."""
    jd = gradient(phi.displacement)
    one = ScalarField(phi.grid, np.ones(phi.grid.shape))
    return JacobianField(one + jd.d11, jd.d12, jd.d21, one + jd.d22)


def _min_det(phi: DiffeoMap) -> float:
    return float(np.min(jacobian(phi).det().values))


def apply(phi: DiffeoMap, points: np.ndarray) -> np.ndarray:
    """Image of (x, y) points under phi, wrapped into [0, 1)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    d1, d2 = eval_vector_offgrid(phi.displacement, pts[:, 0], pts[:, 1])
    out = np.column_stack([pts[:, 0] + d1, pts[:, 1] + d2])
    return np.mod(out, 1.0).reshape(np.asarray(points, dtype=np.float64).shape)


def compose_field(u: VectorField, phi: DiffeoMap) -> VectorField:
    """Samples of u o phi, i.e. the interpolant of u evaluated at phi(z)."""
    if u.grid != phi.grid:
        raise ValueError("field and map live on different grids")
    X, Y = phi.grid.mesh
    d = phi.displacement
    v1, v2 = eval_vector_offgrid(u, X + d.u1.values, Y + d.u2.values)
    return VectorField.from_values(phi.grid, v1, v2)


def compose(phi: DiffeoMap, psi: DiffeoMap) -> DiffeoMap:
    """Group product phi o psi; displacement d_psi(z) + d_phi(z + d_psi(z))."""
    if phi.grid != psi.grid:
        raise ValueError("maps live on different grids")
    shifted = compose_field(phi.displacement, psi)
    return DiffeoMap(psi.displacement + shifted)


def invert(
    phi: DiffeoMap,
    tol: float = INVERT_TOL,
    max_iter: int = INVERT_MAX_ITER,
    initial: VectorField | None = None,
) -> DiffeoMap:
    """Inverse map via the contraction e(w) = -d(w + e(w)).

    Starts from e = -d (or the supplied displacement, which lets callers warm
    start consecutive inversions along a trajectory) and iterates until the
    sup-norm update drops below tol.  Converges for maps in the contraction
    regime sup|grad d| < 1; raises InversionError otherwise.
    """
    if _min_det(phi) <= 0.0:
        raise OrientationError("map is not orientation preserving on the grid")
    d = phi.displacement
    X, Y = phi.grid.mesh
    if initial is None:
        e1, e2 = -d.u1.values, -d.u2.values
    else:
        e1, e2 = initial.u1.values, initial.u2.values
    update = np.inf
    for _ in range(max_iter):
        f1, f2 = eval_vector_offgrid(d, X + e1, Y + e2)
        update = max(float(np.max(np.abs(f1 + e1))), float(np.max(np.abs(f2 + e2))))
        e1, e2 = -f1, -f2
        if update < tol:
            return DiffeoMap(VectorField.from_values(phi.grid, e1, e2))
    raise InversionError(f"inversion stalled at update {update:.3e} after {max_iter} iterations")


@dataclass(frozen=True)
class FlowTrajectory:
    """Maps produced by integrating the label equation phi_t = u(t, phi)."""

    dt: float
    times: np.ndarray
    maps: tuple[DiffeoMap, ...]

    @property
    def final(self) -> DiffeoMap:
        return self.maps[-1]


def trajectory_velocity(trajectory) -> Callable[[float], VectorField]:
    """Lookup t -> u(t) for a velocity trajectory recorded at every step.

    The label integrator samples u at step midpoints, so drive it with a
    trajectory computed at half its step.
    """
    dt = trajectory.dt
    states = trajectory.states

    def u_at(t: float) -> VectorField:
        idx = int(round(t / dt))
        if idx < 0 or idx >= len(states) or abs(idx * dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"velocity not recorded at t={t}")
        return states[idx].u

    return u_at


def flow_from_velocity(
    u_at: Callable[[float], VectorField],
    t_end: float,
    dt: float,
    record_stride: int = 1,
    det_floor: float = DET_FLOOR,
) -> FlowTrajectory:
    """Integrate phi_t(t, z) = u(t, phi(t, z)) from the identity.

    u_at must provide the velocity at step endpoints and midpoints; each
    stage evaluates the interpolant of u at the displaced labels.  Aborts
    with OrientationError when det(grad phi) falls to det_floor.
    """
    n_steps = _step_count(t_end, dt)
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    grid = u_at(0.0).grid
    X, Y = grid.mesh
    d1 = np.zeros(grid.shape)
    d2 = np.zeros(grid.shape)
    times = [0.0]
    maps = [DiffeoMap.identity(grid)]
    for i in range(1, n_steps + 1):
        t = (i - 1) * dt

        def stage(s, a1, a2):
            return eval_vector_offgrid(u_at(s), X + a1, Y + a2)

        k11, k12 = stage(t, d1, d2)
        k21, k22 = stage(t + 0.5 * dt, d1 + 0.5 * dt * k11, d2 + 0.5 * dt * k12)
        k31, k32 = stage(t + 0.5 * dt, d1 + 0.5 * dt * k21, d2 + 0.5 * dt * k22)
        k41, k42 = stage(t + dt, d1 + dt * k31, d2 + dt * k32)
        d1 = d1 + (dt / 6.0) * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
        d2 = d2 + (dt / 6.0) * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
        phi = DiffeoMap(VectorField.from_values(grid, d1, d2))
        if _min_det(phi) <= det_floor:
            raise OrientationError(f"det(grad phi) <= {det_floor:g} at t={i * dt:.6g}")
        if i % record_stride == 0 or i == n_steps:
            times.append(i * dt)
            maps.append(phi)
    return FlowTrajectory(dt=float(dt), times=np.array(times), maps=tuple(maps))


def christoffel_conjugated(
    phi: DiffeoMap,
    U: VectorField,
    V: VectorField,
    b,
    pad_factor: int = DEFAULT_PAD_FACTOR,
    phi_inv: DiffeoMap | None = None,
) -> VectorField:
    """Conjugated connection Gamma_phi(U, V) = Gamma(U o phi^{-1}, V o phi^{-1}) o phi.

    Pass phi_inv to reuse an inverse computed elsewhere (the geodesic stepper
    does, to warm start consecutive inversions).
    """
    b = validate_b(b)
    grid = phi.grid
    if U.grid != grid or V.grid != grid:
        raise ValueError("fields and map live on different grids")
    psi = invert(phi) if phi_inv is None else phi_inv
    X, Y = grid.mesh
    e = psi.displacement
    xi, yi = X + e.u1.values, Y + e.u2.values
    if V is U:
        u1, u2 = eval_vector_offgrid(U, xi, yi)
        Uc = VectorField.from_values(grid, u1, u2)
        Vc = Uc
    else:
        stack = np.stack([U.u1.spectrum, U.u2.spectrum, V.u1.spectrum, V.u2.spectrum])
        vals = eval_spectra(grid, stack, xi, yi)
        Uc = VectorField.from_values(grid, vals[0].reshape(grid.shape), vals[1].reshape(grid.shape))
        Vc = VectorField.from_values(grid, vals[2].reshape(grid.shape), vals[3].reshape(grid.shape))
    gam = christoffel(Uc, Vc, b, pad_factor)
    return compose_field(gam, phi)


@dataclass(frozen=True)
class GeodesicState:
    """Configuration phi, material velocity phi_t (sampled at labels), time t."""

    t: float
    phi: DiffeoMap
    phi_t: VectorField


@dataclass(frozen=True)
class GeodesicTrajectory:
    b: float
    dt: float
    states: tuple[GeodesicState, ...]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> GeodesicState:
        return self.states[-1]


def _conjugated_rhs(d: VectorField, w: VectorField, b: float, pad_factor: int, warm):
    phi = DiffeoMap(d)
    psi = invert(phi, initial=warm)
    gam = christoffel_conjugated(phi, w, w, b, pad_factor, phi_inv=psi)
    return gam, psi.displacement


def _advance_geodesic(state: GeodesicState, dt: float, b: float, pad_factor: int, warm):
    d, w = state.phi.displacement, state.phi_t
    a1, warm = _conjugated_rhs(d, w, b, pad_factor, warm)
    w2 = w + (0.5 * dt) * a1
    a2, warm = _conjugated_rhs(d + (0.5 * dt) * w, w2, b, pad_factor, warm)
    w3 = w + (0.5 * dt) * a2
    a3, warm = _conjugated_rhs(d + (0.5 * dt) * w2, w3, b, pad_factor, warm)
    w4 = w + dt * a3
    a4, warm = _conjugated_rhs(d + dt * w3, w4, b, pad_factor, warm)
    d_new = d + (dt / 6.0) * (w + 2.0 * w2 + 2.0 * w3 + w4)
    w_new = w + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return GeodesicState(state.t + dt, DiffeoMap(d_new), w_new), warm


def geodesic_step(state: GeodesicState, dt: float, b, pad_factor: int = DEFAULT_PAD_FACTOR) -> GeodesicState:
    """One fourth-order step of phi_tt = Gamma_phi(phi_t, phi_t)."""
    b = validate_b(b)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    new, _ = _advance_geodesic(state, dt, b, pad_factor, None)
    return new


def geodesic_integrate(
    u0: VectorField,
    b,
    t_end: float,
    dt: float,
    record_stride: int = 1,
    det_floor: float = DET_FLOOR,
    pad_factor: int = DEFAULT_PAD_FACTOR,
) -> GeodesicTrajectory:
    """Geodesic from the identity with initial material velocity u0.

    States are recorded every record_stride steps (plus the final one);
    each accepted step is guarded by the orientation floor.
    """
    b = validate_b(b)
    n_steps = _step_count(t_end, dt)
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    grid = u0.grid
    state = GeodesicState(0.0, DiffeoMap.identity(grid), u0)
    states = [state]
    warm = None
    for i in range(1, n_steps + 1):
        state, warm = _advance_geodesic(state, dt, b, pad_factor, warm)
        state = GeodesicState(i * dt, state.phi, state.phi_t)
        if not np.isfinite(state.phi_t.sup_norm()):
            raise InversionError(f"non-finite material velocity at t={state.t:.6g}")
        if _min_det(state.phi) <= det_floor:
            raise OrientationError(f"det(grad phi) <= {det_floor:g} at t={state.t:.6g}")
        if i % record_stride == 0 or i == n_steps:
            states.append(state)
    return GeodesicTrajectory(b=b, dt=float(dt), states=tuple(states))


def eulerian_velocity(state: GeodesicState, phi_inv: DiffeoMap | None = None) -> VectorField:
    """Readback u = phi_t o phi^{-1} of the velocity field on the torus."""
    psi = invert(state.phi) if phi_inv is None else phi_inv
    return compose_field(state.phi_t, psi)


def exp_map(u0: VectorField, b=2.0, dt: float = 5e-3, pad_factor: int = DEFAULT_PAD_FACTOR) -> DiffeoMap:
    """Geodesic exponential: the time-1 map of the geodesic with phi_t(0) = u0."""
    n_steps = _step_count(1.0, dt)
    traj = geodesic_integrate(u0, b, 1.0, dt, record_stride=n_steps, pad_factor=pad_factor)
    return traj.final.phi


def adjoint(phi: DiffeoMap, v: VectorField, phi_inv: DiffeoMap | None = None) -> VectorField:
    """Inner automorphism Ad_phi v = (grad(phi) . v) o phi^{-1}."""
    if v.grid != phi.grid:
        raise ValueError("field and map live on different grids")
    pushed = v + gradient(phi.displacement).dot(v)
    psi = invert(phi) if phi_inv is None else phi_inv
    return compose_field(pushed, psi)


def coadjoint(phi: DiffeoMap, w: VectorField) -> VectorField:
    """Dual action Ad*_phi w = (grad phi)^T (w o phi) det(grad phi).

    No inversion is needed; products are plain grid products since the
    composed factor is not band-limited anyway.
    """
    if w.grid != phi.grid:
        raise ValueError("field and map live on different grids")
    j = jacobian(phi)
    wphi = compose_field(w, phi)
    det = j.det().values
    o1 = (j.d11.values * wphi.u1.values + j.d21.values * wphi.u2.values) * det
    o2 = (j.d12.values * wphi.u1.values + j.d22.values * wphi.u2.values) * det
    return VectorField.from_values(phi.grid, o1, o2)


@dataclass(frozen=True)
class BodyMomentum:
    """Momentum pulled to the body frame; constant along b = 2 geodesics."""

    m0: VectorField


def body_velocity(state: GeodesicState, det_floor: float = DET_FLOOR) -> VectorField:
    """Body velocity U = (grad phi)^{-1} phi_t, solved pointwise."""
    j = jacobian(state.phi)
    det = j.det().values
    if float(np.min(det)) <= det_floor:
        raise OrientationError("grad(phi) is singular to working precision")
    w1, w2 = state.phi_t.u1.values, state.phi_t.u2.values
    u1 = (j.d22.values * w1 - j.d12.values * w2) / det
    u2 = (-j.d21.values * w1 + j.d11.values * w2) / det
    return VectorField.from_values(state.phi.grid, u1, u2)


def body_momentum(state: GeodesicState, phi_inv: DiffeoMap | None = None) -> BodyMomentum:
    """Body momentum m0 = Ad*_phi m with m = A(phi_t o phi^{-1})."""
    u = eulerian_velocity(state, phi_inv)
    return BodyMomentum(coadjoint(state.phi, helmholtz(u)))


def metric_at(phi: DiffeoMap, U: VectorField, V: VectorField) -> float:
    """Right-invariant metric at configuration phi.

    Evaluates sum_i integral( U_i V_i + [grad(U_i) (grad phi)^{-1}] .
    [grad(V_i) (grad phi)^{-1}] ) det(grad phi) dz, which is the change of
    variables of h1_inner(U o phi^{-1}, V o phi^{-1}).
    """
    if U.grid != phi.grid or V.grid != phi.grid:
        raise ValueError("fields and map live on different grids")
    j = jacobian(phi)
    det = j.det().values
    if float(np.min(det)) <= 0.0:
        raise OrientationError("map is not orientation preserving on the grid")
    # Inverse Jacobian entries, pointwise.
    i11 = j.d22.values / det
    i12 = -j.d12.values / det
    i21 = -j.d21.values / det
    i22 = j.d11.values / det
    integrand = np.zeros(phi.grid.shape)
    for Ui, Vi in zip(U.components, V.components):
        gux, guy = partial_x(Ui).values, partial_y(Ui).values
        gvx, gvy = partial_x(Vi).values, partial_y(Vi).values
        au1 = gux * i11 + guy * i21
        au2 = gux * i12 + guy * i22
        av1 = gvx * i11 + gvy * i21
        av2 = gvx * i12 + gvy * i22
        integrand += Ui.values * Vi.values + au1 * av1 + au2 * av2
    return float(np.mean(integrand * det))
