"""Dynamics of the two-dimensional b-family in velocity form.

The evolution on the torus is du/dt = B(u, u) with

    B(u, v) = -A^{-1}( grad(Au).v + (grad v)^T Au + (b - 1) Au div(v) ),

where A = 1 - Laplacian acts componentwise and every product is dealiased.
The symmetrization Gamma(u, v) of B plus the transport terms is the
connection bilinear form; at b = 2 the flow is metric (the H^1-type energy
is conserved), for other b it is not, and the checks in this module are
built to see both facts numerically.

Also included: a classical one-step integrator with a blow-up guard, and
two independent one-dimensional oracles (the 1D b-family and the
two-component system it couples to) used to cross-check the planar code on
y-independent data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    DEFAULT_PAD_FACTOR,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    h1_inner,
    helmholtz,
    helmholtz_inverse,
    laplacian,
    partial_x,
    partial_y,
    scale_field,
)

__all__ = [
    "B_CAMASSA_HOLM",
    "B_DEGASPERIS_PROCESI",
    "BlowupError",
    "EulerState",
    "Trajectory",
    "ConservationReport",
    "validate_b",
    "b_operator",
    "christoffel",
    "euler_rhs",
    "euler_rhs_geometric",
    "check_commuting_identity",
    "commutator",
    "ad_star",
    "hamiltonian",
    "check_metric_compatibility",
    "rk4_step",
    "integrate",
    "conservation_report",
    "rhs_1d_b",
    "helmholtz_1d",
    "integrate_1d",
    "mch2_rhs",
]

B_CAMASSA_HOLM = 2.0
B_DEGASPERIS_PROCESI = 3.0

DRIFT_FLOOR = 1e-14


class BlowupError(RuntimeError):
    """A trajectory left the resolvable regime (blow-up or instability)."""


def validate_b(b) -> float:
    """Coerce the family parameter to a finite float (2 and 3 are the classical cases)."""
    b = float(b)
    if not np.isfinite(b):
        raise ValueError(f"family parameter must be finite, got {b!r}")
    return b


@dataclass(frozen=True)
class EulerState:
    """Velocity field at one instant; the momentum m = Au is derived on demand."""

    t: float
    u: VectorField

    @property
    def m(self) -> VectorField:
        return helmholtz(self.u)


@dataclass(frozen=True)
class Trajectory:
    """Recorded states of one integrate() run, in increasing time order."""

    b: float
    dt: float
    states: tuple[EulerState, ...]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> EulerState:
        return self.states[-1]


def _relative_drift(q: np.ndarray) -> float:
    return float(np.max(np.abs(q - q[0])) / max(abs(float(q[0])), DRIFT_FLOOR))


@dataclass(frozen=True)
class ConservationReport:
    """Scalar diagnostics along a trajectory and their relative drifts."""

    times: np.ndarray
    hamiltonian: np.ndarray
    h1_energy: np.ndarray
    sup_u: np.ndarray

    @property
    def hamiltonian_drift(self) -> float:
        return _relative_drift(self.hamiltonian)

    @property
    def h1_drift(self) -> float:
        return _relative_drift(self.h1_energy)


def conservation_report(trajectory: Trajectory) -> ConservationReport:
    energies = np.array([h1_inner(s.u, s.u) for s in trajectory.states])
    sups = np.array([s.u.sup_norm() for s in trajectory.states])
    return ConservationReport(
        times=trajectory.times,
        hamiltonian=0.5 * energies,
        h1_energy=energies,
        sup_u=sups,
    )


def b_operator(u: VectorField, v: VectorField, b, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """Quadratic operator B(u, v) = -A^{-1}(grad(Au).v + (grad v)^T Au + (b-1) Au div v)."""
    b = validate_b(b)
    au = helmholtz(u)
    total = (
        gradient(au).dot(v, pad_factor)
        + gradient(v).tdot(au, pad_factor)
        + (b - 1.0) * scale_field(au, divergence(v), pad_factor)
    )
    return -helmholtz_inverse(total)


def christoffel(u: VectorField, v: VectorField, b, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """Connection bilinear form Gamma(u, v), symmetric in its arguments.

    Gamma(u, v) = (grad u . v + grad v . u + B(u, v) + B(v, u)) / 2, with the
    B terms expanded inline so each momentum Au, Av is computed once.
    """
    b = validate_b(b)
    ju, jv = gradient(u), gradient(v)
    au, av = helmholtz(u), helmholtz(v)
    sym = ju.dot(v, pad_factor) + jv.dot(u, pad_factor)
    inner = (
        gradient(au).dot(v, pad_factor)
        + jv.tdot(au, pad_factor)
        + (b - 1.0) * scale_field(au, divergence(v), pad_factor)
        + gradient(av).dot(u, pad_factor)
        + ju.tdot(av, pad_factor)
        + (b - 1.0) * scale_field(av, divergence(u), pad_factor)
    )
    return 0.5 * (sym - helmholtz_inverse(inner))


def euler_rhs(u: VectorField, b, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """du/dt in the direct momentum form, i.e. B(u, u)."""
    return b_operator(u, u, b, pad_factor)


def euler_rhs_geometric(u: VectorField, b, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """du/dt written as Gamma(u, u) - grad(u).u; agrees with euler_rhs to roundoff."""
    return christoffel(u, u, b, pad_factor) - gradient(u).dot(u, pad_factor)


def _vector_laplacian(u: VectorField) -> VectorField:
    return VectorField(laplacian(u.u1), laplacian(u.u2))


def _vector_dx(u: VectorField) -> VectorField:
    return VectorField(partial_x(u.u1), partial_x(u.u2))


def _vector_dy(u: VectorField) -> VectorField:
    return VectorField(partial_y(u.u1), partial_y(u.u2))


def check_commuting_identity(u: VectorField, v: VectorField, pad_factor: int = DEFAULT_PAD_FACTOR) -> float:
    """Residual of grad(Av).u - A(grad v . u) against its derivative expansion.

    The expansion is grad(v).Lap(u) + 2 grad(v_x).u_x + 2 grad(v_y).u_y.
    Returns the max-norm of the difference, which is pure roundoff whenever
    the pairwise products of u and v fit the padded grid.
    """
    av = helmholtz(v)
    lhs = gradient(av).dot(u, pad_factor) - helmholtz(gradient(v).dot(u, pad_factor))
    rhs = (
        gradient(v).dot(_vector_laplacian(u), pad_factor)
        + 2.0 * gradient(_vector_dx(v)).dot(_vector_dx(u), pad_factor)
        + 2.0 * gradient(_vector_dy(v)).dot(_vector_dy(u), pad_factor)
    )
    return (lhs - rhs).sup_norm()


def commutator(u: VectorField, v: VectorField, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """Vector field bracket [u, v] = grad(u).v - grad(v).u."""
    return gradient(u).dot(v, pad_factor) - gradient(v).dot(u, pad_factor)


def ad_star(u: VectorField, w: VectorField, b=B_CAMASSA_HOLM, pad_factor: int = DEFAULT_PAD_FACTOR) -> VectorField:
    """Coadjoint action ad*_u w = A^{-1}((grad u)^T Aw + grad(Aw).u + (b-1) (div u) Aw).

    With the default b = 2 this is minus the right-hand side when w = u,
    which is what makes that case a geodesic flow.
    """
    b = validate_b(b)
    aw = helmholtz(w)
    total = (
        gradient(u).tdot(aw, pad_factor)
        + gradient(aw).dot(u, pad_factor)
        + (b - 1.0) * scale_field(aw, divergence(u), pad_factor)
    )
    return helmholtz_inverse(total)


def hamiltonian(u: VectorField) -> float:
    """Kinetic energy (1/2) integral(u . Au); nonnegative, zero only at u = 0."""
    return 0.5 * h1_inner(u, u)


def check_metric_compatibility(
    u: VectorField,
    v: VectorField,
    w: VectorField,
    b=B_CAMASSA_HOLM,
    pad_factor: int = DEFAULT_PAD_FACTOR,
) -> float:
    """Relative defect of the compatibility pairing at parameter b.

    Compares integral((grad v . u) . Aw + (grad w . u) . Av) with the same
    pairing of Gamma(u, v) against w and Gamma(u, w) against v, normalized
    by 1 + |left side|.  Roundoff-small at b = 2; order one for b != 2 on
    generic data.
    """
    jv, jw = gradient(v), gradient(w)
    lhs = h1_inner(jv.dot(u, pad_factor), w) + h1_inner(jw.dot(u, pad_factor), v)
    rhs = h1_inner(christoffel(u, v, b, pad_factor), w) + h1_inner(christoffel(u, w, b, pad_factor), v)
    return abs(lhs - rhs) / (1.0 + abs(lhs))


def _rk4_velocity(u: VectorField, dt: float, b: float, pad_factor: int) -> VectorField:
    k1 = euler_rhs(u, b, pad_factor)
    k2 = euler_rhs(u + (0.5 * dt) * k1, b, pad_factor)
    k3 = euler_rhs(u + (0.5 * dt) * k2, b, pad_factor)
    k4 = euler_rhs(u + dt * k3, b, pad_factor)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(state: EulerState, dt: float, b, pad_factor: int = DEFAULT_PAD_FACTOR) -> EulerState:
    """One classical fourth-order step of du/dt = B(u, u)."""
    b = validate_b(b)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return EulerState(state.t + dt, _rk4_velocity(state.u, dt, b, pad_factor))


def _step_count(t_end: float, dt: float) -> int:
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError(f"t_end={t_end} is not a whole number of steps of dt={dt}")
    return n


def integrate(
    u0: VectorField,
    b,
    t_end: float,
    dt: float,
    record_stride: int = 1,
    blowup_factor: float = 1e3,
    pad_factor: int = DEFAULT_PAD_FACTOR,
) -> Trajectory:
    """Advance u0 to t_end with fixed steps, recording every record_stride-th state.

    Aborts with BlowupError when the velocity goes non-finite or its sup norm
    exceeds blowup_factor times the initial one; the final state is always
    recorded.
    """
    b = validate_b(b)
    n_steps = _step_count(t_end, dt)
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    sup0 = u0.sup_norm()
    state = EulerState(0.0, u0)
    states = [state]
    for i in range(1, n_steps + 1):
        u_next = _rk4_velocity(state.u, dt, b, pad_factor)
        state = EulerState(i * dt, u_next)
        sup = u_next.sup_norm()
        err = None
        if not np.isfinite(sup):
            err = BlowupError(
                f"non-finite velocity at t={state.t:.6g} (suspected blow-up or instability)"
            )
        elif sup > blowup_factor * sup0:
            err = BlowupError(
                f"sup|u|={sup:.3g} exceeds {blowup_factor:g} x initial {sup0:.3g} at t={state.t:.6g}"
            )
        if err is not None:
            # States recorded before the abort stay available to callers
            # that want to emit partial output.
            err.partial = Trajectory(b=b, dt=float(dt), states=tuple(states))
            raise err
        if i % record_stride == 0 or i == n_steps:
            states.append(state)
    return Trajectory(b=b, dt=float(dt), states=tuple(states))


# ---------------------------------------------------------------------------
# One-dimensional oracles on plain arrays (period-1 grids, even length).
# Kept deliberately separate from the field types above: these exist to
# cross-check the planar code on y-independent data, so they share nothing
# with it beyond numpy's FFT.


def _check_1d(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 4 or v.size % 2 != 0:
        raise ValueError("expected a 1D sample array of even length >= 4")
    return v


def _dx_1d(v: np.ndarray) -> np.ndarray:
    n = v.size
    j = np.fft.fftfreq(n, d=1.0 / n)
    j[n // 2] = 0.0
    return np.fft.ifft(np.fft.fft(v) * (2j * np.pi * j)).real


def helmholtz_1d(v, inverse: bool = False) -> np.ndarray:
    """1 - d^2/dx^2 on a periodic sample array (or its inverse)."""
    v = _check_1d(v)
    k = 2.0 * np.pi * np.fft.fftfreq(v.size, d=1.0 / v.size)
    sym = 1.0 + k * k
    spec = np.fft.fft(v)
    return np.fft.ifft(spec / sym if inverse else spec * sym).real


def _pad_1d(spec: np.ndarray, p: int) -> np.ndarray:
    n = spec.size
    out = np.zeros(p, dtype=np.complex128)
    s = p // 2 - n // 2
    out[s:s + n] = np.fft.fftshift(spec)
    return np.fft.ifftshift(out)


def _product_1d(f: np.ndarray, g: np.ndarray, pad_factor: int) -> np.ndarray:
    if pad_factor == 1:
        return f * g
    n = f.size
    p = pad_factor * n
    ffine = np.fft.ifft(_pad_1d(np.fft.fft(f) / n, p) * p).real
    gfine = np.fft.ifft(_pad_1d(np.fft.fft(g) / n, p) * p).real
    spec = np.fft.fft(ffine * gfine) / p
    s = p // 2 - n // 2
    kept = np.fft.ifftshift(np.fft.fftshift(spec)[s:s + n])
    return np.fft.ifft(kept * n).real


def rhs_1d_b(g, b, pad_factor: int = DEFAULT_PAD_FACTOR) -> np.ndarray:
    """du/dt for the 1D family m_t = -(m_x u + b u_x m), m = u - u_xx."""
    b = validate_b(b)
    g = _check_1d(g)
    m = helmholtz_1d(g)
    m_t = -(_product_1d(_dx_1d(m), g, pad_factor) + b * _product_1d(_dx_1d(g), m, pad_factor))
    return helmholtz_1d(m_t, inverse=True)


def integrate_1d(g0, b, t_end: float, dt: float, pad_factor: int = DEFAULT_PAD_FACTOR) -> np.ndarray:
    """RK4 trajectory of the 1D family; returns the final sample array."""
    b = validate_b(b)
    g = _check_1d(g0)
    for _ in range(_step_count(t_end, dt)):
        k1 = rhs_1d_b(g, b, pad_factor)
        k2 = rhs_1d_b(g + 0.5 * dt * k1, b, pad_factor)
        k3 = rhs_1d_b(g + 0.5 * dt * k2, b, pad_factor)
        k4 = rhs_1d_b(g + dt * k3, b, pad_factor)
        g = g + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return g


def mch2_rhs(v, rho, pad_factor: int = DEFAULT_PAD_FACTOR) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side (q_t, rho_t) of the two-component system

        q_t + v q_x + 2 q v_x + rho * (1 - dxx)^{-1} rho_x = 0,
        rho_t + (rho v)_x = 0,          q = v - v_xx.

    The divergence (rho v)_x is expanded by the product rule so each factor
    is dealiased before differentiation, mirroring the planar computation.
    """
    v = _check_1d(v)
    rho = _check_1d(rho)
    if v.size != rho.size:
        raise ValueError("v and rho must share one grid")
    q = helmholtz_1d(v)
    q_t = -(
        _product_1d(v, _dx_1d(q), pad_factor)
        + 2.0 * _product_1d(q, _dx_1d(v), pad_factor)
        + _product_1d(rho, helmholtz_1d(_dx_1d(rho), inverse=True), pad_factor)
    )
    rho_t = -(_product_1d(_dx_1d(rho), v, pad_factor) + _product_1d(rho, _dx_1d(v), pad_factor))
    return q_t, rho_t
