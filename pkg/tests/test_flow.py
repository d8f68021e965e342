import numpy as np
import pytest
from numpy.testing import assert_allclose

from torusflow.dynamics import hamiltonian, integrate
from torusflow.flow import (
    BodyMomentum,
    DiffeoMap,
    GeodesicState,
    InversionError,
    OrientationError,
    adjoint,
    apply,
    body_momentum,
    body_velocity,
    christoffel_conjugated,
    coadjoint,
    compose,
    compose_field,
    eulerian_velocity,
    exp_map,
    flow_from_velocity,
    geodesic_integrate,
    geodesic_step,
    invert,
    jacobian,
    metric_at,
    trajectory_velocity,
)
from torusflow.dynamics import christoffel
from torusflow.spectral import (
    VectorField,
    h1_inner,
    helmholtz,
    l2_inner,
    make_grid,
    random_bandlimited,
)

from conftest import TWO_PI, sample_scalar, sample_vector


def circular_distance(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(d, 1.0 - d)


def small_map(grid, seed, amplitude=0.02, kmax=2):
    return DiffeoMap(random_bandlimited(grid, seed=seed, kmax=kmax, amplitude=amplitude))


class TestDiffeoMap:
    def test_identity_and_translation(self, grid32):
        assert DiffeoMap.identity(grid32).displacement.sup_norm() == 0.0
        tau = DiffeoMap.translation(grid32, 0.3, -0.1)
        assert tau.displacement.u1.values[3, 5] == pytest.approx(0.3)
        assert tau.displacement.u2.values[0, 0] == pytest.approx(-0.1)

    def test_identity_jacobian(self, grid32):
        j = jacobian(DiffeoMap.identity(grid32))
        assert_allclose(j.d11.values, 1.0)
        assert_allclose(j.d22.values, 1.0)
        assert j.d12.sup_norm() == 0.0
        assert_allclose(j.det().values, 1.0)

    def test_shear_is_volume_preserving(self, grid32):
        d = sample_vector(grid32, lambda x, y: 0.1 * np.sin(TWO_PI * y), lambda x, y: 0.0 * x)
        det = jacobian(DiffeoMap(d)).det()
        assert_allclose(det.values, 1.0, atol=1e-14)

    def test_compressive_determinant(self, grid32):
        d = sample_vector(grid32, lambda x, y: 0.1 * np.sin(TWO_PI * x), lambda x, y: 0.0 * x)
        det = jacobian(DiffeoMap(d)).det()
        X, _ = grid32.mesh
        assert_allclose(det.values, 1.0 + 0.2 * np.pi * np.cos(TWO_PI * X), atol=1e-13)


class TestComposition:
    def test_identity_element(self, grid32):
        phi = small_map(grid32, seed=1)
        ident = DiffeoMap.identity(grid32)
        for comp in (compose(phi, ident), compose(ident, phi)):
            assert (comp.displacement - phi.displacement).sup_norm() < 1e-13

    def test_translations_add(self, grid32):
        a, b = (0.4, 0.7), (0.85, 0.5)
        comp = compose(DiffeoMap.translation(grid32, *a), DiffeoMap.translation(grid32, *b))
        pts = np.array([[0.1, 0.2], [0.9, 0.95]])
        expected = np.mod(pts + np.array(a) + np.array(b), 1.0)
        assert np.max(circular_distance(apply(comp, pts), expected)) < 1e-12

    def test_associative(self, grid32):
        phi = small_map(grid32, seed=2, amplitude=0.01)
        psi = small_map(grid32, seed=3, amplitude=0.01)
        chi = small_map(grid32, seed=4, amplitude=0.01)
        left = compose(compose(phi, psi), chi)
        right = compose(phi, compose(psi, chi))
        assert (left.displacement - right.displacement).sup_norm() < 1e-8

    def test_grid_mismatch(self, grid32, grid64):
        with pytest.raises(ValueError):
            compose(DiffeoMap.identity(grid32), DiffeoMap.identity(grid64))


class TestInvert:
    def test_identity(self, grid32):
        assert invert(DiffeoMap.identity(grid32)).displacement.sup_norm() == 0.0

    def test_translation(self, grid32):
        inv = invert(DiffeoMap.translation(grid32, 0.3, -0.2))
        assert_allclose(inv.displacement.u1.values, -0.3, atol=1e-14)
        assert_allclose(inv.displacement.u2.values, 0.2, atol=1e-14)

    def test_pointwise_round_trip(self, grid32):
        phi = small_map(grid32, seed=5, amplitude=0.01)
        rng = np.random.default_rng(0)
        pts = rng.random((40, 2))
        back = apply(invert(phi), apply(phi, pts))
        assert np.max(circular_distance(back, pts)) < 1e-10

    def test_two_sided_inverse(self, grid32):
        phi = small_map(grid32, seed=6, amplitude=0.01)
        inv = invert(phi)
        assert compose(phi, inv).displacement.sup_norm() < 1e-11
        assert compose(inv, phi).displacement.sup_norm() < 1e-8

    def test_warm_start_converges(self, grid32):
        phi = small_map(grid32, seed=7, amplitude=0.02)
        cold = invert(phi)
        warm = invert(phi, initial=cold.displacement)
        assert (warm.displacement - cold.displacement).sup_norm() < 1e-11

    def test_iteration_budget(self, grid32):
        phi = small_map(grid32, seed=8, amplitude=0.05)
        with pytest.raises(InversionError):
            invert(phi, max_iter=1)

    def test_orientation_violation(self, grid32):
        d = sample_vector(grid32, lambda x, y: 0.5 * np.sin(TWO_PI * x), lambda x, y: 0.0 * x)
        with pytest.raises(OrientationError):
            invert(DiffeoMap(d))


class TestFlowFromVelocity:
    def test_zero_velocity(self, grid32):
        u = VectorField.zero(grid32)
        traj = flow_from_velocity(lambda t: u, t_end=0.01, dt=5e-3)
        assert traj.final.displacement.sup_norm() == 0.0

    def test_constant_velocity_translates(self, grid32):
        c = VectorField.constant(grid32, 0.3, -0.5)
        traj = flow_from_velocity(lambda t: c, t_end=0.1, dt=5e-3)
        assert_allclose(traj.final.displacement.u1.values, 0.03, atol=1e-12)
        assert_allclose(traj.final.displacement.u2.values, -0.05, atol=1e-12)

    def test_label_acceleration_matches_connection(self, grid32):
        u0 = random_bandlimited(grid32, seed=9, kmax=2, amplitude=0.02)
        dt = 1e-3
        euler = integrate(u0, 2.0, t_end=0.05, dt=dt / 2)
        traj = flow_from_velocity(trajectory_velocity(euler), t_end=0.05, dt=dt)
        i = len(traj.maps) // 2
        d_prev, d_mid, d_next = (traj.maps[j].displacement for j in (i - 1, i, i + 1))
        phi_t = (1.0 / (2.0 * dt)) * (d_next - d_prev)
        phi_tt = (1.0 / dt**2) * (d_next - 2.0 * d_mid + d_prev)
        gamma = christoffel_conjugated(traj.maps[i], phi_t, phi_t, 2.0)
        assert (phi_tt - gamma).sup_norm() < 1e-6

    def test_orientation_guard(self, grid32):
        u = sample_vector(grid32, lambda x, y: 0.05 * np.sin(TWO_PI * x), lambda x, y: 0.0 * x)
        with pytest.raises(OrientationError):
            flow_from_velocity(lambda t: u, t_end=0.01, dt=5e-3, det_floor=0.9999)


class TestChristoffelConjugated:
    def test_identity_configuration(self, grid64):
        U = random_bandlimited(grid64, seed=10, kmax=3, amplitude=0.3)
        V = random_bandlimited(grid64, seed=11, kmax=3, amplitude=0.3)
        ident = DiffeoMap.identity(grid64)
        got = christoffel_conjugated(ident, U, V, 2.0)
        assert (got - christoffel(U, V, 2.0)).sup_norm() < 1e-11

    def test_constants_conjugate_to_zero(self, grid32):
        phi = small_map(grid32, seed=12)
        c = VectorField.constant(grid32, 0.4, -0.3)
        assert christoffel_conjugated(phi, c, c, 2.0).sup_norm() < 1e-11

    def test_right_invariance_under_translation(self, grid64):
        phi = small_map(grid64, seed=13)
        tau = DiffeoMap.translation(grid64, 0.3, 0.15)
        U = random_bandlimited(grid64, seed=14, kmax=3, amplitude=0.3)
        V = random_bandlimited(grid64, seed=15, kmax=3, amplitude=0.3)
        left = christoffel_conjugated(compose(phi, tau), compose_field(U, tau), compose_field(V, tau), 2.0)
        right = compose_field(christoffel_conjugated(phi, U, V, 2.0), tau)
        assert (left - right).sup_norm() < 1e-9


class TestGeodesic:
    def test_constant_velocity_geodesic(self, grid32):
        c = VectorField.constant(grid32, 0.25, -0.4)
        traj = geodesic_integrate(c, 2.0, t_end=0.1, dt=5e-3, record_stride=20)
        assert (traj.final.phi_t - c).sup_norm() < 1e-11
        assert_allclose(traj.final.phi.displacement.u1.values, 0.025, atol=1e-10)

    def test_step_advances_time(self, grid32):
        u0 = random_bandlimited(grid32, seed=16, kmax=2, amplitude=0.02)
        state = GeodesicState(0.0, DiffeoMap.identity(grid32), u0)
        assert geodesic_step(state, 1e-3, 2.0).t == pytest.approx(1e-3)

    def test_matches_velocity_form(self, grid32):
        u0 = random_bandlimited(grid32, seed=17, kmax=2, amplitude=0.02)
        t_end, dt = 0.02, 1e-3
        euler_u = integrate(u0, 2.0, t_end, dt).final.u
        geo = geodesic_integrate(u0, 2.0, t_end, dt, record_stride=20)
        assert (eulerian_velocity(geo.final) - euler_u).sup_norm() < 1e-8

    def test_body_momentum_drift_small_b2(self, grid32):
        u0 = random_bandlimited(grid32, seed=18, kmax=2, amplitude=0.02)
        geo = geodesic_integrate(u0, 2.0, t_end=0.02, dt=1e-3, record_stride=5)
        m0_series = [body_momentum(s).m0 for s in geo.states]
        ref = max(m0_series[0].sup_norm(), 1e-14)
        drift = max((m - m0_series[0]).sup_norm() for m in m0_series) / ref
        assert drift < 1e-7

    def test_orientation_guard(self, grid32):
        u0 = sample_vector(grid32, lambda x, y: 0.02 * np.sin(TWO_PI * x), lambda x, y: 0.0 * x)
        with pytest.raises(OrientationError):
            geodesic_integrate(u0, 2.0, t_end=0.005, dt=1e-3, det_floor=0.99999)


class TestExpMap:
    def test_zero_is_identity(self, grid16):
        phi = exp_map(VectorField.zero(grid16), dt=0.05)
        assert phi.displacement.sup_norm() < 1e-13

    def test_constant_is_translation(self, grid16):
        phi = exp_map(VectorField.constant(grid16, 0.2, -0.3), dt=0.05)
        assert_allclose(phi.displacement.u1.values, 0.2, atol=1e-9)
        assert_allclose(phi.displacement.u2.values, -0.3, atol=1e-9)

    def test_scaling_homogeneity(self, grid16):
        u0 = random_bandlimited(grid16, seed=19, kmax=1, amplitude=0.01)
        half_exp = exp_map(0.5 * u0, dt=0.02)
        half_time = geodesic_integrate(u0, 2.0, t_end=0.5, dt=0.01, record_stride=50).final.phi
        assert (half_exp.displacement - half_time.displacement).sup_norm() < 1e-7


class TestAdjointCoadjoint:
    def test_identity_map(self, grid32):
        v = random_bandlimited(grid32, seed=20, kmax=3, amplitude=0.5)
        ident = DiffeoMap.identity(grid32)
        assert (adjoint(ident, v) - v).sup_norm() < 1e-12
        assert (coadjoint(ident, v) - v).sup_norm() < 1e-12

    def test_l2_duality(self, grid64):
        phi = small_map(grid64, seed=21)
        v = random_bandlimited(grid64, seed=22, kmax=3, amplitude=0.5)
        w = random_bandlimited(grid64, seed=23, kmax=3, amplitude=0.5)
        lhs = l2_inner(coadjoint(phi, w), v)
        rhs = l2_inner(w, adjoint(phi, v))
        assert abs(lhs - rhs) < 1e-9

    def test_composition_action(self, grid64):
        phi = small_map(grid64, seed=24, amplitude=0.01)
        psi = small_map(grid64, seed=25, amplitude=0.01)
        v = random_bandlimited(grid64, seed=26, kmax=3, amplitude=0.3)
        lhs = adjoint(phi, adjoint(psi, v))
        rhs = adjoint(compose(phi, psi), v)
        assert (lhs - rhs).sup_norm() < 1e-8


class TestBodyFrame:
    def test_identity_configuration(self, grid32):
        u0 = random_bandlimited(grid32, seed=27, kmax=3, amplitude=0.3)
        state = GeodesicState(0.0, DiffeoMap.identity(grid32), u0)
        assert (body_velocity(state) - u0).sup_norm() < 1e-12
        m0 = body_momentum(state)
        assert isinstance(m0, BodyMomentum)
        assert (m0.m0 - helmholtz(u0)).sup_norm() < 1e-9

    def test_constant_geodesic_frame(self, grid32):
        c = VectorField.constant(grid32, 0.3, 0.1)
        state = geodesic_integrate(c, 2.0, t_end=0.05, dt=5e-3, record_stride=10).final
        assert (body_velocity(state) - c).sup_norm() < 1e-10
        assert (body_momentum(state).m0 - c).sup_norm() < 1e-9

    def test_velocity_is_adjoint_of_body_velocity(self, grid32):
        u0 = random_bandlimited(grid32, seed=28, kmax=2, amplitude=0.02)
        state = geodesic_integrate(u0, 2.0, t_end=0.01, dt=1e-3, record_stride=10).final
        u = eulerian_velocity(state)
        U = body_velocity(state)
        assert (adjoint(state.phi, U) - u).sup_norm() < 1e-9

    def test_singular_jacobian_rejected(self, grid32):
        d = sample_vector(grid32, lambda x, y: 0.5 * np.sin(TWO_PI * x), lambda x, y: 0.0 * x)
        state = GeodesicState(0.0, DiffeoMap(d), VectorField.zero(grid32))
        with pytest.raises(OrientationError):
            body_velocity(state)


class TestMetricAt:
    def test_identity_reduces_to_h1(self, grid32):
        U = random_bandlimited(grid32, seed=29, kmax=3, amplitude=0.5)
        V = random_bandlimited(grid32, seed=30, kmax=3, amplitude=0.5)
        got = metric_at(DiffeoMap.identity(grid32), U, V)
        assert abs(got - h1_inner(U, V)) < 1e-10

    def test_translation_invariance(self, grid32):
        U = random_bandlimited(grid32, seed=31, kmax=3, amplitude=0.5)
        V = random_bandlimited(grid32, seed=32, kmax=3, amplitude=0.5)
        tau = DiffeoMap.translation(grid32, 0.6, 0.25)
        assert abs(metric_at(tau, U, V) - h1_inner(U, V)) < 1e-10

    def test_right_invariance(self, grid64):
        phi = small_map(grid64, seed=33)
        U = random_bandlimited(grid64, seed=34, kmax=3, amplitude=0.3)
        V = random_bandlimited(grid64, seed=35, kmax=3, amplitude=0.3)
        inv = invert(phi)
        direct = h1_inner(compose_field(U, inv), compose_field(V, inv))
        assert abs(metric_at(phi, U, V) - direct) < 1e-8

    def test_geodesic_energy_matches_hamiltonian(self, grid32):
        u0 = random_bandlimited(grid32, seed=36, kmax=2, amplitude=0.02)
        state = geodesic_integrate(u0, 2.0, t_end=0.01, dt=1e-3, record_stride=10).final
        energy = 0.5 * metric_at(state.phi, state.phi_t, state.phi_t)
        assert abs(energy - hamiltonian(u0)) < 1e-9
