import math

import numpy as np
import pytest

from riemannian_graph_ode import autograd as ag
from riemannian_graph_ode.errors import (
    ChartOverflowError,
    DegenerateAggregationError,
    ManifoldDomainError,
    SingularityError,
)
from riemannian_graph_ode.geometry import LorentzPoint, Stereographic


class TestScalarMaps:
    def test_tan_kappa_values(self):
        assert Stereographic(-1.0).tan_kappa(0.5) == pytest.approx(0.46212, abs=1e-5)
        assert Stereographic(1.0).tan_kappa(0.5) == pytest.approx(math.tan(0.5))
        assert Stereographic(0.0).tan_kappa(0.5) == 0.5

    def test_arctan_inverts_tan(self):
        for kappa in (-2.0, -0.5, 0.5, 2.0):
            manifold = Stereographic(kappa)
            x = np.linspace(0.01, 0.5, 7)
            np.testing.assert_allclose(manifold.arctan_kappa(manifold.tan_kappa(x)), x, atol=1e-12)

    def test_nonfinite_argument_rejected(self):
        with pytest.raises(ManifoldDomainError):
            Stereographic(-1.0).tan_kappa(np.array([np.nan]))

    def test_tiny_kappa_is_flat(self):
        assert Stereographic(1e-13).is_flat
        assert not Stereographic(1e-6).is_flat


class TestPointOperations:
    def setup_method(self):
        self.hyperbolic = Stereographic(-1.0)
        self.x = np.array([0.5, 0.0])

    def test_distance_from_origin(self):
        assert float(self.hyperbolic.distance(np.zeros(2), self.x)) == pytest.approx(1.09861, abs=1e-5)

    def test_log_map_example(self):
        np.testing.assert_allclose(self.hyperbolic.log_map(np.zeros(2), self.x), [0.54931, 0.0], atol=1e-5)

    def test_mobius_scalar_example(self):
        np.testing.assert_allclose(self.hyperbolic.mobius_scalar(2.0, self.x), [0.8, 0.0], atol=1e-12)

    def test_mobius_identity_and_inverse(self):
        rng = np.random.default_rng(0)
        z = self.hyperbolic.random_points(rng, 50, 3)
        zero = np.zeros_like(z)
        np.testing.assert_allclose(self.hyperbolic.mobius_add(z, zero), z, atol=1e-12)
        np.testing.assert_allclose(self.hyperbolic.mobius_add(zero, z), z, atol=1e-12)
        np.testing.assert_allclose(self.hyperbolic.mobius_add(-z, z), zero, atol=1e-12)

    def test_mobius_singularity(self):
        sphere = Stereographic(1.0)
        with pytest.raises(SingularityError):
            sphere.mobius_add(np.array([1.0, 0.0]), np.array([1.0, 0.0]))

    def test_flat_model_is_euclidean(self):
        flat = Stereographic(0.0)
        a, b = np.array([0.3, -1.2]), np.array([2.0, 0.5])
        np.testing.assert_allclose(flat.mobius_add(a, b), a + b)
        assert float(flat.distance(a, b)) == pytest.approx(2.0 * np.linalg.norm(a - b))

    def test_conformal_factor_outside_domain(self):
        with pytest.raises(ManifoldDomainError):
            self.hyperbolic.conformal_factor(np.array([2.0, 0.0]))

    def test_project_to_domain(self):
        pulled = self.hyperbolic.project_to_domain(np.array([[3.0, 4.0], [0.1, 0.0]]))
        assert np.linalg.norm(pulled[0]) == pytest.approx(1.0 - 1e-5)
        np.testing.assert_array_equal(pulled[1], [0.1, 0.0])
        assert np.all(self.hyperbolic.in_domain(pulled))

    def test_pairwise_distance_symmetric(self):
        rng = np.random.default_rng(1)
        z = self.hyperbolic.random_points(rng, 6, 4)
        d = self.hyperbolic.pairwise_distance(z)
        np.testing.assert_allclose(d, d.T, atol=1e-12)
        np.testing.assert_allclose(np.diag(d), 0.0, atol=1e-12)
        assert float(d[0, 1]) == pytest.approx(float(self.hyperbolic.distance(z[0], z[1])))


class TestExponentialMaps:
    @pytest.mark.parametrize("kappa", [-2.0, -1.0, 0.0, 0.5, 1.0])
    def test_round_trip_at_random_base(self, kappa):
        manifold = Stereographic(kappa)
        rng = np.random.default_rng(2)
        x = manifold.random_points(rng, 40, 3, max_fraction=0.5)
        v = 0.2 * rng.standard_normal((40, 3)) / manifold.conformal_factor(x)
        np.testing.assert_allclose(manifold.log_map(x, manifold.exp_map(x, v)), v, atol=1e-8)

    def test_origin_maps(self):
        manifold = Stereographic(-1.0)
        v = np.array([[0.3, -0.4], [0.0, 0.0]])
        np.testing.assert_allclose(manifold.log0(manifold.exp0(v)), v, atol=1e-12)
        np.testing.assert_array_equal(manifold.exp0(np.zeros(2)), np.zeros(2))

    def test_chart_overflow_on_sphere(self):
        with pytest.raises(ChartOverflowError):
            Stereographic(1.0).exp0(np.array([2.0, 0.0]))

    def test_flat_limit_continuity(self):
        flat = Stereographic(0.0)
        x, y = np.array([0.4, -0.3]), np.array([-0.2, 0.5])
        for kappa in (1e-6, -1e-6):
            near = Stereographic(kappa)
            np.testing.assert_allclose(near.mobius_add(x, y), flat.mobius_add(x, y), atol=1e-4)
            np.testing.assert_allclose(near.exp_map(x, y), flat.exp_map(x, y), atol=1e-4)


class TestNeuralOperators:
    def setup_method(self):
        self.manifold = Stereographic(-1.0)
        self.rng = np.random.default_rng(3)
        self.z = self.manifold.random_points(self.rng, 20, 4)

    def test_gyro_transform_identity(self):
        np.testing.assert_allclose(self.manifold.gyro_transform(np.eye(4), self.z), self.z, atol=1e-10)

    def test_gyro_transform_stays_on_manifold(self):
        weight = 3.0 * self.rng.standard_normal((4, 6))
        out = self.manifold.gyro_transform(weight, self.z)
        assert out.shape == (20, 6)
        assert np.all(self.manifold.in_domain(out))
        np.testing.assert_allclose(np.linalg.norm(out, axis=-1), np.linalg.norm(self.z, axis=-1), atol=1e-12)

    def test_gyro_transform_degenerate_row(self):
        out = self.manifold.gyro_transform(np.zeros((4, 4)), self.z)
        np.testing.assert_array_equal(out, np.zeros_like(self.z))

    def test_midpoint_of_identical_points(self):
        stacked = np.repeat(self.z[:, None, :], 3, axis=1)
        weights = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(self.manifold.gyro_midpoint(stacked, weights), self.z, atol=1e-10)

    def test_aggregate_with_one_hot_rows(self):
        np.testing.assert_allclose(self.manifold.aggregate(self.z, np.eye(20)), self.z, atol=1e-10)

    def test_degenerate_midpoint(self):
        sphere = Stereographic(1.0)
        with pytest.raises(DegenerateAggregationError):
            sphere.gyro_midpoint(np.array([[[1.0, 0.0]]]), np.array([1.0]))

    def test_tangent_linear_identity(self):
        np.testing.assert_allclose(self.manifold.tangent_linear(np.eye(4), self.z), self.z, atol=1e-10)


class TestLorentz:
    @pytest.mark.parametrize("kappa", [-2.0, -0.5, 0.5, 2.0])
    def test_unproject_satisfies_model_equation(self, kappa):
        manifold = Stereographic(kappa)
        z = manifold.random_points(np.random.default_rng(4), 100, 5)
        point = manifold.stereo_unproject(z)
        assert np.max(point.residual(kappa)) < 1e-9
        np.testing.assert_allclose(manifold.stereo_project(point), z, atol=1e-10)

    def test_flat_has_no_lorentz_model(self):
        with pytest.raises(ManifoldDomainError):
            Stereographic(0.0).stereo_unproject(np.zeros(2))

    def test_residual_of_known_point(self):
        point = LorentzPoint(time=np.array([[1.0]]), space=np.zeros((1, 2)))
        assert float(point.residual(-1.0)[0]) == pytest.approx(0.0)


class TestDifferentiability:
    def test_squared_distance_gradient(self):
        manifold = Stereographic(-1.0)
        y = ag.Tensor(np.array([0.5, 0.0]), requires_grad=True)
        (manifold.distance(np.zeros(2), y) ** 2).backward()
        d = 2.0 * math.atanh(0.5)
        expected = 2.0 * d * 2.0 / (1.0 - 0.25)
        np.testing.assert_allclose(y.grad, [expected, 0.0], atol=1e-6)
        assert expected == pytest.approx(5.8593, abs=1e-3)

    def test_squared_distance_gradient_at_coincident_points(self):
        manifold = Stereographic(-1.0)
        y = ag.Tensor(np.array([0.2, 0.1]), requires_grad=True)
        (manifold.distance(np.array([0.2, 0.1]), y) ** 2).backward()
        np.testing.assert_allclose(y.grad, [0.0, 0.0], atol=1e-12)
