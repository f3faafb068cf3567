import numpy as np
import pytest

from riemannian_graph_ode import autograd as ag
from riemannian_graph_ode.autograd import Tensor


def numeric_grad(fn, x, h=1e-6):
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    for k in range(x.size):
        up, down = x.copy().reshape(-1), x.copy().reshape(-1)
        up[k] += h
        down[k] -= h
        flat[k] = (fn(up.reshape(x.shape)) - fn(down.reshape(x.shape))) / (2 * h)
    return grad


def check_unary(fn, x, tol=1e-6):
    leaf = Tensor(x, requires_grad=True)
    out = ag.reduce_sum(fn(leaf))
    out.backward()
    expected = numeric_grad(lambda v: float(np.sum(fn(v))), x)
    np.testing.assert_allclose(leaf.grad, expected, rtol=tol, atol=tol)


class TestPrimitives:
    def setup_method(self):
        self.x = np.array([[0.3, -0.2, 0.1], [0.05, 0.4, -0.35]])

    def test_elementwise_primitives(self):
        for fn in (ag.tanh, ag.sigmoid, ag.exp, ag.sin, ag.cos, ag.tan, ag.arctan, ag.arctanh):
            check_unary(fn, self.x)

    def test_sqrt_and_log(self):
        positive = np.abs(self.x) + 0.5
        check_unary(ag.sqrt, positive)
        check_unary(ag.log, positive)

    def test_arithmetic(self):
        other = np.array([0.7, -1.3, 2.0])
        check_unary(lambda v: (v * other + 1.0) / (2.0 - v), self.x)
        check_unary(lambda v: v ** 3 - v ** 2, self.x)

    def test_matmul_both_sides(self):
        w = np.array([[0.5, -1.0], [0.25, 0.75], [1.5, 0.1]])
        check_unary(lambda v: ag.matmul(v, w), self.x)
        check_unary(lambda v: ag.matmul(w.T, ag.tanh(v).T), self.x)

    def test_matmul_vector(self):
        v = np.array([0.2, -0.4, 0.6])
        check_unary(lambda m: ag.matmul(m, v), self.x)

    def test_norm_has_zero_subgradient_at_origin(self):
        leaf = Tensor(np.zeros((1, 3)), requires_grad=True)
        ag.reduce_sum(ag.norm(leaf)).backward()
        np.testing.assert_array_equal(leaf.grad, np.zeros((1, 3)))

    def test_norm_gradient(self):
        check_unary(lambda v: ag.norm(v), self.x)

    def test_gather_and_scatter(self):
        index = np.array([0, 1, 0, 2])
        check_unary(lambda v: v[:, index] * np.arange(4.0), self.x)
        check_unary(lambda v: ag.scatter_add(v.reshape(-1),
                                             np.array([0, 1, 1, 2, 0, 2]), 3) ** 2, self.x)

    def test_concat_and_stack(self):
        check_unary(lambda v: ag.concat([v, 2.0 * v], axis=-1) ** 2, self.x)
        check_unary(lambda v: ag.stack([v, ag.tanh(v)], axis=1) ** 2, self.x)

    def test_softmax_rows_sum_to_one(self):
        out = ag.softmax(Tensor(self.x), axis=-1)
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0)
        weights = np.array([[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]])
        check_unary(lambda v: ag.softmax(v, axis=-1) * weights, self.x)

    def test_masked_softmax_empty_row(self):
        mask = np.array([[True, False, True], [False, False, False]])
        out = ag.masked_softmax(self.x, mask)
        np.testing.assert_allclose(out[0].sum(), 1.0)
        assert out[0, 1] == 0.0
        np.testing.assert_array_equal(out[1], np.zeros(3))

    def test_where_and_clip(self):
        mask = self.x > 0
        check_unary(lambda v: ag.where(mask, v * 3.0, v), self.x)
        check_unary(lambda v: ag.clip(v, -0.25, 0.25), self.x)


class TestTensorGraph:
    def test_reused_node_accumulates(self):
        leaf = Tensor(np.array(2.0), requires_grad=True)
        y = leaf * leaf + leaf
        y.backward()
        assert float(leaf.grad) == pytest.approx(5.0)

    def test_constants_do_not_track(self):
        a = Tensor(np.ones(3))
        b = a * 2.0
        assert not b.requires_grad
        assert b._prev == ()

    def test_broadcast_gradient_is_reduced(self):
        bias = Tensor(np.zeros(3), requires_grad=True)
        out = ag.reduce_sum(Tensor(np.ones((4, 3))) + bias)
        out.backward()
        np.testing.assert_array_equal(bias.grad, np.full(3, 4.0))

    def test_numpy_left_operand_defers_to_tensor(self):
        leaf = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        out = np.array([3.0, 4.0]) * leaf
        assert isinstance(out, Tensor)
        ag.reduce_sum(out).backward()
        np.testing.assert_array_equal(leaf.grad, [3.0, 4.0])

    def test_zero_grad_clears(self):
        leaf = Tensor(np.array(3.0), requires_grad=True)
        (leaf * leaf).backward()
        assert float(leaf.grad) == pytest.approx(6.0)
        leaf.zero_grad()
        assert leaf.grad is None

    def test_detach_and_value(self):
        leaf = Tensor(np.array([1.0]), requires_grad=True)
        assert not leaf.detach().requires_grad
        np.testing.assert_array_equal(ag.value(leaf), [1.0])
        np.testing.assert_array_equal(ag.value(np.array([1.0])), [1.0])

    def test_deep_chain_does_not_recurse(self):
        leaf = Tensor(np.array(1.0), requires_grad=True)
        out = leaf
        for _ in range(5000):
            out = out * 1.0
        out.backward()
        assert float(leaf.grad) == pytest.approx(1.0)
