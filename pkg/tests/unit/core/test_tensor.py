"""Unit tests for the tape-based tensor engine."""

import numpy as np
import pytest

from src.core.errors import ContractViolation
from src.core.gradcheck import grad_check
from src.core.tensor import (
    Tape,
    Tensor,
    backward,
    batchnorm1d,
    concat,
    conv1d,
    conv1d_output_length,
    elementwise,
    matmul,
    maxpool1d,
    reduce,
    relu,
    reshape,
    sigmoid,
    slice_axis,
    transpose,
    zero_grad,
)
from tests.seeds import across_seeds


def param(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


class TestElementwise:
    """Forward values and gradients of the elementwise primitives."""

    def test_add(self):
        """Test add([1,2],[3,4]) = [4,6]."""
        out = elementwise("add", Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
        np.testing.assert_array_equal(out.data, [4.0, 6.0])

    def test_sigmoid_at_zero(self):
        """Test sigmoid(0) = 0.5."""
        assert sigmoid(Tensor([0.0])).item() == 0.5

    def test_relu_backward_uses_zero_subgradient_below_zero(self):
        """Test relu backward at x=[-1,2] gives [0,1]."""
        x = param([-1.0, 2.0])
        with Tape() as tape:
            loss = reduce("sum", relu(x))
            backward(loss, tape)
        np.testing.assert_array_equal(x.grad, [0.0, 1.0])

    def test_scale_needs_factor(self):
        """Test that scale without a factor is rejected."""
        with pytest.raises(ContractViolation):
            elementwise("scale", Tensor([1.0]))

    def test_unknown_op(self):
        """Test that an unknown op name is rejected."""
        with pytest.raises(ContractViolation):
            elementwise("tanh", Tensor([1.0]))

    def test_non_broadcastable_shapes(self):
        """Test that add of [3] and [2] raises a contract violation."""
        with pytest.raises(ContractViolation):
            elementwise("add", Tensor(np.ones(3)), Tensor(np.ones(2)))

    def test_broadcast_gradient_is_summed(self):
        """Test that a broadcast operand receives the upstream gradient summed over broadcast axes."""
        a = param(np.ones((4, 3)))
        b = param(np.ones(3))
        with Tape() as tape:
            loss = reduce("sum", a + b)
            backward(loss, tape)
        np.testing.assert_array_equal(b.grad, [4.0, 4.0, 4.0])
        np.testing.assert_array_equal(a.grad, np.ones((4, 3)))

    def test_ops_outside_tape_do_not_record(self):
        """Test that inference outside a tape leaves outputs without gradient tracking."""
        x = param([1.0, 2.0])
        out = x * x
        assert out.requires_grad is False


class TestMatmulAndReduce:
    """Linear algebra and reductions."""

    def test_identity(self, rng):
        """Test I·x = x."""
        x = Tensor(rng.standard_normal((2, 1)))
        np.testing.assert_array_equal(matmul(Tensor(np.eye(2)), x).data, x.data)

    def test_product(self):
        """Test [[1,2],[3,4]]·[[1],[1]] = [[3],[7]]."""
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        np.testing.assert_array_equal(out.data, [[3.0], [7.0]])

    def test_inner_dimension_mismatch(self):
        """Test that mismatched inner dimensions raise."""
        with pytest.raises(ContractViolation):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    @across_seeds
    def test_matmul_gradient_matches_finite_differences(self, rng):
        """Test d sum(A·B)/dA against central differences within 1e-6."""
        a = param(rng.standard_normal((3, 4)))
        b = Tensor(rng.standard_normal((4, 2)))
        report = grad_check(lambda: reduce("sum", matmul(a, b)), {"a": a}, tolerance=1e-6)
        assert report.passed

    def test_mean(self):
        """Test mean([2,4,6]) = 4."""
        assert reduce("mean", Tensor([2.0, 4.0, 6.0])).item() == 4.0

    def test_sum_over_axis(self):
        """Test sum over axis 1 of [[1,2],[3,4]] = [3,7]."""
        out = reduce("sum", Tensor([[1.0, 2.0], [3.0, 4.0]]), axis=1)
        np.testing.assert_array_equal(out.data, [3.0, 7.0])

    def test_max_backward_routes_to_first_maximum(self):
        """Test max backward of [3,3,1] gives [1,0,0]."""
        x = param([3.0, 3.0, 1.0])
        with Tape() as tape:
            backward(reduce("max", x), tape)
        np.testing.assert_array_equal(x.grad, [1.0, 0.0, 0.0])

    @across_seeds
    def test_elementwise_and_reduction_gradients(self, rng):
        """Test sub, neg, scale, relu and the mean/max/sum reductions against finite differences."""
        a = param(rng.standard_normal((3, 5)))
        b = param(rng.standard_normal((3, 5)))

        def f():
            mixed = elementwise("sub", relu(a), elementwise("neg", b)) * elementwise("scale", a, factor=0.5)
            return reduce("sum", reduce("max", mixed, axis=1)) + reduce("mean", mixed * b)

        assert grad_check(f, {"a": a, "b": b}, tolerance=1e-4).passed

    def test_invalid_axis(self):
        """Test that an out-of-range axis raises."""
        with pytest.raises(ContractViolation):
            reduce("sum", Tensor(np.ones((2, 2))), axis=2)


class TestBackward:
    """Backward pass semantics."""

    def test_sum_gradient_is_ones(self):
        """Test loss = sum(x) gives x.grad = [1,1,1]."""
        x = param([1.0, 2.0, 3.0])
        with Tape() as tape:
            backward(reduce("sum", x), tape)
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_mean_of_squares(self):
        """Test loss = mean(x²) at x=[1,2] gives x.grad = [1,2]."""
        x = param([1.0, 2.0])
        with Tape() as tape:
            backward(reduce("mean", x * x), tape)
        np.testing.assert_allclose(x.grad, [1.0, 2.0])

    def test_fan_out_accumulates(self):
        """Test that a tensor used twice gets the sum of both gradient paths."""
        x = param([2.0])
        with Tape() as tape:
            y = x * 3.0
            backward(reduce("sum", y + y), tape)
        np.testing.assert_allclose(x.grad, [6.0])

    def test_non_scalar_loss(self):
        """Test that backward on a non-scalar raises."""
        x = param([1.0, 2.0])
        with Tape() as tape:
            y = x * 2.0
            with pytest.raises(ContractViolation):
                backward(y, tape)

    def test_repeated_passes_after_zeroing_agree(self, rng):
        """Test that two backward passes after zero_grad produce identical gradients."""
        w = param(rng.standard_normal((3, 3)))
        x = Tensor(rng.standard_normal((2, 3)))

        def run():
            zero_grad([w])
            with Tape() as tape:
                backward(reduce("mean", relu(matmul(x, w))), tape)
            return w.grad.copy()

        np.testing.assert_array_equal(run(), run())

    def test_perturbed_tape_scales_gradients(self):
        """Test that Tape(perturb=...) scales the named primitive's input gradients."""
        x = param([1.0, 2.0])
        with Tape(perturb={"sum": 2.0}) as tape:
            backward(reduce("sum", x), tape)
        np.testing.assert_array_equal(x.grad, [2.0, 2.0])


class TestShapeOps:
    """Reshape, transpose, concat and slicing gradients."""

    @across_seeds
    def test_composite_gradient(self, rng):
        """Test a composite of shape ops and sigmoid against finite differences."""
        a = param(rng.standard_normal((2, 6)))
        b = param(rng.standard_normal((2, 3)))

        def f():
            left = slice_axis(reshape(a, (2, 2, 3)), 1, 0, 1)
            joined = concat([reshape(left, (2, 3)), b], axis=1)
            return reduce("sum", sigmoid(transpose(joined)) * transpose(joined))

        assert grad_check(f, {"a": a, "b": b}, tolerance=1e-4).passed

    def test_slice_out_of_range(self):
        """Test that slicing past the axis end raises."""
        with pytest.raises(ContractViolation):
            slice_axis(Tensor(np.ones((2, 3))), 1, 1, 4)

    def test_bad_reshape(self):
        """Test that an incompatible reshape raises."""
        with pytest.raises(ContractViolation):
            reshape(Tensor(np.ones(6)), (4, 2))


class TestFusedPrimitives:
    """conv1d, maxpool1d and batchnorm1d."""

    def test_output_length_formula(self):
        """Test L_in=200, k=7, stride 2, padding 3 gives 100."""
        assert conv1d_output_length(200, 7, 2, 3, 1) == 100

    def test_conv_is_cross_correlation(self):
        """Test a [1,2] kernel over [1,2,3] gives [5,8]."""
        out = conv1d(Tensor([[[1.0, 2.0, 3.0]]]), Tensor([[[1.0, 2.0]]]))
        np.testing.assert_array_equal(out.data, [[[5.0, 8.0]]])

    @pytest.mark.parametrize("stride,padding,dilation", [(1, 0, 1), (2, 3, 1), (1, 2, 2), (3, 1, 1)])
    @across_seeds
    def test_conv_gradient(self, rng, stride, padding, dilation):
        """Test conv1d gradients for input, weight and bias."""
        x = param(rng.standard_normal((2, 3, 11)))
        w = param(rng.standard_normal((4, 3, 3)))
        b = param(rng.standard_normal(4))

        def f():
            out = conv1d(x, w, b, stride, padding, dilation)
            return reduce("sum", out * out)

        assert grad_check(f, {"x": x, "w": w, "b": b}, tolerance=1e-4).passed

    def test_conv_collapsed_output(self):
        """Test that an output length below 1 raises."""
        with pytest.raises(ContractViolation):
            conv1d(Tensor(np.ones((1, 1, 2))), Tensor(np.ones((1, 1, 5))))

    @across_seeds
    def test_maxpool_values_and_gradient(self, rng):
        """Test k3 s2 p1 pooling values and gradient."""
        x = param(rng.standard_normal((2, 3, 9)))
        out = maxpool1d(x, 3, 2, 1)
        assert out.shape == (2, 3, 5)
        assert out.data[0, 0, 0] == max(x.data[0, 0, 0], x.data[0, 0, 1])
        assert grad_check(lambda: reduce("sum", maxpool1d(x, 3, 2, 1) * maxpool1d(x, 3, 2, 1)), {"x": x}).passed

    @pytest.mark.parametrize("training", [True, False])
    @across_seeds
    def test_batchnorm_gradient(self, rng, training):
        """Test batchnorm1d gradients in both modes."""
        x = param(rng.standard_normal((3, 2, 5)))
        gamma = param(rng.standard_normal(2))
        beta = param(rng.standard_normal(2))
        weights = Tensor(rng.standard_normal((3, 2, 5)))

        def f():
            mean, var = np.zeros(2), np.ones(2)
            return reduce("sum", batchnorm1d(x, gamma, beta, mean, var, training) * weights)

        assert grad_check(f, {"x": x, "gamma": gamma, "beta": beta}, tolerance=1e-4).passed

    def test_batchnorm_updates_running_stats(self, rng):
        """Test momentum 0.1 update with unbiased variance."""
        x = Tensor(rng.standard_normal((4, 1, 10)) * 2.0 + 3.0)
        mean, var = np.zeros(1), np.ones(1)
        batchnorm1d(x, Tensor(np.ones(1)), Tensor(np.zeros(1)), mean, var, training=True)
        np.testing.assert_allclose(mean, 0.1 * x.data.mean())
        np.testing.assert_allclose(var, 0.9 + 0.1 * x.data.var(ddof=1))
