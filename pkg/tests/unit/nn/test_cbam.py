"""Unit tests for channel and temporal attention."""

import numpy as np
import pytest

from src.core.errors import ContractViolation
from src.core.gradcheck import grad_check
from src.core.tensor import Tensor, reduce
from src.nn.cbam import CBAM, ChannelAttention, SpatialAttention, cbam_forward
from tests.seeds import across_seeds


def zero_weights(module) -> None:
    for name, p in module.named_parameters():
        p.data[...] = 0.0


class TestChannelAttention:
    """Channel mask Mc."""

    def test_zero_mlp_gives_half(self, rng):
        """Test zero MLP weights give Mc = 0.5 everywhere."""
        cam = ChannelAttention(16, 4, dtype=np.float64)
        zero_weights(cam)
        mask = cam(Tensor(rng.standard_normal((2, 16, 5))))
        assert mask.shape == (2, 16, 1)
        np.testing.assert_array_equal(mask.data, 0.5)

    def test_length_permutation_invariance(self, rng):
        """Test permuting the length axis leaves Mc unchanged."""
        cam = ChannelAttention(8, 2, rng=rng, dtype=np.float64)
        x = rng.standard_normal((2, 8, 11))
        permuted = x[:, :, rng.permutation(11)]
        np.testing.assert_allclose(cam(Tensor(x)).data, cam(Tensor(permuted)).data, atol=1e-12)

    def test_hidden_width_is_clamped(self):
        """Test channels // r is clamped to at least one."""
        assert ChannelAttention(8, 16).hidden == 1

    def test_channel_mismatch(self, rng):
        """Test that the wrong channel count raises."""
        with pytest.raises(ContractViolation):
            ChannelAttention(8)(Tensor(rng.standard_normal((1, 4, 3))))


class TestSpatialAttention:
    """Temporal mask Ms."""

    def test_zero_conv_gives_half(self, rng):
        """Test zero conv weights give Ms = 0.5."""
        sam = SpatialAttention(dtype=np.float64)
        zero_weights(sam)
        np.testing.assert_array_equal(sam(Tensor(rng.standard_normal((2, 3, 9)))).data, 0.5)

    @pytest.mark.parametrize("channels", [1, 5, 32])
    def test_shape(self, rng, channels):
        """Test output B×1×L for any channel count."""
        assert SpatialAttention(rng=rng)(Tensor(rng.standard_normal((2, channels, 12)))).shape == (2, 1, 12)

    def test_constant_input_constant_interior(self, rng):
        """Test constant input gives constant Ms away from the padding halo."""
        sam = SpatialAttention(rng=rng, dtype=np.float64)
        mask = sam(Tensor(np.full((1, 4, 20), 1.5))).data[0, 0]
        np.testing.assert_allclose(mask[3:-3], mask[3], atol=1e-12)

    def test_reflection_equivariance_with_symmetric_kernel(self, rng):
        """Test reversing the length axis reverses Ms when the kernel is symmetric."""
        sam = SpatialAttention(rng=rng, dtype=np.float64)
        w = sam.conv.weight.data
        w[...] = 0.5 * (w + w[:, :, ::-1])
        x = rng.standard_normal((1, 3, 15))
        forward = sam(Tensor(x)).data
        reflected = sam(Tensor(x[:, :, ::-1].copy())).data
        np.testing.assert_allclose(reflected, forward[:, :, ::-1], atol=1e-12)

    def test_even_kernel_rejected(self):
        """Test an even kernel is rejected."""
        with pytest.raises(ContractViolation):
            SpatialAttention(6)


class TestCbam:
    """Composed attention."""

    def test_zero_logits_quarter_scale(self, rng):
        """Test all-zero attention weights scale the input by 0.25."""
        module = CBAM(8, 4, dtype=np.float64)
        zero_weights(module)
        x = rng.standard_normal((2, 8, 6))
        np.testing.assert_allclose(module(Tensor(x)).data, 0.25 * x)

    def test_zero_input(self, rng):
        """Test x = 0 gives 0."""
        module = CBAM(8, 4, rng=rng)
        assert not np.any(module(Tensor(np.zeros((1, 8, 6)))).data)

    @pytest.mark.parametrize("shape", [(1, 4, 3), (3, 16, 10), (2, 64, 7)])
    def test_shape_preserved(self, rng, shape):
        """Test output shape equals input shape."""
        module = CBAM(shape[1], rng=rng)
        assert module(Tensor(rng.standard_normal(shape))).shape == shape

    def test_masks_strictly_between_zero_and_one(self, rng):
        """Test every attention weight lies in (0, 1)."""
        module = CBAM(16, 4, rng=rng, dtype=np.float64)
        x = Tensor(rng.standard_normal((2, 16, 9)))
        mc = module.channel_attention(x).data
        ms = module.spatial_attention(x).data
        assert np.all((mc > 0) & (mc < 1)) and np.all((ms > 0) & (ms < 1))

    @across_seeds
    def test_gradient_check(self, rng):
        """Test full gradient check at 1e-4."""
        module = CBAM(8, 2, rng=rng, dtype=np.float64)
        x = Tensor(rng.standard_normal((2, 8, 9)))
        weights = Tensor(rng.standard_normal((2, 8, 9)))
        report = grad_check(
            lambda: reduce("sum", cbam_forward(module.channel_attention, module.spatial_attention, x) * weights),
            dict(module.named_parameters()),
        )
        assert report.passed, report.max_relative_error
