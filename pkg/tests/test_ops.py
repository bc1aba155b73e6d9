import numpy as np
import pytest

from litevsr import ops
from litevsr.errors import NumericError, ShapeError
from litevsr.ops import ConvDescriptor
from litevsr.tensor import Tensor


def causal1d(k, dilation=1, channels=1):
    return ConvDescriptor((k,), channels, channels, dilation=(dilation,), padding_mode="causal-left")


class TestConv:
    def test_identity_tap(self):
        # newest-tap-only kernel reproduces the input
        x = Tensor(np.array([[[2.0, -1.0, 5.0, 0.5]]]))
        w = Tensor(np.array([[[0.0, 0.0, 1.0]]]))
        y = ops.conv(x, w, causal1d(3))
        assert np.allclose(y.data, x.data)

    def test_causal_k2_hand_sum(self):
        # frozen from the running sum x[t-1] + x[t]
        x = Tensor(np.array([[[1.0, 2.0, 3.0]]]))
        w = Tensor(np.array([[[1.0, 1.0]]]))
        y = ops.conv(x, w, causal1d(2))
        assert np.allclose(y.data, [[[1.0, 3.0, 5.0]]])

    def test_pointwise_identity_channels(self):
        x = Tensor(np.random.default_rng(0).standard_normal((2, 3, 4, 4)))
        w = Tensor(np.eye(3).reshape(3, 3, 1, 1))
        y = ops.conv(x, w, ConvDescriptor((1, 1), 3, 3))
        assert np.allclose(y.data, x.data)

    def test_channel_mismatch_raises(self):
        x = Tensor(np.ones((1, 2, 5)))
        w = Tensor(np.ones((1, 1, 3)))
        with pytest.raises(ShapeError, match="channels"):
            ops.conv(x, w, causal1d(3))

    def test_zero_spatial_dim_raises(self):
        x = Tensor(np.ones((1, 1, 3, 0)))
        w = Tensor(np.ones((1, 1, 1, 1)))
        with pytest.raises(ShapeError, match="zero-size"):
            ops.conv(x, w, ConvDescriptor((1, 1), 1, 1))

    def test_causal_only_1d(self):
        with pytest.raises(ShapeError, match="causal"):
            ConvDescriptor((3, 3), 1, 1, padding_mode="causal-left")

    def test_groups_divide_channels(self):
        with pytest.raises(ShapeError, match="groups"):
            ConvDescriptor((3,), 3, 4, groups=2)

    def test_causality_of_causal_stack(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 2, 12)).astype(np.float32)
        w1 = Tensor(rng.standard_normal((2, 2, 3)), dtype=np.float32)
        w2 = Tensor(rng.standard_normal((2, 2, 3)), dtype=np.float32)
        desc = ConvDescriptor((3,), 2, 2, dilation=(2,), padding_mode="causal-left")

        def run(arr):
            return ops.conv(ops.conv(Tensor(arr), w1, desc), w2, desc).data

        base = run(x)
        tprime = 7
        bumped = x.copy()
        bumped[:, :, tprime] += 10.0
        out = run(bumped)
        assert np.array_equal(base[:, :, :tprime], out[:, :, :tprime])
        assert not np.array_equal(base[:, :, tprime:], out[:, :, tprime:])

    def test_stride1_doubling_quadruples_output(self):
        w = Tensor(np.ones((4, 3, 3, 3)))
        desc = ConvDescriptor((3, 3), 3, 4)
        y1 = ops.conv(Tensor(np.ones((1, 3, 6, 6))), w, desc)
        y2 = ops.conv(Tensor(np.ones((1, 3, 12, 12))), w, desc)
        assert y2.size == 4 * y1.size


class TestBatchNorm:
    def _state(self, c, dtype=np.float32):
        gamma = Tensor(np.ones(c), requires_grad=True, dtype=dtype)
        beta = Tensor(np.zeros(c), requires_grad=True, dtype=dtype)
        return gamma, beta, np.zeros(c, dtype=dtype), np.ones(c, dtype=dtype)

    def test_eval_identity_state(self):
        g, b, rm, rv = self._state(3)
        x = Tensor(np.random.default_rng(0).standard_normal((2, 3, 5)))
        y = ops.batch_norm(x, g, b, rm, rv, training=False)
        assert np.allclose(y.data, x.data, atol=1e-4)

    def test_train_normalizes_batch(self):
        g, b, rm, rv = self._state(4)
        x = Tensor(np.random.default_rng(1).standard_normal((8, 4, 6)) * 3 + 1)
        y = ops.batch_norm(x, g, b, rm, rv, training=True)
        means = y.data.mean(axis=(0, 2))
        assert np.abs(means).max() < 1e-4

    def test_train_constant_input_gives_zero(self):
        g, b, rm, rv = self._state(2)
        x = Tensor(np.full((4, 2, 3), 7.0))
        y = ops.batch_norm(x, g, b, rm, rv, training=True)
        assert np.abs(y.data).max() < 1e-2

    def test_channel_mismatch(self):
        g, b, rm, rv = self._state(3)
        with pytest.raises(ShapeError):
            ops.batch_norm(Tensor(np.ones((2, 4, 5))), g, b, rm, rv, training=True)

    def test_single_value_per_channel_train_raises(self):
        g, b, rm, rv = self._state(3)
        with pytest.raises(NumericError):
            ops.batch_norm(Tensor(np.ones((1, 3, 1))), g, b, rm, rv, training=True)

    def test_running_stats_updated_with_momentum(self):
        g, b, rm, rv = self._state(1)
        x = Tensor(np.array([[[0.0, 2.0]], [[4.0, 6.0]]]))  # mean 3, var 5
        ops.batch_norm(x, g, b, rm, rv, training=True, momentum=0.1)
        assert rm[0] == pytest.approx(0.3, rel=1e-5)
        assert rv[0] == pytest.approx(0.9 + 0.1 * 5.0 * 4 / 3, rel=1e-5)


class TestActivations:
    def test_relu_values(self):
        y = ops.relu(Tensor(np.array([-1.0, 2.0])))
        assert np.array_equal(y.data, np.array([0.0, 2.0], dtype=np.float32))

    def test_sigmoid_at_zero(self):
        assert ops.sigmoid(Tensor(np.array(0.0))).item() == pytest.approx(0.5)

    def test_sigmoid_open_interval_even_when_saturated(self):
        y = ops.sigmoid(Tensor(np.array([-200.0, 200.0])))
        assert 0.0 < y.data[0] and y.data[1] < 1.0

    def test_softmax_uniform_on_equal_inputs(self):
        y = ops.softmax(Tensor(np.array([[3.0, 3.0, 3.0]])), axis=1)
        assert np.allclose(y.data, 1.0 / 3.0)

    def test_softmax_rows_sum_to_one(self):
        x = Tensor(np.random.default_rng(0).standard_normal((5, 7)) * 20)
        s = ops.softmax(x, axis=1).data.sum(axis=1)
        assert np.abs(s - 1.0).max() < 1e-6


class TestPooling:
    def test_avg_pool_mean(self):
        x = Tensor(np.array([[[[1.0, 3.0], [5.0, 7.0]]]]))
        y = ops.avg_pool(x, (2, 2), (2, 2))
        assert y.data.reshape(-1)[0] == pytest.approx(4.0)

    def test_avg_pool_window_too_large(self):
        with pytest.raises(ShapeError):
            ops.avg_pool(Tensor(np.ones((1, 1, 2, 2))), (3, 3), (1, 1))

    def test_upsample_nearest_replicates(self):
        x = Tensor(np.full((1, 1, 1, 1), 2.5))
        y = ops.upsample_nearest(x, (2, 2))
        assert np.all(y.data == np.float32(2.5)) and y.shape == (1, 1, 2, 2)

    def test_upsample_shrink_rejected(self):
        with pytest.raises(ShapeError):
            ops.upsample_nearest(Tensor(np.ones((1, 1, 4, 4))), (2, 2))

    def test_global_avg_pool_constant(self):
        x = Tensor(np.full((2, 3, 4, 5), 1.5))
        y = ops.global_avg_pool_spatial(x)
        assert y.shape == (2, 3)
        assert np.allclose(y.data, 1.5)

    def test_max_pool_matches_naive(self, rng):
        x = rng.standard_normal((2, 3, 7, 6)).astype(np.float32)
        y = ops.max_pool2d(Tensor(x), (3, 3), (2, 2), 1).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), constant_values=-np.inf)
        for n in range(2):
            for c in range(3):
                for i in range(y.shape[2]):
                    for j in range(y.shape[3]):
                        ref = xp[n, c, 2 * i:2 * i + 3, 2 * j:2 * j + 3].max()
                        assert y[n, c, i, j] == ref


class TestChannelOps:
    def test_split_sizes_512_ratio_075(self):
        x = Tensor(np.ones((1, 512, 4)))
        a, b = ops.split_channels(x, 0.75)
        assert a.shape[1] == 384 and b.shape[1] == 128

    def test_split_concat_roundtrip(self, rng):
        x = rng.standard_normal((2, 10, 3)).astype(np.float32)
        for ratio in (0.2, 0.5, 0.75, 1.0):
            a, b = ops.split_channels(Tensor(x), ratio)
            back = ops.concat_channels(a, b)
            assert np.array_equal(back.data, x)

    def test_split_empty_part_rejected(self):
        with pytest.raises(ShapeError):
            ops.split_channels(Tensor(np.ones((1, 4, 2))), 0.1)
        with pytest.raises(ShapeError):
            ops.split_channels(Tensor(np.ones((1, 4, 2))), 1.5)
        with pytest.raises(ShapeError):
            ops.split_channels(Tensor(np.ones((1, 4, 2))), 0.0)

    def test_shuffle_groups2_order(self):
        # frozen from the permutation c -> (c mod g) * (C/g) + c // g
        x = Tensor(np.arange(6.0).reshape(1, 6, 1))
        y = ops.channel_shuffle(x, 2)
        assert list(y.data[0, :, 0]) == [0.0, 3.0, 1.0, 4.0, 2.0, 5.0]

    def test_shuffle_requires_divisibility(self):
        with pytest.raises(ShapeError):
            ops.channel_shuffle(Tensor(np.ones((1, 5, 2))), 2)

    def test_shuffle_is_bijection(self, rng):
        x = rng.standard_normal((2, 12, 3)).astype(np.float32)
        y = ops.channel_shuffle(Tensor(x), 4).data
        for n in range(2):
            for t in range(3):
                assert sorted(x[n, :, t]) == sorted(y[n, :, t])


class TestLinearAndLoss:
    def test_linear_identity(self):
        x = Tensor(np.random.default_rng(0).standard_normal((3, 4)))
        w = Tensor(np.eye(4))
        b = Tensor(np.zeros(4))
        y = ops.linear(x, w, b)
        assert np.allclose(y.data, x.data)

    def test_uniform_logits_loss_is_log_k(self):
        for k in (2, 5, 10):
            logits = Tensor(np.zeros((4, k)))
            loss = ops.cross_entropy(logits, np.zeros(4, dtype=np.int64))
            assert loss.item() == pytest.approx(np.log(k), rel=1e-5)

    def test_soft_targets_mix_linearly(self, rng):
        logits_arr = rng.standard_normal((1, 2)).astype(np.float32)
        soft = np.array([[0.7, 0.3]], dtype=np.float32)
        mixed = ops.cross_entropy(Tensor(logits_arr), soft).item()
        l0 = ops.cross_entropy(Tensor(logits_arr), np.array([0])).item()
        l1 = ops.cross_entropy(Tensor(logits_arr), np.array([1])).item()
        assert mixed == pytest.approx(0.7 * l0 + 0.3 * l1, rel=1e-5)

    def test_k_mismatch(self):
        with pytest.raises(ShapeError):
            ops.cross_entropy(Tensor(np.zeros((2, 3))), np.zeros((2, 4), dtype=np.float32))
