import numpy as np
import pytest

from litevsr import ops
from litevsr.blocks import (
    DFCAttention,
    DFCConfig,
    GhostConfig,
    GhostModule,
    GhostV2Module,
    PartialBlockConfig,
    PartialTemporalBlock,
    ShuffleCore,
    TemporalCore,
)
from litevsr.costmodel import CountingConvention, registry_param_count
from litevsr.errors import ShapeError
from litevsr.layers import BatchNorm, Identity, Module
from litevsr.tensor import Tensor


def _bn_identity(bn: BatchNorm):
    bn.running_mean[:] = 0.0
    bn.running_var[:] = 1.0 - bn.eps
    bn.gamma.data[:] = 1.0
    bn.beta.data[:] = 0.0


class TestGhost:
    def test_shape_preserved(self, rng):
        m = GhostModule(GhostConfig(64, 64), rng=rng).eval()
        y = m(Tensor(rng.standard_normal((1, 64, 8, 8)).astype(np.float32)))
        assert y.shape == (1, 64, 8, 8)

    @pytest.mark.parametrize("ratio", [0.25, 0.5, 0.6])
    def test_output_width_and_primary_prefix(self, ratio, rng):
        cfg = GhostConfig(16, 16, ratio=ratio)
        m = GhostModule(cfg, rng=rng).eval()
        x = Tensor(rng.standard_normal((2, 16, 5, 5)).astype(np.float32))
        y = m(x)
        assert y.shape[1] == 16
        primary = m.act1(m.bn1(m.primary(x)))
        assert np.array_equal(y.data[:, :cfg.primary_channels], primary.data)

    def test_param_count_matches_enumeration_oracle(self, rng):
        m = GhostModule(GhostConfig(64, 64), rng=rng)
        analytic = m.param_count(CountingConvention())
        enumerated = registry_param_count(m)
        # independent third count: direct formulas for this configuration
        expected = 64 * 32 + 2 * 32 + 32 * 9 + 2 * 32
        assert analytic == enumerated == expected

    def test_ratio_bounds_validated(self):
        with pytest.raises(ShapeError):
            GhostConfig(8, 8, ratio=1.0)
        with pytest.raises(ShapeError):
            GhostConfig(8, 8, ratio=0.01)

    def test_input_channel_mismatch(self, rng):
        m = GhostModule(GhostConfig(8, 8), rng=rng)
        with pytest.raises(ShapeError):
            m(Tensor(np.ones((1, 4, 6, 6), dtype=np.float32)))

    def test_1d_causal_ghost_is_causal(self, rng):
        m = GhostModule(GhostConfig(4, 4, dimensionality=1, primary_kernel=3,
                                    dilation=2, causal=True), rng=rng).eval()
        x = rng.standard_normal((1, 4, 12)).astype(np.float32)
        base = m(Tensor(x)).data
        bumped = x.copy()
        bumped[..., 8] += 3.0
        out = m(Tensor(bumped)).data
        assert np.array_equal(base[..., :8], out[..., :8])


class TestDFC:
    def test_output_in_open_interval_and_shape(self, rng):
        m = DFCAttention(DFCConfig(8), rng=rng).eval()
        x = Tensor(rng.standard_normal((2, 8, 7, 9)).astype(np.float32))
        y = m(x)
        assert y.shape == x.shape
        assert (y.data > 0).all() and (y.data < 1).all()

    def test_zero_weights_give_half(self, rng):
        m = DFCAttention(DFCConfig(4), rng=rng).eval()
        for conv in (m.pw, m.horizontal, m.vertical):
            conv.weight.data[:] = 0.0
        for bn in (m.bn1, m.bn2, m.bn3):
            _bn_identity(bn)
        y = m(Tensor(rng.standard_normal((1, 4, 6, 6)).astype(np.float32)))
        assert np.allclose(y.data, 0.5)

    def test_small_spatial_rejected(self, rng):
        m = DFCAttention(DFCConfig(4), rng=rng).eval()
        with pytest.raises(ShapeError):
            m(Tensor(np.ones((1, 4, 1, 6), dtype=np.float32)))


class _ConstGate(Module):
    def __init__(self, value):
        super().__init__()
        self.value = value

    def forward(self, x, target_spatial=None):
        return Tensor(np.full((x.shape[0], x.shape[1]) + tuple(target_spatial), self.value,
                              dtype=np.float32))


class TestGhostV2:
    def _module(self, rng):
        return GhostV2Module(GhostConfig(8, 8), rng=rng).eval()

    def test_all_ones_gate_reduces_to_ghost(self, rng):
        m = self._module(rng)
        x = Tensor(rng.standard_normal((1, 8, 6, 6)).astype(np.float32))
        ghost_only = m.ghost(x).data
        m.attention = _ConstGate(1.0)
        assert np.array_equal(m(x).data, ghost_only)

    def test_all_zero_gate_kills_output(self, rng):
        m = self._module(rng)
        m.attention = _ConstGate(0.0)
        y = m(Tensor(rng.standard_normal((1, 8, 6, 6)).astype(np.float32)))
        assert np.all(y.data == 0)

    def test_attention_is_a_contraction(self, rng):
        m = self._module(rng)
        x = Tensor(rng.standard_normal((2, 8, 6, 6)).astype(np.float32))
        ghost_mag = np.abs(m.ghost(x).data)
        out_mag = np.abs(m(x).data)
        assert (out_mag <= ghost_mag + 1e-7).all()


class TestTemporalCore:
    def test_causality(self, rng):
        core = TemporalCore(4, kernel=3, dilation=2, rng=rng).eval()
        x = rng.standard_normal((1, 4, 14)).astype(np.float32)
        base = core(Tensor(x)).data
        bumped = x.copy()
        bumped[..., 9] += 2.0
        assert np.array_equal(base[..., :9], core(Tensor(bumped)).data[..., :9])

    def test_identity_taps_reduce_to_double_activation(self, rng):
        core = TemporalCore(3, kernel=3, dilation=1, dropout=0.0, rng=rng).eval()
        for stage in core.stages:
            if hasattr(stage, "weight"):
                stage.weight.data[:] = 0.0
                for c in range(3):
                    stage.weight.data[c, c, -1] = 1.0
            if isinstance(stage, BatchNorm):
                _bn_identity(stage)
        x = rng.standard_normal((2, 3, 7)).astype(np.float32)
        y = core(Tensor(x)).data
        assert np.allclose(y, np.maximum(np.maximum(x, 0), 0), atol=1e-6)

    @pytest.mark.parametrize("kernel,dilation", [(3, 1), (3, 2), (5, 2)])
    def test_receptive_field_by_perturbation(self, kernel, dilation, rng):
        # derived oracle: two causal convs widen the window to 2*(k-1)*d + 1
        expected_rf = 2 * (kernel - 1) * dilation + 1
        t = expected_rf + 8
        core = TemporalCore(2, kernel, dilation, activation="identity", rng=rng).eval()
        x = rng.standard_normal((1, 2, t)).astype(np.float32)
        base = core(Tensor(x)).data
        t0 = 2
        bumped = x.copy()
        bumped[..., t0] += 1.0
        changed = np.nonzero(np.any(core(Tensor(bumped)).data != base, axis=(0, 1)))[0]
        assert changed.min() == t0
        assert changed.max() - t0 + 1 == expected_rf


class TestShuffleCore:
    def test_dims_preserved(self, rng):
        core = ShuffleCore(6, kernel=3, rng=rng).eval()
        y = core(Tensor(rng.standard_normal((2, 6, 9)).astype(np.float32)))
        assert y.shape == (2, 6, 9)

    def test_depthwise_params_grow_by_branch_channels_per_tap(self, rng):
        # enumeration oracle over two kernel sizes
        branch = 12
        p3 = registry_param_count(ShuffleCore(branch, 3, rng=rng))
        p5 = registry_param_count(ShuffleCore(branch, 5, rng=rng))
        assert p5 - p3 == 2 * branch

    def test_block_output_is_permutation_of_merge(self, rng):
        cfg = PartialBlockConfig(8, ratio=0.75, core="Shuffle", kernel=3)
        block = PartialTemporalBlock(cfg, rng=rng).eval()
        x = Tensor(rng.standard_normal((1, 8, 6)).astype(np.float32))
        x1, x2 = ops.split_channels(x, cfg.ratio)
        merged = ops.add(ops.concat_channels(block.core(x1), x2), x).data
        out = block(x).data
        assert np.array_equal(np.sort(out, axis=1), np.sort(merged, axis=1))
        assert np.array_equal(out, ops.channel_shuffle(Tensor(merged), cfg.shuffle_groups).data)


class TestFasterCore:
    def test_branch_width_512_ratio_075(self):
        cfg = PartialBlockConfig(512, ratio=0.75, core="Faster", kernel=3)
        assert cfg.branch_channels == 384

    def test_shape_preserved(self, rng):
        block = PartialTemporalBlock(PartialBlockConfig(8, core="Faster", kernel=3), rng=rng).eval()
        y = block(Tensor(rng.standard_normal((2, 8, 7)).astype(np.float32)))
        assert y.shape == (2, 8, 7)

    def test_zeroed_conv_identity_mlp_hand_composition(self, rng):
        # derived by hand on a 4-channel toy: zero F and an identity MLP
        # leave concat(0, passthrough) + x
        c = 4
        cfg = PartialBlockConfig(c, ratio=0.5, core="Faster", kernel=3, activation="identity",
                                 mlp_expand=2.0)
        block = PartialTemporalBlock(cfg, rng=rng).eval()
        block.core.conv.weight.data[:] = 0.0
        pw1, bn, _, pw2 = block.mlp
        _bn_identity(bn)
        pw1.weight.data[:] = 0.0
        pw2.weight.data[:] = 0.0
        for i in range(c):
            pw1.weight.data[i, i, 0] = 1.0
            pw2.weight.data[i, i, 0] = 1.0
        x = rng.standard_normal((1, c, 5)).astype(np.float32)
        expected = np.concatenate([np.zeros((1, 2, 5), dtype=np.float32), x[:, 2:]], axis=1) + x
        assert np.allclose(block(Tensor(x)).data, expected, atol=1e-6)


class TestPartialBlock:
    @pytest.mark.parametrize("ratio", [0.25, 0.5, 0.75, 1.0])
    def test_identity_core_doubles_input(self, ratio, rng):
        cfg = PartialBlockConfig(8, ratio=ratio, core="Identity")
        block = PartialTemporalBlock(cfg, rng=rng).eval()
        x = rng.standard_normal((2, 8, 5)).astype(np.float32)
        assert np.array_equal(block(Tensor(x)).data, 2 * x)

    def test_ratio_one_temporal_equals_core_plus_skip(self, rng):
        cfg = PartialBlockConfig(6, ratio=1.0, core="Temporal", kernel=3, dilation=2)
        block = PartialTemporalBlock(cfg, rng=rng).eval()
        x = Tensor(rng.standard_normal((2, 6, 9)).astype(np.float32))
        reference = ops.add(block.core(x), x).data
        assert np.array_equal(block(x).data, reference)

    @pytest.mark.parametrize("core", ["Temporal", "Shuffle", "Faster"])
    @pytest.mark.parametrize("ratio", [0.5, 0.75])
    def test_channels_preserved(self, core, ratio, rng):
        block = PartialTemporalBlock(PartialBlockConfig(8, ratio=ratio, core=core, kernel=3),
                                     rng=rng).eval()
        y = block(Tensor(rng.standard_normal((1, 8, 8)).astype(np.float32)))
        assert y.shape == (1, 8, 8)

    @pytest.mark.parametrize("core", ["Temporal", "Shuffle", "Faster"])
    @pytest.mark.parametrize("dilation", [1, 3])
    def test_strict_causality_all_cores(self, core, dilation, rng):
        block = PartialTemporalBlock(PartialBlockConfig(8, core=core, kernel=3, dilation=dilation),
                                     rng=rng).eval()
        x = rng.standard_normal((1, 8, 16)).astype(np.float32)
        base = block(Tensor(x)).data
        bumped = x.copy()
        bumped[..., 10] += 4.0
        assert np.array_equal(base[..., :10], block(Tensor(bumped)).data[..., :10])

    def test_zeroed_temporal_branch_matches_hand_composition(self, rng):
        cfg = PartialBlockConfig(8, ratio=0.5, core="Temporal", kernel=3)
        block = PartialTemporalBlock(cfg, rng=rng).eval()
        consts = []
        for stage in block.core.stages:
            if hasattr(stage, "weight"):
                stage.weight.data[:] = 0.0
            if isinstance(stage, BatchNorm):
                stage.running_mean[:] = rng.standard_normal(4).astype(np.float32) * 0.1
                stage.running_var[:] = 1.0 + rng.random(4).astype(np.float32)
                consts.append(stage)
        # BN/activation image of a zero input, composed by hand
        bn1, bn2 = consts
        c1 = np.maximum(bn1.gamma.data * (0.0 - bn1.running_mean) / np.sqrt(bn1.running_var + bn1.eps)
                        + bn1.beta.data, 0.0)
        c2 = np.maximum(bn2.gamma.data * (0.0 - bn2.running_mean) / np.sqrt(bn2.running_var + bn2.eps)
                        + bn2.beta.data, 0.0)
        x = rng.standard_normal((1, 8, 5)).astype(np.float32)
        expected = np.concatenate(
            [np.broadcast_to(c2[None, :, None], (1, 4, 5)), x[:, 4:]], axis=1) + x
        assert np.allclose(block(Tensor(x)).data, expected, atol=1e-6)

    def test_empty_branch_rejected(self):
        with pytest.raises(ShapeError):
            PartialBlockConfig(4, ratio=0.1)
