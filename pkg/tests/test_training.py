import dataclasses

import numpy as np
import pytest

from litevsr import architectures as arch
from litevsr import ops
from litevsr.checkpoint import apply_state, load_checkpoint
from litevsr.data import SyntheticDatasetSpec, generate_synthetic
from litevsr.errors import ConfigError, NumericError, ShapeError
from litevsr.tensor import Tensor
from litevsr.training import (
    SGD,
    TrainConfig,
    cosine_lr,
    evaluate,
    mixup,
    spatial_augment,
    train,
    variable_length_augment,
)

TINY_DATA = SyntheticDatasetSpec(num_classes=3, samples_per_class=4, val_samples_per_class=2,
                                 frames=6, height=32, width=32, seed=5)
TINY_MODEL = arch.ModelSpec(frontend_variant="ghost", seq_model="partial", partial_core="Faster",
                            num_classes=3, input_spec=arch.InputSpec(frames=6, height=32, width=32))


def tiny_train_cfg(**kw):
    base = dict(epochs=1, batch_size=6, seed=3)
    base.update(kw)
    return TrainConfig(**base)


class TestSchedule:
    def test_cosine_endpoints_and_midpoint(self):
        assert cosine_lr(0, 20, 0.01) == pytest.approx(0.01)
        assert cosine_lr(20, 20, 0.01) == pytest.approx(0.0, abs=1e-12)
        assert cosine_lr(10, 20, 0.01) == pytest.approx(0.005)

    def test_out_of_range_epoch(self):
        with pytest.raises(ConfigError):
            cosine_lr(21, 20, 0.01)


class TestMixup:
    def test_lambda_one_is_identity(self, rng):
        x = rng.standard_normal((4, 1, 3, 8, 8)).astype(np.float32)
        y = np.eye(4, dtype=np.float32)

        class Forced:
            def beta(self, a, b):
                return 1.0

            def permutation(self, n):
                return np.arange(n)[::-1]

        mx, my = mixup(x, y, 0.4, Forced())
        assert np.array_equal(mx, x) and np.array_equal(my, y)

    def test_half_mix_of_constant_clips(self):
        x = np.stack([np.full((1, 2, 2, 2), 4.0, dtype=np.float32),
                      np.full((1, 2, 2, 2), 8.0, dtype=np.float32)])
        y = np.eye(2, dtype=np.float32)

        class Forced:
            def beta(self, a, b):
                return 0.5

            def permutation(self, n):
                return np.array([1, 0])

        mx, my = mixup(x, y, 0.4, Forced())
        assert np.allclose(mx, 6.0)
        assert np.allclose(my, 0.5)

    def test_label_rows_remain_distributions(self, rng):
        x = rng.standard_normal((8, 1, 2, 4, 4)).astype(np.float32)
        y = np.eye(8, dtype=np.float32)
        _, my = mixup(x, y, 0.4, np.random.default_rng(0))
        assert np.allclose(my.sum(axis=1), 1.0, atol=1e-6)

    def test_nonpositive_alpha_rejected(self, rng):
        with pytest.raises(ConfigError):
            mixup(np.zeros((2, 1, 1, 2, 2), dtype=np.float32), np.eye(2, dtype=np.float32),
                  0.0, np.random.default_rng(0))


class TestVariableLength:
    def test_min_keep_one_is_identity(self, rng):
        clip = rng.standard_normal((1, 8, 4, 4)).astype(np.float32)
        out = variable_length_augment(clip, 1.0, np.random.default_rng(0))
        assert np.array_equal(out, clip)

    def test_output_keeps_t_frames(self, rng):
        clip = rng.standard_normal((1, 10, 4, 4)).astype(np.float32)
        for seed in range(20):
            out = variable_length_augment(clip, 0.4, np.random.default_rng(seed))
            assert out.shape == clip.shape
            kept = np.nonzero(np.any(out != 0, axis=(0, 2, 3)))[0]
            assert kept.size >= 4
            assert np.array_equal(kept, np.arange(kept.min(), kept.max() + 1))

    def test_spatial_augment_preserves_shape(self, rng):
        clip = rng.standard_normal((1, 4, 16, 16)).astype(np.float32)
        out = spatial_augment(clip, 4, np.random.default_rng(0))
        assert out.shape == clip.shape


class TestSGD:
    def test_decay_zero_momentum_zero_is_plain_sgd(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        p.grad = np.array([0.5, 0.5], dtype=np.float32)
        SGD([p], momentum=0.0, weight_decay=0.0).step(lr=0.1)
        assert np.allclose(p.data, [0.95, -2.05])

    def test_momentum_accumulates(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = SGD([p], momentum=0.9, weight_decay=0.0)
        p.grad = np.array([1.0], dtype=np.float32)
        opt.step(0.1)   # v=1, p=-0.1
        opt.step(0.1)   # v=1.9, p=-0.29
        assert np.allclose(p.data, [-0.29])

    def test_decoupled_decay_shrinks_weights_without_grad_path(self):
        p = Tensor(np.array([2.0]), requires_grad=True)
        p.grad = np.array([0.0], dtype=np.float32)
        SGD([p], momentum=0.9, weight_decay=0.01).step(lr=0.1)
        assert np.allclose(p.data, [2.0 * (1 - 0.001)])


class TestTrainLoop:
    def test_fixed_seed_bit_identical_runs(self):
        ds = generate_synthetic(TINY_DATA)
        cfg = tiny_train_cfg(epochs=2)
        r1 = train(arch.build_model(TINY_MODEL, dropout=cfg.dropout, seed=cfg.seed), ds, cfg)
        r2 = train(arch.build_model(TINY_MODEL, dropout=cfg.dropout, seed=cfg.seed), ds, cfg)
        assert [r.train_loss for r in r1.rows] == [r.train_loss for r in r2.rows]
        assert r1.log_csv() == r2.log_csv()

    def test_lr_column_matches_cosine(self):
        ds = generate_synthetic(TINY_DATA)
        cfg = tiny_train_cfg(epochs=3)
        res = train(arch.build_model(TINY_MODEL, dropout=0.0, seed=0), ds, cfg)
        for row in res.rows:
            assert row.lr == pytest.approx(cosine_lr(row.epoch, cfg.epochs, cfg.lr_init))

    def test_reference_step_equivalence_without_decay_and_mixup(self, monkeypatch):
        # decay 0 plus mixup forced to lambda=1 reduces to plain
        # momentum-SGD on the cross-entropy; replay one batch by hand
        ds = generate_synthetic(TINY_DATA)
        cfg = tiny_train_cfg(weight_decay=0.0, dropout=0.0, mixup_alpha=0.4,
                             var_len_min_keep=1.0, spatial_jitter=0, epochs=1,
                             batch_size=ds.train_x.shape[0])
        import litevsr.training as tr
        monkeypatch.setattr(tr, "mixup", lambda batch, labels, alpha, rng: (batch, labels))
        monkeypatch.setattr(tr, "variable_length_augment", lambda clip, mk, rng: clip)
        monkeypatch.setattr(tr, "spatial_augment", lambda clip, jitter, rng: clip)

        model = arch.build_model(TINY_MODEL, dropout=0.0, seed=cfg.seed)
        reference = arch.build_model(TINY_MODEL, dropout=0.0, seed=cfg.seed)

        result = train(model, ds, cfg)

        rng = np.random.default_rng((cfg.seed, 0xA0))
        order = rng.permutation(ds.train_x.shape[0])
        xb = ds.train_x[order]
        yb = np.zeros((xb.shape[0], 3), dtype=np.float32)
        yb[np.arange(xb.shape[0]), ds.train_y[order]] = 1.0
        reference.train(True)
        loss = ops.cross_entropy(reference.logits(Tensor(xb)), yb)
        reference.zero_grad()
        loss.backward()
        lr = cosine_lr(0, cfg.epochs, cfg.lr_init)
        for p in reference.parameters():
            if p.grad is not None:
                p.data -= lr * p.grad
        assert result.rows[0].train_loss == pytest.approx(float(loss.data), rel=1e-6)
        for (na, a), (nb, b) in zip(model.named_parameters(), reference.named_parameters()):
            assert na == nb
            np.testing.assert_allclose(a.data, b.data, rtol=1e-5, atol=1e-7)

    def test_best_checkpoint_roundtrip_accuracy(self, tmp_path):
        ds = generate_synthetic(TINY_DATA)
        cfg = tiny_train_cfg(epochs=2)
        model = arch.build_model(TINY_MODEL, dropout=cfg.dropout, seed=cfg.seed)
        res = train(model, ds, cfg, ckpt_path=tmp_path / "best.ckpt")
        fresh = arch.build_model(TINY_MODEL, dropout=cfg.dropout, seed=99)
        apply_state(fresh, load_checkpoint(res.checkpoint_path))
        acc = evaluate(fresh, ds.val_x, ds.val_y)
        assert acc == pytest.approx(res.best_val_acc)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_loss_aborts_with_stage_name(self):
        ds = generate_synthetic(TINY_DATA)
        cfg = tiny_train_cfg(lr_init=1e12, epochs=2, mixup_alpha=0.0)
        model = arch.build_model(TINY_MODEL, dropout=0.0, seed=1)
        with pytest.raises(NumericError, match="first bad stage"):
            train(model, ds, cfg)

    def test_class_count_mismatch_rejected(self):
        ds = generate_synthetic(TINY_DATA)
        wrong = arch.build_model(dataclasses.replace(TINY_MODEL, num_classes=7), seed=0)
        with pytest.raises(ShapeError):
            train(wrong, ds, tiny_train_cfg())


class TestEvaluate:
    def test_empty_dataset_rejected(self):
        model = arch.build_model(TINY_MODEL, seed=0)
        with pytest.raises(ShapeError):
            evaluate(model, np.zeros((0, 1, 6, 32, 32), dtype=np.float32), np.zeros(0, dtype=np.int64))

    def test_uniform_random_model_near_chance(self):
        # with symmetric random logits, accuracy over many samples is ~chance
        spec = SyntheticDatasetSpec(num_classes=10, samples_per_class=30, val_samples_per_class=1,
                                    frames=4, height=8, width=8, seed=2)
        ds = generate_synthetic(spec)
        rng = np.random.default_rng(0)
        labels = ds.train_y
        preds = rng.integers(0, 10, labels.shape[0])
        acc = float((preds == labels).mean())
        sigma = np.sqrt(0.1 * 0.9 / labels.shape[0])
        assert abs(acc - 0.1) < 3 * sigma + 1e-9

    def test_duplicated_dataset_same_accuracy(self):
        ds = generate_synthetic(TINY_DATA)
        model = arch.build_model(TINY_MODEL, seed=0)
        acc1 = evaluate(model, ds.val_x, ds.val_y)
        acc2 = evaluate(model, np.concatenate([ds.val_x, ds.val_x]),
                        np.concatenate([ds.val_y, ds.val_y]))
        assert acc1 == pytest.approx(acc2)
