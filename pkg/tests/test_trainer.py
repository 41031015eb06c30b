import numpy as np
import pytest

from fewintent.corpus import split_dev
from fewintent.encoder import UNK_ID, build_vocab, init_params
from fewintent.errors import CheckpointError, DataError, NumericError
from fewintent.evaluator import generate_synthetic
from fewintent.trainer import (
    TrainConfig,
    _Adam,
    _Sgd,
    load_checkpoint,
    save_checkpoint,
    train,
)

from conftest import make_dataset


def small_cfg(**kw):
    base = dict(
        k=2, epochs=2, seed=0, d_emb=12, d_hidden=12, d_out=12,
        batch_size=4, shuffles_per_sequence=2,
    )
    base.update(kw)
    return TrainConfig(**base)


def params_equal(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))


class TestTrain:
    def test_bit_identical_given_seed(self):
        data = make_dataset(n_intents=4, per_intent=3)
        p1, r1, v1 = train(data, None, small_cfg())
        p2, r2, v2 = train(data, None, small_cfg())
        assert params_equal(p1, p2)
        assert r1.epoch_losses == r2.epoch_losses
        assert v1.tokens == v2.tokens

    def test_different_seed_differs(self):
        data = make_dataset(n_intents=4, per_intent=3)
        p1, _, _ = train(data, None, small_cfg(seed=0))
        p2, _, _ = train(data, None, small_cfg(seed=1))
        assert not params_equal(p1, p2)

    def test_zero_epochs_returns_init_unchanged(self):
        data = make_dataset(n_intents=4, per_intent=2)
        vocab = build_vocab([data])
        init = init_params(len(vocab), 12, 12, 12, seed=7)
        out, report, out_vocab = train(data, None, small_cfg(epochs=0), init=(init, vocab))
        assert params_equal(out, init)
        assert report.best_epoch == -1 and report.epoch_losses == []
        assert out_vocab is vocab

    def test_loss_decreases_on_separable_task(self):
        # 20 intents, 5-shot: final train loss well under a tenth of the first epoch's.
        train_data, _ = generate_synthetic(20, 5, 1, seed=2, test_per_intent=1)
        cfg = TrainConfig(k=20, epochs=3, seed=0, d_emb=32, d_hidden=32, d_out=32)
        _, report, _ = train(train_data, None, cfg)
        assert report.epoch_losses[-1] < 0.1 * report.epoch_losses[0]

    def test_best_epoch_tracks_selection(self):
        data = make_dataset(n_intents=4, per_intent=6)
        tr, dev = split_dev(data, 0.5, seed=0)  # 12 dev examples: enough for selection
        _, report, _ = train(tr, dev, small_cfg(epochs=3))
        assert report.selection == "dev_accuracy"
        assert report.epoch_metrics[report.best_epoch] == max(report.epoch_metrics)

    def test_small_dev_falls_back_to_train_loss(self):
        data = make_dataset(n_intents=4, per_intent=3)
        _, dev = split_dev(data, 0.25, seed=0)  # 3 dev examples: too few
        _, report, _ = train(data, dev, small_cfg())
        assert report.selection == "train_loss"
        assert report.epoch_metrics[report.best_epoch] == min(report.epoch_metrics)

    def test_warm_start_keeps_vocabulary(self):
        pre = make_dataset(n_intents=4, per_intent=2)
        pre_params, _, pre_vocab = train(pre, None, small_cfg(epochs=1))
        fine = make_dataset(n_intents=3, per_intent=2, name="fine")
        _, _, vocab = train(fine, None, small_cfg(epochs=1), init=(pre_params, pre_vocab))
        assert vocab.tokens == pre_vocab.tokens
        assert vocab.id_of("token-nowhere") == UNK_ID

    def test_warm_start_dimension_mismatch(self):
        data = make_dataset(n_intents=3, per_intent=2)
        vocab = build_vocab([data])
        wrong = init_params(len(vocab) + 5, 12, 12, 12)
        with pytest.raises(DataError, match="tokens"):
            train(data, None, small_cfg(), init=(wrong, vocab))

    def test_nan_params_abort(self):
        data = make_dataset(n_intents=3, per_intent=2)
        vocab = build_vocab([data])
        bad = init_params(len(vocab), 12, 12, 12)
        bad.embedding[:] = np.nan
        with pytest.raises(NumericError):
            train(data, None, small_cfg(), init=(bad, vocab))


class TestOptimizers:
    @pytest.mark.parametrize("opt_cls", [_Sgd, _Adam])
    def test_step_changes_iff_gradient_nonzero(self, opt_cls):
        params = init_params(6, 4, 4, 4, seed=0)
        before = params.copy()
        opt = opt_cls(0.1)
        opt.step(params, params.zeros_like())
        assert all(np.array_equal(a, b) for a, b in zip(params.arrays(), before.arrays()))
        grads = params.zeros_like()
        grads.embedding[1, 2] = 1.0
        opt.step(params, grads)
        assert not np.array_equal(params.embedding, before.embedding)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        data = make_dataset(n_intents=3, per_intent=2)
        vocab = build_vocab([data])
        params = init_params(len(vocab), 12, 10, 8, depth=3, seed=5, attention=True)
        path = tmp_path / "m.ckpt"
        save_checkpoint(params, vocab, path)
        loaded, loaded_vocab = load_checkpoint(path)
        assert params_equal(loaded, params)
        assert loaded_vocab.tokens == vocab.tokens
        # Byte-identical when re-serialized.
        save_checkpoint(loaded, loaded_vocab, tmp_path / "m2.ckpt")
        assert (tmp_path / "m.ckpt").read_bytes() == (tmp_path / "m2.ckpt").read_bytes()

    def test_bad_magic(self, tmp_path):
        data = make_dataset(n_intents=3, per_intent=1)
        vocab = build_vocab([data])
        path = tmp_path / "m.ckpt"
        save_checkpoint(init_params(len(vocab), 8, 8, 8), vocab, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        data = make_dataset(n_intents=3, per_intent=1)
        vocab = build_vocab([data])
        path = tmp_path / "m.ckpt"
        save_checkpoint(init_params(len(vocab), 8, 8, 8), vocab, path)
        path.write_bytes(path.read_bytes()[:40])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_corrupted_payload_fails_checksum(self, tmp_path):
        data = make_dataset(n_intents=3, per_intent=1)
        vocab = build_vocab([data])
        path = tmp_path / "m.ckpt"
        save_checkpoint(init_params(len(vocab), 8, 8, 8), vocab, path)
        raw = bytearray(path.read_bytes())
        raw[60] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="checksum"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "nope.ckpt")

    def test_vocab_size_mismatch_on_save(self, tmp_path):
        data = make_dataset(n_intents=3, per_intent=1)
        vocab = build_vocab([data])
        with pytest.raises(CheckpointError):
            save_checkpoint(init_params(len(vocab) + 1, 8, 8, 8), vocab, tmp_path / "m.ckpt")
