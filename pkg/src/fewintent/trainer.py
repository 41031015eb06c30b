"""Seeded mini-batch training over candidate-slate plans.

Every epoch rebuilds the augmentation pool (fresh slot shuffles per plan),
steps SGD or Adam on exact batch gradients, and tracks the best epoch by dev
accuracy or training loss. Checkpoints serialize parameters and vocabulary
bit-exactly.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Dataset
from .encoder import (
    ModelParams,
    Vocabulary,
    build_vocab,
    init_params,
    loss_and_param_grads,
    tokenize,
)
from .errors import CheckpointError, DataError, NumericError
from .objective import LossConfig
from .sequencer import SequencePlan, augment_shuffles, build_plans, choose_k, partition_intents


@dataclass
class TrainConfig:
    k: int | None = None  # group size; None picks the padding minimizer over [k_min, k_max]
    k_min: int = 20
    k_max: int = 35
    tau: float = 0.1
    include_placeholders: bool = False
    batch_size: int = 8
    learning_rate: float = 1e-2
    epochs: int = 10
    seed: int = 0
    shuffles_per_sequence: int | None = None  # None means k shuffles per plan
    optimizer: str = "adam"
    selection: str = "dev_accuracy"
    d_emb: int = 64
    d_hidden: int = 64
    d_out: int = 64
    projector_depth: int = 2
    attention: bool = False
    min_count: int = 1

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or self.learning_rate <= 0:
            raise DataError("batch_size/epochs/learning_rate out of range")
        if self.tau <= 0:
            raise DataError(f"temperature must be positive, got {self.tau}")
        if self.k is not None and self.k < 1:
            raise DataError(f"group size must be >= 1, got {self.k}")
        if self.shuffles_per_sequence is not None and self.shuffles_per_sequence < 1:
            raise DataError("shuffles_per_sequence must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise DataError(f"unknown optimizer {self.optimizer!r}")
        if self.selection not in ("dev_accuracy", "train_loss"):
            raise DataError(f"unknown selection rule {self.selection!r}")
        if self.seed < 0:
            raise DataError("seed must be non-negative")

    def loss_config(self) -> LossConfig:
        return LossConfig(self.tau, self.include_placeholders, self.batch_size)


@dataclass
class TrainReport:
    epoch_losses: list[float]
    epoch_metrics: list[float]
    selection: str  # metric actually used: "dev_accuracy" or "train_loss"
    best_epoch: int  # -1 when no epochs ran
    params: ModelParams | None = None


@dataclass(frozen=True)
class TrainItem:
    """One utterance's plans against its own label inventory.

    Dataset training shares a single inventory across items; paraphrase
    pretraining gives every anchor its own candidate inventory.
    """

    labels: Sequence
    plans: tuple


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: ModelParams, grads: ModelParams):
        for a, g in zip(params.arrays(), grads.arrays()):
            a -= self.lr * g


class _Adam:
    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: ModelParams, grads: ModelParams):
        arrays = params.arrays()
        if self.m is None:
            self.m = [np.zeros_like(a) for a in arrays]
            self.v = [np.zeros_like(a) for a in arrays]
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for a, g, m, v in zip(arrays, grads.arrays(), self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def _make_optimizer(cfg: TrainConfig):
    return _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(cfg.learning_rate)


def fit_items(
    items: Sequence[TrainItem],
    vocab: Vocabulary,
    params: ModelParams,
    cfg: TrainConfig,
    dev_scorer: Callable[[ModelParams], float] | None = None,
    log: Callable[[dict], None] | None = None,
) -> tuple[ModelParams, TrainReport]:
    """Core training loop shared by fine-tuning and both pretraining modes.

    Mutates `params` in place and returns a copy of the best epoch's state.
    Fully deterministic given cfg.seed.
    """
    if not items:
        raise DataError("nothing to train on")
    loss_cfg = cfg.loss_config()
    selection = "dev_accuracy" if dev_scorer is not None else "train_loss"
    opt = _make_optimizer(cfg)

    losses: list[float] = []
    metrics: list[float] = []
    best_epoch = -1
    best_key = None
    best_params = params.copy()

    for epoch in range(cfg.epochs):
        rng = np.random.default_rng([cfg.seed, epoch])
        pool: list[tuple[int, SequencePlan]] = []
        for idx, item in enumerate(items):
            for plan in item.plans:
                count = cfg.shuffles_per_sequence or plan.group.k
                child_seed = int(rng.integers(0, 2**32))
                pool.extend((idx, p) for p in augment_shuffles(plan, count, child_seed))
        order = rng.permutation(len(pool))

        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            picks = order[start : start + cfg.batch_size]
            seqs = [tokenize(pool[i][1], items[pool[i][0]].labels, vocab) for i in picks]
            loss, grads = loss_and_param_grads(params, seqs, loss_cfg)
            if not np.isfinite(loss):
                raise NumericError(
                    f"training diverged: non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            opt.step(params, grads)
            total += loss * len(picks)
        epoch_loss = total / len(pool)
        losses.append(epoch_loss)

        if dev_scorer is not None:
            metric = dev_scorer(params)
            key = metric
        else:
            metric = epoch_loss
            key = -epoch_loss
        metrics.append(metric)
        if best_key is None or key > best_key:
            best_key = key
            best_epoch = epoch
            best_params = params.copy()
        if log is not None:
            log({"epoch": epoch, "train_loss": epoch_loss, selection: metric})

    return best_params, TrainReport(losses, metrics, selection, best_epoch, best_params)


def train(
    train_data: Dataset,
    dev_data: Dataset | None,
    cfg: TrainConfig,
    init: tuple[ModelParams, Vocabulary] | None = None,
    log: Callable[[dict], None] | None = None,
) -> tuple[ModelParams, TrainReport, Vocabulary]:
    """Train on a dataset; returns (best params, report, vocabulary).

    A warm start (`init`) keeps the provided vocabulary untouched so token ids
    stay stable across pretraining and fine-tuning. Dev-based selection needs
    at least 10 dev examples; below that it falls back to training loss.
    """
    if not train_data.examples:
        raise DataError("training dataset is empty")
    k = cfg.k or choose_k(train_data.n_intents, cfg.k_min, cfg.k_max)

    if init is not None:
        init_p, vocab = init
        if init_p.vocab_size != len(vocab):
            raise DataError(
                f"init params cover {init_p.vocab_size} tokens, vocabulary has {len(vocab)}"
            )
        params = init_p.copy()
    else:
        vocab = build_vocab([train_data], cfg.min_count)
        params = init_params(
            len(vocab), cfg.d_emb, cfg.d_hidden, cfg.d_out, cfg.projector_depth,
            seed=cfg.seed, attention=cfg.attention,
        )

    groups = partition_intents(train_data.labels, k)
    items = [TrainItem(train_data.labels, tuple(build_plans(u, groups))) for u in train_data.examples]

    dev_scorer = None
    if cfg.selection == "dev_accuracy" and dev_data is not None and len(dev_data.examples) >= 10:
        from .evaluator import dataset_accuracy  # local import: evaluator imports trainer

        dev_scorer = lambda p: dataset_accuracy(p, vocab, dev_data, k)

    if cfg.epochs == 0:
        return params, TrainReport([], [], "train_loss", -1, params), vocab

    best, report = fit_items(items, vocab, params, cfg, dev_scorer, log)
    return best, report, vocab


# --- checkpoint serialization ------------------------------------------------
#
# Layout (little-endian): 8-byte magic, u32 version, u32 flags (bit 0 =
# attention), u32 projector depth, u32 vocab size, then depth+1 u32 layer
# dims, a length-prefixed UTF-8 JSON token list, each parameter array as
# row-major float64, and a trailing CRC32 of everything before it.

_MAGIC = b"FEWINTC\x01"
_VERSION = 1


def save_checkpoint(params: ModelParams, vocab: Vocabulary, path: str | Path) -> None:
    if params.vocab_size != len(vocab):
        raise CheckpointError(
            f"params cover {params.vocab_size} tokens, vocabulary has {len(vocab)}"
        )
    depth = len(params.proj_weights)
    dims = [params.d_emb] + [w.shape[1] for w in params.proj_weights]
    blob = json.dumps(list(vocab.tokens), ensure_ascii=False).encode("utf-8")

    out = bytearray()
    out += _MAGIC
    out += struct.pack("<III", _VERSION, 1 if params.has_attention else 0, depth)
    out += struct.pack("<I", params.vocab_size)
    out += struct.pack(f"<{len(dims)}I", *dims)
    out += struct.pack("<I", len(blob))
    out += blob
    for a in params.arrays():
        out += np.ascontiguousarray(a, dtype="<f8").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path: str | Path) -> tuple[ModelParams, Vocabulary]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(_MAGIC) + 20:
        raise CheckpointError(f"{path}: truncated checkpoint")
    if raw[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(raw[:-4]) != stored_crc:
        raise CheckpointError(f"{path}: checksum mismatch")

    off = len(_MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw) - 4:
            raise CheckpointError(f"{path}: truncated checkpoint")
        vals = struct.unpack_from(fmt, raw, off)
        off += size
        return vals

    version, flags, depth = take("<III")
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (vocab_size,) = take("<I")
    dims = list(take(f"<{depth + 1}I"))
    (blob_len,) = take("<I")
    if off + blob_len > len(raw) - 4:
        raise CheckpointError(f"{path}: truncated checkpoint")
    tokens = json.loads(raw[off : off + blob_len].decode("utf-8"))
    off += blob_len

    def read_array(shape):
        nonlocal off
        size = int(np.prod(shape)) * 8
        if off + size > len(raw) - 4:
            raise CheckpointError(f"{path}: truncated checkpoint")
        a = np.frombuffer(raw[off : off + size], dtype="<f8").reshape(shape).copy()
        off += size
        return a

    embedding = read_array((vocab_size, dims[0]))
    weights = []
    biases = []
    for i in range(depth):
        weights.append(read_array((dims[i], dims[i + 1])))
        biases.append(read_array((dims[i + 1],)))
    attn = (None, None, None)
    if flags & 1:
        attn = tuple(read_array((dims[0], dims[0])) for _ in range(3))
    if off != len(raw) - 4:
        raise CheckpointError(f"{path}: trailing bytes in checkpoint")

    params = ModelParams(embedding, weights, biases, *attn)
    vocab = Vocabulary(tuple(tokens))
    if len(vocab) != vocab_size:
        raise CheckpointError(f"{path}: vocabulary size disagrees with header")
    return params, vocab
