"""Token-level encoder for utterance + candidate-slate sequences.

The backbone is deliberately small and fully differentiable by hand: an
embedding lookup, optional single self-attention layer, span mean pooling, and
a shared MLP projector applied to the utterance span and every label slot.
All gradients are analytic and checked against central finite differences.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import Dataset, IntentLabel
from .errors import DataError, NumericError
from .objective import LossConfig, batch_loss
from .sequencer import PLACEHOLDER, SequencePlan

PAD_ID, UNK_ID, SEP_ID, PLH_ID = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<sep>", "<plh>")

_WORD = re.compile(r"[^\W_]+")


def word_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric word tokens; punctuation and underscores split."""
    return _WORD.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    """Word-to-id map with four reserved ids at fixed positions 0-3."""

    tokens: tuple[str, ...]
    _ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = {tok: i + len(RESERVED_TOKENS) for i, tok in enumerate(self.tokens)}
        if len(ids) != len(self.tokens):
            raise DataError("duplicate tokens in vocabulary")
        object.__setattr__(self, "_ids", ids)

    def __len__(self) -> int:
        return len(RESERVED_TOKENS) + len(self.tokens)

    def id_of(self, word: str) -> int:
        return self._ids.get(word, UNK_ID)

    def __contains__(self, word: str) -> bool:
        return word in self._ids


def build_vocab(corpora: Sequence[Dataset | Iterable[str]], min_count: int = 1) -> Vocabulary:
    """Count word tokens over datasets and/or plain sentence iterables.

    Tokens appearing at least `min_count` times are kept; tokens of any label
    surface are always kept regardless of count.
    """
    counts: Counter[str] = Counter()
    order: dict[str, None] = {}
    always: set[str] = set()

    def _feed(text: str):
        for tok in word_tokens(text):
            counts[tok] += 1
            order.setdefault(tok)

    for item in corpora:
        if isinstance(item, Dataset):
            for lab in item.labels:
                for tok in word_tokens(lab.surface):
                    always.add(tok)
                    order.setdefault(tok)
            for ex in item.examples:
                _feed(ex.text)
        else:
            for sentence in item:
                _feed(sentence)

    kept = tuple(t for t in order if counts[t] >= min_count or t in always)
    if not kept:
        raise DataError("vocabulary is empty")
    return Vocabulary(kept)


@dataclass(frozen=True)
class TokenizedSequence:
    """Token ids plus span bookkeeping for one plan.

    Layout: utterance tokens, then per display slot one SEP followed by the
    slot's label-surface tokens (a single PLH token for placeholder slots).
    Spans are half-open [start, end) and exclude the SEP markers.
    """

    token_ids: tuple[int, ...]
    utterance_span: tuple[int, int]
    slot_spans: tuple[tuple[int, int], ...]
    slot_intents: tuple[int, ...]
    gold_slot: int | None
    plan: SequencePlan


def tokenize(plan: SequencePlan, labels: Sequence[IntentLabel], vocab: Vocabulary) -> TokenizedSequence:
    """Lay out one plan as token ids with utterance/slot spans recorded."""
    ids = [vocab.id_of(w) for w in word_tokens(plan.utterance.text)]
    if not ids:
        raise DataError(f"utterance {plan.utterance.text!r} has no tokens")
    utterance_span = (0, len(ids))
    spans = []
    intents = []
    for pos in range(plan.group.k):
        intent = plan.intent_at(pos)
        ids.append(SEP_ID)
        start = len(ids)
        if intent == PLACEHOLDER:
            ids.append(PLH_ID)
        else:
            lab = labels[intent]
            if lab.id != intent:
                raise DataError(f"label list out of order at id {intent}")
            ids.extend(vocab.id_of(w) for w in word_tokens(lab.surface))
        if len(ids) == start:
            raise DataError(f"label {labels[intent].surface!r} has no tokens")
        spans.append((start, len(ids)))
        intents.append(intent)
    return TokenizedSequence(
        tuple(ids), utterance_span, tuple(spans), tuple(intents), plan.gold_slot, plan
    )


@dataclass
class ModelParams:
    """Trainable state: embedding table, shared projector, optional attention."""

    embedding: np.ndarray  # (vocab, d_emb)
    proj_weights: list[np.ndarray]  # layer i: (d_in_i, d_out_i)
    proj_biases: list[np.ndarray]
    attn_q: np.ndarray | None = None  # (d_emb, d_emb), all three set or none
    attn_k: np.ndarray | None = None
    attn_v: np.ndarray | None = None

    def __post_init__(self):
        if not self.proj_weights or len(self.proj_weights) != len(self.proj_biases):
            raise DataError("projector needs matching weight/bias lists")
        d = self.embedding.shape[1]
        for w, b in zip(self.proj_weights, self.proj_biases):
            if w.shape[0] != d or w.shape[1] != b.shape[0]:
                raise DataError(f"projector layer shape mismatch: {w.shape} after dim {d}")
            d = w.shape[1]
        if d < 2:
            raise DataError(f"output dimension must be >= 2, got {d}")
        attn = (self.attn_q, self.attn_k, self.attn_v)
        if any(a is not None for a in attn) and not all(a is not None for a in attn):
            raise DataError("attention needs all of q/k/v weights")

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def d_emb(self) -> int:
        return self.embedding.shape[1]

    @property
    def d_out(self) -> int:
        return self.proj_weights[-1].shape[1]

    @property
    def has_attention(self) -> bool:
        return self.attn_q is not None

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (shared with gradients)."""
        out = [self.embedding]
        for w, b in zip(self.proj_weights, self.proj_biases):
            out.extend((w, b))
        if self.has_attention:
            out.extend((self.attn_q, self.attn_k, self.attn_v))
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.embedding.copy(),
            [w.copy() for w in self.proj_weights],
            [b.copy() for b in self.proj_biases],
            None if self.attn_q is None else self.attn_q.copy(),
            None if self.attn_k is None else self.attn_k.copy(),
            None if self.attn_v is None else self.attn_v.copy(),
        )

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            np.zeros_like(self.embedding),
            [np.zeros_like(w) for w in self.proj_weights],
            [np.zeros_like(b) for b in self.proj_biases],
            None if self.attn_q is None else np.zeros_like(self.attn_q),
            None if self.attn_k is None else np.zeros_like(self.attn_k),
            None if self.attn_v is None else np.zeros_like(self.attn_v),
        )


def init_params(
    vocab_size: int,
    d_emb: int = 64,
    d_hidden: int = 64,
    d_out: int = 64,
    depth: int = 2,
    seed: int = 0,
    attention: bool = False,
) -> ModelParams:
    """Seeded uniform [-0.1, 0.1] initialization."""
    if depth < 1:
        raise DataError(f"projector depth must be >= 1, got {depth}")
    rng = np.random.default_rng(seed)

    def u(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    dims = [d_emb] + [d_hidden] * (depth - 1) + [d_out]
    weights = [u(dims[i], dims[i + 1]) for i in range(depth)]
    biases = [u(dims[i + 1]) for i in range(depth)]
    attn = (u(d_emb, d_emb), u(d_emb, d_emb), u(d_emb, d_emb)) if attention else (None, None, None)
    return ModelParams(u(vocab_size, d_emb), weights, biases, *attn)


@dataclass
class SequenceEmbeddings:
    """Pooled representations before (z) and after (h) the shared projector."""

    z_u: np.ndarray  # (d_emb,)
    z_slots: np.ndarray  # (k, d_emb)
    h_u: np.ndarray  # (d_out,)
    h_slots: np.ndarray  # (k, d_out)
    slot_intents: tuple[int, ...]
    gold_slot: int | None


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward(params: ModelParams, seq: TokenizedSequence):
    """Forward pass returning embeddings plus the cache needed for backprop."""
    ids = np.asarray(seq.token_ids, dtype=np.intp)
    x_raw = params.embedding[ids]
    attn_cache = None
    if params.has_attention:
        scale = 1.0 / np.sqrt(params.d_emb)
        q = x_raw @ params.attn_q
        k = x_raw @ params.attn_k
        v = x_raw @ params.attn_v
        att = _softmax_rows((q @ k.T) * scale)
        x = x_raw + att @ v
        attn_cache = (x_raw, q, k, v, att, scale)
    else:
        x = x_raw

    spans = [seq.utterance_span, *seq.slot_spans]
    z = np.stack([x[s:e].mean(axis=0) for s, e in spans])

    acts = [z]
    h = z
    last = len(params.proj_weights) - 1
    for i, (w, b) in enumerate(zip(params.proj_weights, params.proj_biases)):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
            acts.append(h)

    if not np.isfinite(h).all():
        raise NumericError("non-finite values in encoder output (check parameters)")

    emb = SequenceEmbeddings(z[0], z[1:], h[0], h[1:], seq.slot_intents, seq.gold_slot)
    return emb, (ids, spans, acts, attn_cache)


def encode(params: ModelParams, seq: TokenizedSequence) -> SequenceEmbeddings:
    """Span mean pooling over token embeddings, then the shared projector."""
    emb, _ = _forward(params, seq)
    return emb


def _backward(params, cache, dh_u, dh_slots, grads: ModelParams):
    """Accumulate parameter gradients for one sequence given dL/dh rows."""
    ids, spans, acts, attn_cache = cache
    g = np.vstack([dh_u[None, :], dh_slots])

    last = len(params.proj_weights) - 1
    for i in range(last, -1, -1):
        x_in = acts[i]
        grads.proj_weights[i] += x_in.T @ g
        grads.proj_biases[i] += g.sum(axis=0)
        g = g @ params.proj_weights[i].T
        if i > 0:
            g = g * (1.0 - x_in * x_in)  # tanh'

    dx = np.zeros((len(ids), params.d_emb))
    for row, (s, e) in enumerate(spans):
        dx[s:e] += g[row] / (e - s)

    if attn_cache is not None:
        x_raw, q, k, v, att, scale = attn_cache
        dc = dx
        dx_raw = dx.copy()  # residual path
        da = dc @ v.T
        dv = att.T @ dc
        ds = att * (da - (da * att).sum(axis=1, keepdims=True))
        dq = ds @ k * scale
        dk = ds.T @ q * scale
        grads.attn_q += x_raw.T @ dq
        grads.attn_k += x_raw.T @ dk
        grads.attn_v += x_raw.T @ dv
        dx_raw += dq @ params.attn_q.T + dk @ params.attn_k.T + dv @ params.attn_v.T
        dx = dx_raw

    np.add.at(grads.embedding, ids, dx)


def loss_and_param_grads(
    params: ModelParams, batch: Sequence[TokenizedSequence], cfg: LossConfig
) -> tuple[float, ModelParams]:
    """Batch-mean contrastive loss and its exact gradient w.r.t. all parameters."""
    embs = []
    caches = []
    for seq in batch:
        emb, cache = _forward(params, seq)
        embs.append(emb)
        caches.append(cache)
    loss, h_grads = batch_loss(embs, cfg)
    grads = params.zeros_like()
    for cache, (dh_u, dh_slots) in zip(caches, h_grads):
        _backward(params, cache, dh_u, dh_slots, grads)
    return loss, grads


def batch_loss_value(params: ModelParams, batch: Sequence[TokenizedSequence], cfg: LossConfig) -> float:
    loss, _ = batch_loss([encode(params, seq) for seq in batch], cfg)
    return loss


def grad_check(
    params: ModelParams,
    batch: Sequence[TokenizedSequence],
    tau: float = 0.1,
    eps: float = 1e-4,
    n_coords: int = 200,
    seed: int = 0,
    include_placeholders: bool = False,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples at least `n_coords` parameter coordinates (all of them when the
    model is smaller than that); the relative error denominator is
    max(|analytic|, |numeric|, 1e-8).
    """
    if eps <= 0:
        raise DataError(f"eps must be positive, got {eps}")
    cfg = LossConfig(tau=tau, include_placeholders=include_placeholders)
    loss0, grads = loss_and_param_grads(params, batch, cfg)
    if not np.isfinite(loss0):
        raise NumericError("loss is non-finite at the evaluation point")

    arrays = params.arrays()
    grad_arrays = grads.arrays()
    sizes = [a.size for a in arrays]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    if total <= n_coords:
        coords = np.arange(total)
    else:
        coords = rng.choice(total, size=n_coords, replace=False)

    offsets = np.cumsum([0] + sizes)
    max_rel = 0.0
    probe = params.copy()
    probe_arrays = probe.arrays()
    for flat in sorted(int(c) for c in coords):
        ai = int(np.searchsorted(offsets, flat, side="right") - 1)
        local = flat - offsets[ai]
        idx = np.unravel_index(local, probe_arrays[ai].shape)
        orig = probe_arrays[ai][idx]
        probe_arrays[ai][idx] = orig + eps
        loss_plus = batch_loss_value(probe, batch, cfg)
        probe_arrays[ai][idx] = orig - eps
        loss_minus = batch_loss_value(probe, batch, cfg)
        probe_arrays[ai][idx] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * eps)
        analytic = grad_arrays[ai][idx]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel
