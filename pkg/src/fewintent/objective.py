"""Contrastive objective over utterance/slot representations.

For a sequence whose candidate set C is the non-placeholder slots (plus
placeholders when configured), the loss is the temperature-scaled softmax
cross-entropy of cosine similarities against the gold slot. Sequences without
a gold slot use a numerator of 1, i.e. plain log-sum-exp: the utterance is
only pushed away from the candidates it does not match.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, NumericError
from .sequencer import PLACEHOLDER


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.1
    include_placeholders: bool = False
    # Batching hint for the trainer; losses always average over the actual batch.
    batch_size: int = 8

    def __post_init__(self):
        if self.tau <= 0:
            raise DataError(f"temperature must be positive, got {self.tau}")


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, clamped into [-1, 1] against rounding."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise NumericError("cosine similarity of a zero-norm vector")
    return float(np.clip(float(np.dot(u, v)) / (nu * nv), -1.0, 1.0))


def _candidate_positions(slot_intents: Sequence[int], cfg: LossConfig) -> list[int]:
    if cfg.include_placeholders:
        return list(range(len(slot_intents)))
    return [p for p, intent in enumerate(slot_intents) if intent != PLACEHOLDER]


def _loss_and_h_grads(emb, cfg: LossConfig):
    """Loss plus dL/dh_u and dL/dh_slots for one sequence.

    Returns zero loss and zero gradients when the candidate set is empty
    (an all-placeholder sequence contributes no terms).
    """
    cand = _candidate_positions(emb.slot_intents, cfg)
    k, d_out = emb.h_slots.shape
    dh_u = np.zeros(d_out)
    dh_slots = np.zeros((k, d_out))
    if not cand:
        return 0.0, dh_u, dh_slots

    hu = emb.h_u
    nu = float(np.linalg.norm(hu))
    if nu == 0.0:
        raise NumericError("zero-norm utterance representation")
    hs = emb.h_slots[cand]
    ns = np.linalg.norm(hs, axis=1)
    if np.any(ns == 0.0):
        raise NumericError("zero-norm slot representation")
    sims = np.clip(hs @ hu / (ns * nu), -1.0, 1.0)

    logits = sims / cfg.tau
    mx = logits.max()
    lse = mx + np.log(np.exp(logits - mx).sum())
    probs = np.exp(logits - lse)

    gold_pos = None
    if emb.gold_slot is not None:
        if emb.gold_slot not in cand:
            raise DataError("gold slot missing from the candidate set")
        gold_pos = cand.index(emb.gold_slot)
        loss = float(lse - logits[gold_pos])
    else:
        loss = float(lse)

    coeff = probs / cfg.tau
    if gold_pos is not None:
        coeff[gold_pos] -= 1.0 / cfg.tau

    # d sim_j / d h_u = h_j/(|h_u||h_j|) - sim_j * h_u/|h_u|^2, and symmetrically.
    dh_u = (coeff / ns) @ hs / nu - (coeff @ sims) * hu / (nu * nu)
    d_slots_cand = (
        coeff[:, None] * (hu[None, :] / (ns[:, None] * nu) - sims[:, None] * hs / (ns * ns)[:, None])
    )
    for row, pos in enumerate(cand):
        dh_slots[pos] = d_slots_cand[row]
    return loss, dh_u, dh_slots


def sequence_loss(emb, cfg: LossConfig) -> float:
    """Contrastive loss for one sequence; errors on an empty candidate set."""
    if not _candidate_positions(emb.slot_intents, cfg):
        raise DataError("empty candidate set: all slots are placeholders")
    loss, _, _ = _loss_and_h_grads(emb, cfg)
    return loss


def batch_loss(batch: Sequence, cfg: LossConfig) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean sequence loss over a batch and its gradients w.r.t. every h vector.

    Returns (loss, [(dh_u, dh_slots), ...]) aligned with the batch; gradients
    already include the 1/batch-size factor.
    """
    if not batch:
        raise DataError("empty batch")
    scale = 1.0 / len(batch)
    total = 0.0
    grads = []
    for emb in batch:
        loss, dh_u, dh_slots = _loss_and_h_grads(emb, cfg)
        total += loss
        grads.append((dh_u * scale, dh_slots * scale))
    return total * scale, grads
