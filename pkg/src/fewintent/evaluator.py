"""Prediction over the full intent space, multi-seed accuracy reporting,
pipeline-filter diagnostics, group-size sweeps, and synthetic task generators
used by the experiment scripts and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .corpus import Dataset, IntentLabel, LabeledUtterance, sample_few_shot, split_dev
from .encoder import ModelParams, Vocabulary, encode, tokenize
from .errors import DataError
from .objective import cosine_sim
from .pretrain import ParaphrasePair, TfidfIndex
from .sequencer import PLACEHOLDER, choose_k, inference_plan, partition_intents
from .trainer import TrainConfig, train

# Filler words drawn into synthetic utterances; deliberately free of the
# label-surface tokens ("topic", bare letters, digits).
_FILLERS = (
    "please", "can", "you", "help", "me", "with", "the", "my", "need", "want",
    "to", "check", "set", "up", "for", "today", "now", "right", "away",
    "thanks", "would", "like", "know", "about",
)

_MIN_DEV_FOR_SELECTION = 10


@dataclass(frozen=True)
class Prediction:
    """Full ranking of the intent inventory for one utterance."""

    utterance_id: int
    ranking: tuple[tuple[int, float], ...]  # (intent_id, score), scores non-increasing

    @property
    def predicted(self) -> int:
        return self.ranking[0][0]

    def rank_of(self, intent_id: int) -> int:
        for r, (iid, _) in enumerate(self.ranking):
            if iid == intent_id:
                return r
        raise DataError(f"intent {intent_id} missing from ranking")


@dataclass
class EvalReport:
    accuracies: list[float]  # percent, one per run
    mean: float
    std: float  # population std over runs
    per_intent: dict[int, float]
    seeds: list[int]

    def to_record(self) -> dict:
        return {
            "accuracies": self.accuracies,
            "mean": self.mean,
            "std": self.std,
            "per_intent": {str(k): v for k, v in sorted(self.per_intent.items())},
            "seeds": self.seeds,
        }

    def to_text(self) -> str:
        lines = [f"{'seed':>8} {'accuracy':>9}"]
        for seed, acc in zip(self.seeds, self.accuracies):
            lines.append(f"{seed:>8} {acc:>8.2f}%")
        lines.append(f"{'mean':>8} {self.mean:>8.2f}%  (std {self.std:.2f})")
        return "\n".join(lines)


def predict(
    params: ModelParams,
    vocab: Vocabulary,
    text: str,
    labels: Sequence[IntentLabel],
    k: int,
    utterance_id: int = -1,
) -> Prediction:
    """Rank all intents by within-sequence cosine similarity to the utterance.

    The utterance is scored against each of the m canonical-order groups and
    candidates compete globally across sequences; ties break on the lower
    intent id. Placeholder slots never enter the ranking.
    """
    groups = partition_intents(labels, k)
    scored: list[tuple[int, float]] = []
    for group in groups:
        seq = tokenize(inference_plan(text, group), labels, vocab)
        emb = encode(params, seq)
        for pos, intent in enumerate(emb.slot_intents):
            if intent == PLACEHOLDER:
                continue
            scored.append((intent, cosine_sim(emb.h_u, emb.h_slots[pos])))
    scored.sort(key=lambda p: (-p[1], p[0]))
    return Prediction(utterance_id, tuple(scored))


def dataset_accuracy(params: ModelParams, vocab: Vocabulary, data: Dataset, k: int) -> float:
    """Top-1 accuracy in percent over a dataset."""
    preds = predict_dataset(params, vocab, data, k)
    correct = sum(1 for p, ex in zip(preds, data.examples) if p.predicted == ex.intent_id)
    return 100.0 * correct / len(data.examples)


def predict_dataset(params: ModelParams, vocab: Vocabulary, data: Dataset, k: int) -> list[Prediction]:
    return [
        predict(params, vocab, ex.text, data.labels, k, utterance_id=i)
        for i, ex in enumerate(data.examples)
    ]


def _per_intent_accuracy(all_preds, all_gold) -> dict[int, float]:
    hits: dict[int, int] = {}
    totals: dict[int, int] = {}
    for pred, gold in zip(all_preds, all_gold):
        totals[gold] = totals.get(gold, 0) + 1
        if pred.predicted == gold:
            hits[gold] = hits.get(gold, 0) + 1
    return {iid: 100.0 * hits.get(iid, 0) / n for iid, n in totals.items()}


def evaluate_runs(
    train_pool: Dataset,
    test_data: Dataset,
    cfg: TrainConfig,
    seeds: Sequence[int],
    shots: int,
    dev_fraction: float = 0.1,
    init: tuple[ModelParams, Vocabulary] | None = None,
    zero_shot: bool = False,
    return_predictions: bool = False,
):
    """Run the sample-train-test protocol once per seed and aggregate accuracy.

    Each run draws its own few-shot sample. When the 10% dev cut would hold
    fewer than 10 examples the run trains on the full sample and selects by
    training loss instead. Zero-shot mode skips training and scores the
    provided parameters directly.
    """
    if not seeds:
        raise DataError("need at least one seed")
    if zero_shot and init is None:
        raise DataError("zero-shot evaluation needs pretrained parameters")

    k = cfg.k or choose_k(test_data.n_intents, cfg.k_min, cfg.k_max)
    accuracies = []
    run_preds: list[list[Prediction]] = []
    all_gold: list[int] = []
    for seed in seeds:
        if zero_shot:
            params, vocab = init
        else:
            sample = sample_few_shot(train_pool, shots, seed)
            n_dev = int(dev_fraction * len(sample.examples) + 1e-9)
            if n_dev >= _MIN_DEV_FOR_SELECTION:
                tr, dev = split_dev(sample, dev_fraction, seed)
            else:
                tr, dev = sample, None
            run_cfg = replace(cfg, k=k, seed=seed)
            params, _, vocab = train(tr, dev, run_cfg, init=init)
        preds = predict_dataset(params, vocab, test_data, k)
        gold = [ex.intent_id for ex in test_data.examples]
        correct = sum(1 for p, g in zip(preds, gold) if p.predicted == g)
        accuracies.append(100.0 * correct / len(gold))
        run_preds.append(preds)
        all_gold.extend(gold)

    report = EvalReport(
        accuracies=accuracies,
        mean=float(np.mean(accuracies)),
        std=float(np.std(accuracies)),
        per_intent=_per_intent_accuracy([p for preds in run_preds for p in preds], all_gold),
        seeds=list(seeds),
    )
    if return_predictions:
        return report, run_preds
    return report


def topk_miss(
    predictions: Sequence[Prediction],
    gold: Sequence[int],
    k_top: int,
    filter_rankings: Sequence[Sequence[int]],
) -> tuple[int, int]:
    """Count utterances whose gold falls outside a filter's top-k, and how many
    of those this model's top-1 prediction still gets right."""
    if k_top < 1:
        raise DataError(f"k_top must be >= 1, got {k_top}")
    if not (len(predictions) == len(gold) == len(filter_rankings)):
        raise DataError("predictions, gold, and filter rankings must align")
    misses = 0
    recovered = 0
    for pred, g, ranking in zip(predictions, gold, filter_rankings):
        if g in list(ranking)[:k_top]:
            continue
        misses += 1
        if pred.predicted == g:
            recovered += 1
    return misses, recovered


def label_filter_rankings(texts: Sequence[str], labels: Sequence[IntentLabel]) -> list[list[int]]:
    """Term-frequency filter baseline: rank intents by tf-idf cosine of their
    surfaces against each utterance."""
    index = TfidfIndex([lab.surface for lab in labels])
    return [[i for i, _ in index.rank(text, exclude_query=False)] for text in texts]


@dataclass(frozen=True)
class SweepRow:
    k: int
    m: int
    padding: int
    dev_accuracy: float


def sweep_k(
    train_data: Dataset,
    dev_data: Dataset,
    cfg: TrainConfig,
    k_values: Sequence[int],
) -> list[SweepRow]:
    """Train once per group size (shared seed) and score the dev split."""
    if any(k < 1 for k in k_values):
        raise DataError("all k values must be >= 1")
    n = train_data.n_intents
    rows = []
    for k in k_values:
        run_cfg = replace(cfg, k=k)
        params, _, vocab = train(train_data, dev_data, run_cfg)
        m = math.ceil(n / k)
        rows.append(SweepRow(k, m, m * k - n, dataset_accuracy(params, vocab, dev_data, k)))
    return rows


def sweep_table(rows: Sequence[SweepRow]) -> str:
    lines = [f"{'k':>5} {'m':>5} {'padding':>8} {'dev_acc':>8}"]
    for r in rows:
        lines.append(f"{r.k:>5} {r.m:>5} {r.padding:>8} {r.dev_accuracy:>7.2f}%")
    return "\n".join(lines)


# --- synthetic tasks ----------------------------------------------------------


def generate_synthetic(
    n_intents: int,
    shots: int,
    noise_tokens: int,
    seed: int,
    test_per_intent: int = 20,
) -> tuple[Dataset, Dataset]:
    """Separable toy task: intent i has surface "topic i-a i-b" and utterances
    repeat the surface tokens plus random filler words."""
    if n_intents < 2:
        raise DataError(f"need at least 2 intents, got {n_intents}")
    if shots < 1 or noise_tokens < 0:
        raise DataError("bad shots/noise_tokens")
    rng = np.random.default_rng(seed)
    labels = tuple(
        IntentLabel(i, f"topic {i}-a {i}-b", f"topic {i}-a {i}-b") for i in range(n_intents)
    )

    def utterance(i: int) -> LabeledUtterance:
        words = ["topic", f"{i}-a", f"{i}-b"]
        words += [_FILLERS[int(j)] for j in rng.integers(0, len(_FILLERS), size=noise_tokens)]
        order = rng.permutation(len(words))
        return LabeledUtterance(" ".join(words[j] for j in order), i, domain="synthetic")

    train_ex = tuple(utterance(i) for i in range(n_intents) for _ in range(shots))
    test_ex = tuple(utterance(i) for i in range(n_intents) for _ in range(test_per_intent))
    return (
        Dataset(labels, train_ex, name=f"synth{n_intents}-train"),
        Dataset(labels, test_ex, name=f"synth{n_intents}-test"),
    )


def generate_paraphrase_corpus(
    n_pairs: int,
    n_concepts: int,
    seed: int,
    concepts_per_sentence: int = 3,
) -> list[ParaphrasePair]:
    """Synthetic paraphrase pairs over a two-form synonym lexicon.

    Concept c surfaces as "alpha{c}" on one side and "beta{c}" on the other, so
    a pair's two sides share meaning but zero tokens. An initial deterministic
    block covers every concept; the rest are random distinct concept tuples.
    """
    if n_concepts < concepts_per_sentence:
        raise DataError("need at least concepts_per_sentence concepts")
    rng = np.random.default_rng(seed)
    tuples: list[tuple[int, ...]] = []
    seen = set()
    cursor = 0
    while len(tuples) < n_pairs and cursor < n_concepts:
        chunk = tuple((cursor + j) % n_concepts for j in range(concepts_per_sentence))
        cursor += concepts_per_sentence
        if chunk not in seen:
            seen.add(chunk)
            tuples.append(chunk)
    while len(tuples) < n_pairs:
        chunk = tuple(sorted(int(c) for c in rng.choice(n_concepts, size=concepts_per_sentence, replace=False)))
        if chunk in seen:
            continue
        seen.add(chunk)
        tuples.append(chunk)
    return [
        ParaphrasePair(
            " ".join(f"alpha{c}" for c in chunk),
            " ".join(f"beta{c}" for c in chunk),
        )
        for chunk in tuples
    ]


def generate_transfer_task(
    n_intents: int,
    seed: int,
    noise_tokens: int = 2,
    test_per_intent: int = 20,
) -> Dataset:
    """Zero-shot probe paired with `generate_paraphrase_corpus`.

    Intent i's surface uses the beta forms of concepts (2i, 2i+1) while its
    utterances use the alpha forms, so labels and utterances share no tokens:
    only a model that has aligned the two forms can beat chance.
    """
    if n_intents < 2:
        raise DataError(f"need at least 2 intents, got {n_intents}")
    rng = np.random.default_rng(seed)
    labels = tuple(
        IntentLabel(i, f"beta{2 * i} beta{2 * i + 1}", f"beta{2 * i} beta{2 * i + 1}")
        for i in range(n_intents)
    )
    examples = []
    for i in range(n_intents):
        for _ in range(test_per_intent):
            words = [f"alpha{2 * i}", f"alpha{2 * i + 1}"]
            words += [_FILLERS[int(j)] for j in rng.integers(0, len(_FILLERS), size=noise_tokens)]
            order = rng.permutation(len(words))
            examples.append(
                LabeledUtterance(" ".join(words[j] for j in order), i, domain="transfer")
            )
    return Dataset(labels, tuple(examples), name=f"transfer{n_intents}")
