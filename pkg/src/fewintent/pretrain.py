"""Pretraining-set construction.

Paraphrase pairs become candidate-ranking tasks: each anchor's gold "label" is
its paraphrase and the other t = n - 1 candidates are the most term-similar
sentences mined from the corpus. Out-of-domain pretraining reuses the regular
dataset pipeline over a pooled intent union.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Dataset, IntentLabel, LabeledUtterance
from .encoder import word_tokens
from .errors import DataError
from .sequencer import PLACEHOLDER, SequencePlan, build_plans, partition_intents
from .trainer import TrainItem

_SURFACE_JUNK = re.compile(r"[_\s]+")


@dataclass(frozen=True)
class ParaphrasePair:
    anchor: str
    paraphrase: str

    def __post_init__(self):
        if not self.anchor.strip() or not self.paraphrase.strip():
            raise DataError("paraphrase pair with an empty side")
        if self.anchor == self.paraphrase:
            raise DataError(f"degenerate paraphrase pair: {self.anchor!r}")


@dataclass(frozen=True)
class PretrainInstance:
    """Anchor sentence with one gold paraphrase and t mined negatives."""

    anchor: str
    gold: str
    negatives: tuple[str, ...]

    @property
    def t(self) -> int:
        return len(self.negatives)

    def __post_init__(self):
        seen = {self.anchor, self.gold, *self.negatives}
        if len(seen) != 2 + len(self.negatives):
            raise DataError("pretrain instance candidates are not distinct")


@dataclass(frozen=True)
class ParaphraseTask:
    """One instance rendered as a per-anchor label inventory plus its plans."""

    instance: PretrainInstance
    labels: tuple[IntentLabel, ...]
    plans: tuple[SequencePlan, ...]


def filter_pairs(
    pairs: Sequence[ParaphrasePair], max_words: int = 10, max_chars: int = 40
) -> list[ParaphrasePair]:
    """Keep pairs whose both sides fit the word and character caps (inclusive)."""
    if max_words < 1 or max_chars < 1:
        raise DataError("length caps must be positive")

    def ok(s: str) -> bool:
        return len(s.split()) <= max_words and len(s) <= max_chars

    return [p for p in pairs if ok(p.anchor) and ok(p.paraphrase)]


class TfidfIndex:
    """Deterministic tf-idf cosine ranker over a sentence corpus.

    Smoothed idf (ln((1+N)/(1+df)) + 1) keeps ubiquitous terms from vanishing;
    ties break by corpus order. Sparse dict vectors plus an inverted index keep
    queries linear in the number of matching postings.
    """

    def __init__(self, sentences: Sequence[str]):
        if len(sentences) < 2:
            raise DataError("similarity index needs at least 2 sentences")
        self.sentences = list(sentences)
        n_docs = len(self.sentences)
        doc_terms = [word_tokens(s) for s in self.sentences]
        df: dict[str, int] = {}
        for terms in doc_terms:
            for term in set(terms):
                df[term] = df.get(term, 0) + 1
        self._idf = {t: math.log((1 + n_docs) / (1 + c)) + 1.0 for t, c in df.items()}
        self._vectors: list[dict[str, float]] = []
        self._postings: dict[str, list[int]] = {}
        for i, terms in enumerate(doc_terms):
            vec: dict[str, float] = {}
            for term in terms:
                vec[term] = vec.get(term, 0.0) + self._idf[term]
            norm = math.sqrt(sum(w * w for w in vec.values()))
            if norm > 0:
                vec = {t: w / norm for t, w in vec.items()}
            self._vectors.append(vec)
            for term in vec:
                self._postings.setdefault(term, []).append(i)

    def _query_vector(self, query: str) -> dict[str, float]:
        vec: dict[str, float] = {}
        for term in word_tokens(query):
            if term in self._idf:
                vec[term] = vec.get(term, 0.0) + self._idf[term]
        norm = math.sqrt(sum(w * w for w in vec.values()))
        return {t: w / norm for t, w in vec.items()} if norm > 0 else {}

    def rank(self, query: str, exclude_query: bool = True) -> list[tuple[int, float]]:
        """All corpus indices ranked by cosine similarity to the query."""
        qvec = self._query_vector(query)
        scores = [0.0] * len(self.sentences)
        for term, w in qvec.items():
            for i in self._postings.get(term, ()):
                scores[i] += w * self._vectors[i].get(term, 0.0)
        order = sorted(range(len(self.sentences)), key=lambda i: (-scores[i], i))
        if exclude_query:
            order = [i for i in order if self.sentences[i] != query]
        return [(i, scores[i]) for i in order]

    def top_t(self, query: str, t: int) -> list[str]:
        """The t most similar sentences, excluding the query itself."""
        ranked = self.rank(query, exclude_query=True)
        if t > len(ranked):
            raise DataError(f"asked for {t} neighbors, only {len(ranked)} candidates")
        return [self.sentences[i] for i, _ in ranked[:t]]


def build_similarity_index(sentences: Sequence[str]) -> TfidfIndex:
    return TfidfIndex(sentences)


def _sentence_surface(sentence: str) -> str:
    surface = _SURFACE_JUNK.sub(" ", sentence.lower()).strip()
    if not surface:
        raise DataError(f"sentence {sentence!r} has no usable surface")
    return surface


def build_paraphrase_instances(
    pairs: Sequence[ParaphrasePair],
    n_target: int,
    k: int,
    seed: int = 0,
    index_factory: Callable[[Sequence[str]], TfidfIndex] = build_similarity_index,
) -> list[ParaphraseTask]:
    """Mine negatives and build per-anchor candidate slates.

    Each pair yields two anchors (both directions). An anchor's candidate
    inventory holds its gold paraphrase plus the t = n_target - 1 most similar
    other sentences, with the gold position randomized by `seed`, then grouped
    exactly like a fine-tuning task with group size k.
    """
    if n_target < 2:
        raise DataError(f"need at least 2 candidates, got {n_target}")
    if not pairs:
        raise DataError("no paraphrase pairs")
    t = n_target - 1

    pool: dict[str, None] = {}
    for p in pairs:
        pool.setdefault(p.anchor)
        pool.setdefault(p.paraphrase)
    sentences = list(pool)
    if len(sentences) < n_target:
        raise DataError(
            f"corpus of {len(sentences)} sentences cannot supply {t} negatives per anchor"
        )
    index = index_factory(sentences)

    rng = np.random.default_rng(seed)
    tasks = []
    for pair in pairs:
        for anchor, gold in ((pair.anchor, pair.paraphrase), (pair.paraphrase, pair.anchor)):
            negatives = []
            for i, _ in index.rank(anchor, exclude_query=True):
                s = index.sentences[i]
                if s == gold:
                    continue
                negatives.append(s)
                if len(negatives) == t:
                    break
            if len(negatives) < t:
                raise DataError(f"could not mine {t} negatives for {anchor!r}")
            instance = PretrainInstance(anchor, gold, tuple(negatives))

            gold_pos = int(rng.integers(0, n_target))
            candidates = list(negatives)
            candidates.insert(gold_pos, gold)
            labels = tuple(
                IntentLabel(i, s, _sentence_surface(s)) for i, s in enumerate(candidates)
            )
            groups = partition_intents(labels, k)
            utt = LabeledUtterance(anchor, gold_pos)
            plans = tuple(build_plans(utt, groups))
            tasks.append(ParaphraseTask(instance, labels, plans))
    return tasks


def build_ood_pretrain(ood: Dataset, k: int) -> list[TrainItem]:
    """Plans over the pooled intent union, identical to the fine-tuning pipeline."""
    if not ood.examples:
        raise DataError("out-of-domain dataset is empty")
    groups = partition_intents(ood.labels, k)
    return [TrainItem(ood.labels, tuple(build_plans(u, groups))) for u in ood.examples]


def pairs_from_tsv(path: str | Path) -> list[ParaphrasePair]:
    """Read `anchor<TAB>paraphrase` lines; reports the line number on errors."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"paraphrase file not found: {path}")
    pairs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 tab-separated columns")
            try:
                pairs.append(ParaphrasePair(parts[0].strip(), parts[1].strip()))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not pairs:
        raise DataError(f"{path}: no pairs")
    return pairs


def plan_record(plan: SequencePlan, labels: Sequence[IntentLabel]) -> dict:
    """JSON-serializable audit record for one plan."""
    slots = []
    for pos in range(plan.group.k):
        intent = plan.intent_at(pos)
        slots.append(None if intent == PLACEHOLDER else labels[intent].surface)
    return {
        "text": plan.utterance.text,
        "group": plan.group.index,
        "slots": slots,
        "gold_slot": plan.gold_slot,
    }


def write_plans_jsonl(items: Sequence[TrainItem], path: str | Path) -> int:
    """Dump every plan as one JSON line; returns the number of records."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for item in items:
            for plan in item.plans:
                fh.write(json.dumps(plan_record(plan, item.labels), sort_keys=True) + "\n")
                count += 1
    return count
